use serde::{Deserialize, Serialize};

use super::{AnalysisError, CrossLevelRecord, DefaultReport};
use crate::hierarchy::Level;
use crate::similarity::Measure;

/// Fixed-width frequency table. Bin `k` covers `[origin + k·w, origin + (k+1)·w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub origin: f64,
    /// Index of the first stored bin; bins are dense from here on.
    pub first_bin: i64,
    pub counts: Vec<u64>,
    pub n_observations: u64,
}

/// Default bin widths: 500 for MSE, 0.01 for SSIM.
pub fn default_bin_width(measure: Measure) -> f64 {
    match measure {
        Measure::Mse => 500.0,
        Measure::Ssim => 0.01,
    }
}

/// Left edge of the first bin: 0 for MSE, −1 for SSIM.
pub fn default_origin(measure: Measure) -> f64 {
    match measure {
        Measure::Mse => 0.0,
        Measure::Ssim => -1.0,
    }
}

impl Histogram {
    // A value within rounding distance of an edge belongs to the bin starting there.
    fn bin_index(v: f64, origin: f64, width: f64) -> i64 {
        let k = (v - origin) / width;
        let r = k.round();
        if (k - r).abs() <= 1e-9 * r.abs().max(1.0) {
            r as i64
        } else {
            k.floor() as i64
        }
    }

    pub fn from_values(values: &[f64], origin: f64, bin_width: f64) -> Result<Self, AnalysisError> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(AnalysisError::InvalidBinWidth(bin_width));
        }
        if values.is_empty() {
            return Err(AnalysisError::EmptyInput);
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(AnalysisError::InvalidValue(*v));
        }
        let idx: Vec<i64> = values
            .iter()
            .map(|&v| Self::bin_index(v, origin, bin_width))
            .collect();
        let lo = *idx.iter().min().expect("non-empty");
        let hi = *idx.iter().max().expect("non-empty");
        let mut counts = vec![0; (hi - lo + 1) as usize];
        for i in idx {
            counts[(i - lo) as usize] += 1;
        }
        Ok(Self {
            bin_width,
            origin,
            first_bin: lo,
            counts,
            n_observations: values.len() as u64,
        })
    }

    pub fn left_edge(&self, bin: i64) -> f64 {
        self.origin + bin as f64 * self.bin_width
    }

    /// `(left_edge, count)` for every stored bin, empty ones included.
    pub fn bins(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (self.left_edge(self.first_bin + i as i64), c))
    }

    /// Count of the bin containing `v`.
    pub fn count_at(&self, v: f64) -> u64 {
        let i = Self::bin_index(v, self.origin, self.bin_width) - self.first_bin;
        usize::try_from(i)
            .ok()
            .and_then(|i| self.counts.get(i).copied())
            .unwrap_or(0)
    }
}

/// Distribution of one measure over `records`.
pub fn degree_histogram(
    records: &[CrossLevelRecord],
    measure: Measure,
    bin_width: f64,
) -> Result<Histogram, AnalysisError> {
    let values: Vec<f64> = records.iter().map(|r| r.value(measure)).collect();
    Histogram::from_values(&values, default_origin(measure), bin_width)
}

/// Quantile of sorted data by linear interpolation at position `p·(n−1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

const MIN_TAIL_SAMPLE: usize = 4;

/// Tukey upper fence `Q3 + 1.5·(Q3 − Q1)`.
pub fn tukey_upper_fence(values: &[f64]) -> Result<f64, AnalysisError> {
    if values.len() < MIN_TAIL_SAMPLE {
        return Err(AnalysisError::TooFewObservations {
            n: values.len(),
            min: MIN_TAIL_SAMPLE,
        });
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidValue(*v));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    Ok(q3 + 1.5 * (q3 - q1))
}

/// Cut-off separating the right tail of an SSIM distribution: the Tukey upper
/// fence, or `None` when nothing lies above it. MSE distributions have no
/// separable tail on the similar (left) side, so MSE always yields `None`.
pub fn tail_threshold(values: &[f64], measure: Measure) -> Result<Option<f64>, AnalysisError> {
    let fence = tukey_upper_fence(values)?;
    if measure == Measure::Mse {
        return Ok(None);
    }
    Ok(values.iter().any(|&v| v > fence).then_some(fence))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFlag {
    pub level: Level,
    pub code: String,
    pub value: f64,
    /// The default stands: its SSIM exceeds the threshold.
    pub default_exists: bool,
}

/// Flags, per SSIM report, whether its default is strictly above `threshold`.
/// Reports of other measures are ignored.
pub fn apply_threshold(reports: &[DefaultReport], threshold: f64) -> Vec<ThresholdFlag> {
    reports
        .iter()
        .filter(|r| r.measure == Measure::Ssim)
        .map(|r| ThresholdFlag {
            level: r.level,
            code: r.most_similar.code.clone(),
            value: r.most_similar.value,
            default_exists: r.most_similar.value > threshold,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binning_example() {
        let h = Histogram::from_values(&[0.10, 0.105, 0.25], -1.0, 0.01).unwrap();
        assert_eq!(h.count_at(0.10), 2);
        assert_eq!(h.count_at(0.25), 1);
        assert_eq!(h.counts.iter().sum::<u64>(), 3);
        let (edge, count) = h.bins().next().unwrap();
        assert!((edge - 0.10).abs() < 1e-12);
        assert_eq!(count, 2);
        assert_eq!(h.counts.len(), 16);
    }

    #[test]
    fn mse_bins() {
        let h = Histogram::from_values(&[0.0, 499.9, 500.0, 4323.0], 0.0, 500.0).unwrap();
        let bins: Vec<_> = h.bins().collect();
        assert_eq!(bins[0], (0.0, 2));
        assert_eq!(bins[1], (500.0, 1));
        assert_eq!(bins[8], (4000.0, 1));
    }

    #[test]
    fn histogram_errors() {
        assert!(matches!(Histogram::from_values(&[], 0.0, 1.0), Err(AnalysisError::EmptyInput)));
        assert!(matches!(Histogram::from_values(&[1.0], 0.0, 0.0), Err(AnalysisError::InvalidBinWidth(_))));
        assert!(Histogram::from_values(&[f64::NAN], 0.0, 1.0).is_err());
    }

    #[test]
    fn fence_example() {
        let values = [0.03, 0.06, 0.09, 0.12, 0.30];
        let t = tail_threshold(&values, Measure::Ssim).unwrap().unwrap();
        assert!((t - 0.21).abs() < 1e-12, "{t}");
    }

    #[test]
    fn no_tail_no_threshold() {
        let values: Vec<f64> = (0..20).map(|i| 0.10 + 0.001 * f64::from(i)).collect();
        assert_eq!(tail_threshold(&values, Measure::Ssim).unwrap(), None);
        assert_eq!(tail_threshold(&[1.0, 2.0, 3.0, 900.0], Measure::Mse).unwrap(), None);
        assert!(matches!(
            tail_threshold(&[0.1, 0.2, 0.3], Measure::Ssim),
            Err(AnalysisError::TooFewObservations { n: 3, .. })
        ));
    }

    #[test]
    fn quantile_endpoints() {
        let s = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 8.0);
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
    }
}
