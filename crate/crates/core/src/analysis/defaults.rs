use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AnalysisError, CrossLevelRecord};
use crate::hierarchy::{Level, RegionHierarchy};
use crate::similarity::Measure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extreme {
    pub code: String,
    pub value: f64,
}

/// Most and least similar descendants of one ancestor at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultReport {
    pub ancestor_code: String,
    pub level: Level,
    pub measure: Measure,
    /// The regional default.
    pub most_similar: Extreme,
    pub least_similar: Extreme,
    pub candidate_count: usize,
}

impl DefaultReport {
    pub fn extreme(&self, which: Extremum) -> &Extreme {
        match which {
            Extremum::Most => &self.most_similar,
            Extremum::Least => &self.least_similar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Most,
    Least,
}

/// Picks the most and least similar records at `level`. Ties go to the
/// lexicographically smallest descendant code.
pub fn regional_defaults(
    records: &[CrossLevelRecord],
    level: Level,
    measure: Measure,
) -> Result<DefaultReport, AnalysisError> {
    let mut candidates = records.iter().filter(|r| r.descendant_level == level);
    let first = candidates
        .next()
        .ok_or(AnalysisError::NoCandidates { level })?;
    let ancestor = &first.ancestor_code;

    let check = |r: &CrossLevelRecord| -> Result<f64, AnalysisError> {
        if &r.ancestor_code != ancestor {
            return Err(AnalysisError::MixedAncestors {
                level,
                first: ancestor.clone(),
                second: r.ancestor_code.clone(),
            });
        }
        let v = r.value(measure);
        if !v.is_finite() {
            return Err(AnalysisError::NonFinite {
                code: r.descendant_code.clone(),
                measure,
            });
        }
        Ok(v)
    };

    let v0 = check(first)?;
    let mut most = (first, v0);
    let mut least = (first, v0);
    let mut count = 1;
    for r in candidates {
        let v = check(r)?;
        count += 1;
        let better = |a: f64, b: f64| measure.more_similar(a, b);
        if better(v, most.1) || (v == most.1 && r.descendant_code < most.0.descendant_code) {
            most = (r, v);
        }
        if better(least.1, v) || (v == least.1 && r.descendant_code < least.0.descendant_code) {
            least = (r, v);
        }
    }
    Ok(DefaultReport {
        ancestor_code: ancestor.clone(),
        level,
        measure,
        most_similar: Extreme {
            code: most.0.descendant_code.clone(),
            value: most.1,
        },
        least_similar: Extreme {
            code: least.0.descendant_code.clone(),
            value: least.1,
        },
        candidate_count: count,
    })
}

/// Reports for every level present in `records` (top-down), MSE before SSIM
/// within a level.
pub fn all_defaults(records: &[CrossLevelRecord]) -> Result<Vec<DefaultReport>, AnalysisError> {
    let mut levels: Vec<Level> = records.iter().map(|r| r.descendant_level).collect();
    levels.sort();
    levels.dedup();
    let mut out = Vec::with_capacity(levels.len() * 2);
    for level in levels {
        for measure in Measure::ALL {
            out.push(regional_defaults(records, level, measure)?);
        }
    }
    Ok(out)
}

/// Defaults (or least-similar regions) of one measure ordered by level, with
/// the longest stretch in which each region lies inside the previous one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyChain {
    pub measure: Measure,
    pub extremum: Extremum,
    pub sequence: Vec<(Level, String)>,
    pub longest_hierarchical_run: Vec<(Level, String)>,
}

impl ConsistencyChain {
    pub fn run_length(&self) -> usize {
        self.longest_hierarchical_run.len()
    }
}

/// One chain per measure present in `reports`, in measure order. The earliest
/// run wins among runs of equal length.
pub fn consistency_chains(
    reports: &[DefaultReport],
    h: &RegionHierarchy,
    extremum: Extremum,
) -> Result<Vec<ConsistencyChain>, AnalysisError> {
    let mut by_measure: BTreeMap<Measure, BTreeMap<Level, String>> = BTreeMap::new();
    for r in reports {
        let code = r.extreme(extremum).code.clone();
        if by_measure
            .entry(r.measure)
            .or_default()
            .insert(r.level, code)
            .is_some()
        {
            return Err(AnalysisError::DuplicateReport {
                level: r.level,
                measure: r.measure,
            });
        }
    }

    Ok(by_measure
        .into_iter()
        .map(|(measure, levels)| {
            let sequence: Vec<(Level, String)> = levels.into_iter().collect();
            let (mut best, mut start) = ((0, 0), 0);
            for i in 0..sequence.len() {
                let linked = i > 0 && h.is_descendant(&sequence[i - 1].1, &sequence[i].1);
                if !linked {
                    start = i;
                }
                if i + 1 - start > best.1 - best.0 {
                    best = (start, i + 1);
                }
            }
            ConsistencyChain {
                measure,
                extremum,
                longest_hierarchical_run: sequence[best.0..best.1].to_vec(),
                sequence,
            }
        })
        .collect())
}
