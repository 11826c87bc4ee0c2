//! Forest-extent ground truth and matching of regional defaults against it.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{AnalysisError, DefaultReport};
use crate::hierarchy::{Level, RegionHierarchy};
use crate::similarity::Measure;

/// Forest extent per region (10⁶ km², FAO FRA 2020) shipped with the crate.
pub const BUNDLED_EXTENTS: &str = include_str!("../../data/forest_extent.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestExtentRow {
    pub region_code: String,
    pub level: Level,
    /// Forest area in 10⁶ km².
    pub extent: f64,
}

#[derive(Deserialize)]
struct RawRow {
    region_code: String,
    level: String,
    extent_1e6_km2: f64,
}

/// Reads `region_code,level,extent_1e6_km2` rows. With a hierarchy, every
/// code must resolve and its level must agree with the hierarchy.
pub fn load_extents<R: Read>(
    reader: R,
    h: Option<&RegionHierarchy>,
) -> Result<Vec<ForestExtentRow>, AnalysisError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (i, raw) in rdr.deserialize::<RawRow>().enumerate() {
        let row = i as u64 + 2;
        let bad = |msg: String| AnalysisError::ExtentRow { row, msg };
        let raw = raw.map_err(|e| bad(e.to_string()))?;
        let level: Level = raw.level.parse().map_err(bad)?;
        if !(raw.extent_1e6_km2 >= 0.0 && raw.extent_1e6_km2.is_finite()) {
            return Err(bad(format!("extent {} is not a non-negative number", raw.extent_1e6_km2)));
        }
        if let Some(h) = h {
            let node = h
                .get(&raw.region_code)
                .ok_or_else(|| bad(format!("unknown region `{}`", raw.region_code)))?;
            if node.level != level {
                return Err(bad(format!(
                    "`{}` is at level {}, not {level}",
                    raw.region_code, node.level
                )));
            }
        }
        rows.push(ForestExtentRow {
            region_code: raw.region_code,
            level,
            extent: raw.extent_1e6_km2,
        });
    }
    Ok(rows)
}

/// Bundled extents validated against `h`.
pub fn bundled_extents(h: &RegionHierarchy) -> Result<Vec<ForestExtentRow>, AnalysisError> {
    load_extents(BUNDLED_EXTENTS.as_bytes(), Some(h))
}

/// Largest extent at `level`; ties go to the smallest code.
pub fn most_forested(extents: &[ForestExtentRow], level: Level) -> Result<&ForestExtentRow, AnalysisError> {
    extents
        .iter()
        .filter(|r| r.level == level)
        .min_by(|a, b| {
            b.extent
                .total_cmp(&a.extent)
                .then_with(|| a.region_code.cmp(&b.region_code))
        })
        .ok_or(AnalysisError::NoExtent { level })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtentMatch {
    pub level: Level,
    pub measure: Measure,
    pub default_code: String,
    pub most_forested_code: String,
    pub matched: bool,
}

/// Compares each report's default with the most forested region of its level.
pub fn match_defaults_to_extent(
    reports: &[DefaultReport],
    extents: &[ForestExtentRow],
) -> Result<Vec<ExtentMatch>, AnalysisError> {
    reports
        .iter()
        .map(|r| {
            let top = most_forested(extents, r.level)?;
            Ok(ExtentMatch {
                level: r.level,
                measure: r.measure,
                default_code: r.most_similar.code.clone(),
                most_forested_code: top.region_code.clone(),
                matched: r.most_similar.code == top.region_code,
            })
        })
        .collect()
}
