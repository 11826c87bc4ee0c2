use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::generation::{ImageStore, Manifest, OutcomeStatus};
use crate::hierarchy::{Level, RegionHierarchy};
use crate::image::{decode_png, to_grayscale_with, GrayImage, LumaWeights};
use crate::similarity::{compare, Measure, SsimParams};

/// Similarity between the image of an ancestor region and the image of one of
/// its descendants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossLevelRecord {
    pub ancestor_code: String,
    pub descendant_code: String,
    pub descendant_level: Level,
    pub mse: f64,
    pub ssim: f64,
}

impl CrossLevelRecord {
    pub fn value(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Mse => self.mse,
            Measure::Ssim => self.ssim,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CrossLevelOptions {
    pub ssim: SsimParams,
    pub luma: LumaWeights,
    /// Skip descendants without a usable image instead of failing.
    pub allow_partial: bool,
    /// Worker threads for pairwise evaluation; `None` uses the global pool.
    pub threads: Option<usize>,
}

/// Where region images come from: a manifest and its image store.
pub struct ImageSource<'a> {
    pub manifest: &'a Manifest,
    pub store: &'a ImageStore,
}

impl ImageSource<'_> {
    fn image_ref(&self, code: &str) -> Option<&str> {
        self.manifest
            .outcome(code)
            .filter(|o| o.status == OutcomeStatus::Generated)
            .and_then(|o| o.image_ref.as_deref())
            .filter(|r| self.store.contains(r))
    }

    fn is_rejected(&self, code: &str) -> bool {
        self.manifest
            .outcome(code)
            .is_some_and(|o| o.status == OutcomeStatus::Rejected)
    }

    fn gray(&self, code: &str, luma: LumaWeights) -> Result<GrayImage, AnalysisError> {
        let r = self
            .image_ref(code)
            .ok_or_else(|| AnalysisError::MissingImages(vec![code.to_owned()]))?;
        let bytes = self.store.get(r).map_err(|source| AnalysisError::Io {
            path: self.store.path_of(r).display().to_string(),
            source,
        })?;
        let rgb = decode_png(&bytes).map_err(|source| AnalysisError::Image {
            code: code.to_owned(),
            source,
        })?;
        Ok(to_grayscale_with(&rgb, luma))
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, AnalysisError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| AnalysisError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// `(ancestor, descendant)` pairs under `ancestor`, sorted by (level, code),
/// after dropping excluded and rejected regions.
fn descendant_pairs<'h>(
    h: &'h RegionHierarchy,
    src: &ImageSource<'_>,
    ancestor: &str,
    allow_partial: bool,
) -> Result<Vec<(Level, &'h str)>, AnalysisError> {
    let anc = h.node(ancestor)?;
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for level in anc.level.below() {
        for node in h.descendants_at_level(ancestor, level)? {
            if src.is_rejected(&node.code) {
                continue;
            }
            if src.image_ref(&node.code).is_none() {
                missing.push(node.code.clone());
                continue;
            }
            pairs.push((level, node.code.as_str()));
        }
    }
    if !missing.is_empty() && !allow_partial {
        return Err(AnalysisError::MissingImages(missing));
    }
    if !missing.is_empty() {
        log::warn!("skipping {} regions without images: {}", missing.len(), missing.join(", "));
    }
    Ok(pairs)
}

/// One record per usable descendant of `ancestor` at every lower level,
/// sorted by (level, descendant code).
///
/// Regions excluded in `h` or rejected in the manifest are skipped. Any other
/// descendant without an image is an error unless `allow_partial` is set.
/// Pairs may be evaluated on several threads; each pair is computed
/// independently and results are collected in order, so the output does not
/// depend on the thread count.
pub fn cross_level_similarities(
    h: &RegionHierarchy,
    src: &ImageSource<'_>,
    ancestor: &str,
    opts: &CrossLevelOptions,
) -> Result<Vec<CrossLevelRecord>, AnalysisError> {
    opts.ssim.validate()?;
    let pairs = descendant_pairs(h, src, ancestor, opts.allow_partial)?;
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let anc_img = src.gray(ancestor, opts.luma).map_err(|e| match e {
        AnalysisError::MissingImages(_) => AnalysisError::AncestorImage(ancestor.to_owned()),
        other => other,
    })?;

    with_pool(opts.threads, || {
        pairs
            .par_iter()
            .map(|&(level, code)| {
                let img = src.gray(code, opts.luma)?;
                let (m, s) = compare(&anc_img, &img, &opts.ssim).map_err(|source| {
                    AnalysisError::Similarity {
                        ancestor: ancestor.to_owned(),
                        descendant: code.to_owned(),
                        source,
                    }
                })?;
                Ok(CrossLevelRecord {
                    ancestor_code: ancestor.to_owned(),
                    descendant_code: code.to_owned(),
                    descendant_level: level,
                    mse: m.value,
                    ssim: s.value,
                })
            })
            .collect::<Result<Vec<_>, AnalysisError>>()
    })?
}

/// Records for every ancestor with at least one usable descendant, each image
/// decoded and converted once. Sorted by (ancestor, level, descendant).
pub fn all_cross_level_similarities(
    h: &RegionHierarchy,
    src: &ImageSource<'_>,
    opts: &CrossLevelOptions,
) -> Result<Vec<CrossLevelRecord>, AnalysisError> {
    opts.ssim.validate()?;
    let mut jobs: Vec<(&str, Level, &str)> = Vec::new();
    for anc in h.nodes().filter(|n| n.level < Level::Country) {
        if h.is_excluded(&anc.code) || src.is_rejected(&anc.code) {
            continue;
        }
        let pairs = descendant_pairs(h, src, &anc.code, opts.allow_partial)?;
        if pairs.is_empty() {
            continue;
        }
        if src.image_ref(&anc.code).is_none() {
            if opts.allow_partial {
                continue;
            }
            return Err(AnalysisError::AncestorImage(anc.code.clone()));
        }
        jobs.extend(pairs.into_iter().map(|(l, d)| (anc.code.as_str(), l, d)));
    }

    let codes: BTreeSet<&str> = jobs.iter().flat_map(|&(a, _, d)| [a, d]).collect();
    with_pool(opts.threads, || {
        let grays: BTreeMap<&str, GrayImage> = codes
            .par_iter()
            .map(|&c| src.gray(c, opts.luma).map(|g| (c, g)))
            .collect::<Result<_, _>>()?;
        jobs.par_iter()
            .map(|&(a, level, d)| {
                let (m, s) = compare(&grays[a], &grays[d], &opts.ssim).map_err(|source| {
                    AnalysisError::Similarity {
                        ancestor: a.to_owned(),
                        descendant: d.to_owned(),
                        source,
                    }
                })?;
                Ok(CrossLevelRecord {
                    ancestor_code: a.to_owned(),
                    descendant_code: d.to_owned(),
                    descendant_level: level,
                    mse: m.value,
                    ssim: s.value,
                })
            })
            .collect::<Result<Vec<_>, AnalysisError>>()
    })?
}
