//! Cross-level similarity records and everything derived from them: regional
//! defaults per level, their consistency along the hierarchy, the
//! distribution of regional-default degree with a right-tail threshold, and
//! agreement with forest-extent ground truth.

mod defaults;
mod distribution;
mod extent;
mod records;

use thiserror::Error;

pub use defaults::{
    all_defaults, consistency_chains, regional_defaults, ConsistencyChain, DefaultReport, Extreme,
    Extremum,
};
pub use distribution::{
    apply_threshold, default_bin_width, default_origin, degree_histogram, quantile_sorted,
    tail_threshold, tukey_upper_fence, Histogram, ThresholdFlag,
};
pub use extent::{
    bundled_extents, load_extents, match_defaults_to_extent, most_forested, ExtentMatch,
    ForestExtentRow, BUNDLED_EXTENTS,
};
pub use records::{
    all_cross_level_similarities, cross_level_similarities, CrossLevelOptions, CrossLevelRecord,
    ImageSource,
};

use crate::hierarchy::{HierarchyError, Level};
use crate::image::ImageError;
use crate::similarity::{Measure, SimilarityError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no image for regions: {}", .0.join(", "))]
    MissingImages(Vec<String>),
    #[error("ancestor `{0}` has no generated image")]
    AncestorImage(String),
    #[error("no records at level {level}")]
    NoCandidates { level: Level },
    #[error("records at level {level} mix ancestors `{first}` and `{second}`")]
    MixedAncestors {
        level: Level,
        first: String,
        second: String,
    },
    #[error("non-finite {measure} value for `{code}`")]
    NonFinite { code: String, measure: Measure },
    #[error("more than one {measure} report for level {level}")]
    DuplicateReport { level: Level, measure: Measure },
    #[error("bin width must be positive, got {0}")]
    InvalidBinWidth(f64),
    #[error("invalid observation {0}")]
    InvalidValue(f64),
    #[error("no observations")]
    EmptyInput,
    #[error("need at least {min} observations, got {n}")]
    TooFewObservations { n: usize, min: usize },
    #[error("no forest-extent rows at level {level}")]
    NoExtent { level: Level },
    #[error("forest-extent row {row}: {msg}")]
    ExtentRow { row: u64, msg: String },
    #[error("{ancestor} vs {descendant}: {source}")]
    Similarity {
        ancestor: String,
        descendant: String,
        source: SimilarityError,
    },
    #[error(transparent)]
    Params(#[from] SimilarityError),
    #[error("image for `{code}`: {source}")]
    Image { code: String, source: ImageError },
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}
