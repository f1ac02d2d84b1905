//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by table/volume IO, harmonization, model fitting, and
/// evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate subject id `{0}`")]
    DuplicateSubjectId(String),
    #[error("non-numeric value `{value}` in feature column `{column}` (row {row})")]
    NonNumericCell {
        column: String,
        row: usize,
        value: String,
    },
    #[error("table is empty")]
    EmptyTable,
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("survival time must be positive, got {time} for subject `{subject}`")]
    NonPositiveTime { subject: String, time: f64 },
    #[error("event indicator must be 0 or 1, got `{value}` for subject `{subject}`")]
    InvalidEvent { subject: String, value: String },
    #[error("table shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("volume header declares {expected} voxels but payload holds {actual}")]
    PayloadSizeMismatch { expected: usize, actual: usize },
    #[error("unsupported volume element type `{0}`")]
    UnsupportedDtype(String),
    #[error("voxel value {value} at index {index} is not representable as {dtype}")]
    UnrepresentableVoxel {
        value: f64,
        index: usize,
        dtype: String,
    },
    #[error("mask voxels must be 0 or 1, found {0}")]
    NonBinaryMask(f64),
    #[error("volume/mask grids are incompatible: {0}")]
    GridMismatch(String),
    #[error("mask selects no voxels")]
    EmptyMask,

    #[error("feature and outcome tables share no subject ids")]
    EmptyIntersection,

    #[error("reference batch `{0}` is absent from the fitting data")]
    ReferenceBatchMissing(String),
    #[error("batch `{batch}` has {count} subjects; at least 2 are required")]
    BatchTooSmall { batch: String, count: usize },
    #[error("feature `{0}` has zero variance within the reference batch")]
    ZeroReferenceVariance(String),
    #[error("batch `{0}` was not seen when the model was fitted")]
    UnseenBatch(String),
    #[error("feature names do not match the fitted model: {0}")]
    FeatureMismatch(String),
    #[error("table has missing values; impute before calling {0}")]
    MissingValues(&'static str),
    #[error("batch labels are required for harmonization")]
    MissingBatchLabels,

    #[error("feature `{0}` has no observed training values to impute from")]
    AllMissing(String),
    #[error("need at least {needed} events and {needed} censored subjects, got {events}/{censored}")]
    TooFewPerStratum {
        needed: usize,
        events: usize,
        censored: usize,
    },
    #[error("requested {k} components but at most {max} are identifiable")]
    ComponentsOutOfRange { k: usize, max: usize },

    #[error("no events in the outcome data")]
    NoEvents,
    #[error("column `{0}` is constant; drop it before fitting")]
    ConstantColumn(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("design matrix is singular (collinear columns?)")]
    SingularDesign,

    #[error("no comparable pairs for concordance")]
    NoComparablePairs,
    #[error("horizon {horizon} leaves no {missing} (cases = events by the horizon, controls = survivors past it)")]
    NoCasesOrControls { horizon: f64, missing: &'static str },
    #[error("censoring-survival weight is zero at case time {0}; censoring follow-up is too short")]
    ZeroIpcwWeight(f64),
    #[error("both groups must be nonempty and both levels present")]
    DegenerateGroups,
    #[error("{skipped} of {total} bootstrap replicates were degenerate (more than half)")]
    TooManyDegenerateReplicates { skipped: usize, total: usize },
    #[error("metric is undefined on the full sample")]
    DegeneratePointEstimate,

    #[error("single-class input: both outcome classes are required")]
    SingleClass,
    #[error("consensus needs at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("aligned vectors have different lengths: {0}")]
    LengthMismatch(String),

    #[error("lesions {0} and {1} overlap or touch within a slice")]
    LesionOverlap(usize, usize),
    #[error("lesion {0} extends outside the volume")]
    LesionOutOfBounds(usize),
    #[error("peak attenuation {0} is below the 130 HU scoring floor")]
    BelowScoringFloor(f64),

    #[error("censoring target {0} is not achievable on this cohort")]
    UnachievableCensoring(f64),

    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
