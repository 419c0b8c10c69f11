//! Classification protocol: imputation, stratified splits, boosted trees,
//! baselines, metrics, feature importance and the F1 growth curve.

mod gbdt;
mod impute;
mod metrics;
mod protocol;
mod split;

pub use gbdt::{
    predict, predict_labels, train_gbdt, Node, TrainConfig, Tree, TreeEnsemble,
    MODEL_FORMAT_VERSION,
};
pub use impute::{Dataset, Imputer};
pub use metrics::{baseline_majority, baseline_random, evaluate, Metrics};
pub use protocol::{
    cross_validate, f1_growth_curve, feature_report, fit_evaluate, importance_ranking, CvSummary,
    FitOutcome, ImportanceRow, RANDOM_BASELINE_DRAWS,
};
pub use split::{stratified_kfold, stratified_split, Split};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("column {0} has no observed values in the training partition")]
    FullyMissingColumn(String),
    #[error("class {label} has {count} rows; need at least {needed}")]
    ClassTooSmall {
        label: u8,
        count: usize,
        needed: usize,
    },
    #[error("both classes must be present")]
    SingleClass,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("expected {expected} feature columns, got {found}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("ensemble has no trees or no split gain")]
    Untrained,
    #[error("unsupported model format version {0}")]
    FormatVersion(u32),
    #[error("model json: {0}")]
    Json(String),
}
