//! Reading-time regression and storage-measure correlation analyses.

mod correlate;
mod cv;
mod ingest;
mod regression;
mod stats;
mod table;

use thiserror::Error;

pub use correlate::{
    average_ranks, bins_csv, correlate, pearson, spearman, CorrelationResult, LinearFit,
    StorageBin, DEFAULT_MIN_BIN_COUNT,
};
pub use cv::{
    assign_folds, baseline_formula, cv_delta_ll, cv_delta_ll_on, permutation_seed, run_conditions,
    storage_terms, Condition, CvConfig, CvOutcome, DllResult, FoldScheme, FoldSummary,
    RegressConfig, RegressMetadata, RegressReport, StorageCoefficients,
};
pub use ingest::{
    contains_punctuation, ingest_reading_data, parse_raw_tsv, FilterConfig, IngestSummary,
    RawMeasurement,
};
pub use regression::{
    design_rows, gaussian_ll, ols_fit, ols_fit_table, zscore_fit, zscore_fit_apply, RegressionFit,
    ZScore, MIN_RESIDUAL_VARIANCE,
};
pub use stats::{
    benjamini_hochberg, permutation_test, PermutationMode, PermutationResult, DEFAULT_ALPHA,
    DEFAULT_PERMUTATIONS,
};
pub use table::{
    spillover_name, PredictorTable, BASELINE_COLUMNS, SPILLOVER_BASES, STORAGE_COLUMNS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty input")]
    EmptyInput,
    #[error("degenerate predictor: {0}")]
    DegeneratePredictor(String),
    #[error("singular design: {0}")]
    SingularDesign(String),
    #[error("fold {fold}: {message}")]
    Fold { fold: usize, message: String },
    #[error("{got} usable rows, need at least {needed}")]
    InsufficientRows { needed: usize, got: usize },
    #[error("correlation: {0}")]
    Correlation(String),
    #[error("p-value {0} outside (0, 1]")]
    InvalidPValue(f64),
    #[error("{0}")]
    InvalidInput(String),
}
