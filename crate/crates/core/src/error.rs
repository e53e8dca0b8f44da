use thiserror::Error;

/// All failure modes of the toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("series too short: need at least {needed} samples, got {actual}")]
    SeriesTooShort { needed: usize, actual: usize },

    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    #[error("window length {l} out of range for series of length {n} (need 2 <= L <= N/2)")]
    WindowOutOfRange { l: usize, n: usize },

    #[error("matrix is not Hankel: anti-diagonal {index} varies by {spread:e}, tolerance {tolerance:e}")]
    NotHankel {
        index: usize,
        spread: f64,
        tolerance: f64,
    },

    #[error("degenerate series: zero variance over the first {window} samples (lag {lag})")]
    DegenerateSeries { lag: usize, window: usize },

    #[error("autocorrelation has no sign change for any lag in [2, {scanned}]")]
    NoSignChange { scanned: usize },

    #[error("autocorrelation never enters the confidence band for any lag in [2, {scanned}]")]
    NoCrossing { scanned: usize },

    #[error("series too short: {detail}")]
    TooShort { detail: String },

    #[error("grouping is empty")]
    EmptyGrouping,

    #[error("component index {index} out of range [1, {bound}]")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("vertical subspace: verticality coefficient {upsilon_sq} >= 1 - 1e-9, forecasting undefined")]
    VerticalSubspace { upsilon_sq: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("insufficient data: need more than {needed} samples, got {actual}")]
    InsufficientData { needed: usize, actual: usize },

    #[error("span of the series is zero; relative errors undefined")]
    SpanDegenerate,

    #[error("forecast horizon must be at least 1")]
    InvalidHorizon,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("all forecasts failed for every requested method and grouping")]
    AllCellsFailed,
}

impl Error {
    /// Module the error originates from, for CLI diagnostics.
    pub fn module(&self) -> &'static str {
        match self {
            Error::SeriesTooShort { .. }
            | Error::NonFiniteSample { .. }
            | Error::WindowOutOfRange { .. }
            | Error::NotHankel { .. } => "series",
            Error::DegenerateSeries { .. }
            | Error::NoSignChange { .. }
            | Error::NoCrossing { .. } => "window",
            Error::EmptyGrouping | Error::IndexOutOfRange { .. } => "grouping",
            Error::VerticalSubspace { .. } | Error::InvalidHorizon => "forecast",
            Error::LengthMismatch { .. } => "grouping",
            Error::InsufficientData { .. } => "baselines",
            Error::TooShort { .. } | Error::SpanDegenerate | Error::AllCellsFailed => "evaluation",
            Error::InvalidParameter(_) => "config",
            Error::NumericalFailure(_) => "decomposition",
        }
    }

    /// One-line remediation hint, for CLI diagnostics.
    pub fn hint(&self) -> &'static str {
        match self {
            Error::SeriesTooShort { .. } | Error::TooShort { .. } => {
                "provide a longer input series"
            }
            Error::NonFiniteSample { .. } => "remove or impute NaN/infinite samples before use",
            Error::WindowOutOfRange { .. } => "choose a window length L with 2 <= L <= N/2",
            Error::NotHankel { .. } => "inverse embedding requires a (near-)Hankel matrix",
            Error::DegenerateSeries { .. } => "the series is constant over a scanned window; use a fixed window length",
            Error::NoSignChange { .. } => "no dominant oscillation found; try --window log-lo or fixed:<L>",
            Error::NoCrossing { .. } => "autocorrelation stays outside the band; try --window log-lo or fixed:<L>",
            Error::EmptyGrouping => "groupings must contain at least one component index",
            Error::IndexOutOfRange { .. } => "component indices are 1-based and bounded by the window length",
            Error::VerticalSubspace { .. } => "drop the last component from the grouping or change L",
            Error::LengthMismatch { .. } => "operands must have equal length",
            Error::InsufficientData { .. } => "polynomial regression needs more samples than its degree",
            Error::SpanDegenerate => "relative errors need a non-constant series",
            Error::InvalidHorizon => "use --horizon >= 1",
            Error::InvalidParameter(_) => "check the flag values against --help",
            Error::NumericalFailure(_) => "the SVD backend failed; check the input for pathological values",
            Error::AllCellsFailed => "every per-day forecast failed; check window/grouping settings",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
