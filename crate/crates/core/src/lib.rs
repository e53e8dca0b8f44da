//! Singular spectrum analysis for univariate series: embedding and SVD
//! decomposition, window-length selection, eigentriple grouping, linear
//! recurrent forecasting, reference baselines, and a rolling-origin
//! evaluation harness.

pub mod error;
pub mod series;
pub mod decomposition;
pub mod window;
pub mod grouping;
pub mod forecast;
pub mod baselines;
pub mod evaluation;

pub use error::{Error, Result};
pub use series::{TimeSeries, TrajectoryMatrix};
pub use decomposition::{decompose, Decomposition};
pub use window::{WindowChoice, WindowMethod, WindowSpec};
pub use grouping::Grouping;
pub use forecast::{fit_lre, vector_forecast, ForecastModel, ForecastResult};
pub use evaluation::{
    rolling_eval, sweep_prefix, optimal_prefix, local_min_check, practitioner_strategy,
    ErrorMetric, ErrorReport, EvalPlan, GroupingSpec, SweepSurface,
};
