//! Next-day demand models trained on feature matrices or per-product daily
//! series, plus the median ensemble, cross-validated search and a
//! versioned JSON artifact format.
//!
//! Every fit is single-threaded and deterministic under its seed.

pub mod adam;
pub mod arima;
pub mod artifact;
pub mod cv;
pub mod ensemble;
pub mod error;
pub mod forest;
pub mod gbt;
pub mod linear;
pub mod lstm;
pub mod metrics;
pub mod mlp;
pub mod scaling;
pub mod tree;

pub use arima::{fit_arima, select_arima_order, Arima, ArimaOrder};
pub use artifact::{ModelArtifact, ModelKind, TrainedModel, TrainingMeta};
pub use cv::{grid_search_cv, CvOutcome, ModelSpec};
pub use ensemble::{ensemble_predict, fit_ensemble, Ensemble, EnsembleParams, Regressor};
pub use error::{DemandError, Result};
pub use forest::{fit_random_forest, ForestParams, RandomForest};
pub use gbt::{fit_gbt, GbtParams, GradientBoosting};
pub use linear::{fit_elastic_net, ElasticNet, ElasticNetParams};
pub use lstm::{fit_lstm, DailySeries, Lstm, LstmParams};
pub use metrics::{evaluate_predictions, EvalReport};
pub use mlp::{fit_mlp, Mlp, MlpParams};
