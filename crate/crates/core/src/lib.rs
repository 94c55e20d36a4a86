//! Multi-step-ahead time-series forecasting with neural networks.
//!
//! The crate covers the full pipeline: chaotic series generation and CSV
//! loading, phase-space embedding with min-max scaling, six network families
//! over flat parameter vectors with hand-written backpropagation, SGD and
//! Adam training, and the repeated-run benchmark that aggregates per-horizon
//! RMSE into confidence intervals and rankings.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod learn;
pub mod models;
pub mod numkit;
pub mod seriesgen;

pub use dataset::{
    embed, prepare, split, EmbedConfig, EmbeddedDataset, Prepared, ScaleFit, ScaleParams,
};
pub use error::{Error, Result};
pub use learn::{train, OptimizerKind, TrainConfig};
pub use models::{build, CellUpdate, Model, ModelKind, ModelSpec};
pub use numkit::{Matrix, Rng};
pub use seriesgen::{ChaosParams, ChaosSystem, Source, TimeSeries};
