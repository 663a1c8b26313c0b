//! Shapley-value decomposition of goodness of fit for generalized linear
//! models, with the Kullback-Leibler R² as the default measure.
//!
//! Each player is a group of design columns. Every subset of players is fitted
//! by maximum likelihood, a fit measure is evaluated on each subset, and the
//! Shapley value distributes the full-model fit over the players.

pub mod data;
pub mod engine;
pub mod error;
pub mod family;
pub mod glm;
pub mod hurdle;
mod linalg;
pub mod measures;
pub mod report;
pub mod rootogram;
pub mod shapley;
pub mod synthetic;

pub use data::{encode_dataset, Dataset, FactorPolicy, Player, PlayerSpec, RawTable, SubsetKey};
pub use engine::{
    analyze, shapley_sampled, Analysis, AnalysisOptions, SamplingOptions, SubsetFitCache,
};
pub use error::{Error, ErrorKind, Result};
pub use family::Family;
pub use glm::{fit, FitControl, FittedGlm};
pub use hurdle::{analyze_hurdle, HurdleReport, HurdleSpec};
pub use measures::{FitMeasure, NullConvention, RunConstants, SubsetStats};
pub use report::ReportDocument;
pub use rootogram::RootogramData;
pub use shapley::ShapleyResult;
