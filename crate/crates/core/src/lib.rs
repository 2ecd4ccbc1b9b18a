//! Calibration of expensive forward models against reported summary
//! statistics (measured value plus error bar).
//!
//! The pipeline fits polynomial chaos surrogates per measurement station,
//! ranks parameters by total-effect Sobol indices, builds synthetic data
//! sets whose variance scale is tuned until the pushforward posterior
//! reproduces the reported error bars, and samples the joint posterior with
//! adaptive Metropolis.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod dfi;
pub mod error;
pub mod gsa;
pub mod likelihood;
pub mod linalg;
pub mod mcmc;
pub mod pce;
pub mod scalar;
pub mod seed;
pub mod space;
pub mod testmodels;

pub use config::{CalibrationConfig, DataSpace, DistanceKind, StatisticKind, WeightMode};
pub use data::{DataSummarySet, ExperimentManifest, ManifestEntry, SyntheticDataCollection, TrainingSet};
pub use dfi::{
    calibrate_beta, consistency_distance, draw_synthetic, experiment_specific_copies, joint_calibrate,
    pushforward, pushforward_stat, run_pipeline, Binding, ConsistencyReport, Experiment, InferenceSettings,
    JointResult, PipelineOutcome, PushforwardSummary, SurrogatePredictor,
};
pub use error::{Error, ErrorKind, Result};
pub use gsa::{mc_sobol_total, rank_and_truncate, total_sobol, SensitivityTable, Truncation};
pub use likelihood::{
    default_weights, gaussian_loglik, log_posterior, log_prior, pooled_loglik, CombinedLikelihood, LogDensity,
    Predictor,
};
pub use linalg::Matrix;
pub use mcmc::{map_estimate, postprocess, run_chain, warm_start, Chain, McmcSettings};
pub use pce::{fit_surrogate, FitOptions, MultiIndex, PceSurrogate, SurrogateArchive, SurrogateFamily};
pub use scalar::Scalar;
pub use seed::{derive_seed, digest_hex};
pub use space::{default_prior, GaussianPrior, ParameterEntry, ParameterSpace};

pub type Space = ParameterSpace<f64>;
pub type Prior = GaussianPrior<f64>;
pub type DataSet = DataSummarySet<f64>;
pub type Synthetic = SyntheticDataCollection<f64>;
pub type Surrogate = PceSurrogate<f64>;
pub type Family = SurrogateFamily<f64>;
pub type Archive = SurrogateArchive<f64>;
pub type Samples = Matrix<f64>;
pub type McmcChain = Chain<f64>;
pub type Sensitivity = SensitivityTable<f64>;
pub type Consistency = ConsistencyReport<f64>;
pub type Pushforward = PushforwardSummary<f64>;
