//! Covariance models, dependence and sparsity calibration, Gaussian sampling
//! and the replication engine.

pub mod covariance;
pub mod dependence;
pub mod experiment;

pub use covariance::{build_covariance, sigma_l1_norm, sigma_l1_norm_direct, CovarianceKind, CovarianceModel, CovarianceSampler};
pub use dependence::{eta, mu_bounds, phase_boundary, phase_polyline, signal_count, Eta, Intensity, MuBounds, SparsitySpec};
pub use experiment::{run_experiment, CalibrationSpec, ExperimentConfig, MethodSpec, ReplicationSummary};
