//! False negative control screening for high-dimensional Gaussian statistics
//! under arbitrary dependence, with calibration, signal-proportion estimation,
//! a simulation laboratory and a two-stage screening/confirmation pipeline.

pub mod calibration;
pub mod classify;
pub mod error;
pub mod normal;
pub mod proportion;
pub mod reproduce;
pub mod rng;
pub mod screening;
pub mod simlab;
pub mod statistic;
pub mod twostage;

pub use calibration::{bounding_sequences, calibrate_model, simulate_null_ensemble, BoundingSequences, NullEnsemble};
pub use classify::{classify, fm_index, metrics, ClassificationCounts, GroundTruth, Metrics};
pub use error::{FncError, Result};
pub use proportion::{estimate_proportion, pi_hat_discretized, pi_hat_pvalue_form, ProportionEstimate};
pub use screening::{bh_fdr, bonferroni, fnc_screen, fnc_screen_estimated, fnp_hat, Method, SSource, SelectionResult};
pub use statistic::{Scale, Sidedness, StatisticVector};
pub use twostage::{run_two_stage, TwoStageConfig, TwoStageResult};
