//! Desk-scale variational inference harness built on the antithetic
//! samplers: synthetic datasets, a small Bernoulli decoder, ELBO/IWAE
//! estimators, and a training loop with per-epoch traces.

pub mod dataset;
pub mod estimators;
pub mod model;
pub mod train;

pub use dataset::{
    conjugate_log_evidence, conjugate_marginal_cdf, conjugate_posterior, make_synthetic_dataset,
    Dataset, DatasetKind,
};
pub use estimators::{
    antivae_draw, elbo_estimate, grad_estimators, iwae_estimate, marginal_loglik, DrawMode,
    EstimatorConfig, EstimatorReport, GradEstimate, Objective,
};
pub use model::{Activation, GaussianPosterior, MlpSpec, Model, ModelKind};
pub use train::{
    diversity_report, train, DiversityReport, EpochRecord, OptimizerKind, TrainConfig, TrainResult,
};
