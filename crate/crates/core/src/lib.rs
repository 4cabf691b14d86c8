//! Variance-reduced Monte Carlo estimation via antithetic and
//! moment-constrained sampling, with a scalar reverse-mode gradient tape
//! so samples stay differentiable with respect to distribution
//! parameters.

pub mod antithetic;
pub mod autodiff;
pub mod constrained;
pub mod error;
pub mod randkit;
pub mod stats;
pub mod transforms;
pub mod vi;

pub use autodiff::{Real, Tape, Var};
pub use error::{Error, Result};
