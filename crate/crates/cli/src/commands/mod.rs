//! Subcommand implementations.

pub mod bench;
pub mod diagnose;
pub mod sample;
pub mod train;

use antikit::antithetic::Chi2Scaling;
use antikit::vi::{DrawMode, Objective};
use antikit::{Error, Result};

pub fn parse_mode(s: &str) -> Result<DrawMode> {
    match s {
        "iid" => Ok(DrawMode::Iid),
        "antithetic-exact" => Ok(DrawMode::AntitheticExact),
        "antithetic-hw" => Ok(DrawMode::AntitheticHw),
        "cheng" => Ok(DrawMode::Cheng),
        other => Err(Error::Config(format!(
            "unknown mode {other:?} (expected iid, antithetic-exact, antithetic-hw, or cheng)"
        ))),
    }
}

pub fn mode_name(mode: DrawMode) -> &'static str {
    match mode {
        DrawMode::Iid => "iid",
        DrawMode::AntitheticExact => "antithetic-exact",
        DrawMode::AntitheticHw => "antithetic-hw",
        DrawMode::Cheng => "cheng",
    }
}

pub fn parse_scaling(s: &str) -> Result<Chi2Scaling> {
    match s {
        "corrected" => Ok(Chi2Scaling::Corrected),
        "paper-faithful" => Ok(Chi2Scaling::PaperFaithful),
        other => Err(Error::Config(format!(
            "unknown scaling {other:?} (expected corrected or paper-faithful)"
        ))),
    }
}

pub fn parse_objective(s: &str) -> Result<Objective> {
    match s {
        "elbo" => Ok(Objective::Elbo),
        "iwae" => Ok(Objective::Iwae),
        other => Err(Error::Config(format!("unknown objective {other:?} (expected elbo or iwae)"))),
    }
}
