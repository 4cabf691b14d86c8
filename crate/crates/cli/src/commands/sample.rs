//! `sample`: draw one scalar Gaussian batch, optionally with its
//! antithetic half, and emit it as CSV.

use antikit::antithetic::{
    antithetic_mean, antithetic_sample, antithetic_variance_exact, sample_moments,
    PopulationMoments, VarianceMode,
};
use antikit::constrained::{cheng_sample, MomentSpec, Provenance, SampleBatch};
use antikit::randkit::RngStream;
use antikit::vi::DrawMode;
use antikit::{Error, Result};
use clap::Args;

use crate::commands::{parse_mode, parse_scaling};
use crate::config;
use crate::exit;

#[derive(Args)]
pub struct SampleArgs {
    /// JSON config file; flags override its fields
    #[arg(long)]
    config: Option<String>,
    /// iid, antithetic-exact, antithetic-hw, or cheng
    #[arg(long)]
    mode: Option<String>,
    /// Total batch size (antithetic modes: k/2 first + k/2 antithetic)
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// corrected or paper-faithful
    #[arg(long)]
    scaling: Option<String>,
    /// Output path, or - for stdout
    #[arg(long)]
    out: Option<String>,
}

pub fn run(args: SampleArgs) -> Result<i32> {
    let cfg = match &args.config {
        Some(p) => config::load(p)?,
        None => Default::default(),
    };
    let mode_s = config::resolve(args.mode, &cfg, "mode", config::as_string, "iid".into())?;
    let mode = parse_mode(&mode_s)?;
    let k = config::resolve(args.k, &cfg, "k", config::as_usize, 8)?;
    let mu = config::resolve(args.mu, &cfg, "mu", config::as_f64, 0.0)?;
    let sigma2 = config::resolve(args.sigma2, &cfg, "sigma2", config::as_f64, 1.0)?;
    let seed = config::resolve(args.seed, &cfg, "seed", config::as_u64, config::default_seed()?)?;
    let scaling_s =
        config::resolve(args.scaling, &cfg, "scaling", config::as_string, "corrected".into())?;
    let scaling = parse_scaling(&scaling_s)?;
    let out = config::resolve(args.out, &cfg, "out", config::as_string, "-".into())?;

    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    if mode.is_antithetic() && (k % 2 != 0 || k < 6) {
        return Err(Error::Config(format!(
            "antithetic modes need k even and k >= 6 (each half needs at least 3), got {k}"
        )));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Config(format!("sigma2 must be a positive number, got {sigma2}")));
    }

    let mut stream = RngStream::new(seed, 0);
    let sigma = sigma2.sqrt();
    let mut rows = String::from("index,value,half\n");
    match mode {
        DrawMode::Iid => {
            for i in 0..k {
                let v = mu + sigma * stream.next_normal();
                rows.push_str(&format!("{i},{v},first\n"));
            }
        }
        _ => {
            let half = k / 2;
            let first = SampleBatch::new(
                (0..half).map(|_| mu + sigma * stream.next_normal()).collect::<Vec<f64>>(),
                Provenance::Iid,
            );
            let pop = PopulationMoments::new(mu, sigma2)?;
            let second = match mode {
                DrawMode::AntitheticExact | DrawMode::AntitheticHw => {
                    let eps: Vec<f64> = (0..half - 1).map(|_| stream.next_normal()).collect();
                    let vm = if mode == DrawMode::AntitheticExact {
                        VarianceMode::Exact
                    } else {
                        VarianceMode::HawkinsWixley
                    };
                    antithetic_sample(&first, &pop, &eps, vm, scaling)?
                }
                DrawMode::Cheng => {
                    let z: Vec<f64> = (0..half - 1).map(|_| stream.next_normal()).collect();
                    let bits: Vec<bool> = (0..half - 1).map(|_| stream.next_bool()).collect();
                    let m = sample_moments(&first)?;
                    let eta_p = antithetic_mean(&m.eta, &pop.mu);
                    let var = antithetic_variance_exact(&m.delta2, &pop.sigma2, m.k, scaling)?;
                    let spec = MomentSpec::new(eta_p, var.delta2, m.k)?;
                    cheng_sample(&z, &bits, &pop.mu, &pop.sigma2, &spec)?
                }
                DrawMode::Iid => unreachable!(),
            };
            for (i, v) in first.values.iter().enumerate() {
                rows.push_str(&format!("{i},{v},first\n"));
            }
            for (i, v) in second.values.iter().enumerate() {
                rows.push_str(&format!("{},{v},antithetic\n", half + i));
            }
        }
    }
    config::write_output(&out, &rows)?;
    Ok(exit::OK)
}
