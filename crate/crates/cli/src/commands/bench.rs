//! `variance-bench`: estimator variance across batch size, latent
//! dimension, and draw mode, as CSV.

use antikit::antithetic::Chi2Scaling;
use antikit::randkit::RngStream;
use antikit::vi::{
    antivae_draw, grad_estimators, DrawMode, EstimatorConfig, Model, Objective,
};
use antikit::{Error, Result};
use clap::Args;

use crate::commands::{mode_name, parse_mode, parse_scaling};
use crate::config;
use crate::exit;

#[derive(Args)]
pub struct BenchArgs {
    /// JSON config file; flags override its fields
    #[arg(long)]
    config: Option<String>,
    /// Comma-separated batch sizes
    #[arg(long)]
    ks: Option<String>,
    /// Comma-separated latent dimensions
    #[arg(long)]
    ds: Option<String>,
    /// Restrict to one draw mode
    #[arg(long)]
    mode: Option<String>,
    /// Restrict to one estimator: mean or grad_sigma
    #[arg(long)]
    estimator: Option<String>,
    /// Replications per cell
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// corrected or paper-faithful
    #[arg(long)]
    scaling: Option<String>,
    /// Output path, or - for stdout
    #[arg(long)]
    out: Option<String>,
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{what} list entry {t:?} is not an integer")))
        })
        .collect()
}

fn mean_and_variance(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Sample mean of all k*d latent coordinates under a fixed encoder.
fn mean_estimator(
    model: &Model,
    x: &[f64],
    k: usize,
    mode: DrawMode,
    scaling: Chi2Scaling,
    stream: &mut RngStream,
) -> Result<f64> {
    let post = model.encode(&model.params, x)?;
    let zs = antivae_draw(&post, k, mode, true, scaling, stream)?;
    let d = x.len();
    let total: f64 = zs.iter().flat_map(|z| z.iter()).sum();
    Ok(total / (k * d) as f64)
}

pub fn run(args: BenchArgs) -> Result<i32> {
    let cfg = match &args.config {
        Some(p) => config::load(p)?,
        None => Default::default(),
    };
    let ks_s = config::resolve(args.ks, &cfg, "ks", config::as_string, "8,16".into())?;
    let ds_s = config::resolve(args.ds, &cfg, "ds", config::as_string, "1,2".into())?;
    let mode_s = config::resolve(args.mode, &cfg, "mode", config::as_string, String::new())?;
    let est_s =
        config::resolve(args.estimator, &cfg, "estimator", config::as_string, String::new())?;
    let reps = config::resolve(args.reps, &cfg, "reps", config::as_usize, 2000)?;
    let seed = config::resolve(args.seed, &cfg, "seed", config::as_u64, config::default_seed()?)?;
    let scaling_s =
        config::resolve(args.scaling, &cfg, "scaling", config::as_string, "corrected".into())?;
    let scaling = parse_scaling(&scaling_s)?;
    let out = config::resolve(args.out, &cfg, "out", config::as_string, "-".into())?;

    let ks = parse_list(&ks_s, "k")?;
    let ds = parse_list(&ds_s, "d")?;
    if ks.is_empty() || ds.is_empty() || reps < 2 {
        return Err(Error::Config("need non-empty k/d lists and reps >= 2".into()));
    }
    let modes: Vec<DrawMode> = if mode_s.is_empty() {
        vec![DrawMode::Iid, DrawMode::AntitheticExact, DrawMode::AntitheticHw, DrawMode::Cheng]
    } else {
        vec![parse_mode(&mode_s)?]
    };
    let estimators: Vec<&str> = match est_s.as_str() {
        "" => vec!["mean", "grad_sigma"],
        "mean" => vec!["mean"],
        "grad_sigma" => vec!["grad_sigma"],
        other => {
            return Err(Error::Config(format!(
                "unknown estimator {other:?} (expected mean or grad_sigma)"
            )))
        }
    };

    let mut rows = String::from("k,d,mode,estimator,variance,mean\n");
    let mut combo = 0u64;
    for &k in &ks {
        for &d in &ds {
            let mut model = Model::new_conjugate(d)?;
            model.params = vec![0.4, 0.0, 0.15];
            let x = vec![0.9; d];
            for &mode in &modes {
                if mode.is_antithetic() && (k % 2 != 0 || k < 6) {
                    return Err(Error::Config(format!(
                        "antithetic modes need k even and k >= 6, got k = {k}"
                    )));
                }
                for est in &estimators {
                    combo += 1;
                    let mut stream = RngStream::new(seed, 0x100 + combo);
                    let mut vals = Vec::with_capacity(reps);
                    for _ in 0..reps {
                        let v = match *est {
                            "mean" => mean_estimator(&model, &x, k, mode, scaling, &mut stream)?,
                            _ => {
                                let ec = EstimatorConfig {
                                    k,
                                    mode,
                                    objective: Objective::Elbo,
                                    differentiable_antithetics: true,
                                    scaling,
                                };
                                grad_estimators(&x, &model, &ec, &mut stream)?.grads[2]
                            }
                        };
                        vals.push(v);
                    }
                    let (mean, var) = mean_and_variance(&vals);
                    rows.push_str(&format!(
                        "{k},{d},{},{est},{var:e},{mean}\n",
                        mode_name(mode)
                    ));
                }
            }
        }
    }
    config::write_output(&out, &rows)?;
    Ok(exit::OK)
}
