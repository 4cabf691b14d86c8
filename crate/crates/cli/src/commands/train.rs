//! `train`: fit a toy VI model on a synthetic dataset, writing a
//! per-epoch trace CSV and the final model as JSON. Exit 4 on
//! divergence (the partial trace is still written).

use antikit::vi::{
    make_synthetic_dataset, train, DatasetKind, OptimizerKind, TrainConfig, TrainResult,
};
use antikit::{Error, Result};
use clap::Args;

use crate::commands::{mode_name, parse_mode, parse_objective, parse_scaling};
use crate::config;
use crate::exit;

#[derive(Args)]
pub struct TrainArgs {
    /// JSON config file; flags override its fields
    #[arg(long)]
    config: Option<String>,
    /// bars6x6 or conjugate1d
    #[arg(long)]
    dataset: Option<String>,
    /// iid, antithetic-exact, antithetic-hw, or cheng
    #[arg(long)]
    mode: Option<String>,
    /// elbo or iwae
    #[arg(long)]
    objective: Option<String>,
    /// Samples per datum per epoch
    #[arg(long)]
    k: Option<usize>,
    /// Latent dimension
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Dataset size
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// corrected or paper-faithful
    #[arg(long)]
    scaling: Option<String>,
    /// sgd or adam
    #[arg(long)]
    optimizer: Option<String>,
    /// Treat the antithetic half as a constant in the gradient
    #[arg(long)]
    non_differentiable: bool,
    /// Trace CSV path, or - for stdout
    #[arg(long)]
    trace_out: Option<String>,
    /// Final model JSON path; omit to skip
    #[arg(long)]
    model_out: Option<String>,
}

fn parse_dataset(s: &str) -> Result<DatasetKind> {
    match s {
        "bars6x6" => Ok(DatasetKind::Bars6x6),
        "conjugate1d" => Ok(DatasetKind::Conjugate1d),
        other => Err(Error::Config(format!(
            "unknown dataset {other:?} (expected bars6x6 or conjugate1d)"
        ))),
    }
}

fn trace_csv(result: &TrainResult, mode: &str, seed: u64) -> String {
    let mut rows = String::from("epoch,objective,mode,seed,wallclock_ms\n");
    for r in &result.trace {
        rows.push_str(&format!("{},{},{mode},{seed},{}\n", r.epoch, r.objective, r.wallclock_ms));
    }
    rows
}

pub fn run(args: TrainArgs) -> Result<i32> {
    let cfg = match &args.config {
        Some(p) => config::load(p)?,
        None => Default::default(),
    };
    let dataset_s =
        config::resolve(args.dataset, &cfg, "dataset", config::as_string, "conjugate1d".into())?;
    let kind = parse_dataset(&dataset_s)?;
    let mode_s = config::resolve(args.mode, &cfg, "mode", config::as_string, "iid".into())?;
    let mode = parse_mode(&mode_s)?;
    let objective_s =
        config::resolve(args.objective, &cfg, "objective", config::as_string, "elbo".into())?;
    let objective = parse_objective(&objective_s)?;
    let k = config::resolve(args.k, &cfg, "k", config::as_usize, 8)?;
    let default_d = match kind {
        DatasetKind::Conjugate1d => 1,
        DatasetKind::Bars6x6 => 2,
    };
    let d = config::resolve(args.d, &cfg, "d", config::as_usize, default_d)?;
    let epochs = config::resolve(args.epochs, &cfg, "epochs", config::as_usize, 40)?;
    let lr = config::resolve(args.lr, &cfg, "lr", config::as_f64, 0.05)?;
    let batch_size = config::resolve(args.batch_size, &cfg, "batch_size", config::as_usize, 16)?;
    let n = config::resolve(args.n, &cfg, "n", config::as_usize, 256)?;
    let seed = config::resolve(args.seed, &cfg, "seed", config::as_u64, config::default_seed()?)?;
    let scaling_s =
        config::resolve(args.scaling, &cfg, "scaling", config::as_string, "corrected".into())?;
    let scaling = parse_scaling(&scaling_s)?;
    let optimizer_s =
        config::resolve(args.optimizer, &cfg, "optimizer", config::as_string, "sgd".into())?;
    let optimizer = match optimizer_s.as_str() {
        "sgd" => OptimizerKind::default(),
        "adam" => OptimizerKind::adam_preset(),
        other => {
            return Err(Error::Config(format!("unknown optimizer {other:?} (expected sgd or adam)")))
        }
    };
    let trace_out =
        config::resolve(args.trace_out, &cfg, "trace_out", config::as_string, "-".into())?;
    let model_out = match args.model_out {
        Some(p) => Some(p),
        None => cfg.get("model_out").and_then(config::as_string),
    };

    if !(lr.is_finite() && lr >= 0.0) {
        return Err(Error::Config(format!("lr must be a non-negative number, got {lr}")));
    }
    if epochs == 0 {
        return Err(Error::Config("epochs must be positive".into()));
    }

    let dataset = make_synthetic_dataset(kind, n, seed)?;
    let train_cfg = TrainConfig {
        k,
        d,
        mode,
        objective,
        differentiable_antithetics: !args.non_differentiable,
        epochs,
        lr,
        batch_size,
        seed,
        optimizer,
        scaling,
    };
    let result = train(&dataset, &train_cfg)?;

    config::write_output(&trace_out, &trace_csv(&result, mode_name(mode), seed))?;
    if let Some(path) = &model_out {
        let json = serde_json::to_string_pretty(&result.model).expect("model serializes");
        config::write_output(path, &format!("{json}\n"))?;
    }
    match result.diverged {
        Some(epoch) => {
            eprintln!("diverged at epoch {epoch}");
            Ok(exit::DIVERGED)
        }
        None => Ok(exit::OK),
    }
}
