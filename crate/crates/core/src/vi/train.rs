//! Minibatch training loop over the VI objectives, with deterministic
//! per-seed shuffling, divergence detection, and the sample-diversity
//! diagnostic.

use crate::antithetic::Chi2Scaling;
use crate::error::{Error, Result};
use crate::randkit::RngStream;
use crate::vi::dataset::{Dataset, DatasetKind};
use crate::vi::estimators::{
    antivae_draw, grad_estimators, DrawMode, EstimatorConfig, Objective,
};
use crate::vi::model::Model;

/// Optimizer choice. SGD with momentum is the baseline; Adam is kept as
/// a preset.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "optimizer")]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Sgd { momentum: 0.9 }
    }
}

impl OptimizerKind {
    /// The conventional Adam setting.
    pub fn adam_preset() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Full training configuration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub k: usize,
    pub d: usize,
    pub mode: DrawMode,
    pub objective: Objective,
    pub differentiable_antithetics: bool,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default, skip)]
    pub scaling: Chi2Scaling,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 || self.batch_size == 0 {
            return Err(Error::Config("k, d, and batch_size must be positive".into()));
        }
        if self.mode.is_antithetic() && (!self.k.is_multiple_of(2) || self.k < 6) {
            return Err(Error::Config(format!(
                "antithetic modes need k even and k >= 6, got k = {}",
                self.k
            )));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::Config(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        Ok(())
    }
}

/// One row of the training trace.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub wallclock_ms: f64,
}

/// Final state of a run. `diverged` carries the epoch at which a
/// non-finite objective or gradient appeared; the trace up to that point
/// is retained.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: Model,
    pub trace: Vec<EpochRecord>,
    pub diverged: Option<usize>,
}

fn initial_model(dataset: &Dataset, config: &TrainConfig) -> Result<Model> {
    match dataset.kind {
        DatasetKind::Conjugate1d => {
            if config.d != 1 {
                return Err(Error::Config(format!(
                    "conjugate1d is one-dimensional, got d = {}",
                    config.d
                )));
            }
            Model::new_conjugate(1)
        }
        DatasetKind::Bars6x6 => Model::new_bars(config.d, 16, config.seed),
    }
}

struct OptState {
    velocity: Vec<f64>,
    second: Vec<f64>,
    step: usize,
}

fn apply_update(
    model: &mut Model,
    grads: &[f64],
    config: &TrainConfig,
    state: &mut OptState,
) {
    state.step += 1;
    match config.optimizer {
        OptimizerKind::Sgd { momentum } => {
            for (i, &g) in grads.iter().enumerate() {
                state.velocity[i] = momentum * state.velocity[i] + g;
                model.params[i] += config.lr * state.velocity[i];
            }
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            let t = state.step as f64;
            for (i, &g) in grads.iter().enumerate() {
                state.velocity[i] = beta1 * state.velocity[i] + (1.0 - beta1) * g;
                state.second[i] = beta2 * state.second[i] + (1.0 - beta2) * g * g;
                let mhat = state.velocity[i] / (1.0 - beta1.powf(t));
                let vhat = state.second[i] / (1.0 - beta2.powf(t));
                model.params[i] += config.lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

fn train_loop<F>(
    dataset: &Dataset,
    config: &TrainConfig,
    mut after_epoch: F,
) -> Result<TrainResult>
where
    F: FnMut(usize, &Model),
{
    config.validate()?;
    if dataset.items.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let mut model = initial_model(dataset, config)?;
    let est_cfg = EstimatorConfig {
        k: config.k,
        mode: config.mode,
        objective: config.objective,
        differentiable_antithetics: config.differentiable_antithetics,
        scaling: config.scaling,
    };
    let mut state = OptState {
        velocity: vec![0.0; model.n_params()],
        second: vec![0.0; model.n_params()],
        step: 0,
    };
    let mut trace = Vec::with_capacity(config.epochs);
    let mut diverged = None;
    after_epoch(0, &model);

    'epochs: for epoch in 1..=config.epochs {
        let started = std::time::Instant::now();
        let mut shuffle_stream = RngStream::new(config.seed, 2 * epoch as u64);
        let mut draw_stream = RngStream::new(config.seed, 2 * epoch as u64 + 1);
        let order = shuffle_stream.shuffled_indices(dataset.items.len());
        let mut epoch_obj = 0.0;
        let mut count = 0usize;
        for batch in order.chunks(config.batch_size) {
            let mut grads = vec![0.0; model.n_params()];
            let mut batch_obj = 0.0;
            for &i in batch {
                // runaway parameters surface as non-finite tapes or
                // degenerate distribution arguments; both mean divergence
                let g = match grad_estimators(&dataset.items[i], &model, &est_cfg, &mut draw_stream)
                {
                    Ok(g) => g,
                    Err(Error::NonFinite { .. })
                    | Err(Error::Degenerate(_))
                    | Err(Error::Domain(_)) => {
                        diverged = Some(epoch);
                        break 'epochs;
                    }
                    Err(e) => return Err(e),
                };
                for (acc, gi) in grads.iter_mut().zip(&g.grads) {
                    *acc += gi / batch.len() as f64;
                }
                batch_obj += g.objective;
            }
            epoch_obj += batch_obj;
            count += batch.len();
            if grads.iter().any(|g| !g.is_finite()) || !batch_obj.is_finite() {
                diverged = Some(epoch);
                break 'epochs;
            }
            apply_update(&mut model, &grads, config, &mut state);
        }
        let objective = epoch_obj / count as f64;
        trace.push(EpochRecord {
            epoch,
            objective,
            wallclock_ms: started.elapsed().as_secs_f64() * 1000.0,
        });
        if !objective.is_finite() {
            diverged = Some(epoch);
            break;
        }
        after_epoch(epoch, &model);
    }
    Ok(TrainResult { model, trace, diverged })
}

/// Train a model on the dataset; ascent on the configured objective.
/// Deterministic per seed (the `wallclock_ms` trace column aside).
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainResult> {
    train_loop(dataset, config, |_, _| {})
}

/// Variance of the first k/2 (non-antithetic) samples, one number per
/// checkpoint epoch, for each of three regimes: iid sampling,
/// non-differentiable antithetics, and differentiable antithetics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DiversityReport {
    pub epochs: Vec<usize>,
    pub iid: Vec<f64>,
    pub nondiff: Vec<f64>,
    pub diff: Vec<f64>,
}

/// Average divide-by-(k/2) variance of the first k/2 samples across the
/// dataset and latent dimensions, at the model's current parameters.
fn first_half_variance(
    model: &Model,
    dataset: &Dataset,
    config: &TrainConfig,
    stream: &mut RngStream,
) -> Result<f64> {
    let half = config.k / 2;
    let mut total = 0.0;
    let mut count = 0usize;
    for x in &dataset.items {
        let post = model.encode(&model.params, x)?;
        let zs = antivae_draw(
            &post,
            config.k,
            config.mode,
            config.differentiable_antithetics,
            config.scaling,
            stream,
        )?;
        for j in 0..post.d() {
            let col: Vec<f64> = zs[..half].iter().map(|z| z[j]).collect();
            let m = col.iter().sum::<f64>() / half as f64;
            total += col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / half as f64;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Train the three regimes from the same seed and record the first-half
/// sample variance at each checkpoint epoch.
pub fn diversity_report(
    dataset: &Dataset,
    config: &TrainConfig,
    checkpoints: &[usize],
) -> Result<DiversityReport> {
    config.validate()?;
    if !config.mode.is_antithetic() {
        return Err(Error::Config(
            "diversity report needs an antithetic mode as its base config".into(),
        ));
    }
    let run = |mode: DrawMode, differentiable: bool| -> Result<Vec<f64>> {
        let cfg = TrainConfig { mode, differentiable_antithetics: differentiable, ..config.clone() };
        let mut out = Vec::new();
        train_loop(dataset, &cfg, |epoch, model| {
            if checkpoints.contains(&epoch) {
                // measurement stream depends only on seed and epoch, so all
                // three regimes see identical noise at matched checkpoints
                let mut s = RngStream::new(cfg.seed, 0x4000 + epoch as u64);
                out.push(
                    first_half_variance(model, dataset, &cfg, &mut s)
                        .expect("measurement uses the same shapes as training"),
                );
            }
        })?;
        Ok(out)
    };
    let iid = run(DrawMode::Iid, true)?;
    let nondiff = run(config.mode, false)?;
    let diff = run(config.mode, true)?;
    Ok(DiversityReport { epochs: checkpoints.to_vec(), iid, nondiff, diff })
}
