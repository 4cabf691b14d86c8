//! Monte Carlo objectives and gradient estimators: per-dimension
//! antithetic latent draws, ELBO and IWAE estimates, and an i.i.d.
//! importance-sampling estimate of the marginal log-likelihood.

use crate::antithetic::{antithetic_sample, sample_moments, Chi2Scaling, PopulationMoments, VarianceMode};
use crate::autodiff::{Real, Tape};
use crate::constrained::{cheng_sample, MomentSpec, Provenance, SampleBatch};
use crate::error::{Error, Result};
use crate::randkit::RngStream;
use crate::vi::model::{GaussianPosterior, Model};

/// How latent samples are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    Iid,
    AntitheticExact,
    AntitheticHw,
    Cheng,
}

impl DrawMode {
    pub fn is_antithetic(self) -> bool {
        !matches!(self, DrawMode::Iid)
    }
}

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Elbo,
    Iwae,
}

fn check_k(k: usize, mode: DrawMode) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    if mode.is_antithetic() && (!k.is_multiple_of(2) || k < 6) {
        return Err(Error::Config(format!(
            "antithetic modes need k even and k >= 6, got k = {k}"
        )));
    }
    Ok(())
}

/// Draw k latent d-vectors from the posterior. In antithetic modes each
/// dimension gets k/2 i.i.d. reparameterized draws followed by k/2
/// antithetic partners whose pooled per-dimension mean is exactly mu_j.
/// With `differentiable` false the antithetic half is detached from the
/// gradient tape without changing its values.
pub fn antivae_draw<T: Real>(
    post: &GaussianPosterior<T>,
    k: usize,
    mode: DrawMode,
    differentiable: bool,
    scaling: Chi2Scaling,
    stream: &mut RngStream,
) -> Result<Vec<Vec<T>>> {
    check_k(k, mode)?;
    let d = post.d();
    let mut columns: Vec<Vec<T>> = Vec::with_capacity(d);
    for j in 0..d {
        let mu = &post.mu[j];
        let sigma = post.log_sigma[j].exp();
        let draw_iid = |n: usize, stream: &mut RngStream| -> Vec<T> {
            (0..n)
                .map(|_| mu.clone() + sigma.clone().scale(stream.next_normal()))
                .collect()
        };
        let col = match mode {
            DrawMode::Iid => draw_iid(k, stream),
            _ => {
                let half = k / 2;
                let first = SampleBatch::new(draw_iid(half, stream), Provenance::Iid);
                let pop = PopulationMoments::new(mu.clone(), post.sigma2(j))?;
                let second = match mode {
                    DrawMode::AntitheticExact | DrawMode::AntitheticHw => {
                        let eps: Vec<T> =
                            (0..half - 1).map(|_| mu.lit(stream.next_normal())).collect();
                        let vm = if mode == DrawMode::AntitheticExact {
                            VarianceMode::Exact
                        } else {
                            VarianceMode::HawkinsWixley
                        };
                        antithetic_sample(&first, &pop, &eps, vm, scaling)?
                    }
                    DrawMode::Cheng => {
                        let z: Vec<T> =
                            (0..half - 1).map(|_| mu.lit(stream.next_normal())).collect();
                        let bits: Vec<bool> = (0..half - 1).map(|_| stream.next_bool()).collect();
                        let m = sample_moments(&first)?;
                        let eta_p = crate::antithetic::antithetic_mean(&m.eta, &pop.mu);
                        let var = crate::antithetic::antithetic_variance_exact(
                            &m.delta2,
                            &pop.sigma2,
                            m.k,
                            scaling,
                        )?;
                        let spec = MomentSpec::new(eta_p, var.delta2, m.k)?;
                        cheng_sample(&z, &bits, &pop.mu, &pop.sigma2, &spec)?
                    }
                    DrawMode::Iid => unreachable!(),
                };
                let mut col = first.values;
                if differentiable {
                    col.extend(second.values);
                } else {
                    col.extend(second.values.iter().map(|v| v.detach()));
                }
                col
            }
        };
        columns.push(col);
    }
    Ok((0..k).map(|i| (0..d).map(|j| columns[j][i].clone()).collect()).collect())
}

/// k-sample Monte Carlo ELBO: (1/k) sum_i [log p(x, z_i) - log q(z_i|x)].
pub fn elbo_estimate<T: Real>(
    model: &Model,
    params: &[T],
    post: &GaussianPosterior<T>,
    x: &[f64],
    zs: &[Vec<T>],
) -> Result<T> {
    if zs.is_empty() {
        return Err(Error::Config("ELBO needs at least one sample".into()));
    }
    let mut acc = post.mu[0].lit(0.0);
    for z in zs {
        acc = acc + model.log_joint(params, x, z)? - post.log_q(z)?;
    }
    Ok(acc.scale(1.0 / zs.len() as f64))
}

/// Importance-weighted objective: log[(1/k) sum_i w_i] with log-sum-exp
/// stabilization around the (detached) maximum log-weight.
pub fn iwae_estimate<T: Real>(
    model: &Model,
    params: &[T],
    post: &GaussianPosterior<T>,
    x: &[f64],
    zs: &[Vec<T>],
) -> Result<T> {
    if zs.is_empty() {
        return Err(Error::Config("IWAE needs at least one sample".into()));
    }
    let log_w: Vec<T> = zs
        .iter()
        .map(|z| Ok(model.log_joint(params, x, z)? - post.log_q(z)?))
        .collect::<Result<_>>()?;
    let m = log_w.iter().map(|w| w.value()).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::Degenerate("all importance weights are degenerate".into()));
    }
    let mut sum = log_w[0].lit(0.0);
    for w in &log_w {
        sum = sum + w.shift(-m).exp();
    }
    Ok(sum.ln().shift(m - (zs.len() as f64).ln()))
}

/// Configuration shared by the gradient-estimator helpers.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorConfig {
    pub k: usize,
    pub mode: DrawMode,
    pub objective: Objective,
    pub differentiable_antithetics: bool,
    pub scaling: Chi2Scaling,
}

/// One tape evaluation: the objective value and its gradient with
/// respect to every model parameter.
#[derive(Debug, Clone)]
pub struct GradEstimate {
    pub objective: f64,
    pub grads: Vec<f64>,
}

/// Reparameterized gradient of the configured objective for one datum.
pub fn grad_estimators(
    x: &[f64],
    model: &Model,
    cfg: &EstimatorConfig,
    stream: &mut RngStream,
) -> Result<GradEstimate> {
    check_k(cfg.k, cfg.mode)?;
    let tape = Tape::new();
    let params: Vec<_> = model.params.iter().map(|&p| tape.var(p)).collect();
    let post = model.encode(&params, x)?;
    let zs = antivae_draw(
        &post,
        cfg.k,
        cfg.mode,
        cfg.differentiable_antithetics,
        cfg.scaling,
        stream,
    )?;
    let obj = match cfg.objective {
        Objective::Elbo => elbo_estimate(model, &params, &post, x, &zs)?,
        Objective::Iwae => iwae_estimate(model, &params, &post, x, &zs)?,
    };
    let grads = obj.backward()?;
    Ok(GradEstimate {
        objective: obj.value(),
        grads: params.iter().map(|p| grads.wrt(p)).collect(),
    })
}

/// Importance-sampling estimate of log p(x) with n i.i.d. posterior
/// draws; pure f64, no tape.
pub fn marginal_loglik(x: &[f64], model: &Model, n: usize, stream: &mut RngStream) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("need at least one importance sample".into()));
    }
    let post = model.encode(&model.params, x)?;
    let d = post.d();
    let mut log_w = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..d)
            .map(|j| post.mu[j] + post.log_sigma[j].exp() * stream.next_normal())
            .collect();
        log_w.push(model.log_joint(&model.params, x, &z)? - post.log_q(&z)?);
    }
    let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::Degenerate("all importance weights are degenerate".into()));
    }
    let sum: f64 = log_w.iter().map(|w| (w - m).exp()).sum();
    Ok(m + sum.ln() - (n as f64).ln())
}

/// Summary of a replicated estimator: per-replication values plus their
/// mean, variance, and bias against an analytic truth when one exists.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EstimatorReport {
    pub estimator: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub bias: Option<f64>,
}

impl EstimatorReport {
    pub fn from_values(estimator: &str, values: Vec<f64>, truth: Option<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("estimator report needs at least one value".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(EstimatorReport {
            estimator: estimator.to_string(),
            values,
            mean,
            variance,
            bias: truth.map(|t| mean - t),
        })
    }
}
