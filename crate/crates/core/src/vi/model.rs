//! Small generative models: a d-dimensional conjugate Gaussian model
//! with a linear amortized encoder, and an MLP encoder/decoder pair with
//! a Bernoulli likelihood for the bars corpus.

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::randkit::RngStream;

const LN_2PI: f64 = 1.8378770664093453;

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

/// Fully connected network: `sizes[0]` inputs through hidden layers to
/// `sizes.last()` linear outputs.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MlpSpec {
    pub sizes: Vec<usize>,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(MlpSpec { sizes, activation })
    }

    /// Total parameter count: one weight matrix plus bias per layer.
    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Forward pass over a flat parameter slice laid out layer by layer,
    /// each layer as `out x in` row-major weights followed by `out`
    /// biases.
    pub fn forward<T: Real>(&self, params: &[T], input: &[T]) -> Result<Vec<T>> {
        if params.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        if input.len() != self.sizes[0] {
            return Err(Error::Shape(format!(
                "expected {} inputs, got {}",
                self.sizes[0],
                input.len()
            )));
        }
        let mut act = input.to_vec();
        let mut off = 0;
        let n_layers = self.sizes.len() - 1;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let mut acc = params[off + n_in * n_out + j].clone(); // bias
                for (i, a) in act.iter().enumerate() {
                    acc = acc + params[off + j * n_in + i].clone() * a.clone();
                }
                if l + 1 < n_layers {
                    acc = match self.activation {
                        Activation::Tanh => acc.tanh(),
                        Activation::Relu => acc.relu(),
                    };
                }
                next.push(acc);
            }
            off += (n_in + 1) * n_out;
            act = next;
        }
        Ok(act)
    }
}

/// Amortized Gaussian posterior over the latent vector.
#[derive(Debug, Clone)]
pub struct GaussianPosterior<T> {
    pub mu: Vec<T>,
    pub log_sigma: Vec<T>,
}

impl<T: Real> GaussianPosterior<T> {
    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma2(&self, j: usize) -> T {
        self.log_sigma[j].scale(2.0).exp()
    }

    /// log q(z | x) under the diagonal Gaussian.
    pub fn log_q(&self, z: &[T]) -> Result<T> {
        if z.len() != self.d() {
            return Err(Error::Shape(format!("latent dim {} vs {}", z.len(), self.d())));
        }
        let mut acc = self.mu[0].lit(-0.5 * LN_2PI * self.d() as f64);
        for (zj, (mu, ls)) in z.iter().zip(self.mu.iter().zip(&self.log_sigma)) {
            let diff = zj.clone() - mu.clone();
            let inv_var = ls.scale(-2.0).exp();
            acc = acc - ls.clone() - diff.clone() * diff * inv_var.scale(0.5);
        }
        Ok(acc)
    }
}

/// Which generative model the parameters describe.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub enum ModelKind {
    /// x ~ N(z, I_d), z ~ N(0, I_d). Encoder is linear per dimension:
    /// mu_j = a x_j + b, log_sigma_j = c; params = [a, b, c].
    Conjugate { d: usize },
    /// Bernoulli decoder over binary vectors; MLP encoder emits
    /// [mu, log_sigma].
    Bars { enc: MlpSpec, dec: MlpSpec, d: usize },
}

/// A model: its architecture plus a flat parameter vector.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    pub params: Vec<f64>,
}

const LOGIT_CLAMP: f64 = 10.0;

impl Model {
    pub fn new_conjugate(d: usize) -> Result<Model> {
        if d == 0 {
            return Err(Error::Config("latent dimension must be positive".into()));
        }
        Ok(Model { kind: ModelKind::Conjugate { d }, params: vec![0.0, 0.0, 0.0] })
    }

    /// Conjugate model with the encoder set to the exact posterior:
    /// mu = x/2, sigma2 = 1/2.
    pub fn conjugate_exact_posterior(d: usize) -> Result<Model> {
        let mut m = Model::new_conjugate(d)?;
        m.params = vec![0.5, 0.0, 0.5_f64.sqrt().ln()];
        Ok(m)
    }

    pub fn new_bars(d: usize, hidden: usize, seed: u64) -> Result<Model> {
        if d == 0 || hidden == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        let enc = MlpSpec::new(vec![36, hidden, 2 * d], Activation::Tanh)?;
        let dec = MlpSpec::new(vec![d, hidden, 36], Activation::Tanh)?;
        let n = enc.n_params() + dec.n_params();
        let mut s = RngStream::new(seed, 0x1417);
        let params = (0..n).map(|_| 0.1 * s.next_normal()).collect();
        Ok(Model { kind: ModelKind::Bars { enc, dec, d }, params })
    }

    pub fn latent_dim(&self) -> usize {
        match &self.kind {
            ModelKind::Conjugate { d } => *d,
            ModelKind::Bars { d, .. } => *d,
        }
    }

    pub fn data_dim(&self) -> usize {
        match &self.kind {
            ModelKind::Conjugate { d } => *d,
            ModelKind::Bars { .. } => 36,
        }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Amortized posterior for one datum, over a lifted parameter slice.
    pub fn encode<T: Real>(&self, params: &[T], x: &[f64]) -> Result<GaussianPosterior<T>> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        if x.len() != self.data_dim() {
            return Err(Error::Shape(format!("datum dim {} vs {}", x.len(), self.data_dim())));
        }
        match &self.kind {
            ModelKind::Conjugate { d } => {
                let (a, b, c) = (&params[0], &params[1], &params[2]);
                let mu = x.iter().map(|&xj| a.clone().scale(xj) + b.clone()).collect();
                let log_sigma = vec![c.clone(); *d];
                Ok(GaussianPosterior { mu, log_sigma })
            }
            ModelKind::Bars { enc, d, .. } => {
                let input: Vec<T> = x.iter().map(|&xi| params[0].lit(xi)).collect();
                let out = enc.forward(&params[..enc.n_params()], &input)?;
                let mu = out[..*d].to_vec();
                // keep the scale bounded so early training cannot blow up
                let log_sigma = out[*d..].iter().map(|v| v.clamp_const(-6.0, 6.0)).collect();
                Ok(GaussianPosterior { mu, log_sigma })
            }
        }
    }

    /// log p(x, z) = log p(z) + log p(x | z).
    pub fn log_joint<T: Real>(&self, params: &[T], x: &[f64], z: &[T]) -> Result<T> {
        if z.len() != self.latent_dim() {
            return Err(Error::Shape(format!("latent dim {} vs {}", z.len(), self.latent_dim())));
        }
        let d = self.latent_dim() as f64;
        let mut acc = z[0].lit(-0.5 * LN_2PI * d);
        for zj in z {
            acc = acc - zj.clone() * zj.scale(0.5); // standard normal prior
        }
        match &self.kind {
            ModelKind::Conjugate { d } => {
                acc = acc.shift(-0.5 * LN_2PI * *d as f64);
                for (zj, &xj) in z.iter().zip(x) {
                    let diff = zj.shift(-xj);
                    acc = acc - diff.clone() * diff.scale(0.5);
                }
            }
            ModelKind::Bars { enc, dec, .. } => {
                let logits = dec.forward(&params[enc.n_params()..], z)?;
                for (t, &xi) in logits.iter().zip(x) {
                    let t = t.clamp_const(-LOGIT_CLAMP, LOGIT_CLAMP);
                    // Bernoulli log-likelihood: x t - softplus(t)
                    acc = acc + t.scale(xi) - t.softplus();
                }
            }
        }
        Ok(acc)
    }
}
