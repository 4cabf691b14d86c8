//! Pushforwards that carry a Gaussian batch to other distributions while
//! keeping the map differentiable: CDF/inverse-CDF couplings to
//! log-normal, exponential, and Cauchy targets, plus planar and
//! Householder normalizing-flow layers.

use crate::antithetic::PopulationMoments;
use crate::autodiff::Real;
use crate::error::{Error, Result};

/// Map a Gaussian variate to a uniform in (0, 1) through its CDF,
/// clamped away from the endpoints so downstream inverse CDFs stay
/// finite.
pub fn gauss_to_uniform<T: Real>(x: &T, pop: &PopulationMoments<T>) -> T {
    let sigma = pop.sigma2.sqrt();
    let z = (x.clone() - pop.mu.clone()) / sigma;
    z.std_normal_cdf().clamp_const(1e-15, 1.0 - 1e-15)
}

/// Log-normal pushforward: x = exp(z) where z ~ N(mu, sigma2). Returns
/// the transformed value and its log density.
pub fn log_normal_fwd<T: Real>(z: &T, pop: &PopulationMoments<T>) -> Result<(T, T)> {
    if pop.sigma2.value() <= 0.0 {
        return Err(Error::Domain("log-normal scale must be positive".into()));
    }
    let x = z.exp();
    let d = z.clone() - pop.mu.clone();
    let log_density = d.clone() * d / pop.sigma2.scale(-2.0)
        - z.clone()
        + pop.mu.lit(-0.5 * (2.0 * std::f64::consts::PI * pop.sigma2.value()).ln());
    Ok((x, log_density))
}

/// Exponential pushforward: x = -ln(u)/rate, Exponential(rate) for
/// uniform u.
pub fn exponential_fwd<T: Real>(u: &T, rate: f64) -> Result<T> {
    if rate <= 0.0 {
        return Err(Error::Domain(format!("exponential rate must be positive, got {rate}")));
    }
    let uc = u.clamp_const(1e-15, 1.0 - 1e-15);
    Ok(uc.ln().scale(-1.0 / rate))
}

/// Flag-carrying result for transforms that can hit a pole.
#[derive(Debug, Clone)]
pub struct CauchyDraw<T> {
    pub value: T,
    /// True when u sat within 1e-12 of the tangent pole at 1/2 and was
    /// perturbed off it.
    pub perturbed: bool,
}

/// Cauchy pushforward, x = gamma (tan(pi u) + x0).
///
/// Note this is not the canonical x0 + gamma tan(pi (u - 1/2))
/// parameterization: the scale multiplies the location, and the tangent
/// pole sits at u = 1/2 rather than at the interval endpoints. Both
/// forms give Cauchy-family marginals for uniform u; this one is kept
/// for the location/scale semantics downstream code assumes.
pub fn cauchy_fwd<T: Real>(u: &T, x0: f64, gamma: f64) -> Result<CauchyDraw<T>> {
    if gamma <= 0.0 {
        return Err(Error::Domain(format!("Cauchy scale must be positive, got {gamma}")));
    }
    let uv = u.value();
    if !(0.0 < uv && uv < 1.0) {
        return Err(Error::Domain(format!("uniform input outside (0, 1): {uv}")));
    }
    // tan(pi u) has its pole at u = 1/2; nudge off it
    let perturbed = (uv - 0.5).abs() < 1e-12;
    let uu = if perturbed {
        if uv <= 0.5 {
            u.shift(0.5 - 1e-12 - uv)
        } else {
            u.shift(0.5 + 1e-12 - uv)
        }
    } else {
        u.clone()
    };
    let value = uu.scale(std::f64::consts::PI).tan().shift(x0).scale(gamma);
    Ok(CauchyDraw { value, perturbed })
}

/// Which closed-form pushforward a one-liner applies, with its
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum OneLinerParams {
    LogNormal,
    /// rate lambda > 0
    Exponential { lambda: f64 },
    /// location x0 and scale gamma > 0
    Cauchy { x0: f64, gamma: f64 },
}

impl OneLinerParams {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OneLinerParams::LogNormal => Ok(()),
            OneLinerParams::Exponential { lambda } if lambda > 0.0 => Ok(()),
            OneLinerParams::Exponential { lambda } => {
                Err(Error::Config(format!("exponential rate must be positive, got {lambda}")))
            }
            OneLinerParams::Cauchy { gamma, .. } if gamma > 0.0 => Ok(()),
            OneLinerParams::Cauchy { gamma, .. } => {
                Err(Error::Config(format!("Cauchy scale must be positive, got {gamma}")))
            }
        }
    }
}

/// Apply a one-liner to a Gaussian variate: log-normal exponentiates the
/// variate directly; exponential and Cauchy go through the Gaussian CDF
/// first so antithetic structure becomes (u, 1-u) pairs.
pub fn one_liner_fwd<T: Real>(
    z: &T,
    pop: &PopulationMoments<T>,
    params: &OneLinerParams,
) -> Result<T> {
    params.validate()?;
    match *params {
        OneLinerParams::LogNormal => Ok(log_normal_fwd(z, pop)?.0),
        OneLinerParams::Exponential { lambda } => {
            exponential_fwd(&gauss_to_uniform(z, pop), lambda)
        }
        OneLinerParams::Cauchy { x0, gamma } => {
            Ok(cauchy_fwd(&gauss_to_uniform(z, pop), x0, gamma)?.value)
        }
    }
}

/// Parameters of one planar flow layer acting on a scalar block:
/// z' = z + u_hat h(w . z + b), h = tanh, with u_hat reparameterized so
/// the layer is always invertible.
#[derive(Debug, Clone)]
pub struct PlanarFlowParams<T> {
    pub w: Vec<T>,
    pub u: Vec<T>,
    pub b: T,
}

impl<T: Real> PlanarFlowParams<T> {
    pub fn new(w: Vec<T>, u: Vec<T>, b: T) -> Result<Self> {
        if w.is_empty() || w.len() != u.len() {
            return Err(Error::Shape(format!(
                "planar flow needs matching nonempty w and u, got {} and {}",
                w.len(),
                u.len()
            )));
        }
        Ok(PlanarFlowParams { w, u, b })
    }

    /// u_hat = u + (softplus(w.u) - 1 - w.u) w / ||w||^2, which enforces
    /// w . u_hat >= -1 and hence invertibility of the layer.
    pub fn u_hat(&self) -> Result<Vec<T>> {
        let wu = dot(&self.w, &self.u);
        let w2 = dot(&self.w, &self.w);
        if w2.value() <= 0.0 {
            return Err(Error::Degenerate("planar flow weight vector is zero".into()));
        }
        let m = wu.softplus().shift(-1.0) - wu;
        let coef = m / w2;
        Ok(self
            .u
            .iter()
            .zip(&self.w)
            .map(|(ui, wi)| ui.clone() + coef.clone() * wi.clone())
            .collect())
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(a[0].lit(0.0), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Apply a planar flow layer. Returns the transformed point and the
/// log absolute determinant of the Jacobian.
pub fn planar_flow_fwd<T: Real>(z: &[T], p: &PlanarFlowParams<T>) -> Result<(Vec<T>, T)> {
    if z.len() != p.w.len() {
        return Err(Error::Shape(format!(
            "planar flow dimension {} does not match input {}",
            p.w.len(),
            z.len()
        )));
    }
    let u_hat = p.u_hat()?;
    let a = dot(&p.w, z) + p.b.clone();
    let h = a.tanh();
    let out: Vec<T> = z
        .iter()
        .zip(&u_hat)
        .map(|(zi, ui)| zi.clone() + ui.clone() * h.clone())
        .collect();
    // h'(a) = 1 - tanh^2(a); |det J| = |1 + h'(a) w . u_hat|
    let hp = h.lit(1.0) - h.clone() * h;
    let det = hp * dot(&p.w, &u_hat) + a.lit(1.0);
    let log_det = det.abs().clamp_const(1e-300, f64::INFINITY).ln();
    Ok((out, log_det))
}

/// Invert a planar flow layer numerically. The map is affine plus a rank
/// one term, so inversion reduces to a 1-D root solve in alpha = w . z.
pub fn planar_flow_inverse(z_out: &[f64], p: &PlanarFlowParams<f64>) -> Result<Vec<f64>> {
    let u_hat = p.u_hat()?;
    let wu = dot(&p.w, &u_hat);
    let wz_out = dot(&p.w, z_out);
    // solve alpha + wu * tanh(alpha + b) = w . z_out for alpha = w . z
    let g = |alpha: f64| alpha + wu * (alpha + p.b).tanh() - wz_out;
    let mut lo = wz_out - wu.abs() - 1.0;
    let mut hi = wz_out + wu.abs() + 1.0;
    if g(lo) > 0.0 || g(hi) < 0.0 {
        return Err(Error::Degenerate("planar flow inverse bracket failed".into()));
    }
    let mut alpha = 0.5 * (lo + hi);
    for _ in 0..200 {
        let ga = g(alpha);
        if ga.abs() < 1e-14 {
            break;
        }
        if ga > 0.0 {
            hi = alpha;
        } else {
            lo = alpha;
        }
        let gp = 1.0 + wu * (1.0 - (alpha + p.b).tanh().powi(2));
        let newton = alpha - ga / gp;
        alpha = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    let h = (alpha + p.b).tanh();
    Ok(z_out.iter().zip(&u_hat).map(|(zo, ui)| zo - ui * h).collect())
}

/// Householder reflection layer: z' = (I - 2 v vt / ||v||^2) z. Volume
/// preserving, so the log Jacobian determinant is zero.
#[derive(Debug, Clone)]
pub struct HouseholderFlowParams<T> {
    pub v: Vec<T>,
}

/// Apply a Householder reflection. Returns the reflected point; the log
/// determinant is identically zero.
pub fn householder_flow_fwd<T: Real>(z: &[T], p: &HouseholderFlowParams<T>) -> Result<Vec<T>> {
    if z.len() != p.v.len() || z.is_empty() {
        return Err(Error::Shape(format!(
            "householder dimension {} does not match input {}",
            p.v.len(),
            z.len()
        )));
    }
    let v2 = dot(&p.v, &p.v);
    if v2.value() <= 0.0 {
        return Err(Error::Degenerate("householder direction is zero".into()));
    }
    let vz = dot(&p.v, z);
    let coef = (vz / v2).scale(2.0);
    Ok(z.iter()
        .zip(&p.v)
        .map(|(zi, vi)| zi.clone() - coef.clone() * vi.clone())
        .collect())
}
