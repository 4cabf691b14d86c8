//! Antithetic partners for Gaussian sample moments.
//!
//! Given the sample mean and sample variance of a batch drawn from
//! N(mu, sigma2), produce a second batch whose moments sit at the
//! mirrored quantiles: the mean is reflected about mu and the scaled
//! variance is pushed through the chi-squared CDF, flipped, and pulled
//! back. Realizing a batch at the new moments reuses the constrained
//! samplers from [`crate::constrained`].

use crate::autodiff::Real;
use crate::constrained::{marsaglia_sample, MomentSpec, Provenance, SampleBatch};
use crate::error::{Error, Result};
use crate::randkit::Dof;

/// Parameters of the generating Gaussian.
#[derive(Debug, Clone)]
pub struct PopulationMoments<T> {
    pub mu: T,
    pub sigma2: T,
}

impl<T: Real> PopulationMoments<T> {
    pub fn new(mu: T, sigma2: T) -> Result<Self> {
        if sigma2.value() <= 0.0 {
            return Err(Error::Domain(format!(
                "population variance must be positive, got {}",
                sigma2.value()
            )));
        }
        Ok(PopulationMoments { mu, sigma2 })
    }
}

/// Observed sample moments of a batch of size k (divide-by-k variance).
#[derive(Debug, Clone)]
pub struct SampleMoments<T> {
    pub eta: T,
    pub delta2: T,
    pub k: usize,
}

/// How the antithetic variance is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMode {
    /// Exact chi-squared CDF inversion.
    Exact,
    /// Fourth-root normalizing approximation; closed form, no CDF solve.
    HawkinsWixley,
}

/// Scaling convention relating the sample variance to a chi-squared
/// variate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Chi2Scaling {
    /// lambda = k delta2 / sigma2, exactly chi-squared with k-1 degrees
    /// of freedom under the divide-by-k variance convention.
    #[default]
    Corrected,
    /// lambda = (k-1) delta2 / sigma2.
    PaperFaithful,
}

impl Chi2Scaling {
    fn factor(self, k: usize) -> f64 {
        match self {
            Chi2Scaling::Corrected => k as f64,
            Chi2Scaling::PaperFaithful => (k - 1) as f64,
        }
    }
}

/// Sample mean and divide-by-k sample variance of a batch.
pub fn sample_moments<T: Real>(batch: &SampleBatch<T>) -> Result<SampleMoments<T>> {
    let k = batch.k();
    if k < 2 {
        return Err(Error::Domain(format!("need k >= 2 to form sample moments, got {k}")));
    }
    let (eta, delta2) = crate::constrained::batch_moments(&batch.values);
    Ok(SampleMoments { eta, delta2, k })
}

/// Mirror the sample mean about the population mean.
pub fn antithetic_mean<T: Real>(eta: &T, mu: &T) -> T {
    mu.scale(2.0) - eta.clone()
}

/// Result of an antithetic variance computation.
#[derive(Debug, Clone)]
pub struct AntitheticVariance<T> {
    pub delta2: T,
    /// True when the CDF value had to be clamped away from {0, 1} to keep
    /// the inverse CDF finite.
    pub clamped: bool,
}

const CDF_CLAMP: f64 = 1e-15;

/// Exact antithetic variance: push lambda through the chi-squared CDF,
/// take the complementary quantile, and rescale.
pub fn antithetic_variance_exact<T: Real>(
    delta2: &T,
    sigma2: &T,
    k: usize,
    scaling: Chi2Scaling,
) -> Result<AntitheticVariance<T>> {
    if k < 2 {
        return Err(Error::Domain(format!("need k >= 2, got {k}")));
    }
    if sigma2.value() <= 0.0 {
        return Err(Error::Domain("population variance must be positive".into()));
    }
    if delta2.value() < 0.0 {
        return Err(Error::Domain("sample variance must be nonnegative".into()));
    }
    let dof = Dof::new((k - 1) as u64)?;
    let c = scaling.factor(k);
    let lambda = delta2.scale(c) / sigma2.clone();
    let u = lambda.chi2_cdf(dof);
    let flipped = u.scale(-1.0).shift(1.0);
    let uv = flipped.value();
    let clamped = !(CDF_CLAMP..=1.0 - CDF_CLAMP).contains(&uv);
    let flipped = flipped.clamp_const(CDF_CLAMP, 1.0 - CDF_CLAMP);
    let lambda_p = flipped.chi2_inverse_cdf(dof);
    let delta2_p = lambda_p * sigma2.scale(1.0 / c);
    Ok(AntitheticVariance { delta2: delta2_p, clamped })
}

/// Hawkins-Wixley closed-form antithetic variance: the fourth root of a
/// normalized chi-squared variate is treated as Gaussian and reflected
/// about its mean.
pub fn antithetic_hawkins_wixley<T: Real>(
    delta2: &T,
    sigma2: &T,
    k: usize,
    scaling: Chi2Scaling,
) -> Result<AntitheticVariance<T>> {
    if k < 2 {
        return Err(Error::Domain(format!("need k >= 2, got {k}")));
    }
    if sigma2.value() <= 0.0 {
        return Err(Error::Domain("population variance must be positive".into()));
    }
    let v = (k - 1) as f64;
    let c = 1.0 - 3.0 / (16.0 * v) - 7.0 / (512.0 * v * v) + 231.0 / (8192.0 * v * v * v);
    let f = scaling.factor(k);
    let lambda = delta2.scale(f) / sigma2.clone();
    let root = lambda.scale(1.0 / v).powf(0.25);
    let reflected = root.scale(-1.0).shift(2.0 * c);
    let lambda_p = reflected.powi(4).scale(v);
    let delta2_p = lambda_p * sigma2.scale(1.0 / f);
    Ok(AntitheticVariance { delta2: delta2_p, clamped: false })
}

/// Wilson-Hilferty cube-root variant. Diagnostic only: the reflected
/// cube root can go negative for large lambda, so the result may be
/// invalid as a variance.
pub fn antithetic_wilson_hilferty(delta2: f64, sigma2: f64, k: usize, scaling: Chi2Scaling) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain(format!("need k >= 2, got {k}")));
    }
    if sigma2 <= 0.0 {
        return Err(Error::Domain("population variance must be positive".into()));
    }
    let v = (k - 1) as f64;
    let c = 1.0 - 2.0 / (9.0 * v);
    let f = scaling.factor(k);
    let lambda = f * delta2 / sigma2;
    let root = (lambda / v).cbrt();
    let reflected = 2.0 * c - root;
    Ok(v * reflected.powi(3) * sigma2 / f)
}

/// Full antithetic partner: compute mirrored moments from the first
/// batch's sample moments, then realize them with the constrained
/// sampler driven by `eps`.
pub fn antithetic_sample<T: Real>(
    first: &SampleBatch<T>,
    pop: &PopulationMoments<T>,
    eps: &[T],
    mode: VarianceMode,
    scaling: Chi2Scaling,
) -> Result<SampleBatch<T>> {
    let m = sample_moments(first)?;
    if m.k < 3 {
        return Err(Error::Domain(format!("antithetic batches need k >= 3, got {}", m.k)));
    }
    let eta_p = antithetic_mean(&m.eta, &pop.mu);
    let var = match mode {
        VarianceMode::Exact => antithetic_variance_exact(&m.delta2, &pop.sigma2, m.k, scaling)?,
        VarianceMode::HawkinsWixley => {
            antithetic_hawkins_wixley(&m.delta2, &pop.sigma2, m.k, scaling)?
        }
    };
    let spec = MomentSpec::new(eta_p, var.delta2, m.k)?;
    let mut batch = marsaglia_sample(eps, &spec)?;
    batch.provenance = Provenance::Antithetic;
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randkit::{chi2_cdf, chi2_inverse_cdf, standard_normal, RngStream};

    #[test]
    fn mean_reflection_involution() {
        let mu = 1.7;
        for &eta in &[0.0, -3.2, 5.5, 1.7] {
            let e1 = antithetic_mean(&eta, &mu);
            let e2 = antithetic_mean(&e1, &mu);
            assert!((e2 - eta).abs() < 1e-15);
            assert!(((eta + e1) / 2.0 - mu).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_variance_involution() {
        // d2 kept where the complementary quantile stays resolvable in
        // f64 (the clamp path is exercised separately below)
        for &k in &[4usize, 8, 20] {
            for &d2 in &[0.1, 0.7, 1.0, 3.0] {
                let v1 = antithetic_variance_exact(&d2, &1.3, k, Chi2Scaling::Corrected).unwrap();
                let v2 =
                    antithetic_variance_exact(&v1.delta2, &1.3, k, Chi2Scaling::Corrected).unwrap();
                assert!(
                    (v2.delta2 - d2).abs() <= 1e-9 * d2.max(1.0),
                    "k={k} d2={d2}: {} back from {}",
                    v2.delta2,
                    v1.delta2
                );
                assert!(!v1.clamped);
            }
        }
    }

    #[test]
    fn hawkins_wixley_involution_is_tighter() {
        // HW reflection is affine in the fourth root, so the involution is
        // exact up to roundoff.
        for &k in &[4usize, 8, 20] {
            for &d2 in &[0.1, 0.7, 1.0, 3.0] {
                let v1 = antithetic_hawkins_wixley(&d2, &2.0, k, Chi2Scaling::Corrected).unwrap();
                let v2 = antithetic_hawkins_wixley(&v1.delta2, &2.0, k, Chi2Scaling::Corrected)
                    .unwrap();
                assert!(
                    (v2.delta2 - d2).abs() <= 1e-12 * d2.max(1.0),
                    "k={k} d2={d2}: {}",
                    v2.delta2
                );
            }
        }
    }

    #[test]
    fn median_is_fixed_point() {
        // at the chi-squared median the complementary quantile is itself
        let k = 9;
        let sigma2 = 1.0;
        let med = chi2_inverse_cdf(0.5, Dof::new((k - 1) as u64).unwrap()).unwrap();
        let d2 = med * sigma2 / k as f64;
        let v = antithetic_variance_exact(&d2, &sigma2, k, Chi2Scaling::Corrected).unwrap();
        assert!((v.delta2 - d2).abs() < 1e-10);
    }

    #[test]
    fn quantile_flip_property() {
        // F(lambda') = 1 - F(lambda)
        let k = 7;
        let dof = Dof::new((k - 1) as u64).unwrap();
        for &d2 in &[0.2, 1.0, 2.5] {
            let sigma2 = 0.8;
            let lam = k as f64 * d2 / sigma2;
            let v = antithetic_variance_exact(&d2, &sigma2, k, Chi2Scaling::Corrected).unwrap();
            let lam_p = k as f64 * v.delta2 / sigma2;
            let u = chi2_cdf(lam, dof).unwrap();
            let u_p = chi2_cdf(lam_p, dof).unwrap();
            assert!((u + u_p - 1.0).abs() < 1e-9, "{u} + {u_p}");
        }
    }

    #[test]
    fn clamp_flag_on_extreme_lambda() {
        // enormous sample variance pushes the CDF to 1 within roundoff
        let v = antithetic_variance_exact(&1e6, &1.0, 8, Chi2Scaling::Corrected).unwrap();
        assert!(v.clamped);
        assert!(v.delta2.is_finite() && v.delta2 >= 0.0);
    }

    #[test]
    fn paper_faithful_scaling_differs() {
        let a = antithetic_variance_exact(&0.9, &1.0, 6, Chi2Scaling::Corrected).unwrap();
        let b = antithetic_variance_exact(&0.9, &1.0, 6, Chi2Scaling::PaperFaithful).unwrap();
        assert!((a.delta2 - b.delta2).abs() > 1e-6);
    }

    #[test]
    fn hawkins_wixley_tracks_exact() {
        // fidelity measured in quantile space: the HW image must land
        // within 0.02 CDF mass of the exact complementary quantile. (In
        // raw lambda terms the fourth-root approximation is off by a few
        // percent at v=7 even at the median, so quantile distance is the
        // meaningful metric.)
        let k = 8; // v = 7
        let dof = Dof::new(7).unwrap();
        let sigma2 = 1.0;
        for &lam in &[3.0, 5.0, 7.0, 10.0, 14.0] {
            let d2 = lam * sigma2 / k as f64;
            let ex = antithetic_variance_exact(&d2, &sigma2, k, Chi2Scaling::Corrected).unwrap();
            let hw = antithetic_hawkins_wixley(&d2, &sigma2, k, Chi2Scaling::Corrected).unwrap();
            let u_ex = chi2_cdf(k as f64 * ex.delta2 / sigma2, dof).unwrap();
            let u_hw = chi2_cdf(k as f64 * hw.delta2 / sigma2, dof).unwrap();
            assert!((u_hw - u_ex).abs() < 0.02, "lambda={lam}: {u_hw} vs {u_ex}");
            // and raw relative error stays within a handful of percent
            let rel = (hw.delta2 - ex.delta2).abs() / ex.delta2;
            assert!(rel < 0.06, "lambda={lam}: exact {} vs hw {}", ex.delta2, hw.delta2);
        }
    }

    #[test]
    fn wilson_hilferty_can_go_negative() {
        // witness: v=2, lambda = 64 v (1 - 2/(9v))^3 makes the reflected
        // cube root exactly -(lambda/v)^(1/3)/... below zero
        let k = 3;
        let v = 2.0;
        let c: f64 = 1.0 - 2.0 / (9.0 * v);
        let lambda = 64.0 * v * c.powi(3);
        let d2 = lambda / k as f64;
        let out = antithetic_wilson_hilferty(d2, 1.0, k, Chi2Scaling::Corrected).unwrap();
        assert!(out < 0.0, "expected negative variance witness, got {out}");
        // Hawkins-Wixley stays nonnegative on the same input (even power)
        let hw = antithetic_hawkins_wixley(&d2, &1.0, k, Chi2Scaling::Corrected).unwrap();
        assert!(hw.delta2 >= 0.0);
    }

    #[test]
    fn antithetic_batch_moments() {
        let mut s = RngStream::new(11, 0);
        let pop = PopulationMoments::new(0.5, 2.0).unwrap();
        for _ in 0..50 {
            let k = 8;
            let first = crate::constrained::SampleBatch::new(
                standard_normal(&mut s, k).iter().map(|z| 0.5 + z * 2.0_f64.sqrt()).collect(),
                Provenance::Iid,
            );
            let eps = standard_normal(&mut s, k - 1);
            let second = antithetic_sample(
                &first,
                &pop,
                &eps,
                VarianceMode::Exact,
                Chi2Scaling::Corrected,
            )
            .unwrap();
            assert_eq!(second.provenance, Provenance::Antithetic);
            let m1 = sample_moments(&first).unwrap();
            let m2 = sample_moments(&second).unwrap();
            // combined mean is exactly mu
            assert!(((m1.eta + m2.eta) / 2.0 - 0.5).abs() < 1e-12);
            // variances are complementary quantiles
            let dof = Dof::new((k - 1) as u64).unwrap();
            let u1 = chi2_cdf(k as f64 * m1.delta2 / 2.0, dof).unwrap();
            let u2 = chi2_cdf(k as f64 * m2.delta2 / 2.0, dof).unwrap();
            assert!((u1 + u2 - 1.0).abs() < 1e-8, "{u1} {u2}");
        }
    }

    #[test]
    fn spearman_of_paired_variances_is_minus_one() {
        let mut s = RngStream::new(12, 0);
        let k = 10;
        let mut d1 = Vec::new();
        let mut d2 = Vec::new();
        for _ in 0..200 {
            let vals: Vec<f64> = standard_normal(&mut s, k);
            let batch = SampleBatch::new(vals, Provenance::Iid);
            let m = sample_moments(&batch).unwrap();
            let v = antithetic_variance_exact(&m.delta2, &1.0, k, Chi2Scaling::Corrected).unwrap();
            d1.push(m.delta2);
            d2.push(v.delta2);
        }
        let rho = crate::stats::spearman(&d1, &d2).unwrap();
        assert!((rho + 1.0).abs() < 1e-12, "rho = {rho}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(PopulationMoments::new(0.0, 0.0).is_err());
        assert!(antithetic_variance_exact(&1.0, &-1.0, 5, Chi2Scaling::Corrected).is_err());
        assert!(antithetic_variance_exact(&1.0, &1.0, 1, Chi2Scaling::Corrected).is_err());
        assert!(antithetic_hawkins_wixley(&1.0, &1.0, 1, Chi2Scaling::Corrected).is_err());
    }
}
