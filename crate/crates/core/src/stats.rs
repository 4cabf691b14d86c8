//! Distributional test statistics used as oracles: Kolmogorov-Smirnov,
//! chi-squared goodness of fit, Spearman rank correlation, and simple
//! moment z-tests.

use crate::error::{Error, Result};
use crate::randkit::{reg_upper_gamma, std_normal_cdf};

/// Outcome of a statistical check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TestVerdict {
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
    pub n: usize,
}

/// Asymptotic Kolmogorov distribution tail: P(K > t) via the alternating
/// series, with the Stephens small-sample correction applied to t.
fn kolmogorov_p(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let t = (sn + 0.12 + 0.11 / sn) * d;
    if t < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = sign * (-2.0 * (j as f64) * (j as f64) * t * t).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * p).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_test<F>(samples: &[f64], cdf: F, alpha: f64) -> Result<TestVerdict>
where
    F: Fn(f64) -> f64,
{
    let n = samples.len();
    if n < 10 {
        return Err(Error::Domain(format!("KS test needs n >= 10, got {n}")));
    }
    if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Degenerate("samples contain NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN ruled out above"));
    let mut d = 0.0_f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        if !f.is_finite() {
            return Err(Error::Degenerate(format!("CDF returned a non-finite value at {x}")));
        }
        let hi = (i as f64 + 1.0) / n as f64 - f;
        let lo = f - i as f64 / n as f64;
        d = d.max(hi).max(lo);
    }
    let p = kolmogorov_p(d, n);
    Ok(TestVerdict { statistic: d, p_value: p, pass: p >= alpha, n })
}

/// Chi-squared goodness-of-fit test with `bins` equiprobable bins under
/// the hypothesized CDF. Requires at least 20 expected counts per bin.
pub fn chi2_gof<F>(samples: &[f64], cdf: F, bins: usize, alpha: f64) -> Result<TestVerdict>
where
    F: Fn(f64) -> f64,
{
    let n = samples.len();
    if bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {bins}")));
    }
    if n < 20 * bins {
        return Err(Error::Domain(format!(
            "chi-squared GOF needs n >= {} for {bins} bins, got {n}",
            20 * bins
        )));
    }
    let mut counts = vec![0usize; bins];
    for x in samples {
        let u = cdf(*x).clamp(0.0, 1.0 - f64::EPSILON);
        counts[(u * bins as f64) as usize] += 1;
    }
    let expected = n as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // survival function of chi-squared with bins-1 dof
    let v = (bins - 1) as f64;
    let p = reg_upper_gamma(v / 2.0, stat / 2.0)?;
    Ok(TestVerdict { statistic: stat, p_value: p, pass: p >= alpha, n })
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut r = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0; // average rank for ties
        for &slot in &idx[i..=j] {
            r[slot] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Domain(format!("Spearman needs n >= 3, got {}", x.len())));
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("constant ranks: correlation undefined".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Two-sided z-test of the sample mean against a hypothesized mean with
/// known variance.
pub fn moment_test(samples: &[f64], mean0: f64, var0: f64, alpha: f64) -> Result<TestVerdict> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Domain(format!("moment test needs n >= 2, got {n}")));
    }
    if var0 <= 0.0 {
        return Err(Error::Domain("hypothesized variance must be positive".into()));
    }
    let m = samples.iter().sum::<f64>() / n as f64;
    let z = (m - mean0) / (var0 / n as f64).sqrt();
    let p = 2.0 * (1.0 - std_normal_cdf(z.abs()));
    Ok(TestVerdict { statistic: z, p_value: p, pass: p >= alpha, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randkit::{standard_normal, std_normal_cdf, RngStream};

    #[test]
    fn ks_calibrated_on_true_normals() {
        let mut s = RngStream::new(21, 0);
        let xs = standard_normal(&mut s, 5000);
        let v = ks_test(&xs, std_normal_cdf, 0.01).unwrap();
        assert!(v.pass, "D = {}, p = {}", v.statistic, v.p_value);
    }

    #[test]
    fn ks_rejects_shifted_distribution() {
        let mut s = RngStream::new(22, 0);
        let xs: Vec<f64> = standard_normal(&mut s, 5000).iter().map(|x| x + 0.3).collect();
        let v = ks_test(&xs, std_normal_cdf, 0.01).unwrap();
        assert!(!v.pass, "p = {}", v.p_value);
    }

    #[test]
    fn ks_uniform_closed_form_check() {
        // with n=10 and all mass at 0.5 the statistic is 0.5
        let xs = vec![0.5; 10];
        let v = ks_test(&xs, |u| u.clamp(0.0, 1.0), 0.01).unwrap();
        assert!((v.statistic - 0.5).abs() < 1e-12);
        assert!(!v.pass);
    }

    #[test]
    fn ks_input_validation() {
        assert!(ks_test(&[0.1; 5], |u| u, 0.01).is_err());
        assert!(ks_test(&[0.1; 20], |u| u, 0.0).is_err());
        assert!(ks_test(&[f64::NAN; 20], |_| f64::NAN, 0.01).is_err());
    }

    #[test]
    fn gof_calibrated_and_separating() {
        let mut s = RngStream::new(23, 0);
        let xs = standard_normal(&mut s, 4000);
        let ok = chi2_gof(&xs, std_normal_cdf, 20, 0.01).unwrap();
        assert!(ok.pass, "stat {} p {}", ok.statistic, ok.p_value);
        let scaled: Vec<f64> = xs.iter().map(|x| 1.3 * x).collect();
        let bad = chi2_gof(&scaled, std_normal_cdf, 20, 0.01).unwrap();
        assert!(!bad.pass, "p {}", bad.p_value);
        assert!(chi2_gof(&xs[..100], std_normal_cdf, 20, 0.01).is_err());
    }

    #[test]
    fn spearman_exact_extremes() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 6.0, 8.0, 10.0];
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let yr: Vec<f64> = y.iter().rev().cloned().collect();
        assert!((spearman(&x, &yr).unwrap() + 1.0).abs() < 1e-15);
        // monotone nonlinear map preserves rho = 1
        let ynl: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!((spearman(&x, &ynl).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spearman_ties_and_errors() {
        let x = [1.0, 1.0, 2.0, 3.0];
        let y = [5.0, 5.0, 6.0, 7.0];
        let rho = spearman(&x, &y).unwrap();
        assert!(rho > 0.9);
        assert!(spearman(&x, &y[..3]).is_err());
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn spearman_independent_near_zero() {
        let mut s = RngStream::new(24, 0);
        let x = standard_normal(&mut s, 2000);
        let y = standard_normal(&mut s, 2000);
        let rho = spearman(&x, &y).unwrap();
        assert!(rho.abs() < 0.08, "rho = {rho}");
    }

    #[test]
    fn moment_test_behaviour() {
        let mut s = RngStream::new(25, 0);
        let xs = standard_normal(&mut s, 10000);
        let ok = moment_test(&xs, 0.0, 1.0, 0.01).unwrap();
        assert!(ok.pass, "z = {}", ok.statistic);
        let bad = moment_test(&xs, 0.1, 1.0, 0.01).unwrap();
        assert!(!bad.pass);
        assert!(moment_test(&xs, 0.0, 0.0, 0.01).is_err());
    }

    #[test]
    fn kolmogorov_tail_reference_value() {
        // K(0.8276) ~ 0.5 for the limiting distribution; with large n the
        // correction is negligible. Reference: two-term series by hand.
        let t: f64 = 1.0;
        let manual: f64 = 2.0 * ((-2.0 * t * t).exp() - (-8.0 * t * t).exp() + (-18.0 * t * t).exp());
        let d = t / (1000.0_f64.sqrt() + 0.12 + 0.11 / 1000.0_f64.sqrt());
        let p = super::kolmogorov_p(d, 1000);
        assert!((p - manual).abs() < 1e-9);
    }
}
