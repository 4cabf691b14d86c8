//! Synthetic datasets: a 6x6 binary bars corpus and a 1-D conjugate
//! Gaussian model with analytic posterior and evidence.

use crate::error::{Error, Result};
use crate::randkit::{gaussian_cdf, RngStream};

/// Which synthetic dataset to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// 36-dim binary vectors: one horizontal or vertical bar on a 6x6
    /// grid, plus 5% independent pixel flip noise.
    Bars6x6,
    /// x ~ N(z, 1) with z ~ N(0, 1); posterior and evidence are closed
    /// form.
    Conjugate1d,
}

/// A generated dataset: n rows of `dim` values each.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub items: Vec<Vec<f64>>,
    pub dim: usize,
}

pub fn make_synthetic_dataset(kind: DatasetKind, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    let mut s = RngStream::new(seed, 0xda7a);
    let items = match kind {
        DatasetKind::Bars6x6 => (0..n)
            .map(|_| {
                let mut img = vec![0.0; 36];
                let bar = (s.next_u64() % 12) as usize;
                if bar < 6 {
                    for c in 0..6 {
                        img[bar * 6 + c] = 1.0; // horizontal
                    }
                } else {
                    for r in 0..6 {
                        img[r * 6 + (bar - 6)] = 1.0; // vertical
                    }
                }
                for px in img.iter_mut() {
                    if s.next_f64() < 0.05 {
                        *px = 1.0 - *px;
                    }
                }
                img
            })
            .collect(),
        DatasetKind::Conjugate1d => (0..n)
            .map(|_| {
                let z = s.next_normal();
                vec![z + s.next_normal()]
            })
            .collect(),
    };
    let dim = match kind {
        DatasetKind::Bars6x6 => 36,
        DatasetKind::Conjugate1d => 1,
    };
    Ok(Dataset { kind, items, dim })
}

/// Analytic posterior of the conjugate model: z | x ~ N(x/2, 1/2).
pub fn conjugate_posterior(x: f64) -> (f64, f64) {
    (x / 2.0, 0.5)
}

/// Analytic evidence of the conjugate model: log N(x; 0, 2).
pub fn conjugate_log_evidence(x: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * 2.0).ln() - x * x / 4.0
}

/// CDF of the conjugate model's marginal, N(0, 2); used as a KS oracle.
pub fn conjugate_marginal_cdf(x: f64) -> f64 {
    gaussian_cdf(x, 0.0, 2.0).expect("fixed positive variance")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bars_structure() {
        let d = make_synthetic_dataset(DatasetKind::Bars6x6, 200, 5).unwrap();
        assert_eq!(d.dim, 36);
        assert_eq!(d.items.len(), 200);
        let mut ones = 0usize;
        for img in &d.items {
            assert_eq!(img.len(), 36);
            assert!(img.iter().all(|&p| p == 0.0 || p == 1.0));
            ones += img.iter().filter(|&&p| p == 1.0).count();
        }
        // one bar of 6 pixels, 5% noise on 36 pixels: expected on-count
        // per image about 6*0.95 + 30*0.05 = 7.2
        let avg = ones as f64 / 200.0;
        assert!((avg - 7.2).abs() < 1.0, "avg on-pixels {avg}");
    }

    #[test]
    fn dataset_deterministic_per_seed() {
        let a = make_synthetic_dataset(DatasetKind::Bars6x6, 50, 9).unwrap();
        let b = make_synthetic_dataset(DatasetKind::Bars6x6, 50, 9).unwrap();
        assert_eq!(a.items, b.items);
        let c = make_synthetic_dataset(DatasetKind::Bars6x6, 50, 10).unwrap();
        assert_ne!(a.items, c.items);
    }

    #[test]
    fn conjugate_marginal_moments() {
        let d = make_synthetic_dataset(DatasetKind::Conjugate1d, 20000, 3).unwrap();
        let xs: Vec<f64> = d.items.iter().map(|r| r[0]).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
        assert!(m.abs() < 0.05, "mean {m}");
        assert!((v - 2.0).abs() < 0.1, "var {v}");
        let ks = crate::stats::ks_test(&xs, conjugate_marginal_cdf, 0.01).unwrap();
        assert!(ks.pass, "p = {}", ks.p_value);
    }

    #[test]
    fn conjugate_closed_forms() {
        assert_eq!(conjugate_posterior(0.0), (0.0, 0.5));
        assert_eq!(conjugate_posterior(3.0), (1.5, 0.5));
        let le = conjugate_log_evidence(0.0);
        assert!((le + 0.5 * (4.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        assert!(make_synthetic_dataset(DatasetKind::Conjugate1d, 0, 1).is_err());
    }
}
