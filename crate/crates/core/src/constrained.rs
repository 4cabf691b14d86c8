//! Constrained Gaussian sampling: generate k variates whose sample mean
//! and sample variance hit prescribed values exactly.
//!
//! Two constructions are provided. The sphere construction realizes the
//! constraint set as a (k-1)-sphere (hyperplane intersected with a
//! k-sphere) and maps a uniform point on the unit sphere through an
//! orthonormal basis of the ones-vector's null space. The Helmert
//! construction reaches the same set through the inverse Helmert
//! transform with chi-squared-distributed squared coordinates.
//!
//! The sample variance convention is divide-by-k throughout.

use crate::autodiff::Real;
use crate::error::{Error, Result};

/// Where a batch came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Iid,
    Antithetic,
    Constrained,
    Transformed,
}

/// An ordered batch of k scalar variates.
#[derive(Debug, Clone)]
pub struct SampleBatch<T> {
    pub values: Vec<T>,
    pub provenance: Provenance,
}

impl<T: Real> SampleBatch<T> {
    pub fn new(values: Vec<T>, provenance: Provenance) -> Self {
        SampleBatch { values, provenance }
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }
}

/// Target sample moments for a constrained batch. Uses the divide-by-k
/// variance convention.
#[derive(Debug, Clone)]
pub struct MomentSpec<T> {
    pub eta: T,
    pub delta2: T,
    pub k: usize,
}

impl<T: Real> MomentSpec<T> {
    pub fn new(eta: T, delta2: T, k: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::Domain(format!("moment spec requires k >= 3, got {k}")));
        }
        if delta2.value() < 0.0 {
            return Err(Error::Domain(format!(
                "target sample variance must be nonnegative, got {}",
                delta2.value()
            )));
        }
        Ok(MomentSpec { eta, delta2, k })
    }
}

const MIN_NORM: f64 = 1e-300;

/// Project `eps` onto the unit sphere.
pub fn unit_sphere_sample<T: Real>(eps: &[T]) -> Result<Vec<T>> {
    let norm2 = eps.iter().fold(eps[0].lit(0.0), |acc, e| acc + e.clone() * e.clone());
    if norm2.value().sqrt() < MIN_NORM {
        return Err(Error::Degenerate("cannot normalize a (near-)zero vector".into()));
    }
    let norm = norm2.sqrt();
    Ok(eps.iter().map(|e| e.clone() / norm.clone()).collect())
}

/// Orthonormal basis of the null space of the ones vector: a (k-1) x k
/// matrix B with B Bt = I and B 1t = 0.
#[derive(Debug, Clone)]
pub struct SphereBasis {
    pub k: usize,
    rows: Vec<Vec<f64>>,
}

impl SphereBasis {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Dense product z B for a (k-1)-vector z. Test oracle; the hot path
    /// uses the O(k) unrolled recurrence in [`marsaglia_sample`].
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.k - 1 {
            return Err(Error::Shape(format!(
                "expected {} coordinates, got {}",
                self.k - 1,
                z.len()
            )));
        }
        let mut out = vec![0.0; self.k];
        for (zi, row) in z.iter().zip(&self.rows) {
            for (o, b) in out.iter_mut().zip(row) {
                *o += zi * b;
            }
        }
        Ok(out)
    }
}

/// Row-normalized triangular basis: row i (1-indexed) has entry
/// (i-k)/sqrt((k-i)(k-i+1)) at column i and 1/sqrt((k-i)(k-i+1)) at
/// columns i+1..k.
pub fn marsaglia_basis(k: usize) -> Result<SphereBasis> {
    if k < 2 {
        return Err(Error::Domain(format!("sphere basis requires k >= 2, got {k}")));
    }
    let mut rows = Vec::with_capacity(k - 1);
    for i in 1..k {
        let norm = ((k - i) as f64 * (k - i + 1) as f64).sqrt();
        let mut row = vec![0.0; k];
        row[i - 1] = (i as f64 - k as f64) / norm;
        for item in row.iter_mut().take(k).skip(i) {
            *item = 1.0 / norm;
        }
        rows.push(row);
    }
    Ok(SphereBasis { k, rows })
}

/// Generate a batch with sample mean `spec.eta` and sample variance
/// `spec.delta2` exactly, uniform on the constraint sphere when `eps`
/// is i.i.d. standard normal. O(k) unrolled form of x = sqrt(k) d zB + eta 1.
pub fn marsaglia_sample<T: Real>(eps: &[T], spec: &MomentSpec<T>) -> Result<SampleBatch<T>> {
    let k = spec.k;
    if eps.len() != k - 1 {
        return Err(Error::Shape(format!("expected {} epsilon values, got {}", k - 1, eps.len())));
    }
    if spec.delta2.value() == 0.0 {
        // zero-radius sphere
        return Ok(SampleBatch::new(vec![spec.eta.clone(); k], Provenance::Constrained));
    }

    let s = eps.iter().fold(eps[0].lit(0.0), |acc, e| acc + e.clone() * e.clone());
    if s.value().sqrt() < MIN_NORM {
        return Err(Error::Degenerate("epsilon vector is (near-)zero".into()));
    }
    let gamma = spec.delta2.sqrt().scale((k as f64).sqrt());
    let sqrt_s = s.sqrt();

    // z_i folds the unit-sphere projection and the row normalization
    let z: Vec<T> = eps
        .iter()
        .enumerate()
        .map(|(idx, e)| {
            let i = idx + 1;
            let norm = ((k - i) as f64 * (k - i + 1) as f64).sqrt();
            e.clone() / sqrt_s.clone().scale(norm)
        })
        .collect();

    let mut values = Vec::with_capacity(k);
    values.push(z[0].scale(1.0 - k as f64) * gamma.clone() + spec.eta.clone());
    let mut prefix = z[0].clone();
    for i in 2..k {
        let xi = (prefix.clone() + z[i - 1].scale(i as f64 - k as f64)) * gamma.clone()
            + spec.eta.clone();
        values.push(xi);
        prefix = prefix + z[i - 1].clone();
    }
    values.push(prefix * gamma + spec.eta.clone());
    Ok(SampleBatch::new(values, Provenance::Constrained))
}

/// Helmert transform: maps k variates to k-1 zero-mean coordinates
/// preserving the centered sum of squares.
pub fn helmert_transform<T: Real>(x: &SampleBatch<T>) -> Result<Vec<T>> {
    let k = x.k();
    if k < 2 {
        return Err(Error::Domain(format!("helmert transform requires k >= 2, got {k}")));
    }
    let v = &x.values;
    // suffix sums: suffix[j] = sum_{i=j}^{k} x_i (1-indexed)
    let mut y = Vec::with_capacity(k - 1);
    let mut suffix = v[k - 1].clone();
    let mut suffixes = vec![suffix.clone()];
    for i in (0..k - 1).rev() {
        suffix = suffix + v[i].clone();
        suffixes.push(suffix.clone());
    }
    suffixes.reverse(); // suffixes[i] = sum_{j=i+1..=k} x_j with 0-indexing i
    for j in 2..=k {
        let norm = ((k + 1 - j) as f64 * (k + 2 - j) as f64).sqrt();
        let yj = (suffixes[j - 1].clone() + v[j - 2].scale(-((k + 1 - j) as f64))).scale(1.0 / norm);
        y.push(yj);
    }
    Ok(y)
}

/// Inverse Helmert transform: reconstruct a batch with sample mean `eta`
/// and centered sum of squares equal to the sum of squares of `y`.
pub fn helmert_inverse<T: Real>(y: &[T], eta: &T, k: usize) -> Result<SampleBatch<T>> {
    if k < 2 || y.len() != k - 1 {
        return Err(Error::Shape(format!(
            "expected {} helmert coordinates for k={k}, got {}",
            k.saturating_sub(1),
            y.len()
        )));
    }
    // y[j-2] holds y_j for j = 2..=k
    let mut values = Vec::with_capacity(k);
    let x1 = eta.clone() + y[0].scale(-(((k - 1) as f64 / k as f64).sqrt()));
    values.push(x1);
    for j in 2..=k {
        let t1 = y[j - 2].scale(((k + 2 - j) as f64).sqrt());
        let t2 = if j < k { y[j - 1].scale(((k - j) as f64).sqrt()) } else { eta.lit(0.0) };
        let xj = values[j - 2].clone() + (t1 - t2).scale(1.0 / ((k + 1 - j) as f64).sqrt());
        values.push(xj);
    }
    Ok(SampleBatch::new(values, Provenance::Constrained))
}

/// Helmert-based constrained sampler: squared coordinates are scaled
/// normalized chi-squared components with random signs, then mapped back
/// through the inverse Helmert transform.
pub fn cheng_sample<T: Real>(
    z: &[T],
    bits: &[bool],
    _mu: &T,
    sigma2: &T,
    spec: &MomentSpec<T>,
) -> Result<SampleBatch<T>> {
    let k = spec.k;
    if z.len() != k - 1 || bits.len() != k - 1 {
        return Err(Error::Shape(format!(
            "expected {} z values and sign bits, got {} and {}",
            k - 1,
            z.len(),
            bits.len()
        )));
    }
    if sigma2.value() <= 0.0 {
        return Err(Error::Domain("population variance must be positive".into()));
    }
    if spec.delta2.value() == 0.0 {
        return Ok(SampleBatch::new(vec![spec.eta.clone(); k], Provenance::Constrained));
    }
    let sigma = sigma2.sqrt();
    let c: Vec<T> = z
        .iter()
        .map(|zi| {
            let s = zi.clone() * sigma.clone();
            s.clone() * s
        })
        .collect();
    let total = c.iter().fold(c[0].lit(0.0), |acc, ci| acc + ci.clone());
    if total.value() < MIN_NORM {
        return Err(Error::Degenerate("z vector is (near-)zero".into()));
    }
    // divide-by-k convention: centered sum of squares is k * delta2
    let a = spec.delta2.scale(k as f64) / total;
    let y: Vec<T> = c
        .iter()
        .zip(bits)
        .map(|(ci, &b)| {
            let mag = (a.clone() * ci.clone()).sqrt();
            if b {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let mut batch = helmert_inverse(&y, &spec.eta, k)?;
    batch.provenance = Provenance::Constrained;
    Ok(batch)
}

/// Sample mean and divide-by-k sample variance of a slice.
pub fn batch_moments<T: Real>(values: &[T]) -> (T, T) {
    let k = values.len() as f64;
    let mean = values.iter().fold(values[0].lit(0.0), |acc, v| acc + v.clone()).scale(1.0 / k);
    let var = values
        .iter()
        .fold(values[0].lit(0.0), |acc, v| {
            let d = v.clone() - mean.clone();
            acc + d.clone() * d
        })
        .scale(1.0 / k);
    (mean, var)
}
