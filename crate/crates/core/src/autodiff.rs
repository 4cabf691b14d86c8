//! Minimal reverse-mode automatic differentiation on a scalar tape.
//!
//! The whole antithetic path (sample moments, inverse-CDF and
//! Hawkins-Wixley transforms, sphere reconstruction, downstream
//! objectives) is written against the [`Real`] trait, so the same code
//! runs on bare `f64` and on tape-tracked [`Var`] values. Stochasticity
//! enters only through parameter-free unit-Gaussian leaves, so the
//! sampling path stays reparameterized.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::randkit::{self, Dof};

/// Scalar abstraction shared by `f64` and [`Var`].
///
/// Binary operators take operands by value; generic code clones its
/// inputs, which is cheap for both implementations.
pub trait Real:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant living alongside `self` (on the same tape, for `Var`).
    fn lit(&self, c: f64) -> Self;
    fn value(&self) -> f64;

    /// `c * self` without allocating a constant node.
    fn scale(&self, c: f64) -> Self;
    /// `self + c` without allocating a constant node.
    fn shift(&self, c: f64) -> Self;

    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn ln_1p(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn tanh(&self) -> Self;
    fn tan(&self) -> Self;
    fn abs(&self) -> Self;
    fn relu(&self) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn recip(&self) -> Self;

    /// Standard normal CDF.
    fn std_normal_cdf(&self) -> Self;
    /// Chi-squared CDF of `self` with `v` degrees of freedom.
    fn chi2_cdf(&self, v: Dof) -> Self;
    /// Chi-squared inverse CDF of `self` (a probability) with `v` dof.
    /// Differentiated via the implicit function theorem.
    fn chi2_inverse_cdf(&self, v: Dof) -> Self;

    /// Same value, gradient flow severed.
    fn detach(&self) -> Self;

    /// Clamp to `[lo, hi]`; gradient is 1 inside the interval, 0 outside.
    fn clamp_const(&self, lo: f64, hi: f64) -> Self;

    /// Integer power by repeated squaring. Valid for negative bases.
    fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut acc = self.lit(1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    /// Numerically stable `ln(1 + exp(self))`.
    fn softplus(&self) -> Self {
        self.relu() + (-self.abs()).exp().ln_1p()
    }
}

impl Real for f64 {
    fn lit(&self, c: f64) -> f64 {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn scale(&self, c: f64) -> f64 {
        self * c
    }
    fn shift(&self, c: f64) -> f64 {
        self + c
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn ln_1p(&self) -> f64 {
        f64::ln_1p(*self)
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn tanh(&self) -> f64 {
        f64::tanh(*self)
    }
    fn tan(&self) -> f64 {
        f64::tan(*self)
    }
    fn abs(&self) -> f64 {
        f64::abs(*self)
    }
    fn relu(&self) -> f64 {
        self.max(0.0)
    }
    fn powf(&self, p: f64) -> f64 {
        f64::powf(*self, p)
    }
    fn recip(&self) -> f64 {
        1.0 / self
    }
    fn std_normal_cdf(&self) -> f64 {
        randkit::std_normal_cdf(*self)
    }
    fn chi2_cdf(&self, v: Dof) -> f64 {
        randkit::chi2_cdf(self.max(0.0), v).expect("x >= 0 by clamp")
    }
    fn chi2_inverse_cdf(&self, v: Dof) -> f64 {
        let p = self.clamp(1e-300, 1.0 - 1e-16);
        randkit::chi2_inverse_cdf(p, v).expect("p in (0,1) by clamp")
    }
    fn detach(&self) -> f64 {
        *self
    }
    fn clamp_const(&self, lo: f64, hi: f64) -> f64 {
        self.clamp(lo, hi)
    }
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    p0: u32,
    g0: f64,
    p1: u32,
    g1: f64,
}

impl std::fmt::Debug for Gradients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Gradients({} adjoints)", self.adj.len())
    }
}

struct TapeInner {
    nodes: Vec<Node>,
    poisoned: Option<usize>,
}

/// Append-only gradient tape. One tape per task; values may be copied
/// between tasks but [`Var`]s must not cross tapes.
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { inner: Rc::new(RefCell::new(TapeInner { nodes: Vec::new(), poisoned: None })) }
    }

    /// Create a leaf input variable.
    pub fn var(&self, value: f64) -> Var {
        push(&self.inner, value, NONE, 0.0, NONE, 0.0)
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn push(tape: &Rc<RefCell<TapeInner>>, value: f64, p0: u32, g0: f64, p1: u32, g1: f64) -> Var {
    let idx = {
        let mut inner = tape.borrow_mut();
        let idx = inner.nodes.len();
        inner.nodes.push(Node { p0, g0, p1, g1 });
        if !value.is_finite() && inner.poisoned.is_none() {
            inner.poisoned = Some(idx);
        }
        idx as u32
    };
    Var { tape: Rc::clone(tape), idx, val: value }
}

/// A scalar tracked on a [`Tape`]. Cloning is cheap.
#[derive(Clone)]
pub struct Var {
    tape: Rc<RefCell<TapeInner>>,
    idx: u32,
    val: f64,
}

impl std::fmt::Debug for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({}, node {})", self.val, self.idx)
    }
}

impl Var {
    fn unary(&self, value: f64, grad: f64) -> Var {
        push(&self.tape, value, self.idx, grad, NONE, 0.0)
    }

    fn binary(&self, rhs: &Var, value: f64, ga: f64, gb: f64) -> Var {
        debug_assert!(Rc::ptr_eq(&self.tape, &rhs.tape), "operands from different tapes");
        push(&self.tape, value, self.idx, ga, rhs.idx, gb)
    }

    /// Reverse pass from this output. Fails if any node on the tape
    /// holds a non-finite value.
    pub fn backward(&self) -> Result<Gradients> {
        let inner = self.tape.borrow();
        if let Some(node) = inner.poisoned {
            return Err(Error::NonFinite { node });
        }
        let mut adj = vec![0.0; self.idx as usize + 1];
        adj[self.idx as usize] = 1.0;
        for i in (0..=self.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = inner.nodes[i];
            if n.p0 != NONE {
                adj[n.p0 as usize] += a * n.g0;
            }
            if n.p1 != NONE {
                adj[n.p1 as usize] += a * n.g1;
            }
        }
        Ok(Gradients { tape: Rc::clone(&self.tape), adj })
    }
}

/// Adjoints from one reverse pass.
pub struct Gradients {
    tape: Rc<RefCell<TapeInner>>,
    adj: Vec<f64>,
}

impl Gradients {
    /// Gradient of the backward output with respect to `v`.
    ///
    /// Panics if `v` comes from a different tape.
    pub fn wrt(&self, v: &Var) -> f64 {
        assert!(Rc::ptr_eq(&self.tape, &v.tape), "variable is not on the differentiated tape");
        self.adj.get(v.idx as usize).copied().unwrap_or(0.0)
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $val:expr, $ga:expr, $gb:expr) => {
        impl $trait for Var {
            type Output = Var;
            fn $method(self, rhs: Var) -> Var {
                let (a, b) = (self.val, rhs.val);
                let _ = (a, b);
                self.binary(&rhs, $val(a, b), $ga(a, b), $gb(a, b))
            }
        }
    };
}

impl_binop!(Add, add, |a: f64, b: f64| a + b, |_a, _b| 1.0, |_a, _b| 1.0);
impl_binop!(Sub, sub, |a: f64, b: f64| a - b, |_a, _b| 1.0, |_a, _b| -1.0);
impl_binop!(Mul, mul, |a: f64, b: f64| a * b, |_a, b: f64| b, |a: f64, _b| a);
impl_binop!(Div, div, |a: f64, b: f64| a / b, |_a, b: f64| 1.0 / b, |a: f64, b: f64| -a / (b * b));

impl Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        self.unary(-self.val, -1.0)
    }
}

impl Real for Var {
    fn lit(&self, c: f64) -> Var {
        push(&self.tape, c, NONE, 0.0, NONE, 0.0)
    }
    fn value(&self) -> f64 {
        self.val
    }
    fn scale(&self, c: f64) -> Var {
        self.unary(self.val * c, c)
    }
    fn shift(&self, c: f64) -> Var {
        self.unary(self.val + c, 1.0)
    }
    fn exp(&self) -> Var {
        let e = self.val.exp();
        self.unary(e, e)
    }
    fn ln(&self) -> Var {
        self.unary(self.val.ln(), 1.0 / self.val)
    }
    fn ln_1p(&self) -> Var {
        self.unary(self.val.ln_1p(), 1.0 / (1.0 + self.val))
    }
    fn sqrt(&self) -> Var {
        let r = self.val.sqrt();
        self.unary(r, 0.5 / r)
    }
    fn tanh(&self) -> Var {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn tan(&self) -> Var {
        let t = self.val.tan();
        self.unary(t, 1.0 + t * t)
    }
    fn abs(&self) -> Var {
        self.unary(self.val.abs(), self.val.signum())
    }
    fn relu(&self) -> Var {
        if self.val > 0.0 {
            self.unary(self.val, 1.0)
        } else {
            self.unary(0.0, 0.0)
        }
    }
    fn powf(&self, p: f64) -> Var {
        let v = self.val.powf(p);
        self.unary(v, p * self.val.powf(p - 1.0))
    }
    fn recip(&self) -> Var {
        self.unary(1.0 / self.val, -1.0 / (self.val * self.val))
    }
    fn std_normal_cdf(&self) -> Var {
        let v = randkit::std_normal_cdf(self.val);
        self.unary(v, randkit::std_normal_pdf(self.val))
    }
    fn chi2_cdf(&self, v: Dof) -> Var {
        let x = self.val.max(0.0);
        let val = randkit::chi2_cdf(x, v).expect("x >= 0 by clamp");
        self.unary(val, randkit::chi2_pdf(x, v))
    }
    fn chi2_inverse_cdf(&self, v: Dof) -> Var {
        let p = self.val.clamp(1e-300, 1.0 - 1e-16);
        let x = randkit::chi2_inverse_cdf(p, v).expect("p in (0,1) by clamp");
        // implicit function theorem: dx/dp = 1 / pdf(x)
        self.unary(x, 1.0 / randkit::chi2_pdf(x, v))
    }
    fn detach(&self) -> Var {
        push(&self.tape, self.val, NONE, 0.0, NONE, 0.0)
    }
    fn clamp_const(&self, lo: f64, hi: f64) -> Var {
        if self.val < lo {
            self.unary(lo, 0.0)
        } else if self.val > hi {
            self.unary(hi, 0.0)
        } else {
            self.unary(self.val, 1.0)
        }
    }
}

// ---------------------------------------------------------------------------
// Finite differences (test oracle)
// ---------------------------------------------------------------------------

/// Central finite difference of a scalar function.
pub fn finite_diff_scalar<F>(f: F, x: f64, h: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central finite-difference gradient of `f` at `x` with step `h`.
pub fn finite_diff<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut grad = vec![0.0; x.len()];
    let mut pt = x.to_vec();
    for i in 0..x.len() {
        pt[i] = x[i] + h;
        let fp = f(&pt);
        pt[i] = x[i] - h;
        let fm = f(&pt);
        pt[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let y = x.clone() * x.clone();
        let g = y.backward().unwrap();
        assert_eq!(g.wrt(&x), 6.0);
    }

    #[test]
    fn tanh_gradient_at_zero() {
        let tape = Tape::new();
        let x = tape.var(0.0);
        let y = x.tanh();
        let g = y.backward().unwrap();
        assert_eq!(g.wrt(&x), 1.0);
    }

    #[test]
    fn identity_gradient() {
        let tape = Tape::new();
        let x = tape.var(1.5);
        let g = x.backward().unwrap();
        assert_eq!(g.wrt(&x), 1.0);
    }

    #[test]
    fn affine_antithetic_mean_path() {
        // f(mu, eta) = 2*mu - eta
        let tape = Tape::new();
        let mu = tape.var(3.0);
        let eta = tape.var(5.0);
        let f = mu.scale(2.0) - eta.clone();
        assert_eq!(f.value(), 1.0);
        let g = f.backward().unwrap();
        assert_eq!(g.wrt(&mu), 2.0);
        assert_eq!(g.wrt(&eta), -1.0);
    }

    #[test]
    fn primitives_match_finite_differences() {
        let mut stream = crate::randkit::RngStream::new(31, 0);
        type UnaryCase = (&'static str, fn(&Var) -> Var, fn(f64) -> f64, fn(&mut crate::randkit::RngStream) -> f64);
        let pos = |s: &mut crate::randkit::RngStream| s.next_f64() * 3.0 + 0.1;
        let any = |s: &mut crate::randkit::RngStream| s.next_normal();
        let cases: Vec<UnaryCase> = vec![
            ("exp", |v| v.exp(), |x| x.exp(), any),
            ("ln", |v| v.ln(), |x| x.ln(), pos),
            ("ln_1p", |v| v.ln_1p(), |x| x.ln_1p(), pos),
            ("sqrt", |v| Real::sqrt(v), |x| x.sqrt(), pos),
            ("tanh", |v| Real::tanh(v), |x| x.tanh(), any),
            ("tan", |v| Real::tan(v), |x| x.tan() , |s| s.next_f64() * 1.2 - 0.6),
            ("powf", |v| v.powf(0.25), |x| x.powf(0.25), pos),
            ("recip", |v| v.recip(), |x| 1.0 / x, pos),
            ("softplus", |v| v.softplus(), |x| x.exp().ln_1p(), any),
            ("normcdf", |v| v.std_normal_cdf(), crate::randkit::std_normal_cdf, any),
            (
                "chi2cdf",
                |v| v.chi2_cdf(Dof::new(7).unwrap()),
                |x| crate::randkit::chi2_cdf(x, Dof::new(7).unwrap()).unwrap(),
                pos,
            ),
            (
                "chi2inv",
                |v| v.chi2_inverse_cdf(Dof::new(7).unwrap()),
                |p| crate::randkit::chi2_inverse_cdf(p, Dof::new(7).unwrap()).unwrap(),
                |s| s.next_f64() * 0.9 + 0.05,
            ),
        ];
        for (name, varf, f64f, sampler) in cases {
            for _ in 0..20 {
                let x0 = sampler(&mut stream);
                let tape = Tape::new();
                let x = tape.var(x0);
                let y = varf(&x);
                let g = y.backward().unwrap().wrt(&x);
                let fd = finite_diff(|p| f64f(p[0]), &[x0], 1e-6)[0];
                let denom = fd.abs().max(1e-6);
                assert!(
                    ((g - fd) / denom).abs() < 1e-5,
                    "{name} at {x0}: analytic {g}, fd {fd}"
                );
            }
        }
    }

    #[test]
    fn composite_matches_finite_differences() {
        // randomized 20-op composite
        let f = |p: &[f64]| -> f64 {
            let (a, b, c) = (p[0], p[1], p[2]);
            let t1 = (a * b + c.tanh()).exp();
            let t2 = (t1 + a.powi(3)).sqrt();
            let t3 = t2.ln_1p() * (b - c).powi(2);
            t3 + (a + b * c).tanh() / (1.0 + t2)
        };
        let mut stream = crate::randkit::RngStream::new(77, 0);
        for _ in 0..10 {
            let pt = [stream.next_f64(), stream.next_f64(), stream.next_f64()];
            let tape = Tape::new();
            let a = tape.var(pt[0]);
            let b = tape.var(pt[1]);
            let c = tape.var(pt[2]);
            let t1 = (a.clone() * b.clone() + Real::tanh(&c)).exp();
            let t2 = Real::sqrt(&(t1.clone() + a.powi(3)));
            let t3 = t2.ln_1p() * (b.clone() - c.clone()).powi(2);
            let y = t3 + Real::tanh(&(a.clone() + b.clone() * c.clone())) / (t2.shift(1.0));
            let g = y.backward().unwrap();
            let fd = finite_diff(f, &pt, 1e-6);
            for (i, v) in [&a, &b, &c].iter().enumerate() {
                let got = g.wrt(v);
                assert!(
                    ((got - fd[i]) / fd[i].abs().max(1e-8)).abs() < 1e-5,
                    "component {i}: {got} vs {}",
                    fd[i]
                );
            }
        }
    }

    #[test]
    fn finite_diff_basics() {
        let g = finite_diff(|_| 4.0, &[1.0, 2.0], 1e-6);
        assert!(g.iter().all(|&v| v == 0.0));
        let g = finite_diff(|p| p[0].powi(3), &[2.0], 1e-6);
        assert!((g[0] - 12.0).abs() < 1e-6);
    }

    #[test]
    fn detach_severs_one_branch() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let y = x.detach() * x.clone();
        let g = y.backward().unwrap();
        assert_eq!(g.wrt(&x), 3.0); // not 2x = 6
    }

    #[test]
    fn backward_linearity() {
        let tape = Tape::new();
        let x = tape.var(0.7);
        let f = x.clone() * x.clone();
        let gexp = Real::exp(&x);
        let combo = f.scale(2.5) + gexp.scale(-1.5);
        let g = combo.backward().unwrap();
        let want = 2.5 * (2.0 * 0.7) - 1.5 * 0.7_f64.exp();
        assert!((g.wrt(&x) - want).abs() < 1e-12);
    }

    #[test]
    fn poisoned_tape_errors_at_backward() {
        let tape = Tape::new();
        let x = tape.var(-1.0);
        let y = x.ln(); // NaN
        let z = y.shift(1.0);
        match z.backward() {
            Err(Error::NonFinite { .. }) => {}
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }
}
