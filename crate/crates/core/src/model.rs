//! Problem representation: oracle traits, composite and conic problems, and
//! oracle-call accounting.

use std::fmt;
use std::ops::{Add, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Value and gradient oracle for the smooth part `f`.
///
/// Implementations must be pure functions of `x`. The gradient is only
/// required to be locally Lipschitz.
pub trait SmoothOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// `f(x) - f(y) - <grad_y, x - y>` where `grad_y = grad f(y)`, paired
    /// with an absolute bound on the rounding error of the returned value.
    ///
    /// The default subtracts values, so its error bound scales with `|f|`.
    /// Override it when the gap has a closed form free of cancellation.
    fn bregman(&self, y: &[f64], x: &[f64], grad_y: &[f64]) -> (f64, f64) {
        let lin: f64 = x.iter().zip(y).zip(grad_y).map(|((a, b), g)| g * (a - b)).sum();
        let (fx, fy) = (self.value(x), self.value(y));
        (
            fx - fy - lin,
            4.0 * f64::EPSILON * (fx.abs() + fy.abs() + lin.abs()),
        )
    }
}

/// A closed convex term with an exactly computable proximal operator.
///
/// `value` returns `f64::INFINITY` outside the domain; that is the only
/// domain-membership test the solvers use.
pub trait ProxTerm: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Unique minimizer of `gamma * P(x) + 0.5 * |x - z|^2`.
    fn prox(&self, gamma: f64, z: &[f64]) -> Vec<f64>;
}

/// Constraint map `g: R^n -> R^m` of `-g(x) in K`, accessed matrix-free.
pub trait ConstraintMap: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Vec<f64>;
    /// Transposed Jacobian applied to `v`, i.e. `grad g(x) v`.
    fn adjoint_apply(&self, x: &[f64], v: &[f64]) -> Vec<f64>;
}

/// `min f(x) + P(x)` where `f` has convexity parameter `mu` on `dom(P)`.
#[derive(Clone)]
pub struct CompositeProblem {
    pub smooth: Arc<dyn SmoothOracle>,
    pub nonsmooth: Arc<dyn ProxTerm>,
    pub mu: f64,
}

impl CompositeProblem {
    pub fn new(smooth: Arc<dyn SmoothOracle>, nonsmooth: Arc<dyn ProxTerm>, mu: f64) -> Result<Self> {
        check_dim(smooth.dim(), nonsmooth.dim())?;
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "convexity parameter must satisfy mu >= 0, got {mu}"
            )));
        }
        Ok(Self {
            smooth,
            nonsmooth,
            mu,
        })
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    /// Same oracles with a different convexity parameter.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.smooth.clone(), self.nonsmooth.clone(), mu)
    }
}

impl fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("dim", &self.dim())
            .field("mu", &self.mu)
            .finish_non_exhaustive()
    }
}

/// `F(x) = f(x) + P(x)`, or `+inf` outside `dom(P)`.
pub fn composite_value(problem: &CompositeProblem, x: &[f64]) -> f64 {
    let p = problem.nonsmooth.value(x);
    if p == f64::INFINITY {
        return f64::INFINITY;
    }
    problem.smooth.value(x) + p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    NonnegOrthant,
    ZeroCone,
    /// Second-order cone `{(t, u) : |u| <= t}`, stored with `t` first.
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub size: usize,
}

/// Product cone `K = K_1 x ... x K_r`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConeSpec {
    blocks: Vec<ConeBlock>,
}

impl ConeSpec {
    pub fn new(blocks: Vec<ConeBlock>) -> Result<Self> {
        if let Some(b) = blocks.iter().find(|b| b.size == 0) {
            return Err(Error::InvalidParameter(format!(
                "cone block {:?} must have positive size",
                b.kind
            )));
        }
        Ok(Self { blocks })
    }

    /// `R_+^{m1} x {0}^{m2}`, omitting empty blocks.
    pub fn orthant_and_zero(m1: usize, m2: usize) -> Self {
        let mut blocks = Vec::new();
        if m1 > 0 {
            blocks.push(ConeBlock {
                kind: ConeKind::NonnegOrthant,
                size: m1,
            });
        }
        if m2 > 0 {
            blocks.push(ConeBlock {
                kind: ConeKind::ZeroCone,
                size: m2,
            });
        }
        Self { blocks }
    }

    pub fn blocks(&self) -> &[ConeBlock] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    /// Iterates over `(kind, offset range)` pairs.
    pub fn ranges(&self) -> impl Iterator<Item = (ConeKind, std::ops::Range<usize>)> + '_ {
        let mut offset = 0;
        self.blocks.iter().map(move |b| {
            let r = offset..offset + b.size;
            offset += b.size;
            (b.kind, r)
        })
    }
}

/// `min f(x) + P(x)` subject to `-g(x) in K`.
#[derive(Clone)]
pub struct ConicProblem {
    pub base: CompositeProblem,
    pub constraint: Arc<dyn ConstraintMap>,
    pub cone: ConeSpec,
}

impl ConicProblem {
    pub fn new(base: CompositeProblem, constraint: Arc<dyn ConstraintMap>, cone: ConeSpec) -> Result<Self> {
        check_dim(base.dim(), constraint.input_dim())?;
        check_dim(constraint.output_dim(), cone.dim())?;
        Ok(Self {
            base,
            constraint,
            cone,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn num_constraints(&self) -> usize {
        self.cone.dim()
    }
}

impl fmt::Debug for ConicProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConicProblem")
            .field("base", &self.base)
            .field("cone", &self.cone)
            .finish_non_exhaustive()
    }
}

/// Oracle call totals for one solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCounters {
    pub f_evals: u64,
    pub grad_f_evals: u64,
    pub prox_evals: u64,
    pub g_evals: u64,
    pub adjoint_evals: u64,
    pub cone_proj_evals: u64,
}

impl Add for OracleCounters {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            f_evals: self.f_evals + o.f_evals,
            grad_f_evals: self.grad_f_evals + o.grad_f_evals,
            prox_evals: self.prox_evals + o.prox_evals,
            g_evals: self.g_evals + o.g_evals,
            adjoint_evals: self.adjoint_evals + o.adjoint_evals,
            cone_proj_evals: self.cone_proj_evals + o.cone_proj_evals,
        }
    }
}

impl Sub for OracleCounters {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            f_evals: self.f_evals - o.f_evals,
            grad_f_evals: self.grad_f_evals - o.grad_f_evals,
            prox_evals: self.prox_evals - o.prox_evals,
            g_evals: self.g_evals - o.g_evals,
            adjoint_evals: self.adjoint_evals - o.adjoint_evals,
            cone_proj_evals: self.cone_proj_evals - o.cone_proj_evals,
        }
    }
}

/// Live counters owned by a single solve.
#[derive(Debug, Default)]
pub struct CounterSet {
    f: AtomicU64,
    grad_f: AtomicU64,
    prox: AtomicU64,
    g: AtomicU64,
    adjoint: AtomicU64,
    cone_proj: AtomicU64,
}

impl CounterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> OracleCounters {
        OracleCounters {
            f_evals: self.f.load(Ordering::Relaxed),
            grad_f_evals: self.grad_f.load(Ordering::Relaxed),
            prox_evals: self.prox.load(Ordering::Relaxed),
            g_evals: self.g.load(Ordering::Relaxed),
            adjoint_evals: self.adjoint.load(Ordering::Relaxed),
            cone_proj_evals: self.cone_proj.load(Ordering::Relaxed),
        }
    }

    pub(crate) fn bump_g(&self) {
        self.g.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn bump_adjoint(&self) {
        self.adjoint.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn bump_cone_proj(&self) {
        self.cone_proj.fetch_add(1, Ordering::Relaxed);
    }
}

/// A composite problem viewed through a counter set. Every solver reaches the
/// oracles only through this wrapper.
pub(crate) struct Counted<'a> {
    pub problem: &'a CompositeProblem,
    pub counters: &'a CounterSet,
}

impl<'a> Counted<'a> {
    pub fn new(problem: &'a CompositeProblem, counters: &'a CounterSet) -> Self {
        Self { problem, counters }
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        self.counters.f.fetch_add(1, Ordering::Relaxed);
        self.problem.smooth.value(x)
    }

    /// Counted as two value evaluations.
    pub fn bregman(&self, y: &[f64], x: &[f64], grad_y: &[f64]) -> (f64, f64) {
        self.counters.f.fetch_add(2, Ordering::Relaxed);
        self.problem.smooth.bregman(y, x, grad_y)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.counters.grad_f.fetch_add(1, Ordering::Relaxed);
        self.problem.smooth.gradient(x)
    }

    pub fn prox(&self, gamma: f64, z: &[f64]) -> Vec<f64> {
        self.counters.prox.fetch_add(1, Ordering::Relaxed);
        self.problem.nonsmooth.prox(gamma, z)
    }
}

/// Largest relative discrepancy between `oracle.gradient(x)` and central
/// differences with step `h`, measured as `|fd_i - g_i| / (1 + |g_i|)`.
pub fn check_gradient(oracle: &dyn SmoothOracle, x: &[f64], h: f64) -> Result<f64> {
    check_dim(oracle.dim(), x.len())?;
    if !(h > 0.0 && h <= 1e-2) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must lie in (0, 1e-2], got {h}"
        )));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { coordinate: i });
    }
    let grad = oracle.gradient(x);
    check_dim(x.len(), grad.len())?;
    let mut worst = 0.0_f64;
    let mut probe = x.to_vec();
    for (i, &g) in grad.iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::NonFinite { coordinate: i });
        }
        let xi = x[i];
        probe[i] = xi + h;
        let fp = oracle.value(&probe);
        probe[i] = xi - h;
        let fm = oracle.value(&probe);
        probe[i] = xi;
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(Error::NonFinite { coordinate: i });
        }
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - g).abs() / (1.0 + g.abs()));
    }
    Ok(worst)
}
