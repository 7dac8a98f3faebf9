//! Outer loops: a perturbed proximal point wrapper that certifies residuals
//! for merely convex problems, and a first-order proximal augmented
//! Lagrangian method that certifies KKT residuals for conic constraints.
//!
//! Both solve a sequence of strongly convex subproblems with
//! [`apg_terminating`](crate::apg::apg_terminating) under the schedules
//! `rho_k = rho0 * zeta^k` and `eta_k = eta0 * sigma^k`.

mod al;
mod kkt;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use al::{al_smooth_gradient, al_value, build_al_subproblem, multiplier_update};
pub use kkt::{kkt_report, KktReport, WITNESS_DEFECT_TOL};

use crate::apg::{apg_terminating_observed, ApgParams, ApgState, Certificate, StepReport, GAMMA0_MARGIN};
use crate::error::{check_dim, Error, OuterTimeout, Result};
use crate::linalg::{dist, norm, norm_sq};
use crate::model::{CompositeProblem, ConicProblem, CounterSet, OracleCounters};
use crate::proxcone::check_dual_membership;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterParams {
    pub epsilon: f64,
    pub rho0: f64,
    pub zeta: f64,
    pub sigma: f64,
    pub eta0: f64,
    /// Inner initial step; only the proximal point wrapper uses it, the
    /// augmented Lagrangian passes `1/rho_k`.
    pub gamma0: f64,
    pub alpha0: f64,
    pub delta: f64,
    pub check_every: usize,
    pub max_outer: usize,
    pub max_inner_iters: usize,
    pub max_backtracks: usize,
}

impl OuterParams {
    pub fn ppa_defaults(epsilon: f64) -> Self {
        Self {
            epsilon,
            rho0: 10.0,
            zeta: 2.0,
            sigma: 0.4,
            eta0: 1.0,
            gamma0: 1.0,
            alpha0: 1.0,
            delta: 0.5,
            check_every: 10,
            max_outer: 200,
            max_inner_iters: 1_000_000,
            max_backtracks: 100,
        }
    }

    pub fn prox_al_defaults(epsilon: f64, mu: f64) -> Self {
        let rho0 = f64::max(10.0, min_prox_al_rho0(mu) + 1.0);
        Self {
            rho0,
            gamma0: 1.0 / rho0,
            ..Self::ppa_defaults(epsilon)
        }
    }

    pub fn rho(&self, k: usize) -> f64 {
        self.rho0 * self.zeta.powi(k as i32)
    }

    pub fn eta(&self, k: usize) -> f64 {
        self.eta0 * self.sigma.powi(k as i32)
    }

    fn validate_common(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon>0 violated");
        }
        if !(self.zeta > 1.0) {
            return bad("zeta>1 violated");
        }
        if !(self.sigma > 0.0 && self.sigma * self.zeta < 1.0) {
            return bad("0<σ<1/ζ violated (need 0 < sigma < 1/zeta)");
        }
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return bad("0<eta0<=1 violated");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("0<delta<1 violated");
        }
        if self.check_every == 0
            || self.max_outer == 0
            || self.max_inner_iters == 0
            || self.max_backtracks == 0
        {
            return bad("M, max_outer, max_inner_iters and max_backtracks must be positive");
        }
        if !(self.alpha0 <= 1.0) {
            return bad("alpha0<=1 violated");
        }
        Ok(())
    }

    /// Admissibility for the proximal point wrapper.
    pub fn validate_ppa(&self) -> Result<()> {
        self.validate_common()?;
        if !(self.rho0 > 1.0) {
            return Err(Error::InvalidParameter("rho0>1 violated".into()));
        }
        if !(self.gamma0 > 0.0 && self.gamma0 <= self.rho0) {
            return Err(Error::InvalidParameter("0<gamma0<=rho0 violated".into()));
        }
        if !(self.alpha0 >= (self.gamma0 / self.rho0).sqrt()) {
            return Err(Error::InvalidParameter(
                "alpha0>=sqrt(gamma0/rho0) violated".into(),
            ));
        }
        Ok(())
    }

    /// Admissibility for the augmented Lagrangian method with convexity
    /// parameter `mu`.
    pub fn validate_prox_al(&self, mu: f64) -> Result<()> {
        self.validate_common()?;
        if !(self.rho0 > min_prox_al_rho0(mu)) {
            return Err(Error::InvalidParameter(format!(
                "rho0>(mu+sqrt(mu^2+4))/2 violated: rho0 = {}, bound = {}",
                self.rho0,
                min_prox_al_rho0(mu)
            )));
        }
        let lower = ((mu + 1.0 / self.rho0) / self.rho0).sqrt();
        if !(self.alpha0 >= lower) {
            return Err(Error::InvalidParameter(format!(
                "alpha0>=sqrt((mu+1/rho0)/rho0) violated: alpha0 = {}, bound = {lower}",
                self.alpha0
            )));
        }
        Ok(())
    }

    fn inner(&self, gamma0: f64, epsilon: f64) -> ApgParams {
        ApgParams {
            gamma0,
            alpha0: self.alpha0,
            delta: self.delta,
            check_every: self.check_every,
            epsilon,
            max_iters: self.max_inner_iters,
            max_backtracks: self.max_backtracks,
            warm_start: false,
        }
    }
}

/// `(mu + sqrt(mu^2 + 4)) / 2`
pub fn min_prox_al_rho0(mu: f64) -> f64 {
    0.5 * (mu + (mu * mu + 4.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterTraceRow {
    pub k: usize,
    pub rho: f64,
    pub eta: f64,
    pub inner_iters: usize,
    pub inner_grad_evals: u64,
    pub inner_prox_evals: u64,
    /// Cumulative over all outer iterations so far.
    pub total_grad_evals: u64,
    pub total_prox_evals: u64,
    /// `|x^{k+1} - x^k|`, or the norm of the primal-dual step.
    pub step_norm: f64,
    pub certified_inner_residual: f64,
    /// Norm of the explicit stationarity witness at `x^{k+1}`.
    pub stationarity: f64,
    /// Complementarity residual; absent without constraints.
    pub complementarity: Option<f64>,
}

/// Observer hook: `(k, state entering inner iteration, accepted step)`.
pub type InnerObserver<'a> = &'a mut dyn FnMut(usize, &ApgState, &StepReport);

#[derive(Debug, Clone)]
pub struct PpaResult {
    pub x: Vec<f64>,
    /// `eta_k + |x^{k+1} - x^k| / rho_k`
    pub residual_bound: f64,
    /// Explicit element of `dF(x)`; its norm never exceeds `residual_bound`.
    pub witness: Vec<f64>,
    pub witness_norm: f64,
    pub last_certificate: Certificate,
    /// Proximal center of the final subproblem.
    pub center: Vec<f64>,
    pub outer_iterations: usize,
    pub rows: Vec<OuterTraceRow>,
    pub counters: OracleCounters,
}

#[derive(Debug, Clone)]
pub struct ProxAlResult {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub report: KktReport,
    pub outer_iterations: usize,
    pub rows: Vec<OuterTraceRow>,
    pub counters: OracleCounters,
}

/// Residual-certified solve for `mu = 0` by perturbing with
/// `|x - x^k|^2 / (2 rho_k)` and solving each perturbation to `eta_k`.
pub fn ppa_unconstrained(
    problem: &CompositeProblem,
    params: &OuterParams,
    init: &[f64],
) -> Result<PpaResult> {
    ppa_unconstrained_observed(problem, params, init, &mut |_, _, _| {})
}

pub fn ppa_unconstrained_observed(
    problem: &CompositeProblem,
    params: &OuterParams,
    init: &[f64],
    observer: InnerObserver<'_>,
) -> Result<PpaResult> {
    if problem.mu != 0.0 {
        return Err(Error::InvalidParameter(
            "the proximal point wrapper expects mu = 0".into(),
        ));
    }
    params.validate_ppa()?;
    check_dim(problem.dim(), init.len())?;
    if problem.nonsmooth.value(init) == f64::INFINITY {
        return Err(Error::InvalidParameter(
            "starting point lies outside dom(P)".into(),
        ));
    }
    let mut x = init.to_vec();
    let mut totals = OracleCounters::default();
    let mut rows = Vec::new();
    let mut best_bound = f64::INFINITY;
    for k in 0..params.max_outer {
        let (rho, eta) = (params.rho(k), params.eta(k));
        let sub = al::proximal_subproblem(problem, &x, rho)?;
        let inner = apg_terminating_observed(&sub, &params.inner(params.gamma0, eta), &x, &mut |s, r| {
            observer(k, s, r)
        });
        let inner = match inner {
            Ok(inner) => inner,
            Err(Error::ApgTimeout(t)) => {
                return Err(Error::OuterTimeout(Box::new(OuterTimeout {
                    x,
                    lambda: Vec::new(),
                    best_bound,
                    best_report: None,
                    rows,
                    counters: totals + t.trace.counters,
                })))
            }
            Err(e) => return Err(e),
        };
        totals = totals + inner.trace.counters;
        let x_next = inner.x.clone();
        let step = dist(&x_next, &x);
        let inv = 1.0 / rho;
        let witness: Vec<f64> = inner
            .certificate
            .witness
            .iter()
            .zip(x_next.iter().zip(&x))
            .map(|(u, (a, b))| u - inv * (a - b))
            .collect();
        let bound = eta + inv * step;
        best_bound = best_bound.min(bound);
        rows.push(OuterTraceRow {
            k,
            rho,
            eta,
            inner_iters: inner.iterations,
            inner_grad_evals: inner.trace.counters.grad_f_evals,
            inner_prox_evals: inner.trace.counters.prox_evals,
            total_grad_evals: totals.grad_f_evals,
            total_prox_evals: totals.prox_evals,
            step_norm: step,
            certified_inner_residual: inner.certificate.residual,
            stationarity: norm(&witness),
            complementarity: None,
        });
        let done = inv * step <= 0.5 * params.epsilon && eta <= 0.5 * params.epsilon;
        let center = std::mem::replace(&mut x, x_next);
        if done {
            return Ok(PpaResult {
                x,
                center,
                residual_bound: bound,
                witness_norm: norm(&witness),
                witness,
                last_certificate: inner.certificate,
                outer_iterations: k + 1,
                rows,
                counters: totals,
            });
        }
    }
    Err(Error::OuterTimeout(Box::new(OuterTimeout {
        x,
        lambda: Vec::new(),
        best_bound,
        best_report: None,
        rows,
        counters: totals,
    })))
}

/// First-order proximal augmented Lagrangian method returning an
/// `epsilon`-KKT pair with self-validating witnesses.
pub fn prox_al(
    conic: &ConicProblem,
    params: &OuterParams,
    init_x: &[f64],
    init_lambda: &[f64],
) -> Result<ProxAlResult> {
    prox_al_observed(conic, params, init_x, init_lambda, &mut |_, _, _| {})
}

pub fn prox_al_observed(
    conic: &ConicProblem,
    params: &OuterParams,
    init_x: &[f64],
    init_lambda: &[f64],
    observer: InnerObserver<'_>,
) -> Result<ProxAlResult> {
    let mu = conic.base.mu;
    params.validate_prox_al(mu)?;
    check_dim(conic.dim(), init_x.len())?;
    check_dim(conic.num_constraints(), init_lambda.len())?;
    check_dual_membership(&conic.cone, init_lambda)?;
    if conic.base.nonsmooth.value(init_x) == f64::INFINITY {
        return Err(Error::InvalidParameter(
            "starting point lies outside dom(P)".into(),
        ));
    }
    let outer_counters = Arc::new(CounterSet::new());
    let mut x = init_x.to_vec();
    let mut lambda = init_lambda.to_vec();
    let mut inner_totals = OracleCounters::default();
    let mut rows = Vec::new();
    let mut best: Option<KktReport> = None;
    for k in 0..params.max_outer {
        let (rho, eta) = (params.rho(k), params.eta(k));
        let gamma0 = 1.0 / rho;
        if (mu + gamma0) * gamma0 > GAMMA0_MARGIN {
            return Err(Error::Invariant(format!(
                "inner step 1/rho_k = {gamma0} would be clamped (mu_k*gamma0 = {})",
                (mu + gamma0) * gamma0
            )));
        }
        let sub = al::al_subproblem_counted(conic, &x, &lambda, rho, Some(outer_counters.clone()))?;
        let inner = match apg_terminating_observed(&sub, &params.inner(gamma0, eta), &x, &mut |s, r| {
            observer(k, s, r)
        }) {
            Ok(inner) => inner,
            Err(Error::ApgTimeout(t)) => {
                return Err(Error::OuterTimeout(Box::new(OuterTimeout {
                    x,
                    lambda,
                    best_bound: best.as_ref().map_or(f64::INFINITY, KktReport::max_residual),
                    best_report: best,
                    rows,
                    counters: inner_totals + t.trace.counters + outer_counters.snapshot(),
                })))
            }
            Err(e) => return Err(e),
        };
        inner_totals = inner_totals + inner.trace.counters;
        let x_next = inner.x.clone();
        outer_counters.bump_g();
        let gval = conic.constraint.value(&x_next);
        outer_counters.bump_cone_proj();
        let lambda_next = multiplier_update(&conic.cone, &lambda, rho, &gval)?;
        let report = kkt::kkt_report_with_g(
            conic,
            &x_next,
            &gval,
            &lambda_next,
            &inner.certificate,
            rho,
            &x,
            &lambda,
        )?;
        let step = (norm_sq(&crate::linalg::sub(&x_next, &x))
            + norm_sq(&crate::linalg::sub(&lambda_next, &lambda)))
        .sqrt();
        rows.push(OuterTraceRow {
            k,
            rho,
            eta,
            inner_iters: inner.iterations,
            inner_grad_evals: inner.trace.counters.grad_f_evals,
            inner_prox_evals: inner.trace.counters.prox_evals,
            total_grad_evals: inner_totals.grad_f_evals,
            total_prox_evals: inner_totals.prox_evals,
            step_norm: step,
            certified_inner_residual: inner.certificate.residual,
            stationarity: report.stationarity_residual,
            complementarity: Some(report.complementarity_residual),
        });
        let done = step / rho <= 0.5 * params.epsilon && eta <= 0.5 * params.epsilon;
        x = x_next;
        lambda = lambda_next;
        if done {
            return Ok(ProxAlResult {
                x,
                lambda,
                report,
                outer_iterations: k + 1,
                rows,
                counters: inner_totals + outer_counters.snapshot(),
            });
        }
        if best
            .as_ref()
            .map_or(true, |b| report.max_residual() < b.max_residual())
        {
            best = Some(report);
        }
    }
    Err(Error::OuterTimeout(Box::new(OuterTimeout {
        x,
        lambda,
        best_bound: best.as_ref().map_or(f64::INFINITY, KktReport::max_residual),
        best_report: best,
        rows,
        counters: inner_totals + outer_counters.snapshot(),
    })))
}
