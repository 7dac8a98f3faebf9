//! Accelerated proximal gradient iteration with backtracking for composite
//! problems whose smooth part has only a locally Lipschitz gradient.
//!
//! Every iteration restarts the step search at `gamma0` and accepts the first
//! `gamma0 * delta^n` satisfying the quadratic upper bound at the new iterate.
//! The extrapolation weight `alpha_t` is re-solved from a quadratic for each
//! trial step, so `alpha`, `beta` and `y` all change during the search.
//!
//! [`apg_terminating`] adds a periodic residual certificate: every `M`
//! iterations one backtracked proximal gradient step is taken from the
//! current iterate, and the resulting point carries an explicit element of
//! its subdifferential whose norm bounds the optimality residual.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ApgTimeout, Error, Result};
use crate::linalg::{lincomb, norm, norm_sq, sub};
use crate::model::{CompositeProblem, Counted, CounterSet, OracleCounters};

/// Relative slack on the line-search inequality.
pub const ACCEPT_REL_SLACK: f64 = 1e-12;
/// `gamma0` is clamped to `GAMMA0_MARGIN / mu` when `mu > 0`.
pub const GAMMA0_MARGIN: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApgParams {
    pub gamma0: f64,
    pub alpha0: f64,
    pub delta: f64,
    /// Certificate cadence `M`.
    pub check_every: usize,
    /// Target residual for [`apg_terminating`].
    pub epsilon: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    /// Start each step search from the previous accepted step instead of
    /// `gamma0`. Off by default; the convergence analysis assumes restarts.
    pub warm_start: bool,
}

impl Default for ApgParams {
    fn default() -> Self {
        Self {
            gamma0: 1.0,
            alpha0: 1.0,
            delta: 0.5,
            check_every: 10,
            epsilon: 1e-6,
            max_iters: 1_000_000,
            max_backtracks: 100,
            warm_start: false,
        }
    }
}

/// Largest admissible initial step for convexity parameter `mu`.
pub fn clamp_gamma0(gamma0: f64, mu: f64) -> f64 {
    if mu > 0.0 {
        gamma0.min(GAMMA0_MARGIN / mu)
    } else {
        gamma0
    }
}

impl ApgParams {
    /// Checks admissibility for convexity parameter `mu`, clamping `gamma0`
    /// below `1/mu` first.
    pub fn validated(mut self, mu: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return bad(format!("gamma0 must be positive, got {}", self.gamma0));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("0<delta<1 violated: delta = {}", self.delta));
        }
        if self.check_every == 0 {
            return bad("certificate cadence M must be a positive integer".into());
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.max_iters == 0 || self.max_backtracks == 0 {
            return bad("max_iters and max_backtracks must be positive".into());
        }
        self.gamma0 = clamp_gamma0(self.gamma0, mu);
        let lower = (mu * self.gamma0).sqrt();
        if !(self.alpha0 > 0.0 && self.alpha0 >= lower && self.alpha0 <= 1.0) {
            return bad(format!(
                "sqrt(mu*gamma0) <= alpha0 <= 1 violated: alpha0 = {}, sqrt(mu*gamma0) = {lower}",
                self.alpha0
            ));
        }
        Ok(self)
    }
}

/// Iterate of the accelerated scheme entering iteration `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApgState {
    pub t: usize,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub alpha_prev: f64,
    pub gamma_prev: f64,
    /// `prod_{i<t} (1 - alpha_i)`
    pub lambda_prod: f64,
}

impl ApgState {
    pub fn initial(init: &[f64], params: &ApgParams) -> Self {
        Self {
            t: 1,
            x: init.to_vec(),
            z: init.to_vec(),
            alpha_prev: params.alpha0,
            gamma_prev: params.gamma0,
            lambda_prod: 1.0,
        }
    }
}

/// What the accepted trial of one iteration looked like.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub n_t: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub y: Vec<f64>,
    /// `F(x^{t+1})`
    pub objective: f64,
    /// Line-search sides `2 gamma (f(x+) - f(y) - <grad f(y), x+ - y>)` and
    /// `|x+ - y|^2` at acceptance.
    pub lhs: f64,
    pub rhs: f64,
}

/// Explicit witness `u in dF(x_tilde)` produced from one backtracked proximal
/// gradient step at `x_pre`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub x_pre: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub gamma_tilde: f64,
    pub witness: Vec<f64>,
    pub residual: f64,
}

/// Output of [`adaptive_pg`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveStep {
    pub x_tilde: Vec<f64>,
    pub gamma_tilde: f64,
    pub n_tilde: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApgTraceRow {
    pub t: usize,
    pub n_t: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub objective: f64,
    pub lambda_prod: f64,
    /// Cumulative counts including any certificate check on this row.
    pub grad_evals: u64,
    pub prox_evals: u64,
    pub cert_residual: Option<f64>,
    pub cert_backtracks: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApgTrace {
    pub rows: Vec<ApgTraceRow>,
    pub counters: OracleCounters,
}

/// Result of [`apg_run`].
#[derive(Debug, Clone)]
pub struct ApgRun {
    pub state: ApgState,
    pub trace: ApgTrace,
}

/// Result of [`apg_terminating`].
#[derive(Debug, Clone)]
pub struct CertifiedPoint {
    pub x: Vec<f64>,
    pub certificate: Certificate,
    pub iterations: usize,
    pub trace: ApgTrace,
}

/// Root in `(0, 1]` of
/// `gamma_prev a^2 = (1 - a) alpha_prev^2 gamma + mu a gamma gamma_prev`.
pub fn solve_alpha(gamma_prev: f64, gamma: f64, alpha_prev: f64, mu: f64) -> Result<f64> {
    let a = gamma_prev;
    let b = alpha_prev * alpha_prev * gamma - mu * gamma * gamma_prev;
    let c = -alpha_prev * alpha_prev * gamma;
    let disc = (b * b - 4.0 * a * c).sqrt();
    // c < 0, so the roots have opposite signs; pick the positive one without
    // subtracting nearly equal numbers.
    let root = if b >= 0.0 {
        let q = -0.5 * (b + disc);
        c / q
    } else {
        let q = -0.5 * (b - disc);
        q / a
    };
    if !(root > 0.0 && root <= 1.0 + 1e-12) {
        return Err(Error::Invariant(format!(
            "alpha equation has no root in (0,1]: gamma_prev={gamma_prev}, gamma={gamma}, \
             alpha_prev={alpha_prev}, mu={mu}, root={root}"
        )));
    }
    Ok(root.min(1.0))
}

/// Residual of the alpha equation relative to the magnitude of its terms.
pub fn alpha_equation_residual(gamma_prev: f64, gamma: f64, alpha_prev: f64, mu: f64, alpha: f64) -> f64 {
    let lhs = gamma_prev * alpha * alpha;
    let t1 = (1.0 - alpha) * alpha_prev * alpha_prev * gamma;
    let t2 = mu * alpha * gamma * gamma_prev;
    (lhs - t1 - t2).abs() / (lhs.abs() + t1.abs() + t2.abs()).max(f64::MIN_POSITIVE)
}

#[inline]
/// `lhs <= rhs` up to a relative slack and the rounding bound of `lhs`.
fn accepts(lhs: f64, rhs: f64, rounding: f64) -> bool {
    lhs <= rhs * (1.0 + ACCEPT_REL_SLACK) + rounding
}

struct Trial {
    alpha: f64,
    beta: f64,
    y: Vec<f64>,
    z_new: Vec<f64>,
    x_new: Vec<f64>,
    lhs: f64,
    rhs: f64,
    rounding: f64,
}

/// Stateful driver shared by the public entry points; owns the counters of
/// one solve.
pub struct Apg<'a> {
    problem: &'a CompositeProblem,
    params: ApgParams,
    counters: CounterSet,
}

impl<'a> Apg<'a> {
    pub fn new(problem: &'a CompositeProblem, params: ApgParams) -> Result<Self> {
        let params = params.validated(problem.mu)?;
        Ok(Self {
            problem,
            params,
            counters: CounterSet::new(),
        })
    }

    /// Parameters after validation and clamping.
    pub fn params(&self) -> &ApgParams {
        &self.params
    }

    pub fn counters(&self) -> OracleCounters {
        self.counters.snapshot()
    }

    fn oracle(&self) -> Counted<'_> {
        Counted::new(self.problem, &self.counters)
    }

    pub fn initial_state(&self, init: &[f64]) -> Result<ApgState> {
        check_dim(self.problem.dim(), init.len())?;
        if self.problem.nonsmooth.value(init) == f64::INFINITY {
            return Err(Error::InvalidParameter(
                "starting point lies outside dom(P)".into(),
            ));
        }
        Ok(ApgState::initial(init, &self.params))
    }

    fn trial(&self, state: &ApgState, gamma: f64) -> Result<Trial> {
        let cp = self.oracle();
        let mu = self.problem.mu;
        let alpha = solve_alpha(state.gamma_prev, gamma, state.alpha_prev, mu)?;
        let beta = mu * gamma / alpha;
        let denom = 1.0 - alpha * beta;
        let y: Vec<f64> = state
            .x
            .iter()
            .zip(&state.z)
            .map(|(x, z)| ((1.0 - alpha) * x + alpha * (1.0 - beta) * z) / denom)
            .collect();
        let grad_y = cp.grad(&y);
        let step = gamma / alpha;
        let w: Vec<f64> = y
            .iter()
            .zip(&state.z)
            .zip(&grad_y)
            .map(|((y, z), g)| beta * y + (1.0 - beta) * z - step * g)
            .collect();
        let z_new = cp.prox(step, &w);
        let x_new = lincomb(1.0 - alpha, &state.x, alpha, &z_new);
        let d = sub(&x_new, &y);
        let (gap, err) = cp.bregman(&y, &x_new, &grad_y);
        let (lhs, rounding) = (2.0 * gamma * gap, 2.0 * gamma * err);
        let rhs = norm_sq(&d);
        Ok(Trial {
            alpha,
            beta,
            y,
            z_new,
            x_new,
            lhs,
            rhs,
            rounding,
        })
    }

    /// One accelerated iteration with backtracking.
    pub fn step(&self, state: &ApgState) -> Result<(ApgState, StepReport)> {
        let start = if self.params.warm_start {
            state.gamma_prev
        } else {
            self.params.gamma0
        };
        let mut gamma = start;
        for n in 0..=self.params.max_backtracks {
            let trial = self.trial(state, gamma)?;
            if accepts(trial.lhs, trial.rhs, trial.rounding) {
                let objective = self.oracle().f(&trial.x_new) + self.problem.nonsmooth.value(&trial.x_new);
                let next = ApgState {
                    t: state.t + 1,
                    x: trial.x_new,
                    z: trial.z_new,
                    alpha_prev: trial.alpha,
                    gamma_prev: gamma,
                    lambda_prod: state.lambda_prod * (1.0 - trial.alpha),
                };
                let report = StepReport {
                    n_t: n,
                    gamma,
                    alpha: trial.alpha,
                    beta: trial.beta,
                    y: trial.y,
                    objective,
                    lhs: trial.lhs,
                    rhs: trial.rhs,
                };
                return Ok((next, report));
            }
            gamma *= self.params.delta;
        }
        Err(Error::LineSearchFailed {
            iteration: state.t,
            backtracks: self.params.max_backtracks,
        })
    }

    /// Backtracked proximal gradient step from `v`; also returns `grad f(v)`.
    fn adaptive(&self, v: &[f64], gamma_start: f64) -> Result<(AdaptiveStep, Vec<f64>)> {
        let cp = self.oracle();
        let grad_v = cp.grad(v);
        let mut gamma = gamma_start;
        for n in 0..=self.params.max_backtracks {
            let shifted: Vec<f64> = v.iter().zip(&grad_v).map(|(x, g)| x - gamma * g).collect();
            let cand = cp.prox(gamma, &shifted);
            let d = sub(&cand, v);
            let (gap, err) = cp.bregman(v, &cand, &grad_v);
            if accepts(2.0 * gamma * gap, norm_sq(&d), 2.0 * gamma * err) {
                let step = AdaptiveStep {
                    x_tilde: cand,
                    gamma_tilde: gamma,
                    n_tilde: n,
                };
                return Ok((step, grad_v));
            }
            gamma *= self.params.delta;
        }
        Err(Error::LineSearchFailed {
            iteration: 0,
            backtracks: self.params.max_backtracks,
        })
    }

    /// Adaptive proximal gradient step from `v` plus its residual
    /// certificate.
    pub fn certify(&self, v: &[f64]) -> Result<(AdaptiveStep, Certificate)> {
        let (step, grad_v) = self.adaptive(v, self.params.gamma0)?;
        let grad_t = self.oracle().grad(&step.x_tilde);
        let cert = build_certificate(v, &step.x_tilde, step.gamma_tilde, &grad_v, &grad_t);
        Ok((step, cert))
    }

    fn row(&self, state: &ApgState, report: &StepReport, cert: Option<(&Certificate, usize)>) -> ApgTraceRow {
        let c = self.counters.snapshot();
        ApgTraceRow {
            t: state.t - 1,
            n_t: report.n_t,
            gamma: report.gamma,
            alpha: report.alpha,
            beta: report.beta,
            objective: report.objective,
            lambda_prod: state.lambda_prod,
            grad_evals: c.grad_f_evals,
            prox_evals: c.prox_evals,
            cert_residual: cert.map(|(c, _)| c.residual),
            cert_backtracks: cert.map(|(_, n)| n),
        }
    }

    /// Iterates without a termination test until `stop` returns true or the
    /// iteration budget runs out.
    pub fn run<S>(&self, init: &[f64], mut stop: S) -> Result<ApgRun>
    where
        S: FnMut(&ApgState, &StepReport) -> bool,
    {
        let mut state = self.initial_state(init)?;
        let mut rows = Vec::new();
        for _ in 0..self.params.max_iters {
            let (next, report) = self.step(&state)?;
            rows.push(self.row(&next, &report, None));
            state = next;
            if stop(&state, &report) {
                break;
            }
        }
        Ok(ApgRun {
            state,
            trace: ApgTrace {
                rows,
                counters: self.counters.snapshot(),
            },
        })
    }

    /// Iterates until a periodic certificate reaches `params.epsilon`.
    ///
    /// `observer` sees the state entering each iteration together with the
    /// accepted step.
    pub fn run_certified(
        &self,
        init: &[f64],
        observer: &mut dyn FnMut(&ApgState, &StepReport),
    ) -> Result<CertifiedPoint> {
        if !(self.problem.mu > 0.0) {
            return Err(Error::InvalidParameter(
                "certified termination requires mu > 0".into(),
            ));
        }
        let mut state = self.initial_state(init)?;
        let mut rows = Vec::new();
        let mut best: Option<Certificate> = None;
        for _ in 0..self.params.max_iters {
            let t = state.t;
            let (next, report) = self.step(&state)?;
            observer(&state, &report);
            if t % self.params.check_every == 0 {
                let (step, cert) = self.certify(&next.x)?;
                rows.push(self.row(&next, &report, Some((&cert, step.n_tilde))));
                if cert.residual <= self.params.epsilon {
                    return Ok(CertifiedPoint {
                        x: cert.x_tilde.clone(),
                        certificate: cert,
                        iterations: t,
                        trace: ApgTrace {
                            rows,
                            counters: self.counters.snapshot(),
                        },
                    });
                }
                if best.as_ref().map_or(true, |b| cert.residual < b.residual) {
                    best = Some(cert);
                }
            } else {
                rows.push(self.row(&next, &report, None));
            }
            state = next;
        }
        Err(Error::ApgTimeout(Box::new(ApgTimeout {
            iterations: self.params.max_iters,
            best,
            trace: ApgTrace {
                rows,
                counters: self.counters.snapshot(),
            },
        })))
    }
}

fn build_certificate(
    x_pre: &[f64],
    x_tilde: &[f64],
    gamma_tilde: f64,
    grad_pre: &[f64],
    grad_tilde: &[f64],
) -> Certificate {
    let inv = 1.0 / gamma_tilde;
    let witness: Vec<f64> = x_pre
        .iter()
        .zip(x_tilde)
        .zip(grad_tilde.iter().zip(grad_pre))
        .map(|((p, t), (gt, gp))| inv * (p - t) + gt - gp)
        .collect();
    Certificate {
        x_pre: x_pre.to_vec(),
        x_tilde: x_tilde.to_vec(),
        gamma_tilde,
        residual: norm(&witness),
        witness,
    }
}

/// One accelerated iteration from `state`.
pub fn apg_iteration(
    problem: &CompositeProblem,
    state: &ApgState,
    params: &ApgParams,
) -> Result<(ApgState, StepReport)> {
    Apg::new(problem, *params)?.step(state)
}

/// Runs the accelerated iteration from `x^1 = z^1 = init` until `stop`
/// returns true or `max_iters` iterations have been taken.
pub fn apg_run<S>(problem: &CompositeProblem, params: &ApgParams, init: &[f64], stop: S) -> Result<ApgRun>
where
    S: FnMut(&ApgState, &StepReport) -> bool,
{
    Apg::new(problem, *params)?.run(init, stop)
}

/// Smallest `n` with `gamma_start * delta^n` passing the descent test at `v`.
pub fn adaptive_pg(
    problem: &CompositeProblem,
    v: &[f64],
    gamma_start: f64,
    delta: f64,
) -> Result<AdaptiveStep> {
    check_dim(problem.dim(), v.len())?;
    let params = ApgParams {
        gamma0: gamma_start,
        alpha0: 1.0,
        delta,
        ..ApgParams::default()
    };
    // Only the step-search fields matter here; skip the mu-dependent clamp.
    let apg = Apg {
        problem,
        params: params.validated(0.0)?,
        counters: CounterSet::new(),
    };
    Ok(apg.adaptive(v, gamma_start)?.0)
}

/// `u = (x_pre - x_tilde)/gamma_tilde + grad f(x_tilde) - grad f(x_pre)`,
/// an element of `dF(x_tilde)` whenever `x_tilde` is the proximal gradient
/// step from `x_pre` with step `gamma_tilde`.
pub fn residual_certificate(
    problem: &CompositeProblem,
    x_pre: &[f64],
    x_tilde: &[f64],
    gamma_tilde: f64,
) -> Result<Certificate> {
    check_dim(problem.dim(), x_pre.len())?;
    check_dim(problem.dim(), x_tilde.len())?;
    let grad_pre = problem.smooth.gradient(x_pre);
    let grad_tilde = problem.smooth.gradient(x_tilde);
    Ok(build_certificate(
        x_pre,
        x_tilde,
        gamma_tilde,
        &grad_pre,
        &grad_tilde,
    ))
}

/// Accelerated iteration with a certificate check every `M` iterations;
/// returns the first certified point with residual at most `epsilon`.
pub fn apg_terminating(
    problem: &CompositeProblem,
    params: &ApgParams,
    init: &[f64],
) -> Result<CertifiedPoint> {
    Apg::new(problem, *params)?.run_certified(init, &mut |_, _| {})
}

/// [`apg_terminating`] with a per-iteration observer.
pub fn apg_terminating_observed(
    problem: &CompositeProblem,
    params: &ApgParams,
    init: &[f64],
    observer: &mut dyn FnMut(&ApgState, &StepReport),
) -> Result<CertifiedPoint> {
    Apg::new(problem, *params)?.run_certified(init, observer)
}
