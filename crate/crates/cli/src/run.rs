//! Executes one run specification.

use std::time::Instant;

use apgcert::outer::OuterParams;
use apgcert::problems::{domain_point, gen_constrained, gen_quartic, Instance, RNG_NAME};
use apgcert::{
    apg_terminating, ppa_unconstrained, prox_al, Apg, ApgParams, ApgTraceRow, CompositeProblem, ConicProblem,
    Error, KktReport, OracleCounters, OuterTraceRow,
};
use serde::Serialize;

use crate::spec::{ProblemSpec, RunSpec, Solver};
use crate::CliError;

/// Iteration budget of the plain `apg` solver when `max_iters` is not given.
pub const APG_DEFAULT_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Certified,
    /// Plain `apg` finished its budget above the target residual.
    NotCertified,
    Timeout,
    Failed,
}

#[derive(Debug, Clone)]
pub enum Trace {
    Inner(Vec<ApgTraceRow>),
    Outer(Vec<OuterTraceRow>),
}

impl Trace {
    pub fn len(&self) -> usize {
        match self {
            Trace::Inner(r) => r.len(),
            Trace::Outer(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum EffectiveParams {
    Inner(ApgParams),
    Outer(OuterParams),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktSummary {
    pub stationarity: f64,
    pub complementarity: f64,
    /// `(membership, complementarity)` defects of the normal-cone witness.
    pub witness_defects: (f64, f64),
}

impl From<&KktReport> for KktSummary {
    fn from(r: &KktReport) -> Self {
        Self {
            stationarity: r.stationarity_residual,
            complementarity: r.complementarity_residual,
            witness_defects: r.witness_defects,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub version: u32,
    pub solver: Solver,
    pub problem: ProblemSpec,
    pub rng: &'static str,
    pub epsilon: f64,
    pub params: EffectiveParams,
    pub termination: Termination,
    pub message: Option<String>,
    pub iterations: usize,
    /// Norm of the residual witness at `x`.
    pub residual: Option<f64>,
    /// Certified upper bound on `dist(0, dF(x))` (outer solvers).
    pub residual_bound: Option<f64>,
    pub kkt: Option<KktSummary>,
    pub x: Vec<f64>,
    pub lambda: Option<Vec<f64>>,
    pub totals: OracleCounters,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    pub trace: Trace,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.summary.termination {
            Termination::Certified => 0,
            _ => 2,
        }
    }
}

fn build_instance(problem: &ProblemSpec) -> Result<Instance, CliError> {
    Ok(match problem {
        ProblemSpec::Quartic(q) => Instance::Composite(gen_quartic(q)?),
        ProblemSpec::Constrained(c) => Instance::Conic(gen_constrained(c)?.problem),
        ProblemSpec::Named(name) => name.build(),
    })
}

fn composite(instance: &Instance, solver: Solver) -> Result<&CompositeProblem, CliError> {
    match instance {
        Instance::Composite(p) => Ok(p),
        Instance::Conic(_) => Err(CliError::Spec(format!(
            "solver {} does not handle constraints; use prox-al",
            solver.name()
        ))),
    }
}

fn apg_params(spec: &RunSpec, mu: f64, default_iters: usize) -> Result<ApgParams, CliError> {
    let o = &spec.params;
    let outer = o.outer_only();
    if !outer.is_empty() {
        return Err(CliError::Spec(format!(
            "overrides [{}] do not apply to solver {}",
            outer.join(", "),
            spec.solver.name()
        )));
    }
    let d = ApgParams::default();
    let params = ApgParams {
        gamma0: o.gamma0.unwrap_or(d.gamma0),
        alpha0: o.alpha0.unwrap_or(d.alpha0),
        delta: o.delta.unwrap_or(d.delta),
        check_every: o.m.unwrap_or(d.check_every),
        epsilon: spec.epsilon,
        max_iters: o.max_iters.unwrap_or(default_iters),
        ..d
    };
    Ok(params.validated(mu)?)
}

fn outer_params(spec: &RunSpec, mu: f64) -> Result<OuterParams, CliError> {
    let o = &spec.params;
    let mut p = match spec.solver {
        Solver::ProxAl => {
            if o.gamma0.is_some() {
                return Err(CliError::Spec(
                    "gamma0 does not apply to prox-al (the inner step starts at 1/rho_k)".into(),
                ));
            }
            OuterParams::prox_al_defaults(spec.epsilon, mu)
        }
        _ => {
            let mut p = OuterParams::ppa_defaults(spec.epsilon);
            if let Some(g) = o.gamma0 {
                p.gamma0 = g;
                p.rho0 = p.rho0.max(g);
            }
            p
        }
    };
    p.rho0 = o.rho0.unwrap_or(p.rho0);
    p.zeta = o.zeta.unwrap_or(p.zeta);
    p.sigma = o.sigma.unwrap_or(p.sigma);
    p.eta0 = o.eta0.unwrap_or(p.eta0);
    p.alpha0 = o.alpha0.unwrap_or(p.alpha0);
    p.delta = o.delta.unwrap_or(p.delta);
    p.check_every = o.m.unwrap_or(p.check_every);
    p.max_inner_iters = o.max_iters.unwrap_or(p.max_inner_iters);
    p.max_outer = o.max_outer.unwrap_or(p.max_outer);
    if spec.solver == Solver::ProxAl {
        p.gamma0 = 1.0 / p.rho0;
        p.validate_prox_al(mu)?;
    } else {
        p.validate_ppa()?;
    }
    Ok(p)
}

/// Validation-type errors abort the run; anything else is reported as a
/// failed run with whatever partial output exists.
fn is_validation(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter(_)
            | Error::Dimension { .. }
            | Error::Generation(_)
            | Error::NotInDualCone { .. }
    )
}

struct Partial {
    termination: Termination,
    message: Option<String>,
    iterations: usize,
    residual: Option<f64>,
    residual_bound: Option<f64>,
    kkt: Option<KktSummary>,
    x: Vec<f64>,
    lambda: Option<Vec<f64>>,
    totals: OracleCounters,
    trace: Trace,
}

impl Partial {
    fn failed(e: Error, trace: Trace) -> Result<Self, CliError> {
        if is_validation(&e) {
            return Err(e.into());
        }
        Ok(Self {
            termination: Termination::Failed,
            message: Some(e.to_string()),
            iterations: trace.len(),
            residual: None,
            residual_bound: None,
            kkt: None,
            x: Vec::new(),
            lambda: None,
            totals: OracleCounters::default(),
            trace,
        })
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn run_apg(problem: &CompositeProblem, params: ApgParams, init: &[f64]) -> Result<Partial, CliError> {
    let apg = Apg::new(problem, params)?;
    let run = match apg.run(init, |_, _| false) {
        Ok(run) => run,
        Err(e) => return Partial::failed(e, Trace::Inner(Vec::new())),
    };
    let mut rows = run.trace.rows;
    let (step, cert) = match apg.certify(&run.state.x) {
        Ok(c) => c,
        Err(e) => return Partial::failed(e, Trace::Inner(rows)),
    };
    let totals = apg.counters();
    if let Some(last) = rows.last_mut() {
        last.cert_residual = Some(cert.residual);
        last.cert_backtracks = Some(step.n_tilde);
        last.grad_evals = totals.grad_f_evals;
        last.prox_evals = totals.prox_evals;
    }
    let termination = if cert.residual <= params.epsilon {
        Termination::Certified
    } else {
        Termination::NotCertified
    };
    Ok(Partial {
        termination,
        message: None,
        iterations: rows.len(),
        residual: Some(cert.residual),
        residual_bound: None,
        kkt: None,
        x: cert.x_tilde,
        lambda: None,
        totals,
        trace: Trace::Inner(rows),
    })
}

fn run_apg_cert(problem: &CompositeProblem, params: ApgParams, init: &[f64]) -> Result<Partial, CliError> {
    match apg_terminating(problem, &params, init) {
        Ok(out) => Ok(Partial {
            termination: Termination::Certified,
            message: None,
            iterations: out.iterations,
            residual: Some(out.certificate.residual),
            residual_bound: None,
            kkt: None,
            x: out.x,
            lambda: None,
            totals: out.trace.counters,
            trace: Trace::Inner(out.trace.rows),
        }),
        Err(Error::ApgTimeout(t)) => {
            let message = Error::ApgTimeout(t.clone()).to_string();
            let t = *t;
            Ok(Partial {
                termination: Termination::Timeout,
                message: Some(message),
                iterations: t.trace.rows.len(),
                residual: t.best.as_ref().map(|c| c.residual),
                residual_bound: None,
                kkt: None,
                x: t.best.map(|c| c.x_tilde).unwrap_or_default(),
                lambda: None,
                totals: t.trace.counters,
                trace: Trace::Inner(t.trace.rows),
            })
        }
        Err(e) => Partial::failed(e, Trace::Inner(Vec::new())),
    }
}

fn run_ppa(problem: &CompositeProblem, params: &OuterParams, init: &[f64]) -> Result<Partial, CliError> {
    match ppa_unconstrained(problem, params, init) {
        Ok(out) => Ok(Partial {
            termination: Termination::Certified,
            message: None,
            iterations: out.outer_iterations,
            residual: Some(out.witness_norm),
            residual_bound: Some(out.residual_bound),
            kkt: None,
            x: out.x,
            lambda: None,
            totals: out.counters,
            trace: Trace::Outer(out.rows),
        }),
        Err(Error::OuterTimeout(t)) => {
            let message = Error::OuterTimeout(t.clone()).to_string();
            Ok(Partial {
                termination: Termination::Timeout,
                message: Some(message),
                iterations: t.rows.len(),
                residual: None,
                residual_bound: finite(t.best_bound),
                kkt: None,
                x: t.x,
                lambda: None,
                totals: t.counters,
                trace: Trace::Outer(t.rows),
            })
        }
        Err(e) => Partial::failed(e, Trace::Outer(Vec::new())),
    }
}

fn run_prox_al(conic: &ConicProblem, params: &OuterParams, init_x: &[f64]) -> Result<Partial, CliError> {
    let init_lambda = vec![0.0; conic.num_constraints()];
    match prox_al(conic, params, init_x, &init_lambda) {
        Ok(out) => Ok(Partial {
            termination: Termination::Certified,
            message: None,
            iterations: out.outer_iterations,
            residual: None,
            residual_bound: None,
            kkt: Some(KktSummary::from(&out.report)),
            x: out.x,
            lambda: Some(out.lambda),
            totals: out.counters,
            trace: Trace::Outer(out.rows),
        }),
        Err(Error::OuterTimeout(t)) => {
            let message = Error::OuterTimeout(t.clone()).to_string();
            Ok(Partial {
                termination: Termination::Timeout,
                message: Some(message),
                iterations: t.rows.len(),
                residual: None,
                residual_bound: None,
                kkt: t.best_report.as_ref().map(KktSummary::from),
                x: t.x,
                lambda: Some(t.lambda),
                totals: t.counters,
                trace: Trace::Outer(t.rows),
            })
        }
        Err(e) => Partial::failed(e, Trace::Outer(Vec::new())),
    }
}

/// Builds the problem, runs the solver and assembles the summary. Errors
/// are validation failures; solver failures come back as an [`Outcome`]
/// with a non-certified termination.
pub fn execute(spec: &RunSpec, timing: bool) -> Result<Outcome, CliError> {
    let instance = build_instance(&spec.problem)?;
    let mu = instance.base().mu;
    let init = spec.init.clone().unwrap_or_else(|| domain_point(instance.base()));
    let start = Instant::now();
    let (params, partial) = match spec.solver {
        Solver::Apg => {
            let problem = composite(&instance, spec.solver)?;
            let params = apg_params(spec, mu, APG_DEFAULT_ITERS)?;
            (EffectiveParams::Inner(params), run_apg(problem, params, &init)?)
        }
        Solver::ApgCert => {
            let problem = composite(&instance, spec.solver)?;
            if !(mu > 0.0) {
                return Err(CliError::Spec(
                    "apg-cert requires mu > 0; use ppa for mu = 0".into(),
                ));
            }
            let params = apg_params(spec, mu, ApgParams::default().max_iters)?;
            (
                EffectiveParams::Inner(params),
                run_apg_cert(problem, params, &init)?,
            )
        }
        Solver::Ppa => {
            let problem = composite(&instance, spec.solver)?;
            if mu != 0.0 {
                return Err(CliError::Spec(format!(
                    "ppa requires mu = 0, got mu = {mu}; use apg-cert"
                )));
            }
            let params = outer_params(spec, mu)?;
            (EffectiveParams::Outer(params), run_ppa(problem, &params, &init)?)
        }
        Solver::ProxAl => {
            let Instance::Conic(conic) = &instance else {
                return Err(CliError::Spec("prox-al requires a constrained problem".into()));
            };
            let params = outer_params(spec, mu)?;
            (
                EffectiveParams::Outer(params),
                run_prox_al(conic, &params, &init)?,
            )
        }
    };
    let wall_time_s = timing.then(|| start.elapsed().as_secs_f64());
    let summary = Summary {
        version: crate::spec::SPEC_VERSION,
        solver: spec.solver,
        problem: spec.problem.clone(),
        rng: RNG_NAME,
        epsilon: spec.epsilon,
        params,
        termination: partial.termination,
        message: partial.message,
        iterations: partial.iterations,
        residual: partial.residual,
        residual_bound: partial.residual_bound,
        kkt: partial.kkt,
        x: partial.x,
        lambda: partial.lambda,
        totals: partial.totals,
        wall_time_s,
    };
    Ok(Outcome {
        summary,
        trace: partial.trace,
    })
}
