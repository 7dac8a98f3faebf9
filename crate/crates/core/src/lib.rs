//! Accelerated proximal gradient methods for composite convex problems whose
//! smooth part has a locally Lipschitz gradient, with verifiable termination.
//!
//! - [`apg`]: backtracking accelerated iteration, the adaptive proximal
//!   gradient certificate step, and the residual-certified solver for
//!   strongly convex problems.
//! - [`outer`]: the perturbed proximal point wrapper for `mu = 0` and the
//!   first-order proximal augmented Lagrangian method for conic constraints,
//!   with self-validating KKT reports.
//! - [`proxcone`]: closed-form proximal maps and cone projections.
//! - [`model`]: oracle traits, problem types, call accounting.
//! - [`problems`]: seeded generators and hand-built instances.

pub mod apg;
pub mod error;
pub mod linalg;
pub mod model;
pub mod outer;
pub mod problems;
pub mod proxcone;

pub use apg::{
    adaptive_pg, apg_iteration, apg_run, apg_terminating, apg_terminating_observed, residual_certificate,
    solve_alpha, AdaptiveStep, Apg, ApgParams, ApgRun, ApgState, ApgTrace, ApgTraceRow, Certificate,
    CertifiedPoint, StepReport,
};
pub use error::{Error, Result};
pub use model::{
    check_gradient, composite_value, CompositeProblem, ConeBlock, ConeKind, ConeSpec, ConicProblem,
    ConstraintMap, OracleCounters, ProxTerm, SmoothOracle,
};
pub use outer::{
    al_smooth_gradient, al_value, build_al_subproblem, kkt_report, multiplier_update, ppa_unconstrained,
    ppa_unconstrained_observed, prox_al, prox_al_observed, KktReport, OuterParams, OuterTraceRow, PpaResult,
    ProxAlResult,
};
pub use proxcone::{dist_polar, normal_cone_gap, project_dual, project_polar, prox, ProxFn, ProxKind};
