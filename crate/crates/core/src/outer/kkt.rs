use serde::{Deserialize, Serialize};

use crate::apg::Certificate;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist, norm};
use crate::model::ConicProblem;
use crate::proxcone::normal_cone_gap;

/// Relative bound on the normal-cone defects of the complementarity witness.
pub const WITNESS_DEFECT_TOL: f64 = 1e-9;

/// Self-validating KKT residuals for a primal-dual pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Explicit element of `grad f(x) + dP(x) + grad g(x) lambda`.
    pub stationarity_witness: Vec<f64>,
    /// Explicit element of `N_{K*}(lambda)` close to `g(x)`.
    pub complementarity_witness: Vec<f64>,
    pub stationarity_residual: f64,
    pub complementarity_residual: f64,
    /// `(dist(w, -K), |<w, lambda>|)` for the complementarity witness `w`.
    pub witness_defects: (f64, f64),
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity_residual.max(self.complementarity_residual)
    }
}

/// Builds the KKT report for `(x, lambda_new)` from the subproblem
/// certificate issued at `x` in the outer step that started at
/// `(x_prev, lambda_prev)` with penalty `rho`.
///
/// The certificate witness `u` lies in `grad f(x) + grad g(x) lambda_new +
/// (x - x_prev)/rho + dP(x)`, so `s = u - (x - x_prev)/rho` is a stationarity
/// witness. `w = (lambda_prev + rho g(x) - lambda_new)/rho` is the polar part
/// of a Moreau decomposition, hence lies in `N_{K*}(lambda_new)`, and
/// `|g(x) - w| = |lambda_new - lambda_prev|/rho`.
pub fn kkt_report(
    conic: &ConicProblem,
    x: &[f64],
    lambda_new: &[f64],
    certificate: &Certificate,
    rho: f64,
    x_prev: &[f64],
    lambda_prev: &[f64],
) -> Result<KktReport> {
    check_dim(conic.dim(), x.len())?;
    let gval = conic.constraint.value(x);
    kkt_report_with_g(conic, x, &gval, lambda_new, certificate, rho, x_prev, lambda_prev)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn kkt_report_with_g(
    conic: &ConicProblem,
    x: &[f64],
    gval: &[f64],
    lambda_new: &[f64],
    certificate: &Certificate,
    rho: f64,
    x_prev: &[f64],
    lambda_prev: &[f64],
) -> Result<KktReport> {
    let n = conic.dim();
    let m = conic.num_constraints();
    check_dim(n, x.len())?;
    check_dim(n, x_prev.len())?;
    check_dim(n, certificate.witness.len())?;
    check_dim(m, gval.len())?;
    check_dim(m, lambda_new.len())?;
    check_dim(m, lambda_prev.len())?;
    if certificate.x_tilde != x {
        return Err(Error::Invariant(format!(
            "certificate was issued at a different point (distance {:e})",
            dist(&certificate.x_tilde, x)
        )));
    }
    let inv = 1.0 / rho;
    let s: Vec<f64> = certificate
        .witness
        .iter()
        .zip(x.iter().zip(x_prev))
        .map(|(u, (xi, pi))| u - inv * (xi - pi))
        .collect();
    let w: Vec<f64> = lambda_prev
        .iter()
        .zip(gval)
        .zip(lambda_new)
        .map(|((lp, g), ln)| inv * (lp + rho * g - ln))
        .collect();
    let comp = inv * dist(lambda_new, lambda_prev);
    let defects = normal_cone_gap(&conic.cone, lambda_new, &w)?;
    let limit = WITNESS_DEFECT_TOL * (1.0 + norm(&w));
    if defects.0 > limit || defects.1 > limit {
        return Err(Error::Invariant(format!(
            "complementarity witness is not in the normal cone: defects {defects:?}, limit {limit:e}"
        )));
    }
    Ok(KktReport {
        stationarity_residual: norm(&s),
        stationarity_witness: s,
        complementarity_residual: comp,
        complementarity_witness: w,
        witness_defects: defects,
    })
}
