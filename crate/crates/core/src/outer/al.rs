//! Augmented Lagrangian pieces and the perturbed subproblems solved by the
//! outer loops.

use std::sync::Arc;

use crate::error::{check_dim, Result};
use crate::linalg::{norm_sq, sub};
use crate::model::{CompositeProblem, ConeSpec, ConicProblem, ConstraintMap, CounterSet, SmoothOracle};
use crate::proxcone::{check_dual_membership, dist_polar, project_dual};

/// `L(x, lambda; rho) = f(x) + P(x) + (dist^2(lambda + rho g(x), -K) - |lambda|^2) / (2 rho)`.
pub fn al_value(conic: &ConicProblem, x: &[f64], lambda: &[f64], rho: f64) -> Result<f64> {
    check_dim(conic.dim(), x.len())?;
    check_dim(conic.num_constraints(), lambda.len())?;
    check_dual_membership(&conic.cone, lambda)?;
    let p = conic.base.nonsmooth.value(x);
    if p == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let shifted = shifted_multiplier(conic.constraint.as_ref(), x, lambda, rho);
    let d = dist_polar(&conic.cone, &shifted)?;
    Ok(conic.base.smooth.value(x) + p + (d * d - norm_sq(lambda)) / (2.0 * rho))
}

/// Gradient of the smooth part of the augmented Lagrangian:
/// `grad f(x) + grad g(x) P_{K*}(lambda + rho g(x))`.
pub fn al_smooth_gradient(conic: &ConicProblem, x: &[f64], lambda: &[f64], rho: f64) -> Result<Vec<f64>> {
    check_dim(conic.dim(), x.len())?;
    check_dim(conic.num_constraints(), lambda.len())?;
    check_dual_membership(&conic.cone, lambda)?;
    let shifted = shifted_multiplier(conic.constraint.as_ref(), x, lambda, rho);
    let mult = project_dual(&conic.cone, &shifted)?;
    let mut grad = conic.base.smooth.gradient(x);
    for (g, a) in grad.iter_mut().zip(conic.constraint.adjoint_apply(x, &mult)) {
        *g += a;
    }
    Ok(grad)
}

/// `P_{K*}(lambda + rho g)`.
pub fn multiplier_update(cone: &ConeSpec, lambda: &[f64], rho: f64, gval: &[f64]) -> Result<Vec<f64>> {
    check_dim(lambda.len(), gval.len())?;
    let shifted: Vec<f64> = lambda.iter().zip(gval).map(|(l, g)| l + rho * g).collect();
    project_dual(cone, &shifted)
}

fn shifted_multiplier(g: &dyn ConstraintMap, x: &[f64], lambda: &[f64], rho: f64) -> Vec<f64> {
    g.value(x).iter().zip(lambda).map(|(g, l)| l + rho * g).collect()
}

/// Smooth part of the proximal augmented Lagrangian subproblem:
/// `f(x) + (dist^2(lambda + rho g(x), -K) - |lambda|^2 + |x - center|^2) / (2 rho)`.
pub(crate) struct AlSmooth {
    f: Arc<dyn SmoothOracle>,
    g: Arc<dyn ConstraintMap>,
    cone: ConeSpec,
    center: Vec<f64>,
    lambda: Vec<f64>,
    lambda_sq: f64,
    rho: f64,
    counters: Option<Arc<CounterSet>>,
}

impl AlSmooth {
    fn shifted(&self, x: &[f64]) -> Vec<f64> {
        if let Some(c) = &self.counters {
            c.bump_g();
        }
        shifted_multiplier(self.g.as_ref(), x, &self.lambda, self.rho)
    }

    fn dual_part(&self, u: &[f64]) -> Vec<f64> {
        if let Some(c) = &self.counters {
            c.bump_cone_proj();
        }
        // dimensions were checked at construction
        project_dual(&self.cone, u).expect("cone dimension")
    }
}

impl SmoothOracle for AlSmooth {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let dual = self.dual_part(&self.shifted(x));
        let prox_term = norm_sq(&sub(x, &self.center));
        self.f.value(x) + (norm_sq(&dual) - self.lambda_sq + prox_term) / (2.0 * self.rho)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let dual = self.dual_part(&self.shifted(x));
        if let Some(c) = &self.counters {
            c.bump_adjoint();
        }
        let adj = self.g.adjoint_apply(x, &dual);
        let inv = 1.0 / self.rho;
        self.f
            .gradient(x)
            .iter()
            .zip(&adj)
            .zip(x.iter().zip(&self.center))
            .map(|((gf, a), (xi, ci))| gf + a + inv * (xi - ci))
            .collect()
    }
}

/// `f(x) + |x - center|^2 / (2 rho)`.
pub(crate) struct ProximalSmooth {
    f: Arc<dyn SmoothOracle>,
    center: Vec<f64>,
    rho: f64,
}

impl SmoothOracle for ProximalSmooth {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.f.value(x) + norm_sq(&sub(x, &self.center)) / (2.0 * self.rho)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.rho;
        self.f
            .gradient(x)
            .iter()
            .zip(x.iter().zip(&self.center))
            .map(|(g, (xi, ci))| g + inv * (xi - ci))
            .collect()
    }

    fn bregman(&self, y: &[f64], x: &[f64], grad_y: &[f64]) -> (f64, f64) {
        let inv = 1.0 / self.rho;
        let grad_f: Vec<f64> = grad_y
            .iter()
            .zip(y.iter().zip(&self.center))
            .map(|(g, (yi, ci))| g - inv * (yi - ci))
            .collect();
        let (gap, err) = self.f.bregman(y, x, &grad_f);
        (gap + 0.5 * inv * norm_sq(&sub(x, y)), err)
    }
}

pub(crate) fn proximal_subproblem(
    problem: &CompositeProblem,
    center: &[f64],
    rho: f64,
) -> Result<CompositeProblem> {
    check_dim(problem.dim(), center.len())?;
    let smooth = ProximalSmooth {
        f: problem.smooth.clone(),
        center: center.to_vec(),
        rho,
    };
    CompositeProblem::new(
        Arc::new(smooth),
        problem.nonsmooth.clone(),
        problem.mu + 1.0 / rho,
    )
}

pub(crate) fn al_subproblem_counted(
    conic: &ConicProblem,
    x_k: &[f64],
    lambda_k: &[f64],
    rho_k: f64,
    counters: Option<Arc<CounterSet>>,
) -> Result<CompositeProblem> {
    check_dim(conic.dim(), x_k.len())?;
    check_dim(conic.num_constraints(), lambda_k.len())?;
    check_dual_membership(&conic.cone, lambda_k)?;
    let smooth = AlSmooth {
        f: conic.base.smooth.clone(),
        g: conic.constraint.clone(),
        cone: conic.cone.clone(),
        center: x_k.to_vec(),
        lambda: lambda_k.to_vec(),
        lambda_sq: norm_sq(lambda_k),
        rho: rho_k,
        counters,
    };
    CompositeProblem::new(
        Arc::new(smooth),
        conic.base.nonsmooth.clone(),
        conic.base.mu + 1.0 / rho_k,
    )
}

/// The proximal augmented Lagrangian subproblem around `(x_k, lambda_k)`:
/// smooth part `f_k` as in [`al_value`] plus `|x - x_k|^2 / (2 rho_k)`, the
/// original `P`, and convexity parameter `mu + 1/rho_k`.
pub fn build_al_subproblem(
    conic: &ConicProblem,
    x_k: &[f64],
    lambda_k: &[f64],
    rho_k: f64,
) -> Result<CompositeProblem> {
    al_subproblem_counted(conic, x_k, lambda_k, rho_k, None)
}
