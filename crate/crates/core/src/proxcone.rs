//! Closed-form proximal operators and cone projections.
//!
//! Cone conventions: `K` is a product of nonnegative orthants, zero cones and
//! second-order cones (scalar `t` first). The solvers need projections onto
//! `-K` (the polar of `K*`) and onto the dual cone `K*`; the two are linked by
//! the Moreau decomposition `u = P_{K*}(u) + P_{-K}(u)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm};
use crate::model::{ConeKind, ConeSpec, ProxTerm};

/// Tolerance for accepting a multiplier as an element of `K*`.
pub const DUAL_CONE_TOL: f64 = 1e-9;

/// The nonsmooth terms with closed-form proximal maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProxKind {
    /// `P = 0`
    Zero,
    /// `P(x) = weight * |x|_1`
    L1 { weight: f64 },
    /// Indicator of `{lower <= x <= upper}`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Indicator of `{x >= 0}`.
    NonnegOrthantIndicator,
    /// `P(x) = (coef / 2) |x - center|^2`
    SquaredL2 { coef: f64, center: Vec<f64> },
}

impl ProxKind {
    /// Box with the same scalar bounds in every coordinate.
    pub fn uniform_box(n: usize, lower: f64, upper: f64) -> Self {
        ProxKind::Box {
            lower: vec![lower; n],
            upper: vec![upper; n],
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, ProxKind::Box { .. } | ProxKind::NonnegOrthantIndicator)
    }

    /// Validates the parameters against dimension `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ProxKind::Zero | ProxKind::NonnegOrthantIndicator => Ok(()),
            ProxKind::L1 { weight } => {
                if *weight > 0.0 && weight.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "l1 weight must be positive, got {weight}"
                    )))
                }
            }
            ProxKind::Box { lower, upper } => {
                check_dim(n, lower.len())?;
                check_dim(n, upper.len())?;
                match lower.iter().zip(upper).position(|(l, u)| !(l <= u)) {
                    Some(i) => Err(Error::InvalidParameter(format!(
                        "box bounds require lower <= upper, violated at coordinate {i}"
                    ))),
                    None => Ok(()),
                }
            }
            ProxKind::SquaredL2 { coef, center } => {
                check_dim(n, center.len())?;
                if *coef > 0.0 && coef.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "squared-l2 coefficient must be positive, got {coef}"
                    )))
                }
            }
        }
    }

    pub fn with_dim(self, dim: usize) -> Result<ProxFn> {
        self.validate(dim)?;
        Ok(ProxFn { kind: self, dim })
    }

    fn value_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            ProxKind::Zero => 0.0,
            ProxKind::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            ProxKind::Box { lower, upper } => {
                let inside = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(v, (l, u))| l <= v && v <= u);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxKind::NonnegOrthantIndicator => {
                if x.iter().all(|&v| v >= 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxKind::SquaredL2 { coef, center } => {
                0.5 * coef * x.iter().zip(center).map(|(v, c)| (v - c) * (v - c)).sum::<f64>()
            }
        }
    }

    fn prox_unchecked(&self, gamma: f64, z: &[f64]) -> Vec<f64> {
        match self {
            ProxKind::Zero => z.to_vec(),
            ProxKind::L1 { weight } => {
                let thr = gamma * weight;
                z.iter().map(|&v| v.signum() * (v.abs() - thr).max(0.0)).collect()
            }
            ProxKind::Box { lower, upper } => z
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&v, (&l, &u))| v.clamp(l, u))
                .collect(),
            ProxKind::NonnegOrthantIndicator => z.iter().map(|&v| v.max(0.0)).collect(),
            ProxKind::SquaredL2 { coef, center } => {
                let s = gamma * coef;
                z.iter()
                    .zip(center)
                    .map(|(&v, &c)| (v + s * c) / (1.0 + s))
                    .collect()
            }
        }
    }
}

/// Proximal operator of `gamma * P` at `z`.
pub fn prox(kind: &ProxKind, gamma: f64, z: &[f64]) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "prox step must be positive, got {gamma}"
        )));
    }
    kind.validate(z.len())?;
    Ok(kind.prox_unchecked(gamma, z))
}

/// A [`ProxKind`] bound to a dimension; this is what problems hold.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxFn {
    kind: ProxKind,
    dim: usize,
}

impl ProxFn {
    pub fn kind(&self) -> &ProxKind {
        &self.kind
    }
}

impl ProxTerm for ProxFn {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.kind.value_unchecked(x)
    }

    fn prox(&self, gamma: f64, z: &[f64]) -> Vec<f64> {
        self.kind.prox_unchecked(gamma, z)
    }
}

/// Projection onto the second-order cone `{(t, u) : |u| <= t}`.
fn project_soc(v: &[f64]) -> Vec<f64> {
    let t = v[0];
    let nu = norm(&v[1..]);
    if nu <= t {
        v.to_vec()
    } else if nu <= -t {
        vec![0.0; v.len()]
    } else {
        let a = 0.5 * (t + nu);
        let s = a / nu;
        std::iter::once(a).chain(v[1..].iter().map(|x| s * x)).collect()
    }
}

/// Euclidean projection of `u` onto `-K`, blockwise.
pub fn project_polar(cone: &ConeSpec, u: &[f64]) -> Result<Vec<f64>> {
    check_dim(cone.dim(), u.len())?;
    let mut out = vec![0.0; u.len()];
    for (kind, r) in cone.ranges() {
        let (src, dst) = (&u[r.clone()], &mut out[r]);
        match kind {
            ConeKind::ZeroCone => {}
            ConeKind::NonnegOrthant => {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = s.min(0.0);
                }
            }
            ConeKind::SecondOrder => {
                let neg: Vec<f64> = src.iter().map(|v| -v).collect();
                for (d, p) in dst.iter_mut().zip(project_soc(&neg)) {
                    *d = -p;
                }
            }
        }
    }
    Ok(out)
}

/// Euclidean projection of `u` onto the dual cone `K*`, as the Moreau
/// complement of [`project_polar`].
pub fn project_dual(cone: &ConeSpec, u: &[f64]) -> Result<Vec<f64>> {
    let polar = project_polar(cone, u)?;
    Ok(u.iter().zip(&polar).map(|(a, b)| a - b).collect())
}

/// `dist(u, -K)`.
pub fn dist_polar(cone: &ConeSpec, u: &[f64]) -> Result<f64> {
    Ok(norm(&project_dual(cone, u)?))
}

/// Largest coordinate of `lambda - P_{K*}(lambda)`; errors past
/// [`DUAL_CONE_TOL`].
pub fn check_dual_membership(cone: &ConeSpec, lambda: &[f64]) -> Result<()> {
    let proj = project_dual(cone, lambda)?;
    let worst = lambda
        .iter()
        .zip(&proj)
        .map(|(a, b)| (a - b).abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    if worst.1 > DUAL_CONE_TOL {
        Err(Error::NotInDualCone {
            index: worst.0,
            defect: worst.1,
        })
    } else {
        Ok(())
    }
}

/// Defects of `w` as an element of the normal cone `N_{K*}(lambda)`.
///
/// For a closed convex cone, `N_{K*}(lambda) = {w in -K : <w, lambda> = 0}`, so
/// the pair `(dist(w, -K), |<w, lambda>|)` vanishes exactly on the normal cone.
pub fn normal_cone_gap(cone: &ConeSpec, lambda: &[f64], w: &[f64]) -> Result<(f64, f64)> {
    check_dim(cone.dim(), w.len())?;
    check_dual_membership(cone, lambda)?;
    let membership = dist_polar(cone, w)?;
    let complementarity = dot(w, lambda).abs();
    Ok((membership, complementarity))
}
