//! Reproducible test and benchmark problems.
//!
//! The smooth parts are sums of quartic atoms `c (<a, x> - b)^4 / 4`, convex
//! with gradients that are locally but not globally Lipschitz. Coefficients
//! are drawn from a ChaCha8 stream seeded with the spec's 64-bit seed:
//! `c ~ U[0.5, 1.5]`, entries of `a ~ U[-1, 1]`, `b ~ U[-1, 1]`, in that order
//! per atom.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::apg::{apg_terminating, ApgParams};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, max_abs_diff, sub};
use crate::model::{
    CompositeProblem, ConeBlock, ConeKind, ConeSpec, ConicProblem, ConstraintMap, SmoothOracle,
};
use crate::outer::{ppa_unconstrained, OuterParams};
use crate::proxcone::ProxKind;

/// Name of the generator recorded in run metadata.
pub const RNG_NAME: &str = "chacha8";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarticAtom {
    pub a: Vec<f64>,
    pub b: f64,
    pub c: f64,
}

/// `sum_j c_j (<a_j, x> - b_j)^4 / 4 + (mu_add / 2) |x|^2`
#[derive(Debug, Clone, PartialEq)]
pub struct Quartic {
    dim: usize,
    atoms: Vec<QuarticAtom>,
    mu_add: f64,
}

impl Quartic {
    pub fn new(dim: usize, atoms: Vec<QuarticAtom>, mu_add: f64) -> Result<Self> {
        for atom in &atoms {
            check_dim(dim, atom.a.len())?;
            if !(atom.c > 0.0) {
                return Err(Error::InvalidParameter("quartic weights must be positive".into()));
            }
        }
        if !(mu_add >= 0.0) {
            return Err(Error::InvalidParameter("mu_add must be nonnegative".into()));
        }
        Ok(Self { dim, atoms, mu_add })
    }

    pub fn atoms(&self) -> &[QuarticAtom] {
        &self.atoms
    }

    pub fn mu_add(&self) -> f64 {
        self.mu_add
    }
}

impl SmoothOracle for Quartic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let quartic: f64 = self
            .atoms
            .iter()
            .map(|t| {
                let r = dot(&t.a, x) - t.b;
                let r2 = r * r;
                0.25 * t.c * r2 * r2
            })
            .sum();
        quartic + 0.5 * self.mu_add * dot(x, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = x.iter().map(|v| self.mu_add * v).collect();
        for t in &self.atoms {
            let r = dot(&t.a, x) - t.b;
            let w = t.c * r * r * r;
            for (gi, ai) in g.iter_mut().zip(&t.a) {
                *gi += w * ai;
            }
        }
        g
    }

    /// `sum_j c_j s^2 (6 r^2 + 4 r s + s^2) / 4 + mu_add |x - y|^2 / 2` with
    /// `r = a_j'y - b_j`, `s = a_j'(x - y)`.
    fn bregman(&self, y: &[f64], x: &[f64], _grad_y: &[f64]) -> (f64, f64) {
        let d = sub(x, y);
        let quartic: f64 = self
            .atoms
            .iter()
            .map(|t| {
                let r = dot(&t.a, y) - t.b;
                let s = dot(&t.a, &d);
                0.25 * t.c * s * s * (6.0 * r * r + 4.0 * r * s + s * s)
            })
            .sum();
        (quartic + 0.5 * self.mu_add * dot(&d, &d), 0.0)
    }
}

/// `sum_i d_i (x_i - s_i)^2 / 2`
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableQuadratic {
    pub diag: Vec<f64>,
    pub shift: Vec<f64>,
}

impl SmoothOracle for SeparableQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.diag.iter().zip(&self.shift))
            .map(|(v, (d, s))| 0.5 * d * (v - s) * (v - s))
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.diag.iter().zip(&self.shift))
            .map(|(v, (d, s))| d * (v - s))
            .collect()
    }

    fn bregman(&self, y: &[f64], x: &[f64], _grad_y: &[f64]) -> (f64, f64) {
        let gap = x
            .iter()
            .zip(y)
            .zip(&self.diag)
            .map(|((a, b), d)| 0.5 * d * (a - b) * (a - b))
            .sum();
        (gap, 0.0)
    }
}

/// `g(x) = A x - offset` with dense row-major `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    n: usize,
    rows: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

impl AffineMap {
    pub fn new(n: usize, rows: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        check_dim(rows.len(), offset.len())?;
        for r in &rows {
            check_dim(n, r.len())?;
        }
        Ok(Self { n, rows, offset })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }
}

impl ConstraintMap for AffineMap {
    fn input_dim(&self) -> usize {
        self.n
    }

    fn output_dim(&self) -> usize {
        self.rows.len()
    }

    fn value(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.offset)
            .map(|(r, o)| dot(r, x) - o)
            .collect()
    }

    fn adjoint_apply(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (r, &vi) in self.rows.iter().zip(v) {
            for (o, a) in out.iter_mut().zip(r) {
                *o += vi * a;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuarticSpec {
    pub n: usize,
    pub k_terms: usize,
    pub seed: u64,
    #[serde(default)]
    pub mu_add: f64,
    #[serde(default = "zero_prox")]
    pub prox: ProxKind,
}

fn zero_prox() -> ProxKind {
    ProxKind::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstrainedSpec {
    pub base: QuarticSpec,
    /// Number of inequalities `B x - d <= 0`.
    pub m1: usize,
    /// Number of equalities `C x - e = 0`.
    pub m2: usize,
    pub seed: u64,
}

/// A generated conic instance with a strictly feasible point.
#[derive(Debug, Clone)]
pub struct ConstrainedInstance {
    pub problem: ConicProblem,
    pub x_feas: Vec<f64>,
    pub map: Arc<AffineMap>,
}

pub fn gen_quartic_oracle(spec: &QuarticSpec) -> Result<Quartic> {
    if spec.n == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let atoms = (0..spec.k_terms)
        .map(|_| {
            let c = rng.gen_range(0.5..=1.5);
            let a = (0..spec.n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let b = rng.gen_range(-1.0..=1.0);
            QuarticAtom { a, b, c }
        })
        .collect();
    Quartic::new(spec.n, atoms, spec.mu_add)
}

/// Random quartic composite problem; deterministic in `spec.seed`.
pub fn gen_quartic(spec: &QuarticSpec) -> Result<CompositeProblem> {
    let f = gen_quartic_oracle(spec)?;
    let p = spec.prox.clone().with_dim(spec.n)?;
    CompositeProblem::new(Arc::new(f), Arc::new(p), spec.mu_add)
}

const MAX_DRAWS: usize = 100;

/// Random affine constraints `B x <= d`, `C x = e` on a random quartic.
pub fn gen_constrained(spec: &ConstrainedSpec) -> Result<ConstrainedInstance> {
    let base = gen_quartic(&spec.base)?;
    let n = spec.base.n;
    if spec.m2 > n {
        return Err(Error::Generation(format!(
            "{} equalities in dimension {n} are generically inconsistent",
            spec.m2
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..MAX_DRAWS {
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        // prox with unit step lands in dom(P)
        let x_feas = base.nonsmooth.prox(1.0, &z);
        let mut rows = Vec::with_capacity(spec.m1 + spec.m2);
        let mut offset = Vec::with_capacity(spec.m1 + spec.m2);
        for _ in 0..spec.m1 {
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let slack = rng.gen_range(0.1..=1.0);
            offset.push(dot(&r, &x_feas) + slack);
            rows.push(r);
        }
        for _ in 0..spec.m2 {
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            offset.push(dot(&r, &x_feas));
            rows.push(r);
        }
        let map = AffineMap::new(n, rows, offset)?;
        let g = map.value(&x_feas);
        let strict = g[..spec.m1].iter().all(|&v| v < 0.0);
        let exact = g[spec.m1..].iter().all(|v| v.abs() <= 1e-12);
        if strict && exact && base.nonsmooth.value(&x_feas) < f64::INFINITY {
            let map = Arc::new(map);
            let cone = ConeSpec::orthant_and_zero(spec.m1, spec.m2);
            let problem = ConicProblem::new(base, map.clone(), cone)?;
            return Ok(ConstrainedInstance { problem, x_feas, map });
        }
    }
    Err(Error::Generation(format!(
        "no strictly feasible draw after {MAX_DRAWS} attempts"
    )))
}

/// A point of `dom(P)`: the proximal map of the origin with unit step.
pub fn domain_point(problem: &CompositeProblem) -> Vec<f64> {
    problem.nonsmooth.prox(1.0, &vec![0.0; problem.dim()])
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    pub residual: f64,
}

/// High-accuracy certified solve used as a stand-in for the optimum.
pub fn reference_solve(problem: &CompositeProblem, tol: f64) -> Result<ReferenceSolution> {
    if !(tol >= 1e-12) {
        return Err(Error::InvalidParameter(
            "reference tolerance must be at least 1e-12".into(),
        ));
    }
    let init = domain_point(problem);
    if problem.mu > 0.0 {
        let params = ApgParams {
            epsilon: tol,
            max_iters: 10_000_000,
            ..ApgParams::default()
        };
        let out = apg_terminating(problem, &params, &init)?;
        Ok(ReferenceSolution {
            x: out.x,
            residual: out.certificate.residual,
        })
    } else {
        let params = OuterParams {
            max_outer: 500,
            max_inner_iters: 10_000_000,
            ..OuterParams::ppa_defaults(tol)
        };
        let out = ppa_unconstrained(problem, &params, &init)?;
        Ok(ReferenceSolution {
            x: out.x,
            residual: out.residual_bound,
        })
    }
}

/// Hand-built instances with known solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedInstance {
    /// `x^2 / 2`, `mu = 1`, no `P`.
    #[serde(rename = "quadratic-1d")]
    Quadratic1d,
    /// `x^4 / 4`, `mu = 0`, no `P`.
    #[serde(rename = "quartic-1d")]
    Quartic1d,
    /// `min x^2 s.t. 1 - x <= 0`; KKT pair `(1, 2)`.
    #[serde(rename = "kkt-1d")]
    Kkt1d,
    /// `min |x|^2 / 2 s.t. x1 + x2 = 1`; KKT pair `((0.5, 0.5), -0.5)`.
    KktEq2,
    /// `min |x - p|^2 / 2 s.t. x in SOC`, `p = (1, 2, 2)`.
    SocProjection,
}

/// A problem of either shape.
#[derive(Debug, Clone)]
pub enum Instance {
    Composite(CompositeProblem),
    Conic(ConicProblem),
}

impl Instance {
    pub fn base(&self) -> &CompositeProblem {
        match self {
            Instance::Composite(p) => p,
            Instance::Conic(c) => &c.base,
        }
    }
}

/// Known optimal primal (and dual, when constrained) solution.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownSolution {
    pub x: Vec<f64>,
    pub lambda: Option<Vec<f64>>,
}

impl NamedInstance {
    pub const ALL: [NamedInstance; 5] = [
        NamedInstance::Quadratic1d,
        NamedInstance::Quartic1d,
        NamedInstance::Kkt1d,
        NamedInstance::KktEq2,
        NamedInstance::SocProjection,
    ];

    pub fn build(self) -> Instance {
        let composite = |f: Arc<dyn SmoothOracle>, n: usize, mu: f64| {
            CompositeProblem::new(f, Arc::new(ProxKind::Zero.with_dim(n).expect("zero prox")), mu)
                .expect("handcrafted dimensions agree")
        };
        let quad = |diag: Vec<f64>, shift: Vec<f64>| Arc::new(SeparableQuadratic { diag, shift });
        match self {
            NamedInstance::Quadratic1d => Instance::Composite(composite(quad(vec![1.0], vec![0.0]), 1, 1.0)),
            NamedInstance::Quartic1d => {
                let f = Quartic::new(
                    1,
                    vec![QuarticAtom {
                        a: vec![1.0],
                        b: 0.0,
                        c: 1.0,
                    }],
                    0.0,
                )
                .expect("canonical atom");
                Instance::Composite(composite(Arc::new(f), 1, 0.0))
            }
            NamedInstance::Kkt1d => {
                let base = composite(quad(vec![2.0], vec![0.0]), 1, 2.0);
                let g = AffineMap::new(1, vec![vec![-1.0]], vec![-1.0]).expect("1x1");
                let cone = ConeSpec::orthant_and_zero(1, 0);
                Instance::Conic(ConicProblem::new(base, Arc::new(g), cone).expect("dims"))
            }
            NamedInstance::KktEq2 => {
                let base = composite(quad(vec![1.0, 1.0], vec![0.0, 0.0]), 2, 1.0);
                let g = AffineMap::new(2, vec![vec![1.0, 1.0]], vec![1.0]).expect("1x2");
                let cone = ConeSpec::orthant_and_zero(0, 1);
                Instance::Conic(ConicProblem::new(base, Arc::new(g), cone).expect("dims"))
            }
            NamedInstance::SocProjection => {
                let base = composite(quad(vec![1.0; 3], vec![1.0, 2.0, 2.0]), 3, 1.0);
                let neg_identity = (0..3)
                    .map(|i| (0..3).map(|j| if i == j { -1.0 } else { 0.0 }).collect())
                    .collect();
                let g = AffineMap::new(3, neg_identity, vec![0.0; 3]).expect("3x3");
                let cone = ConeSpec::new(vec![ConeBlock {
                    kind: ConeKind::SecondOrder,
                    size: 3,
                }])
                .expect("nonempty block");
                Instance::Conic(ConicProblem::new(base, Arc::new(g), cone).expect("dims"))
            }
        }
    }

    pub fn solution(self) -> KnownSolution {
        match self {
            NamedInstance::Quadratic1d | NamedInstance::Quartic1d => KnownSolution {
                x: vec![0.0],
                lambda: None,
            },
            NamedInstance::Kkt1d => KnownSolution {
                x: vec![1.0],
                lambda: Some(vec![2.0]),
            },
            NamedInstance::KktEq2 => KnownSolution {
                x: vec![0.5, 0.5],
                lambda: Some(vec![-0.5]),
            },
            NamedInstance::SocProjection => {
                // projection of (1, 2, 2) onto the cone; multiplier x* - p
                let nu = 8f64.sqrt();
                let a = 0.5 * (1.0 + nu);
                let s = a / nu;
                let x = vec![a, 2.0 * s, 2.0 * s];
                let lambda = vec![x[0] - 1.0, x[1] - 2.0, x[2] - 2.0];
                KnownSolution {
                    x,
                    lambda: Some(lambda),
                }
            }
        }
    }
}

/// Maximum deviation between the generated equality rows evaluated at the
/// stored feasible point and zero.
pub fn equality_defect(inst: &ConstrainedInstance, m1: usize) -> f64 {
    let g = inst.map.value(&inst.x_feas);
    max_abs_diff(&g[m1..], &vec![0.0; g.len() - m1])
}
