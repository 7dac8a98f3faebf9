//! Fixed benchmark instances shared by the criterion benches.

use apgcert::problems::{gen_constrained, gen_quartic, ConstrainedSpec, QuarticSpec};
use apgcert::{CompositeProblem, ConeBlock, ConeKind, ConeSpec, ConicProblem, ProxKind};

pub fn quartic(n: usize, mu_add: f64, prox: ProxKind) -> CompositeProblem {
    gen_quartic(&QuarticSpec {
        n,
        k_terms: n + 10,
        seed: 4242,
        mu_add,
        prox,
    })
    .expect("valid spec")
}

pub fn constrained(n: usize, m1: usize, m2: usize) -> ConicProblem {
    let base = QuarticSpec {
        n,
        k_terms: n + 10,
        seed: 17,
        mu_add: 0.1,
        prox: ProxKind::Zero,
    };
    gen_constrained(&ConstrainedSpec {
        base,
        m1,
        m2,
        seed: 18,
    })
    .expect("feasible draw")
    .problem
}

/// Orthant, zero and second-order blocks of total size `4 * block`.
pub fn mixed_cone(block: usize) -> ConeSpec {
    let b = |kind, size| ConeBlock { kind, size };
    ConeSpec::new(vec![
        b(ConeKind::NonnegOrthant, block),
        b(ConeKind::ZeroCone, block),
        b(ConeKind::SecondOrder, block),
        b(ConeKind::SecondOrder, block),
    ])
    .expect("nonempty blocks")
}
