use std::sync::Arc;

use apgcert::linalg::{dot, sub};
use apgcert::problems::{gen_quartic, gen_quartic_oracle, reference_solve, QuarticSpec, SeparableQuadratic};
use apgcert::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(n: usize, k_terms: usize, seed: u64, mu_add: f64) -> QuarticSpec {
    QuarticSpec {
        n,
        k_terms,
        seed,
        mu_add,
        prox: ProxKind::Zero,
    }
}

fn point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

#[test]
fn hessian_is_psd_n2_seed7() {
    let f = gen_quartic_oracle(&spec(2, 3, 7, 0.0)).unwrap();
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let x = point(&mut rng, 2);
        let mut hess = [[0.0; 2]; 2];
        for j in 0..2 {
            let (mut p, mut m) = (x.clone(), x.clone());
            p[j] += h;
            m[j] -= h;
            let (gp, gm) = (f.gradient(&p), f.gradient(&m));
            for i in 0..2 {
                hess[i][j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let (a, b, c) = (hess[0][0], 0.5 * (hess[0][1] + hess[1][0]), hess[1][1]);
        let min_eig = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
        assert!(min_eig >= -1e-10, "{min_eig} at {x:?}");
    }
}

#[test]
fn convexity_probe() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (i, n) in [1, 3, 10, 25].into_iter().enumerate() {
        let f = gen_quartic_oracle(&spec(n, n + 2, 50 + i as u64, 0.0)).unwrap();
        for _ in 0..1000 {
            let (x, y) = (point(&mut rng, n), point(&mut rng, n));
            let a = rng.gen_range(0.0..=1.0);
            let mid: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + (1.0 - a) * v).collect();
            let (fx, fy) = (f.value(&x), f.value(&y));
            assert!(f.value(&mid) <= a * fx + (1.0 - a) * fy + 1e-9 * (1.0 + fx.abs() + fy.abs()));
        }
    }
}

#[test]
fn strong_convexity_probe() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (i, mu) in [0.1, 1.0, 5.0].into_iter().enumerate() {
        let n = 4 + 3 * i;
        let f = gen_quartic_oracle(&spec(n, n, 60 + i as u64, mu)).unwrap();
        for _ in 0..1000 {
            let (x, y) = (point(&mut rng, n), point(&mut rng, n));
            let d = sub(&y, &x);
            let lower = f.value(&x) + dot(&f.gradient(&x), &d) + 0.5 * mu * dot(&d, &d);
            let fy = f.value(&y);
            assert!(fy >= lower - 1e-9 * (1.0 + fy.abs()), "{fy} < {lower}");
        }
    }
}

#[test]
fn generated_mu_matches_spec() {
    for mu in [0.0, 0.25, 3.0] {
        assert_eq!(gen_quartic(&spec(3, 2, 1, mu)).unwrap().mu, mu);
    }
}

fn quadratic_1d(mu: f64, prox: ProxKind) -> CompositeProblem {
    let f = SeparableQuadratic {
        diag: vec![1.0],
        shift: vec![0.0],
    };
    CompositeProblem::new(Arc::new(f), Arc::new(prox.with_dim(1).unwrap()), mu).unwrap()
}

#[test]
fn reference_quadratic() {
    let r = reference_solve(&quadratic_1d(1.0, ProxKind::Zero), 1e-10).unwrap();
    assert!(r.x[0].abs() <= 1e-10);
    assert!(r.residual <= 1e-10);
}

#[test]
fn reference_quartic() {
    let atom = apgcert::problems::QuarticAtom {
        a: vec![1.0],
        b: 0.0,
        c: 1.0,
    };
    let f = apgcert::problems::Quartic::new(1, vec![atom], 0.0).unwrap();
    let p = CompositeProblem::new(Arc::new(f), Arc::new(ProxKind::Zero.with_dim(1).unwrap()), 0.0).unwrap();
    let r = reference_solve(&p, 1e-9).unwrap();
    assert!(r.x[0].powi(3).abs() <= 1e-9, "{:?}", r.x);
}

#[test]
fn reference_box_constrained_quadratic() {
    let r = reference_solve(&quadratic_1d(1.0, ProxKind::uniform_box(1, 1.0, 2.0)), 1e-10).unwrap();
    assert!((r.x[0] - 1.0).abs() <= 1e-10);
}

#[test]
fn reference_rejects_tiny_tolerance() {
    assert!(reference_solve(&quadratic_1d(1.0, ProxKind::Zero), 1e-13).is_err());
}
