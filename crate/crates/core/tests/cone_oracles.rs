mod common;

use common::{norm, project_brute, xi_grid};
use l1mesh::cone::{gaussian_vector, ConeSpec};
use proptest::prelude::*;

#[test]
fn xi_matches_lambda_grid() {
    for s in 0..30u64 {
        let n = 10 + (s as usize * 7) % 41;
        let k = (s as usize * 3) % (n + 1);
        let cone = ConeSpec::new(n, k).unwrap();
        let g: Vec<f64> = gaussian_vector(n, 1000 + s);
        let xi = cone.xi_sample(&g).unwrap();
        let oracle = xi_grid(&g, k);
        assert!(xi <= oracle + 1e-12, "n={n} k={k}: {xi} > {oracle}");
        assert!(oracle - xi < 1e-8, "n={n} k={k}: {xi} vs {oracle}");
    }
}

#[test]
fn projection_matches_sign_enumeration() {
    for s in 0..60u64 {
        let n = 1 + (s as usize % 8);
        let k = (s as usize / 8) % (n + 1);
        let cone = ConeSpec::new(n, k).unwrap();
        let g: Vec<f64> = gaussian_vector(n, 77 + s);
        let p = cone.project(&g).unwrap().point;
        let q = project_brute(&g, k);
        for (x, y) in p.iter().zip(&q) {
            assert!((x - y).abs() < 1e-10, "n={n} k={k}: {p:?} vs {q:?}");
        }
        let w = cone.w_sample(&g).unwrap().value;
        assert!((w - norm(&q)).abs() < 1e-10);
    }
}

#[test]
fn projection_is_optimal_against_feasible_points() {
    let cone = ConeSpec::new(12, 4).unwrap();
    for s in 0..40u64 {
        let g: Vec<f64> = gaussian_vector(12, s);
        let p = cone.project(&g).unwrap().point;
        let dp: f64 = p.iter().zip(&g).map(|(x, y)| (x - y) * (x - y)).sum();
        for t in 0..50u64 {
            // random feasible point: push a random vector into K
            let mut v: Vec<f64> = gaussian_vector(12, 10_000 + 100 * s + t);
            let f = cone.f_eval(&v).unwrap();
            if f > 0.0 {
                for x in v.iter_mut().take(4) {
                    *x -= f / 4.0 + 0.01;
                }
            }
            assert!(cone.f_eval(&v).unwrap() <= 1e-12);
            let dv: f64 = v.iter().zip(&g).map(|(x, y)| (x - y) * (x - y)).sum();
            assert!(dp <= dv + 1e-12);
        }
    }
}

fn cone_and_vector() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..40).prop_flat_map(|n| (0..=n, prop::collection::vec(-4.0f64..4.0, n)))
}

proptest! {
    #[test]
    fn weak_and_strong_duality((k, g) in cone_and_vector()) {
        let cone = ConeSpec::new(g.len(), k).unwrap();
        let xi = cone.xi_sample(&g).unwrap();
        let w = cone.w_sample(&g).unwrap().value;
        prop_assert!(w <= xi + 1e-9 * (1.0 + xi));
        prop_assert!((w - xi).abs() <= 1e-9 * (1.0 + xi));
        // any lambda gives an upper bound on w
        for l in [0.0, 0.3, 1.0, 2.5] {
            prop_assert!(w <= cone.dual_objective(&g, l).unwrap().sqrt() + 1e-12);
        }
    }

    #[test]
    fn widths_are_positively_homogeneous((k, g) in cone_and_vector(), a in 0.01f64..50.0) {
        let cone = ConeSpec::new(g.len(), k).unwrap();
        let ag: Vec<f64> = g.iter().map(|x| a * x).collect();
        let xi = cone.xi_sample(&g).unwrap();
        let axi = cone.xi_sample(&ag).unwrap();
        prop_assert!((axi - a * xi).abs() <= 1e-10 * (1.0 + a * xi));
        let f = cone.f_eval(&g).unwrap();
        prop_assert!((cone.f_eval(&ag).unwrap() - a * f).abs() <= 1e-10 * (1.0 + a * f.abs()));
    }

    #[test]
    fn projection_is_idempotent_and_feasible((k, g) in cone_and_vector()) {
        let cone = ConeSpec::new(g.len(), k).unwrap();
        let p = cone.project(&g).unwrap().point;
        prop_assert!(cone.f_eval(&p).unwrap() <= 1e-9 * (1.0 + norm(&g)));
        let pp = cone.project(&p).unwrap().point;
        for (x, y) in p.iter().zip(&pp) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + norm(&g)));
        }
        // unit-normalized projection lies in S
        let np = norm(&p);
        if np > 1e-8 {
            let u: Vec<f64> = p.iter().map(|x| x / np).collect();
            prop_assert!(cone.membership(&u, 1e-9).unwrap());
        }
    }

    #[test]
    fn xi_minimizer_beats_nearby_lambdas((k, g) in cone_and_vector(), d in 1e-4f64..0.5) {
        let cone = ConeSpec::new(g.len(), k).unwrap();
        let l = cone.xi_minimizer(&g).unwrap();
        let dl = cone.dual_objective(&g, l).unwrap();
        prop_assert!(dl <= cone.dual_objective(&g, l + d).unwrap() + 1e-12);
        if l >= d {
            prop_assert!(dl <= cone.dual_objective(&g, l - d).unwrap() + 1e-12);
        }
    }
}
