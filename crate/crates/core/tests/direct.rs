mod common;

use eventfeat_core::direct::{
    code_consistency_check, full_objective, threshold_code, threshold_code_all, threshold_code_in_order,
    train_direct, transform_objective, update_transform, DirectHyperparams, Transform,
};
use eventfeat_core::inverse::SparseCodes;
use eventfeat_core::rng;
use eventfeat_core::trace::HalfStep;
use eventfeat_core::{Error, Matrix};
use proptest::prelude::*;

fn hyper(lambda2: f64, lambda4: f64) -> DirectHyperparams {
    DirectHyperparams {
        num_atoms: 0,
        lambda0: 0.1,
        lambda1: 1.0,
        lambda2,
        lambda3: 0.0,
        lambda4,
        num_iterations: 0,
    }
}

// Separable oracle: the minimizer of 1/2 (z - l)^2 + lambda |l| is one of
// the stationary points of the two smooth branches or the kink at 0.
fn prox_oracle(z: f64, lambda: f64) -> f64 {
    let f = |l: f64| 0.5 * (z - l) * (z - l) + lambda * l.abs();
    let mut best = 0.0;
    if z - lambda > 0.0 && f(z - lambda) < f(best) {
        best = z - lambda;
    }
    if z + lambda < 0.0 && f(z + lambda) < f(best) {
        best = z + lambda;
    }
    best
}

#[test]
fn prox_matches_separable_oracle() {
    let mut r = rng::seeded(1);
    let (k, d) = (50, 20);
    for _ in 0..10 {
        let a = Transform::new(&common::gaussian_matrix(&mut r, k, d)).unwrap();
        let v: Vec<f64> = (0..d).map(|_| rng::gaussian(&mut r)).collect();
        let lambda = common::uniform(&mut r, 0.0, 3.0);
        let out = threshold_code(&a, &v, lambda).unwrap();
        for (kk, &l) in out.iter().enumerate() {
            let z: f64 = a.row(kk).iter().zip(&v).map(|(x, y)| x * y).sum();
            assert!((l - prox_oracle(z, lambda)).abs() < 1e-12);
            // No grid point does better.
            let f = |l: f64| 0.5 * (z - l) * (z - l) + lambda * l.abs();
            for g in -200..=200 {
                assert!(f(l) <= f(l + g as f64 * 0.01) + 1e-12);
            }
        }
    }
}

#[test]
fn zero_threshold_is_plain_projection() {
    let mut r = rng::seeded(2);
    let m = common::gaussian_matrix(&mut r, 7, 5);
    let a = Transform::new(&m).unwrap();
    let v: Vec<f64> = (0..5).map(|_| rng::gaussian(&mut r)).collect();
    let want: Vec<f64> = (0..7).map(|k| (0..5).fold(0.0, |acc, i| acc + m[(k, i)] * v[i])).collect();
    let got = threshold_code(&a, &v, 0.0).unwrap();
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-13 * (1.0 + w.abs()), "{g} vs {w}");
    }
}

proptest! {
    #[test]
    fn support_shrinks_with_threshold(seed in any::<u64>(), lo in 0.0f64..2.0, gap in 0.0f64..2.0) {
        let mut r = rng::seeded(seed);
        let a = Transform::new(&common::gaussian_matrix(&mut r, 12, 6)).unwrap();
        let v: Vec<f64> = (0..6).map(|_| rng::gaussian(&mut r)).collect();
        let small = threshold_code(&a, &v, lo).unwrap();
        let large = threshold_code(&a, &v, lo + gap).unwrap();
        for (s, l) in small.iter().zip(&large) {
            prop_assert!(*l == 0.0 || *s != 0.0);
        }
    }

    #[test]
    fn any_element_order_gives_same_bits(seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let a = Transform::new(&common::gaussian_matrix(&mut r, 30, 9)).unwrap();
        let v: Vec<f64> = (0..9).map(|_| rng::gaussian(&mut r)).collect();
        let mut order: Vec<usize> = (0..30).collect();
        rng::shuffle(&mut r, &mut order);
        let base = threshold_code(&a, &v, 0.4).unwrap();
        let shuffled = threshold_code_in_order(&a, &v, 0.4, &order).unwrap();
        prop_assert_eq!(base.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), shuffled.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn batch_coding_matches_single() {
    let mut r = rng::seeded(3);
    let a = Transform::new(&common::gaussian_matrix(&mut r, 10, 4)).unwrap();
    let v = common::gaussian_matrix(&mut r, 4, 25);
    let all = threshold_code_all(&a, &v, 0.3).unwrap();
    for j in 0..25 {
        let one = threshold_code(&a, v.column(j).as_slice(), 0.3).unwrap();
        assert_eq!(all.codes.column(j).as_slice(), one.as_slice());
    }
}

fn square_problem(seed: u64, d: usize, n: usize) -> (Matrix, SparseCodes, Transform) {
    let mut r = rng::seeded(seed);
    let v = common::gaussian_matrix(&mut r, d, n);
    let a0 = Transform::new(&common::gaussian_matrix(&mut r, d, d)).unwrap();
    let codes = threshold_code_all(&a0, &v, 0.2).unwrap();
    (v, codes, a0)
}

#[test]
fn square_update_survives_random_perturbations() {
    let (v, codes, a0) = square_problem(4, 4, 60);
    let h = hyper(0.1, 0.5);
    let a = update_transform(&v, &codes, &h, &a0).unwrap();
    let base = transform_objective(&a, &v, &codes.codes, &h);
    let mut r = rng::seeded(40);
    for _ in 0..1000 {
        let g = common::gaussian_matrix(&mut r, 4, 4);
        let probe = Transform::new(&(a.matrix() + g * 1e-3)).unwrap();
        assert!(transform_objective(&probe, &v, &codes.codes, &h) >= base - 1e-12 * base.abs());
    }
}

// Scalar oracle: with diagonal V V^T and V L^T the minimizer is diagonal and
// each entry solves (s^2 + 2 l2) a - s c - 2 l4 / a = 0 for a > 0, found by
// bisection.
#[test]
fn diagonal_case_matches_scalar_stationary_points() {
    let (s, c) = ([1.5, 0.4], [0.9, 2.0]);
    let v = Matrix::from_row_slice(2, 2, &[s[0], 0.0, 0.0, s[1]]);
    let l = Matrix::from_row_slice(2, 2, &[c[0], 0.0, 0.0, c[1]]);
    let (l2, l4) = (0.3, 0.25);
    let h = hyper(l2, l4);
    let a = update_transform(&v, &SparseCodes { codes: l }, &h, &Transform::new(&Matrix::identity(2, 2)).unwrap()).unwrap();
    for i in 0..2 {
        let g = |a: f64| (s[i] * s[i] + 2.0 * l2) * a - s[i] * c[i] - 2.0 * l4 / a;
        let (mut lo, mut hi) = (1e-9, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((a.matrix()[(i, i)] - lo).abs() < 1e-10);
    }
    assert!(a.matrix()[(0, 1)].abs() < 1e-12 && a.matrix()[(1, 0)].abs() < 1e-12);
}

#[test]
fn self_reconstruction_limit_is_identity() {
    let mut r = rng::seeded(5);
    let v = common::gaussian_matrix(&mut r, 5, 40);
    let codes = SparseCodes { codes: v.clone() };
    let h = hyper(1e-10, 1e-10);
    let a = update_transform(&v, &codes, &h, &Transform::new(&Matrix::identity(5, 5)).unwrap()).unwrap();
    assert!((a.matrix() - Matrix::identity(5, 5)).abs().max() < 1e-6);
}

#[test]
fn no_logdet_reduces_to_ridge() {
    let (v, codes, a0) = square_problem(6, 5, 30);
    let l2 = 0.4;
    let h = hyper(l2, 0.0);
    let a = update_transform(&v, &codes, &h, &a0).unwrap();
    // Rows of A solve (V V^T + 2 l2 I) a_k = V l_k.
    let mut m = &v * v.transpose();
    for i in 0..5 {
        m[(i, i)] += 2.0 * l2;
    }
    let p = &v * codes.codes.transpose();
    for k in 0..5 {
        let row = common::gauss_solve(&m, p.column(k).as_slice()).unwrap();
        for i in 0..5 {
            assert!((a.matrix()[(k, i)] - row[i]).abs() < 1e-10);
        }
    }
}

#[test]
fn singular_factor_without_frobenius_weight() {
    let v = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
    let codes = SparseCodes { codes: v.clone() };
    let a0 = Transform::new(&Matrix::identity(2, 2)).unwrap();
    assert_eq!(update_transform(&v, &codes, &hyper(0.0, 1.0), &a0), Err(Error::SingularFactor));
}

#[test]
fn orthonormal_bases_code_consistently() {
    let t = std::f64::consts::PI / 6.0;
    let rot = Matrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
    assert!(code_consistency_check(&rot, 0.3, 100, 1).unwrap() < 1e-8);
    let mut r = rng::seeded(8);
    let q = common::gaussian_matrix(&mut r, 8, 8).qr().q();
    assert!(code_consistency_check(&q, 0.5, 100, 2).unwrap() < 1e-8);
    assert_eq!(code_consistency_check(&Matrix::identity(6, 6), 0.2, 100, 3).unwrap(), 0.0);
    assert!(code_consistency_check(&Matrix::from_element(2, 2, 1.0), 0.2, 1, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn training_half_steps_descend(seed in any::<u64>(), k in 1usize..14, lambda4 in 0.0f64..1.0) {
        let mut r = rng::seeded(seed);
        let v = common::gaussian_matrix(&mut r, 5, 50);
        let h = DirectHyperparams { num_atoms: k, lambda0: 0.3, lambda4, num_iterations: 5, ..Default::default() };
        let model = train_direct(&v, &h, seed).unwrap();
        for e in &model.trace {
            prop_assert!(e.is_descent(1e-10), "{:?}", e);
        }
    }
}

#[test]
fn square_training_on_white_noise() {
    let mut r = rng::seeded(9);
    let v = common::gaussian_matrix(&mut r, 6, 300);
    let h = DirectHyperparams { num_atoms: 6, lambda0: 0.05, num_iterations: 5, ..Default::default() };
    let model = train_direct(&v, &h, 3).unwrap();
    assert!(model.transform.condition_number().is_finite());
    let objectives: Vec<f64> = model
        .trace
        .iter()
        .filter(|e| e.step != HalfStep::BasisUpdate)
        .map(|e| e.objective.unwrap())
        .collect();
    assert_eq!(objectives.len(), 6);
    assert!(objectives.windows(2).all(|w| w[1] < w[0]), "{objectives:?}");
    let last = model.trace.last().unwrap().objective.unwrap();
    assert_eq!(full_objective(&model.transform, &v, &model.codes.codes, &h), Some(last));
}

#[test]
fn training_is_deterministic_and_zero_iterations_codes_once() {
    let mut r = rng::seeded(10);
    let v = common::gaussian_matrix(&mut r, 4, 80);
    let h = DirectHyperparams { num_atoms: 9, num_iterations: 3, ..Default::default() };
    assert_eq!(train_direct(&v, &h, 5).unwrap(), train_direct(&v, &h, 5).unwrap());
    let h0 = DirectHyperparams { num_iterations: 0, ..h };
    let m = train_direct(&v, &h0, 5).unwrap();
    assert_eq!(m.trace.len(), 1);
    for k in 0..9 {
        let n: f64 = m.transform.row(k).iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
    assert_eq!(threshold_code_all(&m.transform, &v, h0.lambda0).unwrap(), m.codes);
}
