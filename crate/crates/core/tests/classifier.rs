mod common;

use eventfeat_core::classifier::{
    binary_objective, cross_validate, fold_assignment, predict, predict_batch, train_svm, LinearSvmModel,
};
use eventfeat_core::features::FeatureVector;
use eventfeat_core::rng;
use eventfeat_core::Error;
use proptest::prelude::*;

fn fv(data: Vec<f64>, label: u32) -> FeatureVector {
    FeatureVector { data, label: Some(label) }
}

fn blobs(seed: u64, per_class: usize, classes: u32, spread: f64) -> Vec<FeatureVector> {
    let mut r = rng::seeded(seed);
    let mut out = Vec::new();
    for c in 0..classes {
        let center = [3.0 * (c as f64).cos(), 3.0 * (c as f64).sin(), c as f64];
        for _ in 0..per_class {
            out.push(fv(center.iter().map(|m| m + spread * rng::gaussian(&mut r)).collect(), c));
        }
    }
    out
}

#[test]
fn separable_blobs_are_fit_exactly() {
    let data = blobs(1, 30, 4, 0.2);
    let model = train_svm(&data, 10.0).unwrap();
    let preds = predict_batch(&model, &data).unwrap();
    assert!(preds.iter().zip(&data).all(|(p, f)| Some(*p) == f.label));
    for (f, p) in data.iter().zip(&preds) {
        assert_eq!(predict(&model, &f.data).unwrap(), *p);
    }
}

#[test]
fn identical_features_give_majority_rate() {
    let mut data: Vec<FeatureVector> = (0..7).map(|_| fv(vec![0.5, 0.5, 0.5], 2)).collect();
    data.extend((0..3).map(|_| fv(vec![0.5, 0.5, 0.5], 1)));
    let model = train_svm(&data, 1.0).unwrap();
    let preds = predict_batch(&model, &data).unwrap();
    let acc = preds.iter().zip(&data).filter(|(p, f)| Some(**p) == f.label).count() as f64 / 10.0;
    assert_eq!(acc, 0.7);
}

fn standardized(data: &[FeatureVector]) -> Vec<f64> {
    let d = data[0].data.len();
    let n = data.len() as f64;
    let mean: Vec<f64> = (0..d).map(|i| data.iter().map(|f| f.data[i]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..d)
        .map(|i| {
            let s = (data.iter().map(|f| (f.data[i] - mean[i]).powi(2)).sum::<f64>() / n).sqrt();
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    data.iter().flat_map(|f| (0..d).map(|i| (f.data[i] - mean[i]) / sd[i]).collect::<Vec<_>>()).collect()
}

// Oracle: fixed-step gradient descent from several random starts.
fn restart_oracle(rows: &[f64], d: usize, y: &[f64], c: f64, seed: u64) -> f64 {
    let mut r = rng::seeded(seed);
    let lipschitz = 1.0 + 2.0 * c * rows.chunks(d).map(|x| 1.0 + x.iter().map(|v| v * v).sum::<f64>()).sum::<f64>();
    let step = 1.0 / lipschitz;
    let mut best = f64::INFINITY;
    for _ in 0..5 {
        let mut w: Vec<f64> = (0..d).map(|_| 3.0 * rng::gaussian(&mut r)).collect();
        let mut b = 3.0 * rng::gaussian(&mut r);
        for _ in 0..100_000 {
            let mut gw = w.clone();
            let mut gb = 0.0;
            for (x, yi) in rows.chunks(d).zip(y) {
                let m = 1.0 - yi * (x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b);
                if m > 0.0 {
                    for (g, xv) in gw.iter_mut().zip(x) {
                        *g -= 2.0 * c * yi * m * xv;
                    }
                    gb -= 2.0 * c * yi * m;
                }
            }
            for (wv, g) in w.iter_mut().zip(&gw) {
                *wv -= step * g;
            }
            b -= step * gb;
        }
        best = best.min(binary_objective(rows, d, y, &w, b, c));
    }
    best
}

#[test]
fn per_class_objective_matches_restart_oracle() {
    let data = blobs(2, 5, 2, 1.5);
    let d = 3;
    let rows = standardized(&data);
    for c in [0.1, 1.0] {
        let model = train_svm(&data, c).unwrap();
        for (ci, &class) in model.classes.iter().enumerate() {
            let y: Vec<f64> = data.iter().map(|f| if f.label == Some(class) { 1.0 } else { -1.0 }).collect();
            let w = &model.weights[ci * d..(ci + 1) * d];
            let got = binary_objective(&rows, d, &y, w, model.bias[ci], c);
            let at_zero = binary_objective(&rows, d, &y, &[0.0; 3], 0.0, c);
            assert!(got <= at_zero);
            let oracle = restart_oracle(&rows, d, &y, c, 9);
            assert!((got - oracle).abs() <= 1e-4 * oracle, "{got} vs {oracle}");
        }
    }
}

proptest! {
    #[test]
    fn objective_is_midpoint_convex(seed in any::<u64>(), c in 0.01f64..10.0) {
        let mut r = rng::seeded(seed);
        let rows: Vec<f64> = (0..40).map(|_| rng::gaussian(&mut r)).collect();
        let y: Vec<f64> = (0..10).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let w1: Vec<f64> = (0..4).map(|_| 2.0 * rng::gaussian(&mut r)).collect();
        let w2: Vec<f64> = (0..4).map(|_| 2.0 * rng::gaussian(&mut r)).collect();
        let (b1, b2) = (rng::gaussian(&mut r), rng::gaussian(&mut r));
        let mid: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| 0.5 * (a + b)).collect();
        let f1 = binary_objective(&rows, 4, &y, &w1, b1, c);
        let f2 = binary_objective(&rows, 4, &y, &w2, b2, c);
        let fm = binary_objective(&rows, 4, &y, &mid, 0.5 * (b1 + b2), c);
        prop_assert!(0.5 * (f1 + f2) >= fm - 1e-10 * fm.abs().max(1.0));
    }

    #[test]
    fn positive_score_scaling_keeps_predictions(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let data = blobs(seed, 6, 3, 1.0);
        let model = train_svm(&data, 1.0).unwrap();
        let scaled = LinearSvmModel {
            weights: model.weights.iter().map(|w| w * scale).collect(),
            bias: model.bias.iter().map(|b| b * scale).collect(),
            ..model.clone()
        };
        let mut r = rng::seeded(seed ^ 1);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| 4.0 * rng::gaussian(&mut r)).collect();
            let (a, b) = (model.scores(&x).unwrap(), scaled.scores(&x).unwrap());
            let argmax = |s: &[f64]| (0..s.len()).fold(0, |best, i| if s[i] > s[best] { i } else { best });
            // Skip near-ties, where rounding in the scaled scores can flip the order.
            let mut sorted = a.clone();
            sorted.sort_by(|p, q| q.partial_cmp(p).unwrap());
            if sorted[0] - sorted[1] > 1e-9 {
                prop_assert_eq!(argmax(&a), argmax(&b));
            }
        }
    }
}

#[test]
fn zero_model_ties_to_first_class() {
    let model = LinearSvmModel {
        classes: vec![3, 1, 2],
        weights: vec![0.0; 6],
        bias: vec![0.0; 3],
        reg_c: 1.0,
        mean: vec![0.0; 2],
        scale: vec![1.0; 2],
    };
    assert_eq!(predict(&model, &[0.0, 0.0]).unwrap(), 3);
    assert!(matches!(predict(&model, &[0.0]), Err(Error::DimensionMismatch { expected: 2, found: 1 })));
}

#[test]
fn degenerate_inputs() {
    assert_eq!(train_svm(&[fv(vec![1.0], 4)], 1.0), Err(Error::DegenerateLabels));
    let data = blobs(3, 2, 2, 0.1);
    assert!(matches!(cross_validate(&data, &[0.1, 1.0], 5, 0), Err(Error::TooFewExamples { examples: 4, folds: 5 })));
    assert_eq!(cross_validate(&data, &[0.3], 5, 0).unwrap(), 0.3);
}

// Overlapping classes where heavy regularization underfits a shifted
// minority; the exhaustive rerun uses its own fold loop.
#[test]
fn cross_validation_matches_exhaustive_rerun() {
    let mut r = rng::seeded(4);
    let mut data = Vec::new();
    for i in 0..60 {
        let label = (i % 3 == 0) as u32;
        let shift = if label == 1 { 0.8 } else { 0.0 };
        data.push(fv(vec![shift + 0.5 * rng::gaussian(&mut r), 10.0 * rng::gaussian(&mut r)], label));
    }
    let grid = [100.0, 0.0001, 0.01, 1.0];
    let chosen = cross_validate(&data, &grid, 4, 11).unwrap();
    assert_eq!(chosen, cross_validate(&data, &grid, 4, 11).unwrap());

    let labels: Vec<u32> = data.iter().map(|f| f.label.unwrap()).collect();
    let folds = fold_assignment(&labels, 4, 11);
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    for &c in &grid {
        let mut acc = 0.0;
        for k in 0..4 {
            let train: Vec<FeatureVector> = (0..60).filter(|&i| folds[i] != k).map(|i| data[i].clone()).collect();
            let model = train_svm(&train, c).unwrap();
            let test: Vec<usize> = (0..60).filter(|&i| folds[i] == k).collect();
            let hits = test.iter().filter(|&&i| predict(&model, &data[i].data).unwrap() == labels[i]).count();
            acc += hits as f64 / test.len() as f64;
        }
        acc /= 4.0;
        if acc > best.0 || (acc == best.0 && c < best.1) {
            best = (acc, c);
        }
    }
    assert_eq!(chosen, best.1);
}
