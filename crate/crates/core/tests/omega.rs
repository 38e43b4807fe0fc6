mod common;

use eventfeat_core::omega::{omega, OmegaWeights};
use eventfeat_core::rng;
use eventfeat_core::{Error, Matrix};

#[test]
fn matches_cofactor_oracle() {
    let mut r = rng::seeded(31);
    for _ in 0..50 {
        let d = common::gaussian_matrix(&mut r, 3, 5);
        let w = OmegaWeights { lambda2: 0.7, lambda3: 0.2, lambda4: 1.3 };
        let gram = &d * d.transpose();
        let frob: f64 = d.iter().map(|x| x * x).sum();
        let dev: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| {
                let g = gram[(i, j)] - if i == j { 1.0 } else { 0.0 };
                g * g
            })
            .sum();
        let want = 0.7 * frob - 0.2 * dev - 1.3 * common::cofactor_det(&gram).abs().ln();
        let got = omega(&d, w).unwrap();
        assert!((got - want).abs() < 1e-10 * want.abs().max(1.0));
    }
}

#[test]
fn orthonormal_rows_leave_frobenius_term() {
    let mut r = rng::seeded(2);
    let q = common::random_orthonormal(&mut r, 5);
    let d = q.rows(0, 3).into_owned();
    let w = OmegaWeights { lambda2: 2.0, lambda3: 5.0, lambda4: 7.0 };
    assert!((omega(&d, w).unwrap() - 2.0 * 3.0).abs() < 1e-12);
}

#[test]
fn zero_weights_and_singular_gram() {
    let d = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
    let zero = OmegaWeights { lambda2: 0.0, lambda3: 0.0, lambda4: 0.0 };
    assert_eq!(omega(&d, zero).unwrap(), 0.0);
    let logdet = OmegaWeights { lambda4: 1.0, ..zero };
    assert_eq!(omega(&d, logdet), Err(Error::SingularGram));
}
