use proptest::prelude::*;
use rkhs_observer::linalg::{design_lure, lambda_min, max_abs, pseudo_inverse, solve_lyapunov, spectral_norm};
use rkhs_observer::nalgebra::{DMatrix, DVector};
use rkhs_observer::Error;

fn entries(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

/// `-(M^T M + c I) + (S - S^T)`: symmetric part negative definite, hence Hurwitz.
fn stable(m: &[f64], s: &[f64], n: usize, c: f64) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(n, n, m);
    let s = DMatrix::from_row_slice(n, n, s);
    -(m.transpose() * &m + DMatrix::identity(n, n) * c) + (&s - s.transpose())
}

fn spd(m: &[f64], n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(n, n, m);
    m.transpose() * &m + DMatrix::identity(n, n) * 0.1
}

#[test]
fn spectral_norm_of_identity() {
    for k in 1..6 {
        assert!((spectral_norm(&DMatrix::identity(k, k)) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn lambda_min_of_inertia() {
    let inertia = DMatrix::from_diagonal(&DVector::from_column_slice(&[0.2, 15.0, 15.0]));
    assert!((lambda_min(&inertia).unwrap() - 0.2).abs() < 1e-14);
    assert!((lambda_min(&DMatrix::identity(3, 3)).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn lambda_min_rejects_asymmetric_and_nonfinite() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    assert!(matches!(lambda_min(&a), Err(Error::NotSymmetric(_))));
    let b = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
    assert!(matches!(lambda_min(&b), Err(Error::InputDomain(_))));
}

#[test]
fn rotational_lure_closed_form() {
    // A = 0, B = I^-1, C = I, L = l I; W_ii^2 = (2l - eps) I_ii gives P = I (the inertia).
    let inertia = [0.2, 15.0, 15.0];
    let (l, eps): (f64, f64) = (1.0, 0.5);
    let a_e = DMatrix::identity(3, 3) * -l;
    let b = DMatrix::from_diagonal(&DVector::from_iterator(3, inertia.iter().map(|i| 1.0 / i)));
    let c = DMatrix::identity(3, 3);
    let w = DMatrix::from_diagonal(&DVector::from_iterator(3, inertia.iter().map(|i| ((2.0 * l - eps) * i).sqrt())));
    let sol = design_lure(&a_e, &b, &c, eps, &w, 1e-8).unwrap();
    let expected = DMatrix::from_diagonal(&DVector::from_column_slice(&inertia));
    assert!(max_abs(&(&sol.p - expected)) < 1e-12);
    assert!(sol.certified);
    assert!(sol.lyapunov_residual <= 1e-8);

    // A common W = w I leaves P = w^2 / (2l - eps) I, which cannot match every inertia axis.
    let sol = design_lure(&a_e, &b, &c, eps, &DMatrix::identity(3, 3), 1e-8).unwrap();
    assert!(max_abs(&(&sol.p - DMatrix::identity(3, 3) * (1.0 / (2.0 * l - eps)))) < 1e-12);
    assert!(!sol.certified);
}

#[test]
fn translational_triple_is_not_certifiable() {
    let mut a = DMatrix::zeros(6, 6);
    let mut b = DMatrix::zeros(6, 3);
    let mut c = DMatrix::zeros(3, 6);
    let mut l = DMatrix::zeros(6, 3);
    for i in 0..3 {
        a[(i, 3 + i)] = 1.0;
        b[(3 + i, i)] = 0.25;
        c[(i, 3 + i)] = 1.0;
        l[(i, i)] = 1.0;
        l[(3 + i, i)] = 2.0;
    }
    let a_e = &a - &l * &c;
    let err = design_lure(&a_e, &b, &c, 0.5, &DMatrix::identity(6, 6), 1e-8).unwrap_err();
    assert!(matches!(err, Error::NotHurwitz { .. }));
}

#[test]
fn pseudo_inverse_of_rank_deficient_matrix() {
    let b = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 0.0]);
    let p = pseudo_inverse(&b).unwrap();
    assert!(max_abs(&(&b * &p * &b - &b)) < 1e-12);
    assert!(max_abs(&(&p * &b * &p - &p)) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lyapunov_residual_oracle(m in entries(16), s in entries(16), q in entries(16)) {
        let a = stable(&m, &s, 4, 0.2);
        let q = spd(&q, 4);
        let p = solve_lyapunov(&a, &q).unwrap();
        let residual = a.transpose() * &p + &p * &a + &q;
        prop_assert!(max_abs(&residual) <= 1e-8 * max_abs(&p));
        prop_assert!(max_abs(&(&p - p.transpose())) <= 1e-12 * max_abs(&p).max(1.0));
        prop_assert!(lambda_min(&p).unwrap() > 0.0);
    }

    #[test]
    fn lure_residuals_are_small(m in entries(9), s in entries(9), w in entries(9), eps in 0.01f64..0.3) {
        let a_e = stable(&m, &s, 3, 0.5);
        let w = DMatrix::from_row_slice(3, 3, &w) + DMatrix::identity(3, 3) * 0.5;
        let b = DMatrix::identity(3, 3);
        let sol = design_lure(&a_e, &b, &b, eps, &w, 1e-6).unwrap();
        let recomputed = a_e.transpose() * &sol.p + &sol.p * &a_e + w.transpose() * &w + &sol.p * eps;
        prop_assert!(sol.lyapunov_residual <= 1e-8 * max_abs(&sol.p));
        prop_assert!((max_abs(&recomputed) - sol.lyapunov_residual).abs() <= 1e-12 * max_abs(&sol.p));
        prop_assert_eq!(sol.pb_ct_residual, max_abs(&(&sol.p * &b - b.transpose())));
    }

    #[test]
    fn lambda_min_matches_quadratic_formula(a in -5.0f64..5.0, b in -5.0f64..5.0, d in -5.0f64..5.0) {
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b, d]);
        let oracle = 0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt();
        prop_assert!((lambda_min(&m).unwrap() - oracle).abs() <= 1e-10);
    }

    #[test]
    fn lambda_min_is_a_rayleigh_lower_bound(m in entries(25), xs in prop::collection::vec(entries(5), 100)) {
        let raw = DMatrix::from_row_slice(5, 5, &m);
        let sym = (&raw + raw.transpose()) * 0.5;
        let lmin = lambda_min(&sym).unwrap();
        for x in xs {
            let x = DVector::from_vec(x);
            let nn = x.dot(&x);
            if nn > 1e-6 {
                prop_assert!(lmin <= x.dot(&(&sym * &x)) / nn + 1e-12);
            }
        }
    }

    #[test]
    fn pseudo_inverse_full_rank(m in entries(8)) {
        let b = DMatrix::from_row_slice(4, 2, &m) + DMatrix::from_row_slice(4, 2, &[2.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let p = pseudo_inverse(&b).unwrap();
        prop_assert!(max_abs(&(&p * &b - DMatrix::identity(2, 2))) <= 1e-10);
        prop_assert!(max_abs(&(&b * &p * &b - &b)) <= 1e-10);
        prop_assert!(max_abs(&(&p * &b * &p - &p)) <= 1e-10);
        let bp = &b * &p;
        prop_assert!(max_abs(&(&bp - bp.transpose())) <= 1e-10);
    }
}
