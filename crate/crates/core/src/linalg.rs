//! Dense linear-algebra services for observer design: Lyapunov and Lur'e
//! solves, smallest eigenvalues, spectral norms and the pseudo-inverse.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{check_finite, check_len, Error, Result};

/// Eigenvalues of a general square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if a.is_empty() {
        return Vec::new();
    }
    a.clone().complex_eigenvalues().iter().copied().collect()
}

/// The eigenvalue with the largest real part.
pub fn rightmost_eigenvalue(a: &DMatrix<f64>) -> Option<Complex<f64>> {
    eigenvalues(a)
        .into_iter()
        .max_by(|x, y| x.re.total_cmp(&y.re))
}

/// Errors with the offending eigenvalue unless every eigenvalue has negative real part.
pub fn check_hurwitz(context: &'static str, a: &DMatrix<f64>) -> Result<()> {
    check_square(context, a)?;
    check_finite(context, a.as_slice())?;
    match rightmost_eigenvalue(a) {
        Some(ev) if ev.re >= 0.0 => Err(Error::NotHurwitz {
            context,
            re: ev.re,
            im: ev.im,
        }),
        _ => Ok(()),
    }
}

fn check_square(context: &'static str, a: &DMatrix<f64>) -> Result<()> {
    check_len(context, a.nrows(), a.ncols())
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Solve `A^T P + P A = -Q` for symmetric `P` by Kronecker vectorization.
///
/// Intended for the small state dimensions of the observer problems; the
/// linear system has size `n^2`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    check_square("Lyapunov matrix A", a)?;
    check_len("Lyapunov right-hand side", n, q.nrows())?;
    check_len("Lyapunov right-hand side", n, q.ncols())?;
    check_finite("Lyapunov right-hand side", q.as_slice())?;
    if max_abs(&(q - q.transpose())) > 1e-10 * max_abs(q).max(1.0) {
        return Err(Error::NotSymmetric("Lyapunov right-hand side"));
    }
    check_hurwitz("Lyapunov matrix A", a)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let vec_p = op
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Design("Lyapunov operator is singular".into()))?;
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// `P`, `W`, `eps` satisfying `A_e^T P + P A_e = -W^T W - eps P`, with the
/// matching condition `P B = C^T` checked rather than enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct LureSolution {
    pub p: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub epsilon: f64,
    /// `max |A_e^T P + P A_e + W^T W + eps P|`, recomputed from the returned matrices.
    pub lyapunov_residual: f64,
    /// `max |P B - C^T|`.
    pub pb_ct_residual: f64,
    /// Whether `pb_ct_residual` is within the tolerance the design was checked against.
    pub certified: bool,
}

/// Solve the Lur'e equations in shifted form,
/// `(A_e + eps/2 I)^T P + P (A_e + eps/2 I) = -W^T W`,
/// and report how far `P B` is from `C^T`.
pub fn design_lure(
    a_e: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    epsilon: f64,
    w: &DMatrix<f64>,
    tolerance: f64,
) -> Result<LureSolution> {
    let n = a_e.nrows();
    check_square("A - LC", a_e)?;
    check_len("B rows", n, b.nrows())?;
    check_len("C columns", n, c.ncols())?;
    check_len("C rows", b.ncols(), c.nrows())?;
    check_len("W columns", n, w.ncols())?;
    check_finite("W", w.as_slice())?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InputDomain(format!("Lur'e epsilon must be positive, got {epsilon}")));
    }
    check_hurwitz("A - LC", a_e)?;
    let shifted = a_e + DMatrix::identity(n, n) * (0.5 * epsilon);
    check_hurwitz("A - LC + (eps/2) I", &shifted)?;
    let wtw = w.transpose() * w;
    let p = solve_lyapunov(&shifted, &wtw)?;
    let min_p = lambda_min(&p)?;
    if min_p <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            context: "Lur'e solution P",
            min_eigenvalue: min_p,
        });
    }
    let lyap = a_e.transpose() * &p + &p * a_e + &wtw + &p * epsilon;
    let lyapunov_residual = max_abs(&lyap);
    let pb_ct_residual = max_abs(&(&p * b - c.transpose()));
    Ok(LureSolution {
        p,
        w: w.clone(),
        epsilon,
        lyapunov_residual,
        pb_ct_residual,
        certified: pb_ct_residual <= tolerance,
    })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(m: &DMatrix<f64>) -> Result<f64> {
    check_square("symmetric matrix", m)?;
    if m.is_empty() {
        return Err(Error::InputDomain("empty matrix has no eigenvalues".into()));
    }
    check_finite("symmetric matrix", m.as_slice())?;
    if max_abs(&(m - m.transpose())) > 1e-10 * max_abs(m).max(1.0) {
        return Err(Error::NotSymmetric("eigenvalue argument"));
    }
    let sym = (m + m.transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues().min())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Moore-Penrose pseudo-inverse via SVD.
pub fn pseudo_inverse(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_finite("pseudo-inverse argument", b.as_slice())?;
    if b.is_empty() {
        return Ok(DMatrix::zeros(b.ncols(), b.nrows()));
    }
    let svd = b.clone().svd(true, true);
    let tol = f64::EPSILON * b.nrows().max(b.ncols()) as f64 * svd.singular_values.max();
    svd.pseudo_inverse(tol)
        .map_err(|e| Error::InputDomain(format!("pseudo-inverse failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_lyapunov() {
        let p = solve_lyapunov(&DMatrix::from_element(1, 1, -1.0), &DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_lyapunov() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let p = solve_lyapunov(&a, &DMatrix::identity(2, 2)).unwrap();
        assert!(max_abs(&(p - DMatrix::identity(2, 2) * 0.5)) < 1e-15);
    }

    #[test]
    fn unstable_matrix_is_rejected_with_eigenvalue() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]);
        match solve_lyapunov(&a, &DMatrix::identity(2, 2)) {
            Err(Error::NotHurwitz { re, .. }) => assert!(re.abs() < 1e-12),
            other => panic!("expected NotHurwitz, got {other:?}"),
        }
    }

    #[test]
    fn scalar_lure_design() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let sol = design_lure(&-one.clone(), &one, &one, 1.0, &one, 1e-6).unwrap();
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(sol.lyapunov_residual, 0.0);
        assert_eq!(sol.pb_ct_residual, 0.0);
        assert!(sol.certified);
    }

    #[test]
    fn lure_rejects_too_large_epsilon() {
        let one = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(
            design_lure(&-one.clone(), &one, &one, 2.0, &one, 1e-6),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn lure_flags_mismatched_pb() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let sol = design_lure(&-one.clone(), &one, &(one.clone() * 2.0), 1.0, &one, 1e-6).unwrap();
        assert!(!sol.certified);
        assert!((sol.pb_ct_residual - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_min_examples() {
        assert_eq!(lambda_min(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![0.2, 15.0, 15.0]));
        assert!((lambda_min(&d).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(
            lambda_min(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0])),
            Err(Error::NotSymmetric(_))
        ));
        assert!(lambda_min(&DMatrix::from_element(1, 1, f64::NAN)).is_err());
    }

    #[test]
    fn pseudo_inverse_of_translational_input_matrix() {
        let mass = 4.0;
        let mut b = DMatrix::zeros(6, 3);
        for i in 0..3 {
            b[(3 + i, i)] = 1.0 / mass;
        }
        let pinv = pseudo_inverse(&b).unwrap();
        let mut expected = DMatrix::zeros(3, 6);
        for i in 0..3 {
            expected[(i, 3 + i)] = mass;
        }
        assert!(max_abs(&(pinv - expected)) < 1e-12);
        assert_eq!(spectral_norm(&DMatrix::<f64>::identity(4, 4)), 1.0);
    }
}
