//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn trace_re(a: &CMat) -> f64 {
    a.trace().re
}

pub fn fro_norm_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Relative Frobenius distance `||a - b|| / max(||b||, tiny)`.
pub fn rel_fro_err(a: &CMat, b: &CMat) -> f64 {
    let diff = fro_norm_sq(&(a - b)).sqrt();
    let base = fro_norm_sq(b).sqrt();
    if base == 0.0 {
        diff
    } else {
        diff / base
    }
}

/// Unit-modulus vector `e^{j phi}`.
pub fn unit_phasors(phi: &[f64]) -> CVec {
    CVec::from_iterator(phi.len(), phi.iter().map(|&p| Complex64::from_polar(1.0, p)))
}

/// Cholesky factor of a Hermitian positive-definite matrix; the input is symmetrized first.
pub fn cholesky(a: &CMat, what: &str) -> Result<Cholesky<Complex64, Dyn>> {
    let fail = || Error::Numerical(format!("{what} is not positive definite"));
    let chol = Cholesky::new(hermitian_part(a)).ok_or_else(fail)?;
    // the complex square root never fails, so a negative pivot shows up as an imaginary diagonal
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-8 * d.re
    });
    if ok {
        Ok(chol)
    } else {
        Err(fail())
    }
}

/// Natural log-determinant of a Hermitian positive-definite matrix.
pub fn ln_det_hpd(a: &CMat, what: &str) -> Result<f64> {
    let chol = cholesky(a, what)?;
    let l = chol.l_dirty();
    Ok((0..a.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Inverse of a Hermitian positive-definite matrix, returned Hermitian.
pub fn inverse_hpd(a: &CMat, what: &str) -> Result<CMat> {
    let inv = cholesky(a, what)?.inverse();
    Ok(hermitian_part(&inv))
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(hermitian_part(a)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn max_eigenvalue(a: &CMat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    hermitian_eigenvalues(a).last().copied().unwrap_or(0.0)
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest deviation from Hermitian symmetry relative to the Frobenius norm.
pub fn hermitian_defect(a: &CMat) -> f64 {
    rel_fro_err(a, &a.adjoint())
}
