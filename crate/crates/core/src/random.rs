//! Complex Gaussian sampling helpers. Every random draw in the crate goes through an injected `Rng`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{CMat, CVec};
use num_complex::Complex64;

/// One circularly-symmetric complex Gaussian sample with the given variance.
pub fn cscg<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Matrix with i.i.d. CSCG entries of the given per-entry variance, filled column-major.
pub fn cscg_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cscg(rng, variance))
}

pub fn cscg_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVec {
    CVec::from_fn(len, |_, _| cscg(rng, variance))
}
