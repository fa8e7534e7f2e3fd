//! Phase-shift block of the WMMSE decomposition.
//!
//! With precoders, filters and weights fixed, the phase-dependent part of the WMMSE objective
//! is the quadratic form `h(phi) = v^H F v + 2 Re{v^H d}` over the unit-modulus vector
//! `v = e^{j phi}`. Two descent steps are provided: a majorization-minimization step using the
//! largest eigenvalue of `F` as curvature bound, and a gradient step whose curvature is picked
//! by Armijo backtracking. Discrete phase shifters are handled by circular nearest-point
//! quantization.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::linalg::{self, CMat, CVec};
use crate::model::{wrap_phase, BeamformingState, ChannelEstimates, ErrorModel};

/// Phase-update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PassiveMethod {
    #[serde(rename = "MM")]
    Mm,
    #[serde(rename = "SCA")]
    Sca,
}

/// Coefficients of the phase subproblem.
#[derive(Debug, Clone)]
pub struct PassiveCoefficients {
    pub a0: CMat,
    pub a1: CMat,
    pub a2: f64,
    pub b0: CMat,
    pub b1: CMat,
    pub d_mat: CMat,
    /// `A0 o B0^T + A1 o I + I o B1^T + a2 I`.
    pub f: CMat,
    /// Diagonal of `D`.
    pub d: CVec,
    /// Largest eigenvalue of `F`.
    pub mu: f64,
}

impl PassiveCoefficients {
    /// Assembles `F` and `d` from the component matrices and computes the majorizer scale.
    pub fn from_parts(a0: CMat, a1: CMat, a2: f64, b0: CMat, b1: CMat, d_mat: CMat) -> Self {
        let n = a0.nrows();
        let mut f = a0.component_mul(&b0.transpose());
        for i in 0..n {
            f[(i, i)] += a1[(i, i)] + b1[(i, i)] + Complex64::from(a2);
        }
        let f = linalg::hermitian_part(&f);
        let d = d_mat.diagonal();
        let mu = linalg::max_eigenvalue(&f);
        Self { a0, a1, a2, b0, b1, d_mat, f, d, mu }
    }

    /// Coefficients given directly as `(F, d)`; the component matrices are left empty.
    pub fn from_quadratic(f: CMat, d: CVec) -> Self {
        let n = f.nrows();
        let f = linalg::hermitian_part(&f);
        let mu = linalg::max_eigenvalue(&f);
        let zero = CMat::zeros(n, n);
        Self {
            a0: zero.clone(),
            a1: zero.clone(),
            a2: 0.0,
            b0: zero.clone(),
            b1: zero,
            d_mat: CMat::from_diagonal(&d),
            f,
            d,
            mu,
        }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

/// Builds the phase-subproblem coefficients from the precoders, filters and weights in `state`.
pub fn build_passive_coefficients(
    est: &ChannelEstimates,
    err: &ErrorModel,
    state: &BeamformingState,
) -> Result<PassiveCoefficients> {
    err.validate(est.users())?;
    state.check(est)?;
    let n = est.n();
    let gram = state.precoder_gram();
    let tr_gram = linalg::trace_re(&gram);
    let b0 = linalg::hermitian_part(&(&est.g * &gram * est.g.adjoint()));
    let g_gram_h = &est.g * &gram;

    let mut a0 = CMat::zeros(n, n);
    let mut a1 = CMat::zeros(n, n);
    let mut a2 = 0.0;
    let mut b1_scale = 0.0;
    let mut d_mat = CMat::zeros(n, n);
    for k in 0..est.users() {
        let (c, t, w) = (&state.c[k], &state.t[k], &state.w[k]);
        let hrc = &est.hr[k] * c;
        let hrct = &hrc * t;
        let a0k = &hrct * hrc.adjoint();
        let tcc = (t * c.adjoint() * c).trace().re;
        a1 += a0k.scale(err.sigma2_g * tr_gram);
        a0 += a0k;
        a2 += err.sigma2_g * err.sigma2_r[k] * tcc * tr_gram;
        b1_scale += err.sigma2_r[k] * tcc;
        // Hr C T (C^H Hd^H W~ G^H - W^H G^H)
        let inner = c.adjoint() * est.hd[k].adjoint() * g_gram_h.adjoint() - w.adjoint() * est.g.adjoint();
        d_mat += hrct * inner;
    }
    let b1 = b0.scale(b1_scale);
    Ok(PassiveCoefficients::from_parts(linalg::hermitian_part(&a0), linalg::hermitian_part(&a1), a2, b0, b1, d_mat))
}

fn check_len(coef: &PassiveCoefficients, phi: &[f64]) {
    assert_eq!(coef.len(), phi.len(), "phase vector length must match the coefficient size");
}

/// `h(phi) = v^H F v + 2 Re{v^H d}` with `v = e^{j phi}`.
pub fn evaluate_h(coef: &PassiveCoefficients, phi: &[f64]) -> f64 {
    check_len(coef, phi);
    let v = linalg::unit_phasors(phi);
    quadratic_value(coef, &v)
}

fn quadratic_value(coef: &PassiveCoefficients, v: &CVec) -> f64 {
    let fv = &coef.f * v;
    v.dotc(&fv).re + 2.0 * v.dotc(&coef.d).re
}

/// Gradient `2 Re{-j e^{-j phi} o (F e^{j phi} + d)}`.
pub fn gradient_h(coef: &PassiveCoefficients, phi: &[f64]) -> Vec<f64> {
    check_len(coef, phi);
    let v = linalg::unit_phasors(phi);
    let u = &coef.f * &v + &coef.d;
    v.iter().zip(u.iter()).map(|(vn, un)| 2.0 * (Complex64::new(0.0, -1.0) * vn.conj() * un).re).collect()
}

/// MM surrogate `h^(phi | phi_r)` built at `phi_r`.
pub fn mm_surrogate(coef: &PassiveCoefficients, phi: &[f64], phi_r: &[f64]) -> f64 {
    check_len(coef, phi);
    check_len(coef, phi_r);
    let v = linalg::unit_phasors(phi);
    let vr = linalg::unit_phasors(phi_r);
    let shifted = vr.scale(coef.mu) - &coef.f * &vr;
    coef.mu * v.dotc(&v).re + vr.dotc(&shifted).re - 2.0 * v.dotc(&shifted).re + 2.0 * v.dotc(&coef.d).re
}

/// One MM step: `phi_{r+1} = arg((mu I - F) e^{j phi_r} - d)`, elementwise.
pub fn mm_update(coef: &PassiveCoefficients, phi_r: &[f64]) -> Vec<f64> {
    check_len(coef, phi_r);
    let vr = linalg::unit_phasors(phi_r);
    let z = vr.scale(coef.mu) - &coef.f * &vr - &coef.d;
    z.iter().zip(phi_r).map(|(zn, &p)| if zn.norm() < 1e-14 { wrap_phase(p) } else { wrap_phase(zn.arg()) }).collect()
}

/// Armijo backtracking parameters for the gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmijoParams {
    /// Initial curvature; `None` uses the largest eigenvalue of `F`.
    pub beta0: Option<f64>,
    pub growth: f64,
    /// Sufficient-decrease constant.
    pub c: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self { beta0: None, growth: 2.0, c: 0.25, max_backtracks: 40 }
    }
}

/// Result of one gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaStep {
    pub phi: Vec<f64>,
    pub beta: f64,
    /// Backtracking ran out before the sufficient-decrease test held; `phi` is unchanged.
    pub stalled: bool,
}

/// One gradient step `phi - grad h / beta` with `beta` the first of `beta0 * growth^i` that
/// passes `h(phi_new) <= h(phi) - (c / beta) ||grad h||^2`.
pub fn sca_update(coef: &PassiveCoefficients, phi_r: &[f64], armijo: &ArmijoParams) -> ScaStep {
    check_len(coef, phi_r);
    let grad = gradient_h(coef, phi_r);
    let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
    let unchanged: Vec<f64> = phi_r.iter().copied().map(wrap_phase).collect();
    let mut beta = armijo.beta0.unwrap_or(coef.mu);
    if !(beta > 0.0) || !beta.is_finite() {
        // F = 0: take the curvature from the linear term instead
        beta = coef.d.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    }
    if grad_sq == 0.0 {
        return ScaStep { phi: unchanged, beta, stalled: false };
    }
    let h0 = evaluate_h(coef, phi_r);
    for _ in 0..=armijo.max_backtracks {
        let candidate: Vec<f64> = phi_r.iter().zip(&grad).map(|(p, g)| wrap_phase(p - g / beta)).collect();
        if evaluate_h(coef, &candidate) <= h0 - armijo.c / beta * grad_sq {
            return ScaStep { phi: candidate, beta, stalled: false };
        }
        beta *= armijo.growth;
    }
    ScaStep { phi: unchanged, beta, stalled: true }
}

/// One phase update of the chosen kind.
pub fn passive_step(
    coef: &PassiveCoefficients,
    phi_r: &[f64],
    method: PassiveMethod,
    armijo: &ArmijoParams,
) -> Vec<f64> {
    match method {
        PassiveMethod::Mm => mm_update(coef, phi_r),
        PassiveMethod::Sca => sca_update(coef, phi_r, armijo).phi,
    }
}

/// Discrete-phase solve at fixed coefficients: `steps` updates from `phi0`, each followed by
/// quantization, keeping the best alphabet point visited. `phi0` is quantized first and counts
/// as visited, so the result never has a larger `h` than the quantized start.
pub fn discrete_phase_search(
    coef: &PassiveCoefficients,
    phi0: &[f64],
    bits: u32,
    method: PassiveMethod,
    steps: usize,
    armijo: &ArmijoParams,
) -> (Vec<f64>, f64) {
    check_len(coef, phi0);
    let mut phi = quantize_phases(phi0, bits);
    let mut best = (phi.clone(), evaluate_h(coef, &phi));
    for _ in 0..steps {
        phi = quantize_phases(&passive_step(coef, &phi, method, armijo), bits);
        let h = evaluate_h(coef, &phi);
        if h < best.1 {
            best = (phi.clone(), h);
        }
    }
    best
}

/// Maps each phase to the circularly nearest point of `{0, 2pi/L, ..., 2pi(L-1)/L}`, `L = 2^bits`.
/// `bits = 0` is continuous mode and only wraps into `[0, 2pi)`.
pub fn quantize_phases(phi: &[f64], bits: u32) -> Vec<f64> {
    if bits == 0 {
        return phi.iter().copied().map(wrap_phase).collect();
    }
    let levels = 1u64 << bits;
    let step = TAU / levels as f64;
    phi.iter()
        .map(|&p| {
            let idx = (wrap_phase(p) / step).round() as u64 % levels;
            idx as f64 * step
        })
        .collect()
}

/// The phase alphabet for `bits >= 1`.
pub fn phase_alphabet(bits: u32) -> Vec<f64> {
    let levels = 1usize << bits;
    (0..levels).map(|i| i as f64 * TAU / levels as f64).collect()
}

/// Global minimizer of `h` over the discrete alphabet by enumeration; ties go to the
/// lexicographically smallest phase tuple. Refuses search spaces above one million points.
pub fn exhaustive_phase_oracle(coef: &PassiveCoefficients, bits: u32) -> Result<(Vec<f64>, f64)> {
    let n = coef.len();
    if bits == 0 {
        return config("exhaustive search needs a finite alphabet (bits >= 1)");
    }
    let levels = 1usize << bits;
    let space = (levels as f64).powi(n as i32);
    if space > 1e6 {
        return config(format!("search space of {space:e} points is too large to enumerate"));
    }
    let alphabet = phase_alphabet(bits);
    let mut digits = vec![0usize; n];
    let mut best: Option<(Vec<f64>, f64)> = None;
    loop {
        let phi: Vec<f64> = digits.iter().map(|&i| alphabet[i]).collect();
        let h = evaluate_h(coef, &phi);
        if best.as_ref().is_none_or(|(_, b)| h < *b) {
            best = Some((phi, h));
        }
        // odometer increment, last position fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(best.expect("at least one candidate"));
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < levels {
                break;
            }
            digits[pos] = 0;
        }
    }
}
