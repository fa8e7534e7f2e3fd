//! System dimensions, channel estimates, the estimation-error model and the closed-form
//! second-order statistics of the received signal: the effective channel, the
//! interference-plus-noise covariance `J_k`, the impairment covariance `Q_k`, the MSE matrix,
//! the weighted sum rate and the WMMSE objective.
//!
//! Phase shifts enter `J_k` and `Q_k` only through the effective channel `H_k`; every other
//! term is invariant under any unit-modulus reflection matrix because `Theta^H Theta = I`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::linalg::{self, CMat};

/// Array sizes and phase resolution of one downlink configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDims {
    /// Transmit antennas at the base station.
    pub m: usize,
    /// Reflecting elements at the IRS.
    pub n: usize,
    /// Receive antennas per user.
    pub nr: usize,
    /// Number of users.
    pub k: usize,
    /// Data streams per user.
    pub ns: usize,
    /// Phase-shifter resolution in bits; 0 means continuous phases.
    pub bits: u32,
}

impl SystemDims {
    pub fn new(m: usize, n: usize, nr: usize, k: usize, ns: usize, bits: u32) -> Result<Self> {
        let dims = Self { m, n, nr, k, ns, bits };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.nr == 0 || self.k == 0 || self.ns == 0 {
            return config(format!("all dimensions must be at least 1, got {self:?}"));
        }
        if self.ns > self.m.min(self.nr) {
            return config(format!("streams per user ({}) exceed min(M, Nr) = {}", self.ns, self.m.min(self.nr)));
        }
        if self.bits > 16 {
            return config(format!("phase resolution of {} bits is not supported", self.bits));
        }
        Ok(())
    }

    /// Alphabet size `L = 2^B`, or `None` in continuous mode.
    pub fn alphabet_size(&self) -> Option<usize> {
        (self.bits > 0).then(|| 1usize << self.bits)
    }
}

/// Estimated channels. `g` is N x M, `hd[k]` is M x Nr, `hr[k]` is N x Nr.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimates {
    pub g: CMat,
    pub hd: Vec<CMat>,
    pub hr: Vec<CMat>,
}

impl ChannelEstimates {
    /// Checks shape consistency and finiteness.
    pub fn new(g: CMat, hd: Vec<CMat>, hr: Vec<CMat>) -> Result<Self> {
        let est = Self { g, hd, hr };
        est.validate()?;
        Ok(est)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = self.g.shape();
        if self.hd.is_empty() || self.hd.len() != self.hr.len() {
            return config(format!(
                "need one direct and one reflected link per user, got {} and {}",
                self.hd.len(),
                self.hr.len()
            ));
        }
        let nr = self.hd[0].ncols();
        for (k, (hd, hr)) in self.hd.iter().zip(&self.hr).enumerate() {
            if hd.shape() != (m, nr) {
                return config(format!("direct link {k} is {:?}, expected {:?}", hd.shape(), (m, nr)));
            }
            if hr.shape() != (n, nr) {
                return config(format!("IRS link {k} is {:?}, expected {:?}", hr.shape(), (n, nr)));
            }
        }
        let all_finite = linalg::is_finite(&self.g)
            && self.hd.iter().all(linalg::is_finite)
            && self.hr.iter().all(linalg::is_finite);
        if !all_finite {
            return config("channel estimates contain non-finite entries");
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.g.ncols()
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn nr(&self) -> usize {
        self.hd[0].ncols()
    }

    pub fn users(&self) -> usize {
        self.hd.len()
    }

    /// Checks that these estimates match `dims`.
    pub fn check_dims(&self, dims: &SystemDims) -> Result<()> {
        if (self.m(), self.n(), self.nr(), self.users()) != (dims.m, dims.n, dims.nr, dims.k) {
            return config(format!(
                "channel estimates are (M={}, N={}, Nr={}, K={}) but dimensions say {dims:?}",
                self.m(),
                self.n(),
                self.nr(),
                self.users()
            ));
        }
        Ok(())
    }

    /// Copy with the BS-IRS and IRS-user links removed.
    pub fn without_irs(&self) -> Self {
        Self {
            g: CMat::zeros(self.n(), self.m()),
            hd: self.hd.clone(),
            hr: self.hr.iter().map(|h| CMat::zeros(h.nrows(), h.ncols())).collect(),
        }
    }
}

/// Per-entry variances of the estimation errors and the receiver noise power, all linear (mW).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    pub sigma2_g: f64,
    pub sigma2_d: Vec<f64>,
    pub sigma2_r: Vec<f64>,
    pub sigma2_n: Vec<f64>,
}

impl ErrorModel {
    /// Error-free estimates with a common noise power.
    pub fn perfect(users: usize, noise: f64) -> Self {
        Self { sigma2_g: 0.0, sigma2_d: vec![0.0; users], sigma2_r: vec![0.0; users], sigma2_n: vec![noise; users] }
    }

    pub fn validate(&self, users: usize) -> Result<()> {
        if [&self.sigma2_d, &self.sigma2_r, &self.sigma2_n].iter().any(|v| v.len() != users) {
            return config(format!("error model must carry {users} per-user variances"));
        }
        let all = std::iter::once(&self.sigma2_g).chain(&self.sigma2_d).chain(&self.sigma2_r).chain(&self.sigma2_n);
        for &v in all {
            if !(v >= 0.0 && v.is_finite()) {
                return config(format!("variances must be finite and nonnegative, got {v}"));
            }
        }
        Ok(())
    }

    /// Copy with the IRS-related error variances set to zero.
    pub fn without_irs(&self) -> Self {
        Self { sigma2_g: 0.0, sigma2_r: vec![0.0; self.sigma2_r.len()], ..self.clone() }
    }
}

/// Transmit precoders, receive filters, MSE weights, IRS phases and rate weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingState {
    /// Precoders, M x Ns each.
    pub w: Vec<CMat>,
    /// Receive filters, Nr x Ns each.
    pub c: Vec<CMat>,
    /// MSE weight matrices, Ns x Ns Hermitian PSD.
    pub t: Vec<CMat>,
    /// IRS phases in `[0, 2pi)`.
    pub phi: Vec<f64>,
    /// Rate weights.
    pub omega: Vec<f64>,
}

impl BeamformingState {
    /// State with the given precoders and phases; filters start at zero and `T_k = omega_k I`.
    pub fn new(w: Vec<CMat>, phi: Vec<f64>, omega: Vec<f64>, nr: usize) -> Self {
        let ns = w.first().map_or(0, |w| w.ncols());
        let c = w.iter().map(|_| CMat::zeros(nr, ns)).collect();
        let t = omega.iter().map(|&o| linalg::identity(ns).scale(o)).collect();
        Self { w, c, t, phi: phi.into_iter().map(wrap_phase).collect(), omega }
    }

    pub fn users(&self) -> usize {
        self.w.len()
    }

    /// `sum_k ||W_k||_F^2`.
    pub fn transmit_power(&self) -> f64 {
        self.w.iter().map(linalg::fro_norm_sq).sum()
    }

    /// `W~ = sum_i W_i W_i^H`.
    pub fn precoder_gram(&self) -> CMat {
        precoder_gram(&self.w)
    }

    pub fn with_phases(&self, phi: &[f64]) -> Self {
        Self { phi: phi.iter().copied().map(wrap_phase).collect(), ..self.clone() }
    }

    pub fn check(&self, est: &ChannelEstimates) -> Result<()> {
        let k = est.users();
        if self.w.len() != k || self.c.len() != k || self.t.len() != k || self.omega.len() != k {
            return config(format!("beamforming state must carry {k} users"));
        }
        if self.phi.len() != est.n() {
            return config(format!("{} phases for {} IRS elements", self.phi.len(), est.n()));
        }
        if self.phi.iter().any(|p| !p.is_finite()) {
            return config("phases must be finite");
        }
        let ns = self.w[0].ncols();
        for i in 0..k {
            if self.w[i].shape() != (est.m(), ns)
                || self.c[i].shape() != (est.nr(), ns)
                || self.t[i].shape() != (ns, ns)
            {
                return config(format!("precoder/filter/weight shapes of user {i} are inconsistent"));
            }
        }
        Ok(())
    }
}

pub(crate) fn precoder_gram(w: &[CMat]) -> CMat {
    let m = w.first().map_or(0, |w| w.nrows());
    w.iter().fold(CMat::zeros(m, m), |acc, wi| acc + wi * wi.adjoint())
}

/// Maps an angle into `[0, 2pi)`.
pub fn wrap_phase(p: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = p.rem_euclid(two_pi);
    if r >= two_pi {
        0.0
    } else {
        r
    }
}

/// Interference-plus-noise covariances, impairment covariances and the scalar loading `alpha_k`.
#[derive(Debug, Clone)]
pub struct CovarianceBundle {
    pub j: Vec<CMat>,
    pub q: Vec<CMat>,
    pub alpha: Vec<f64>,
}

/// `H_k = Hd_k^H + Hr_k^H diag(e^{j phi}) G`, an Nr x M matrix.
pub fn effective_channel(est: &ChannelEstimates, k: usize, phi: &[f64]) -> Result<CMat> {
    if k >= est.users() {
        return config(format!("user index {k} out of range"));
    }
    if phi.len() != est.n() {
        return config(format!("{} phases for {} IRS elements", phi.len(), est.n()));
    }
    if phi.iter().any(|p| !p.is_finite()) {
        return config("phases must be finite");
    }
    let mut theta_g = est.g.clone();
    for (mut row, &p) in theta_g.row_iter_mut().zip(phi) {
        row *= num_complex::Complex64::from_polar(1.0, p);
    }
    Ok(est.hd[k].adjoint() + est.hr[k].adjoint() * theta_g)
}

/// Quantities shared by every per-user statistic at a fixed state.
pub(crate) struct LinkStats {
    pub h: Vec<CMat>,
    pub gram: CMat,
    pub tr_gram: f64,
    pub tr_g_gram_g: f64,
}

impl LinkStats {
    pub fn new(est: &ChannelEstimates, state: &BeamformingState) -> Result<Self> {
        state.check(est)?;
        let h = (0..est.users()).map(|k| effective_channel(est, k, &state.phi)).collect::<Result<Vec<_>>>()?;
        let gram = state.precoder_gram();
        let tr_gram = linalg::trace_re(&gram);
        let tr_g_gram_g = linalg::trace_re(&(&est.g * &gram * est.g.adjoint()));
        Ok(Self { h, gram, tr_gram, tr_g_gram_g })
    }

    /// Loading of the identity in `Q_k`, excluding noise.
    fn impairment_loading(&self, est: &ChannelEstimates, err: &ErrorModel, k: usize) -> f64 {
        let n = est.n() as f64;
        (err.sigma2_d[k] + n * err.sigma2_g * err.sigma2_r[k]) * self.tr_gram + err.sigma2_r[k] * self.tr_g_gram_g
    }

    /// `sigma_g^2 tr(W~) Hr_k^H Hr_k`.
    fn irs_error_term(&self, est: &ChannelEstimates, err: &ErrorModel, k: usize) -> CMat {
        (est.hr[k].adjoint() * &est.hr[k]).scale(err.sigma2_g * self.tr_gram)
    }

    pub fn q(&self, est: &ChannelEstimates, err: &ErrorModel, k: usize) -> CMat {
        let nr = est.nr();
        let hk = &self.h[k];
        let mut q = hk * &self.gram * hk.adjoint() + self.irs_error_term(est, err, k);
        q += linalg::identity(nr).scale(self.impairment_loading(est, err, k));
        linalg::hermitian_part(&q)
    }

    pub fn alpha(&self, est: &ChannelEstimates, err: &ErrorModel, k: usize) -> f64 {
        self.impairment_loading(est, err, k) + err.sigma2_n[k]
    }

    pub fn j(&self, est: &ChannelEstimates, err: &ErrorModel, state: &BeamformingState, k: usize) -> CMat {
        let nr = est.nr();
        let hk = &self.h[k];
        let mut j = self.irs_error_term(est, err, k);
        for (i, wi) in state.w.iter().enumerate() {
            if i != k {
                let hw = hk * wi;
                j += &hw * hw.adjoint();
            }
        }
        j += linalg::identity(nr).scale(self.alpha(est, err, k));
        linalg::hermitian_part(&j)
    }
}

fn check_inputs(est: &ChannelEstimates, err: &ErrorModel, k: Option<usize>) -> Result<()> {
    err.validate(est.users())?;
    if let Some(k) = k {
        if k >= est.users() {
            return config(format!("user index {k} out of range"));
        }
    }
    Ok(())
}

/// Interference-plus-noise covariance `J_k`.
pub fn interference_noise_cov(
    est: &ChannelEstimates,
    err: &ErrorModel,
    state: &BeamformingState,
    k: usize,
) -> Result<CMat> {
    check_inputs(est, err, Some(k))?;
    Ok(LinkStats::new(est, state)?.j(est, err, state, k))
}

/// Signal-plus-impairment covariance `Q_k` (everything received except noise).
pub fn signal_plus_impairment_cov(
    est: &ChannelEstimates,
    err: &ErrorModel,
    state: &BeamformingState,
    k: usize,
) -> Result<CMat> {
    check_inputs(est, err, Some(k))?;
    Ok(LinkStats::new(est, state)?.q(est, err, k))
}

pub fn covariance_bundle(
    est: &ChannelEstimates,
    err: &ErrorModel,
    state: &BeamformingState,
) -> Result<CovarianceBundle> {
    check_inputs(est, err, None)?;
    let stats = LinkStats::new(est, state)?;
    let users = 0..est.users();
    Ok(CovarianceBundle {
        j: users.clone().map(|k| stats.j(est, err, state, k)).collect(),
        q: users.clone().map(|k| stats.q(est, err, k)).collect(),
        alpha: users.map(|k| stats.alpha(est, err, k)).collect(),
    })
}

/// Per-user rates `log2|I + H_k W_k W_k^H H_k^H J_k^{-1}|` in bits/s/Hz (unweighted).
pub fn user_rates(est: &ChannelEstimates, err: &ErrorModel, state: &BeamformingState) -> Result<Vec<f64>> {
    check_inputs(est, err, None)?;
    let stats = LinkStats::new(est, state)?;
    (0..est.users())
        .map(|k| {
            let j = stats.j(est, err, state, k);
            let chol = linalg::cholesky(&j, "interference-plus-noise covariance")
                .map_err(|_| Error::Numerical(format!("J_{k} is singular; noise power must be positive")))?;
            // L^{-1} H W (H W)^H L^{-H} + I
            let hw = &stats.h[k] * &state.w[k];
            let x = chol
                .l_dirty()
                .solve_lower_triangular(&hw)
                .ok_or_else(|| Error::Numerical(format!("triangular solve failed for user {k}")))?;
            let nr = est.nr();
            let m = linalg::identity(nr) + &x * x.adjoint();
            Ok(linalg::ln_det_hpd(&m, "I + SINR matrix")? / LN_2)
        })
        .collect()
}

/// Weighted sum rate `sum_k omega_k log2|I + H_k W_k W_k^H H_k^H J_k^{-1}|`.
pub fn weighted_sum_rate(est: &ChannelEstimates, err: &ErrorModel, state: &BeamformingState) -> Result<f64> {
    let rates = user_rates(est, err, state)?;
    Ok(rates.iter().zip(&state.omega).map(|(r, w)| r * w).sum())
}

/// MSE matrix `E_k` for the filter currently stored in `state.c[k]`.
pub fn mse_matrix(est: &ChannelEstimates, err: &ErrorModel, state: &BeamformingState, k: usize) -> Result<CMat> {
    check_inputs(est, err, Some(k))?;
    let stats = LinkStats::new(est, state)?;
    Ok(mse_from_stats(&stats, est, err, state, k))
}

pub(crate) fn mse_from_stats(
    stats: &LinkStats,
    est: &ChannelEstimates,
    err: &ErrorModel,
    state: &BeamformingState,
    k: usize,
) -> CMat {
    let ck = &state.c[k];
    let ns = ck.ncols();
    let q = stats.q(est, err, k);
    let chw = ck.adjoint() * &stats.h[k] * &state.w[k];
    let e = ck.adjoint() * (q + linalg::identity(est.nr()).scale(err.sigma2_n[k])) * ck - &chw - chw.adjoint()
        + linalg::identity(ns);
    linalg::hermitian_part(&e)
}

/// WMMSE objective `sum_k tr(T_k E_k) - omega_k log2|T_k / omega_k|`.
pub fn wmmse_objective(est: &ChannelEstimates, err: &ErrorModel, state: &BeamformingState) -> Result<f64> {
    check_inputs(est, err, None)?;
    let stats = LinkStats::new(est, state)?;
    let mut f = 0.0;
    for k in 0..est.users() {
        let e = mse_from_stats(&stats, est, err, state, k);
        let t = &state.t[k];
        let omega = state.omega[k];
        if omega <= 0.0 {
            return Err(Error::Numerical(format!("rate weight of user {k} must be positive")));
        }
        let ln_det = linalg::ln_det_hpd(&t.unscale(omega), "scaled MSE weight")
            .map_err(|_| Error::Numerical(format!("|T_{k}| is not positive")))?;
        f += (t * e).trace().re - omega * ln_det / LN_2;
    }
    Ok(f)
}
