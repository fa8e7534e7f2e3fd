//! Geometry-based channel generation: distance-dependent path losses, Rayleigh direct links,
//! Rician IRS links with half-wavelength ULA line-of-sight components, and calibration of the
//! estimation-error variances to a target normalized MSE.
//!
//! All arrays (BS, IRS, users) are taken to lie along the y axis, so the broadside direction is
//! the x axis and the angle of a link is `atan2(dy, dx)` of the segment between the two nodes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::linalg::{self, CMat, CVec};
use crate::model::{ChannelEstimates, ErrorModel, SystemDims};
use crate::random::cscg_matrix;

/// How the per-user rate weights are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// `omega_k` proportional to the linear direct-link gain, normalized to sum to `K`.
    InverseDirectPathLoss,
    Equal,
}

/// Deployment geometry, radio parameters and array sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub bs_pos: [f64; 2],
    pub irs_pos: [f64; 2],
    pub ue_center: [f64; 2],
    /// Radius of the disk the users are dropped in, meters.
    pub ue_radius: f64,
    pub pt_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub rician_nu: f64,
    /// Target normalized MSE of every estimate.
    pub nmse: f64,
    pub dims: SystemDims,
    pub weight_mode: WeightMode,
}

impl ScenarioConfig {
    /// Reduced-size scenario for quick runs: M=4, N=16, K=2, Nr=Ns=2, B=2.
    pub fn desk() -> Self {
        Self { dims: SystemDims { m: 4, n: 16, nr: 2, k: 2, ns: 2, bits: 2 }, ..Self::paper() }
    }

    /// Full-size deployment: M=8, N=100, K=3, Nr=Ns=2, B=2, BS at (0,30), IRS at (200,30),
    /// users within 10 m of (200,0), 180 kHz at -170 dBm/Hz, P_t = 0 dBm, Rician factor 10.
    pub fn paper() -> Self {
        Self {
            bs_pos: [0.0, 30.0],
            irs_pos: [200.0, 30.0],
            ue_center: [200.0, 0.0],
            ue_radius: 10.0,
            pt_dbm: 0.0,
            bandwidth_hz: 180e3,
            noise_psd_dbm_hz: -170.0,
            rician_nu: 10.0,
            nmse: 0.05,
            dims: SystemDims { m: 8, n: 100, nr: 2, k: 3, ns: 2, bits: 2 },
            weight_mode: WeightMode::InverseDirectPathLoss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let finite = self.bs_pos.iter().chain(&self.irs_pos).chain(&self.ue_center).all(|v| v.is_finite());
        if !finite || !(self.ue_radius >= 0.0) {
            return config("positions must be finite and the user radius nonnegative");
        }
        if !(self.bandwidth_hz > 0.0) {
            return config(format!("bandwidth must be positive, got {}", self.bandwidth_hz));
        }
        if !(self.nmse >= 0.0 && self.nmse < 1.0) {
            return config(format!("NMSE must lie in [0, 1), got {}", self.nmse));
        }
        if !(self.rician_nu >= 0.0) {
            return config(format!("Rician factor must be nonnegative, got {}", self.rician_nu));
        }
        if !self.pt_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() {
            return config("powers must be finite");
        }
        if distance(self.bs_pos, self.irs_pos) <= 0.0 {
            return config("BS and IRS must not coincide");
        }
        if distance(self.irs_pos, self.ue_center) <= self.ue_radius
            || distance(self.bs_pos, self.ue_center) <= self.ue_radius
        {
            return config("the user disk must not contain the BS or the IRS");
        }
        Ok(())
    }

    /// Noise power per receive antenna, mW.
    pub fn noise_power_mw(&self) -> f64 {
        dbm_to_mw(self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10())
    }

    pub fn p_t_mw(&self) -> f64 {
        dbm_to_mw(self.pt_dbm)
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Angle of the segment `from -> to` against the x axis.
fn link_angle(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

/// Direct-link path loss `32.6 + 36.7 log10(d)` dB.
pub fn path_loss_direct(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return config(format!("distance must be positive, got {d}"));
    }
    Ok(32.6 + 36.7 * d.log10())
}

/// IRS-link path loss `35.6 + 22.0 log10(d)` dB.
pub fn path_loss_irs(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return config(format!("distance must be positive, got {d}"));
    }
    Ok(35.6 + 22.0 * d.log10())
}

/// Half-wavelength ULA response `e^{j pi n sin(angle)}`, `n = 0..count`.
pub fn steering_vector(count: usize, angle: f64) -> CVec {
    let s = angle.sin();
    CVec::from_iterator(count, (0..count).map(|n| Complex64::from_polar(1.0, PI * n as f64 * s)))
}

/// Rician matrix `kappa (sqrt(nu/(nu+1)) a_r a_t^H + sqrt(1/(nu+1)) H_nlos)` with
/// `kappa = 10^(-loss_db/20)` and unit-variance Rayleigh `H_nlos`.
pub fn sample_rician<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    loss_db: f64,
    nu: f64,
    a_r: &CVec,
    a_t: &CVec,
    rng: &mut R,
) -> CMat {
    assert_eq!((a_r.len(), a_t.len()), (rows, cols), "steering vectors must match the matrix shape");
    let kappa = 10f64.powf(-loss_db / 20.0);
    let nlos = cscg_matrix(rng, rows, cols, 1.0);
    let los = a_r * a_t.adjoint();
    (los.scale((nu / (nu + 1.0)).sqrt()) + nlos.scale((1.0 / (nu + 1.0)).sqrt())).scale(kappa)
}

/// Rayleigh matrix with per-entry variance `10^(-loss_db/10)`.
pub fn sample_rayleigh<R: Rng + ?Sized>(rows: usize, cols: usize, loss_db: f64, rng: &mut R) -> CMat {
    cscg_matrix(rng, rows, cols, 10f64.powf(-loss_db / 10.0))
}

/// One drop of users and the resulting estimated channels.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub est: ChannelEstimates,
    pub user_positions: Vec<[f64; 2]>,
    pub omega: Vec<f64>,
    /// Direct-link path losses, dB.
    pub direct_loss_db: Vec<f64>,
}

/// Drops the users uniformly in the disk and draws every channel.
///
/// Draw order is fixed (positions, direct links, BS-IRS link, IRS-user links) so that two
/// configurations differing only in IRS position or power share user drops and fading.
pub fn generate_scenario<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Scenario> {
    cfg.validate()?;
    let SystemDims { m, n, nr, k, .. } = cfg.dims;
    let user_positions: Vec<[f64; 2]> = (0..k)
        .map(|_| {
            let r = cfg.ue_radius * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            [cfg.ue_center[0] + r * a.cos(), cfg.ue_center[1] + r * a.sin()]
        })
        .collect();

    let direct_loss_db =
        user_positions.iter().map(|&u| path_loss_direct(distance(cfg.bs_pos, u))).collect::<Result<Vec<_>>>()?;
    let hd: Vec<CMat> = direct_loss_db.iter().map(|&loss| sample_rayleigh(m, nr, loss, rng)).collect();

    let g_loss = path_loss_irs(distance(cfg.bs_pos, cfg.irs_pos))?;
    let a_irs_in = steering_vector(n, link_angle(cfg.irs_pos, cfg.bs_pos));
    let a_bs_out = steering_vector(m, link_angle(cfg.bs_pos, cfg.irs_pos));
    let g = sample_rician(n, m, g_loss, cfg.rician_nu, &a_irs_in, &a_bs_out, rng);

    let hr = user_positions
        .iter()
        .map(|&u| {
            let loss = path_loss_irs(distance(cfg.irs_pos, u))?;
            let a_irs_out = steering_vector(n, link_angle(cfg.irs_pos, u));
            let a_ue_in = steering_vector(nr, link_angle(u, cfg.irs_pos));
            Ok(sample_rician(n, nr, loss, cfg.rician_nu, &a_irs_out, &a_ue_in, rng))
        })
        .collect::<Result<Vec<_>>>()?;

    let omega = rate_weights(&direct_loss_db, cfg.weight_mode);
    Ok(Scenario { est: ChannelEstimates::new(g, hd, hr)?, user_positions, omega, direct_loss_db })
}

/// Rate weights normalized to sum to the number of users.
pub fn rate_weights(direct_loss_db: &[f64], mode: WeightMode) -> Vec<f64> {
    let k = direct_loss_db.len() as f64;
    let raw: Vec<f64> = match mode {
        WeightMode::Equal => vec![1.0; direct_loss_db.len()],
        // relative to the smallest loss, to stay away from underflow
        WeightMode::InverseDirectPathLoss => {
            let min = direct_loss_db.iter().copied().fold(f64::INFINITY, f64::min);
            direct_loss_db.iter().map(|l| 10f64.powf(-(l - min) / 10.0)).collect()
        }
    };
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w * k / total).collect()
}

/// Per-entry error variances giving every estimate the normalized MSE `nmse`, plus the noise
/// power from the configured spectral density and bandwidth.
pub fn calibrate_error_variances(est: &ChannelEstimates, nmse: f64, cfg: &ScenarioConfig) -> Result<ErrorModel> {
    if !(nmse >= 0.0) {
        return config(format!("NMSE must be nonnegative, got {nmse}"));
    }
    let per_entry = |h: &CMat| nmse * linalg::fro_norm_sq(h) / (h.nrows() * h.ncols()) as f64;
    Ok(ErrorModel {
        sigma2_g: per_entry(&est.g),
        sigma2_d: est.hd.iter().map(per_entry).collect(),
        sigma2_r: est.hr.iter().map(per_entry).collect(),
        sigma2_n: vec![cfg.noise_power_mw(); est.users()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_loss_values() {
        assert!((path_loss_direct(1.0).unwrap() - 32.6).abs() < 1e-12);
        assert!((path_loss_direct(10.0).unwrap() - 69.3).abs() < 1e-12);
        assert!((path_loss_irs(1.0).unwrap() - 35.6).abs() < 1e-12);
        assert!((path_loss_irs(10.0).unwrap() - 57.6).abs() < 1e-12);
        assert!(path_loss_direct(0.0).is_err());
        assert!(path_loss_irs(-3.0).is_err());
    }

    #[test]
    fn steering_vector_edge_cases() {
        assert!(steering_vector(5, 0.0).iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(steering_vector(1, 1.234).len(), 1);
        assert!((steering_vector(1, 1.234)[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn los_limit_is_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a_r = steering_vector(6, 0.3);
        let a_t = steering_vector(3, -0.8);
        let h = sample_rician(6, 3, 20.0, 1e9, &a_r, &a_t, &mut rng);
        let los = (&a_r * a_t.adjoint()).scale(0.1);
        assert!(linalg::rel_fro_err(&h, &los) < 1e-3);
        let sv = h.clone().svd(false, false).singular_values;
        assert!(sv[1] / sv[0] < 1e-3);
    }

    #[test]
    fn noise_power_from_psd_and_bandwidth() {
        let cfg = ScenarioConfig::paper();
        let expect = 10f64.powf(-11.744_727_494_896_694);
        assert!((cfg.noise_power_mw() / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_nmse_gives_error_free_model() {
        let cfg = ScenarioConfig::desk();
        let sc = generate_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let err = calibrate_error_variances(&sc.est, 0.0, &cfg).unwrap();
        assert_eq!(err.sigma2_g, 0.0);
        assert!(err.sigma2_d.iter().chain(&err.sigma2_r).all(|&v| v == 0.0));
    }

    #[test]
    fn users_at_the_center_get_equal_weights() {
        let cfg = ScenarioConfig { ue_radius: 0.0, ..ScenarioConfig::desk() };
        let sc = generate_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(sc.omega.iter().all(|&w| (w - 1.0).abs() < 1e-15));
        assert!(sc.user_positions.iter().all(|p| *p == cfg.ue_center));
    }

    #[test]
    fn weights_favor_the_stronger_direct_link_and_sum_to_k() {
        let w = rate_weights(&[110.0, 120.0, 113.0], WeightMode::InverseDirectPathLoss);
        assert!((w.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!((w[0] / w[1] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn scenario_generation_is_seeded() {
        let cfg = ScenarioConfig::desk();
        let a = generate_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.est, b.est);
        assert_eq!(a.omega, b.omega);
        let paper = generate_scenario(&ScenarioConfig::paper(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!((paper.est.m(), paper.est.n(), paper.est.nr(), paper.est.users()), (8, 100, 2, 3));
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut cfg = ScenarioConfig::desk();
        cfg.bandwidth_hz = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::desk();
        cfg.irs_pos = cfg.ue_center;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::desk();
        cfg.nmse = -0.1;
        assert!(cfg.validate().is_err());
    }
}
