//! Transmit-side block of the WMMSE decomposition at fixed phases: MMSE receive filters, MSE
//! weights, and the power-constrained precoders obtained by bisection on the Lagrange
//! multiplier of the sum-power constraint.

use nalgebra::{Cholesky, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::linalg::{self, CMat};
use crate::model::{effective_channel, mse_from_stats, BeamformingState, ChannelEstimates, ErrorModel, LinkStats};

/// Outcome of the power-constraint dual search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSolveReport {
    pub lambda_star: f64,
    /// `sum_k ||W_k||_F^2` at `lambda_star`.
    pub power_used: f64,
    /// Number of multiplier evaluations spent bracketing and bisecting.
    pub iterations: usize,
    /// Final `[lambda_lo, lambda_hi]`.
    pub bracket: (f64, f64),
}

/// Stopping parameters for the multiplier search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualSettings {
    /// Relative power mismatch `|P(lambda) - P_t| / P_t` accepted as converged.
    pub power_tol: f64,
    /// Maximum doublings (or halvings) of the initial multiplier while bracketing.
    pub max_bracket_steps: usize,
    pub max_bisections: usize,
}

impl Default for DualSettings {
    fn default() -> Self {
        Self { power_tol: 1e-10, max_bracket_steps: 60, max_bisections: 200 }
    }
}

/// `C_k* = (Q_k + sigma_k^2 I)^{-1} H_k W_k`.
pub fn optimal_receive_filter(
    est: &ChannelEstimates,
    err: &ErrorModel,
    state: &BeamformingState,
    k: usize,
) -> Result<CMat> {
    err.validate(est.users())?;
    if k >= est.users() {
        return config(format!("user index {k} out of range"));
    }
    let stats = LinkStats::new(est, state)?;
    filter_from_stats(&stats, est, err, state, k)
}

fn filter_from_stats(
    stats: &LinkStats,
    est: &ChannelEstimates,
    err: &ErrorModel,
    state: &BeamformingState,
    k: usize,
) -> Result<CMat> {
    let a = stats.q(est, err, k) + linalg::identity(est.nr()).scale(err.sigma2_n[k]);
    let chol = linalg::cholesky(&a, "Q_k + sigma_k^2 I")?;
    Ok(chol.solve(&(&stats.h[k] * &state.w[k])))
}

/// `E_k* = I - W_k^H H_k^H C_k` and `T_k* = omega_k (E_k*)^{-1}`, using the filter stored in
/// `state.c[k]` (expected to be the MMSE filter).
pub fn optimal_weights(
    est: &ChannelEstimates,
    err: &ErrorModel,
    state: &BeamformingState,
    k: usize,
) -> Result<(CMat, CMat)> {
    err.validate(est.users())?;
    if k >= est.users() {
        return config(format!("user index {k} out of range"));
    }
    let h = effective_channel(est, k, &state.phi)?;
    weights_from_filter(&h, &state.w[k], &state.c[k], state.omega[k], k)
}

fn weights_from_filter(h: &CMat, w: &CMat, c: &CMat, omega: f64, k: usize) -> Result<(CMat, CMat)> {
    let ns = w.ncols();
    let e = linalg::hermitian_part(&(linalg::identity(ns) - w.adjoint() * h.adjoint() * c));
    let inv = linalg::inverse_hpd(&e, "optimal MSE matrix").map_err(|_| {
        let ev = linalg::hermitian_eigenvalues(&e);
        Error::Numerical(format!("optimal MSE matrix of user {k} is singular (eigenvalues {ev:?})"))
    })?;
    Ok((e, inv.scale(omega)))
}

/// Refreshes every `C_k` with the MMSE filter and then every `T_k` with the matching weight.
pub fn update_filters_and_weights(
    est: &ChannelEstimates,
    err: &ErrorModel,
    state: &mut BeamformingState,
) -> Result<()> {
    err.validate(est.users())?;
    let stats = LinkStats::new(est, state)?;
    let filters =
        (0..est.users()).map(|k| filter_from_stats(&stats, est, err, state, k)).collect::<Result<Vec<_>>>()?;
    state.c = filters;
    for k in 0..est.users() {
        let (_, t) = weights_from_filter(&stats.h[k], &state.w[k], &state.c[k], state.omega[k], k)?;
        state.t[k] = t;
    }
    Ok(())
}

/// The precoder subproblem at fixed phases, filters and weights.
///
/// `W_k(lambda) = (S + lambda I)^{-1} H_k^H C_k T_k`, where `S` collects the quadratic terms
/// of every user and does not depend on `k` or `lambda`.
pub struct DualProblem {
    system: CMat,
    /// Columns `[H_1^H C_1 T_1, ..., H_K^H C_K T_K]`.
    rhs: CMat,
    streams: usize,
}

impl DualProblem {
    pub fn new(
        est: &ChannelEstimates,
        err: &ErrorModel,
        phi: &[f64],
        filters: &[CMat],
        weights: &[CMat],
    ) -> Result<Self> {
        err.validate(est.users())?;
        let users = est.users();
        if filters.len() != users || weights.len() != users {
            return config(format!("need {users} filters and weights"));
        }
        let m = est.m();
        let n = est.n() as f64;
        let ns = weights[0].ncols();
        let gram_g = est.g.adjoint() * &est.g;
        let mut system = CMat::zeros(m, m);
        let mut rhs = CMat::zeros(m, users * ns);
        for k in 0..users {
            let (c, t) = (&filters[k], &weights[k]);
            if c.shape() != (est.nr(), ns) || t.shape() != (ns, ns) {
                return config(format!("filter or weight of user {k} has the wrong shape"));
            }
            let h = effective_channel(est, k, phi)?;
            let hc = h.adjoint() * c;
            system += &hc * t * hc.adjoint();
            let tcc = (t * c.adjoint() * c).trace().re;
            let hrc = &est.hr[k] * c;
            let t_hrc = (t * hrc.adjoint() * &hrc).trace().re;
            let loading = err.sigma2_d[k] * tcc + err.sigma2_g * t_hrc + err.sigma2_g * err.sigma2_r[k] * n * tcc;
            for i in 0..m {
                system[(i, i)] += loading;
            }
            system += gram_g.scale(err.sigma2_r[k] * tcc);
            rhs.columns_mut(k * ns, ns).copy_from(&(hc * t));
        }
        Ok(Self { system: linalg::hermitian_part(&system), rhs, streams: ns })
    }

    pub fn users(&self) -> usize {
        self.rhs.ncols() / self.streams
    }

    /// True when every right-hand side vanishes, in which case `W = 0` for any multiplier.
    pub fn is_trivial(&self) -> bool {
        self.rhs.iter().all(|z| *z == linalg::ZERO)
    }

    fn factor(&self, lambda: f64) -> Result<Cholesky<num_complex::Complex64, Dyn>> {
        let m = self.system.nrows();
        let mut a = self.system.clone();
        for i in 0..m {
            a[(i, i)] += lambda;
        }
        if lambda > 0.0 {
            return linalg::cholesky(&a, "dual system matrix");
        }
        if let Ok(chol) = linalg::cholesky(&a, "dual system matrix") {
            return Ok(chol);
        }
        let tr = linalg::trace_re(&self.system);
        if !(tr > 0.0) {
            return Err(Error::SingularDual);
        }
        let ridge = 1e-12 * tr / m as f64;
        for i in 0..m {
            a[(i, i)] += ridge;
        }
        linalg::cholesky(&a, "dual system matrix").map_err(|_| Error::SingularDual)
    }

    /// Precoders for one multiplier value; the system matrix is factored once for all users.
    pub fn precoders(&self, lambda: f64) -> Result<Vec<CMat>> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return config(format!("multiplier must be finite and nonnegative, got {lambda}"));
        }
        if self.is_trivial() {
            return Ok(vec![CMat::zeros(self.system.nrows(), self.streams); self.users()]);
        }
        let all = self.factor(lambda)?.solve(&self.rhs);
        Ok((0..self.users()).map(|k| all.columns(k * self.streams, self.streams).into_owned()).collect())
    }

    /// `sum_k ||W_k(lambda)||_F^2`.
    pub fn power(&self, lambda: f64) -> Result<f64> {
        Ok(self.precoders(lambda)?.iter().map(linalg::fro_norm_sq).sum())
    }

    /// Smallest multiplier meeting the power budget, found by bracketing then bisection.
    pub fn solve(&self, p_t: f64, settings: &DualSettings) -> Result<(DualSolveReport, Vec<CMat>)> {
        if !(p_t > 0.0) || !p_t.is_finite() {
            return config(format!("transmit power budget must be positive, got {p_t}"));
        }
        let eval = |lambda: f64| -> Result<(f64, Vec<CMat>)> {
            let w = self.precoders(lambda)?;
            Ok((w.iter().map(linalg::fro_norm_sq).sum(), w))
        };
        let mut iterations = 1;
        match eval(0.0) {
            Ok((p, w)) if p <= p_t => {
                return Ok((DualSolveReport { lambda_star: 0.0, power_used: p, iterations, bracket: (0.0, 0.0) }, w));
            }
            Ok(_) | Err(Error::SingularDual) => {}
            Err(e) => return Err(e),
        }

        // power(lambda) is non-increasing: find lo with power > p_t and hi with power <= p_t.
        let (mut lo, mut hi) = (0.0, 1.0);
        let (mut p_hi, mut w_hi) = eval(hi)?;
        iterations += 1;
        if p_hi > p_t {
            let mut steps = 0;
            while p_hi > p_t {
                if steps == settings.max_bracket_steps {
                    return config(format!(
                        "no multiplier up to {hi:e} meets the power budget {p_t:e}; channel scales are pathological"
                    ));
                }
                lo = hi;
                hi *= 2.0;
                (p_hi, w_hi) = eval(hi)?;
                iterations += 1;
                steps += 1;
            }
        } else {
            let mut candidate = hi;
            for _ in 0..settings.max_bracket_steps {
                candidate *= 0.5;
                let (p, w) = eval(candidate)?;
                iterations += 1;
                if p > p_t {
                    lo = candidate;
                    break;
                }
                (hi, p_hi, w_hi) = (candidate, p, w);
            }
        }

        for _ in 0..settings.max_bisections {
            if (p_hi - p_t).abs() <= settings.power_tol * p_t || hi - lo <= 1e-15 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let (p, w) = eval(mid)?;
            iterations += 1;
            if p > p_t {
                lo = mid;
            } else {
                (hi, p_hi, w_hi) = (mid, p, w);
            }
        }
        Ok((DualSolveReport { lambda_star: hi, power_used: p_hi, iterations, bracket: (lo, hi) }, w_hi))
    }
}

/// `W_k(lambda)` for every user.
pub fn precoders_for_dual(
    est: &ChannelEstimates,
    err: &ErrorModel,
    phi: &[f64],
    filters: &[CMat],
    weights: &[CMat],
    lambda: f64,
) -> Result<Vec<CMat>> {
    DualProblem::new(est, err, phi, filters, weights)?.precoders(lambda)
}

/// Precoders meeting `sum_k ||W_k||^2 <= P_t`, with complementary slackness on the multiplier.
pub fn solve_power_dual(
    est: &ChannelEstimates,
    err: &ErrorModel,
    phi: &[f64],
    filters: &[CMat],
    weights: &[CMat],
    p_t: f64,
    settings: &DualSettings,
) -> Result<(DualSolveReport, Vec<CMat>)> {
    DualProblem::new(est, err, phi, filters, weights)?.solve(p_t, settings)
}

/// Lagrangian of the precoder subproblem at the filters, weights and precoders in `state`:
/// `lambda (tr W~ - P_t) + sum_k tr(T_k C_k^H Q_k C_k - T_k C_k^H H_k W_k - T_k W_k^H H_k^H C_k)`.
pub fn lagrangian_value(
    est: &ChannelEstimates,
    err: &ErrorModel,
    state: &BeamformingState,
    lambda: f64,
    p_t: f64,
) -> Result<f64> {
    err.validate(est.users())?;
    let stats = LinkStats::new(est, state)?;
    let mut value = lambda * (stats.tr_gram - p_t);
    for k in 0..est.users() {
        let (c, t) = (&state.c[k], &state.t[k]);
        let q = stats.q(est, err, k);
        let chw = c.adjoint() * &stats.h[k] * &state.w[k];
        value += (t * (c.adjoint() * q * c - &chw - chw.adjoint())).trace().re;
    }
    Ok(value)
}

/// MSE matrices `E_k` of every user at the filters stored in `state`.
pub fn mse_matrices(est: &ChannelEstimates, err: &ErrorModel, state: &BeamformingState) -> Result<Vec<CMat>> {
    err.validate(est.users())?;
    let stats = LinkStats::new(est, state)?;
    Ok((0..est.users()).map(|k| mse_from_stats(&stats, est, err, state, k)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random_hpd, random_instance};
    use crate::linalg::c;
    use crate::model::{mse_matrix, weighted_sum_rate, wmmse_objective};
    use crate::random::cscg_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> CMat {
        CMat::from_element(1, 1, c(v, 0.0))
    }

    fn scalar_problem() -> (ChannelEstimates, ErrorModel, BeamformingState) {
        let est = ChannelEstimates::new(scalar(0.0), vec![scalar(1.0)], vec![scalar(0.0)]).unwrap();
        let err = ErrorModel::perfect(1, 1.0);
        let state = BeamformingState::new(vec![scalar(1.0)], vec![0.0], vec![1.0], 1);
        (est, err, state)
    }

    #[test]
    fn scalar_filter_and_weights() {
        let (est, err, mut state) = scalar_problem();
        let c0 = optimal_receive_filter(&est, &err, &state, 0).unwrap();
        assert!((c0[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        state.c[0] = c0;
        let (e, t) = optimal_weights(&est, &err, &state, 0).unwrap();
        assert!((e[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((t[(0, 0)].re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_precoder_gives_zero_filter_and_identity_mse() {
        let (est, err, mut state) = random_instance(31, 3, 2, 4, 2, 2);
        state.w[1].fill(c(0.0, 0.0));
        let c1 = optimal_receive_filter(&est, &err, &state, 1).unwrap();
        assert_eq!(linalg::fro_norm_sq(&c1), 0.0);
        state.c[1] = c1;
        let (e, t) = optimal_weights(&est, &err, &state, 1).unwrap();
        assert!(linalg::rel_fro_err(&e, &linalg::identity(2)) < 1e-15);
        assert!(linalg::rel_fro_err(&t, &linalg::identity(2).scale(state.omega[1])) < 1e-14);
    }

    #[test]
    fn optimal_filter_minimizes_weighted_mse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (est, err, mut state) = random_instance(32, 3, 2, 4, 2, 2);
        update_filters_and_weights(&est, &err, &mut state).unwrap();
        for k in 0..2 {
            let t = random_hpd(&mut rng, 2);
            let best = (&t * mse_matrix(&est, &err, &state, k).unwrap()).trace().re;
            for _ in 0..100 {
                let mut perturbed = state.clone();
                perturbed.c[k] += cscg_matrix(&mut rng, 2, 2, 0.01);
                let val = (&t * mse_matrix(&est, &err, &perturbed, k).unwrap()).trace().re;
                assert!(val >= best - 1e-12 * best.abs());
            }
        }
    }

    #[test]
    fn optimal_mse_eigenvalues_lie_in_unit_interval() {
        for seed in 0..20 {
            let (est, err, mut state) = random_instance(100 + seed, 3, 2, 4, 2, 2);
            update_filters_and_weights(&est, &err, &mut state).unwrap();
            for k in 0..2 {
                let (e, t) = optimal_weights(&est, &err, &state, k).unwrap();
                let ev = linalg::hermitian_eigenvalues(&e);
                assert!(ev[0] > 0.0 && ev[1] <= 1.0 + 1e-12, "{ev:?}");
                assert!(linalg::hermitian_eigenvalues(&t)[0] > 0.0);
            }
        }
    }

    #[test]
    fn wmmse_rate_identity_on_a_random_state() {
        let (est, err, mut state) = random_instance(33, 3, 2, 4, 2, 2);
        update_filters_and_weights(&est, &err, &mut state).unwrap();
        let rate = weighted_sum_rate(&est, &err, &state).unwrap();
        let mut via_mse = 0.0;
        for k in 0..2 {
            let (e, _) = optimal_weights(&est, &err, &state, k).unwrap();
            via_mse -= state.omega[k] * linalg::ln_det_hpd(&e, "E").unwrap() / std::f64::consts::LN_2;
        }
        assert!((rate - via_mse).abs() <= 1e-8 * rate);
        let ns_sum: f64 = state.omega.iter().map(|o| 2.0 * o).sum();
        let f = wmmse_objective(&est, &err, &state).unwrap();
        assert!((f - (ns_sum - rate)).abs() <= 1e-8 * ns_sum);
    }

    #[test]
    fn scalar_precoder_matches_closed_form() {
        let (est, err, mut state) = scalar_problem();
        state.c[0] = scalar(0.7);
        state.t[0] = scalar(1.9);
        let lambda = 0.4;
        let w = precoders_for_dual(&est, &err, &state.phi, &state.c, &state.t, lambda).unwrap();
        let expect = 0.7 * 1.9 / (0.7 * 0.7 * 1.9 + lambda);
        assert!((w[0][(0, 0)] - c(expect, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn huge_multiplier_shuts_off_transmission() {
        let (est, err, mut state) = random_instance(34, 3, 2, 4, 2, 2);
        update_filters_and_weights(&est, &err, &mut state).unwrap();
        let p = DualProblem::new(&est, &err, &state.phi, &state.c, &state.t).unwrap();
        assert!(p.power(1e12).unwrap() < 1e-18);
    }

    #[test]
    fn generous_budget_leaves_multiplier_at_zero() {
        let (est, err, mut state) = random_instance(35, 3, 2, 4, 2, 2);
        update_filters_and_weights(&est, &err, &mut state).unwrap();
        let p = DualProblem::new(&est, &err, &state.phi, &state.c, &state.t).unwrap();
        let free = p.power(0.0).unwrap();
        let (report, w) = p.solve(1e6 * free, &DualSettings::default()).unwrap();
        assert_eq!(report.lambda_star, 0.0);
        assert_eq!(w, p.precoders(0.0).unwrap());
    }

    #[test]
    fn tight_budget_is_met_with_equality() {
        let (est, err, mut state) = random_instance(36, 3, 2, 4, 2, 2);
        update_filters_and_weights(&est, &err, &mut state).unwrap();
        let p = DualProblem::new(&est, &err, &state.phi, &state.c, &state.t).unwrap();
        let p_t = 1e-3 * p.power(0.0).unwrap();
        let (report, w) = p.solve(p_t, &DualSettings::default()).unwrap();
        let used: f64 = w.iter().map(linalg::fro_norm_sq).sum();
        assert!(report.lambda_star > 0.0);
        assert!(used <= p_t * (1.0 + 1e-6));
        assert!((used - p_t).abs() / p_t <= 1e-4);
        // dense grid scan brackets the same multiplier
        let grid: Vec<f64> = (0..=400).map(|i| report.lambda_star * i as f64 / 200.0).collect();
        let crossing = grid.iter().find(|&&l| p.power(l).unwrap() <= p_t).unwrap();
        assert!((crossing - report.lambda_star).abs() <= report.lambda_star / 200.0 + 1e-15);
    }

    #[test]
    fn zero_filters_give_zero_precoders_and_zero_lagrangian_terms() {
        let (est, err, mut state) = random_instance(37, 3, 2, 4, 2, 2);
        for w in &mut state.w {
            w.fill(c(0.0, 0.0));
        }
        let l = lagrangian_value(&est, &err, &state, 0.3, 2.0).unwrap();
        assert!((l + 0.3 * 2.0).abs() < 1e-15);
        for ck in &mut state.c {
            ck.fill(c(0.0, 0.0));
        }
        let (report, w) =
            solve_power_dual(&est, &err, &state.phi, &state.c, &state.t, 1.0, &DualSettings::default()).unwrap();
        assert_eq!(report.lambda_star, 0.0);
        assert!(w.iter().all(|w| linalg::fro_norm_sq(w) == 0.0));
    }

    #[test]
    fn scalar_lagrangian_matches_hand_expansion() {
        let (est, err, mut state) = scalar_problem();
        state.w[0] = scalar(0.8);
        state.c[0] = scalar(0.6);
        state.t[0] = scalar(1.5);
        let l = lagrangian_value(&est, &err, &state, 0.0, 1.0).unwrap();
        let expect = 1.5 * (0.6 * 0.64 * 0.6 - 2.0 * 0.6 * 0.8);
        assert!((l - expect).abs() < 1e-14);
    }

    #[test]
    fn negative_multiplier_is_rejected() {
        let (est, err, state) = random_instance(38, 3, 2, 4, 2, 2);
        let r = precoders_for_dual(&est, &err, &state.phi, &state.c, &state.t, -1.0);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
