//! Sampling estimate of the interference-plus-noise covariance.
//!
//! Draws the estimation errors, the data symbols of every user and the receiver noise, forms
//! the interference-plus-noise part of the received signal of user `k` and averages its outer
//! product. It shares no code with the closed-form covariance apart from the effective channel.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{config, Result};
use crate::linalg::{self, CMat, CVec};
use crate::model::{effective_channel, BeamformingState, ChannelEstimates, ErrorModel};
use crate::random::{cscg_matrix, cscg_vector};

/// Monte Carlo estimate of `E{N_k N_k^H}` from `samples` independent draws.
pub fn monte_carlo_cov_oracle(
    est: &ChannelEstimates,
    err: &ErrorModel,
    state: &BeamformingState,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<CMat> {
    err.validate(est.users())?;
    state.check(est)?;
    if k >= est.users() || samples == 0 {
        return config(format!("invalid oracle request (user {k}, {samples} samples)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n, nr) = (est.m(), est.n(), est.nr());
    let ns = state.w[0].ncols();
    let hk = effective_channel(est, k, &state.phi)?;
    let theta: Vec<Complex64> = state.phi.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
    let hr_h = est.hr[k].adjoint();

    let mut acc = CMat::zeros(nr, nr);
    for _ in 0..samples {
        let mut x = CVec::zeros(m);
        let mut interference = CVec::zeros(m);
        for (i, wi) in state.w.iter().enumerate() {
            let s = cscg_vector(&mut rng, ns, 1.0);
            let tx = wi * s;
            if i != k {
                interference += &tx;
            }
            x += tx;
        }
        let d_g = cscg_matrix(&mut rng, n, m, err.sigma2_g);
        let d_hd = cscg_matrix(&mut rng, m, nr, err.sigma2_d[k]);
        let d_hr = cscg_matrix(&mut rng, n, nr, err.sigma2_r[k]);
        let noise = cscg_vector(&mut rng, nr, err.sigma2_n[k]);

        // Theta (G_hat + dG) x and Theta dG x
        let mut theta_dg_x = &d_g * &x;
        let mut theta_g_x = &est.g * &x;
        for i in 0..n {
            theta_dg_x[i] *= theta[i];
            theta_g_x[i] *= theta[i];
        }
        let nk = &hk * interference
            + d_hd.adjoint() * &x
            + &hr_h * &theta_dg_x
            + d_hr.adjoint() * (theta_g_x + theta_dg_x)
            + noise;
        acc += &nk * nk.adjoint();
    }
    Ok(linalg::hermitian_part(&acc.unscale(samples as f64)))
}
