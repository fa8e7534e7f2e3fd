//! Seeded random problem instances with unit-scale channels, used by tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, CMat};
use crate::model::{BeamformingState, ChannelEstimates, ErrorModel};
use crate::random::cscg_matrix;

/// Random estimates, a random error model and a fully populated random state.
///
/// Channels have unit-variance entries; error variances are drawn in `[0.02, 0.2]`, noise in
/// `[0.1, 1]`, and `T_k` is a random Hermitian positive-definite matrix.
pub fn random_instance(
    seed: u64,
    m: usize,
    nr: usize,
    n: usize,
    k: usize,
    ns: usize,
) -> (ChannelEstimates, ErrorModel, BeamformingState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = cscg_matrix(&mut rng, n, m, 1.0);
    let hd = (0..k).map(|_| cscg_matrix(&mut rng, m, nr, 1.0)).collect();
    let hr = (0..k).map(|_| cscg_matrix(&mut rng, n, nr, 1.0)).collect();
    let est = ChannelEstimates::new(g, hd, hr).expect("consistent shapes");
    let err = ErrorModel {
        sigma2_g: rng.random_range(0.02..0.2),
        sigma2_d: (0..k).map(|_| rng.random_range(0.02..0.2)).collect(),
        sigma2_r: (0..k).map(|_| rng.random_range(0.02..0.2)).collect(),
        sigma2_n: (0..k).map(|_| rng.random_range(0.1..1.0)).collect(),
    };
    let state = random_state(&mut rng, &est, ns);
    (est, err, state)
}

/// Random precoders (total power near 1 per user), filters, PD weights, phases and rate weights.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, est: &ChannelEstimates, ns: usize) -> BeamformingState {
    let k = est.users();
    let w = (0..k).map(|_| cscg_matrix(rng, est.m(), ns, 1.0 / (est.m() * ns) as f64)).collect();
    let c = (0..k).map(|_| cscg_matrix(rng, est.nr(), ns, 1.0)).collect();
    let t = (0..k).map(|_| random_hpd(rng, ns)).collect();
    let phi = (0..est.n()).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let omega = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();
    BeamformingState { w, c, t, phi, omega }
}

/// Random Hermitian positive-definite matrix `X X^H + 0.1 I`.
pub fn random_hpd<R: Rng + ?Sized>(rng: &mut R, size: usize) -> CMat {
    let x = cscg_matrix(rng, size, size, 1.0);
    linalg::hermitian_part(&(&x * x.adjoint() + linalg::identity(size).scale(0.1)))
}

/// Random phase vector in `[0, 2pi)`.
pub fn random_phases<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()
}
