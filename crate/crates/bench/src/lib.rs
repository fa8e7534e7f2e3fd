//! Seeded problem instances shared by the benchmarks.

use irsbf_core::bcd::{initialize_state, Problem};
use irsbf_core::channel::{calibrate_error_variances, generate_scenario};
use irsbf_core::{BeamformingState, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A drop of `scenario` with NMSE-calibrated errors and a random start.
pub fn instance(scenario: &ScenarioConfig, seed: u64) -> (Problem, BeamformingState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = generate_scenario(scenario, &mut rng).expect("valid scenario");
    let err = calibrate_error_variances(&drawn.est, scenario.nmse, scenario).expect("valid NMSE");
    let problem = Problem { dims: scenario.dims, est: drawn.est, err, omega: drawn.omega, p_t: scenario.p_t_mw() };
    let state = initialize_state(&problem.dims, &problem.omega, problem.p_t, &mut rng);
    (problem, state)
}
