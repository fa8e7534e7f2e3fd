use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bcd::{initialize_state, run_from, PassiveMethod, Problem};
use crate::channel::{calibrate_error_variances, generate_scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::harness::config::OptimizerSettings;

/// The four compared schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MM")]
    Mm,
    #[serde(rename = "SCA")]
    Sca,
    #[serde(rename = "FixedIRS")]
    FixedIrs,
    #[serde(rename = "NoIRS")]
    NoIrs,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mm, Method::Sca, Method::FixedIrs, Method::NoIrs];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mm => "MM",
            Method::Sca => "SCA",
            Method::FixedIrs => "FixedIRS",
            Method::NoIrs => "NoIRS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Exact CSV header of result files.
pub const CSV_HEADER: [&str; 8] =
    ["sweep_name", "sweep_value", "method", "bits", "seed", "wsr_bps_hz", "outer_iterations", "wall_time_ms"];

/// One result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep_name: String,
    pub sweep_value: f64,
    pub method: Method,
    pub bits: u32,
    pub seed: u64,
    pub wsr_bps_hz: f64,
    pub outer_iterations: usize,
    pub wall_time_ms: f64,
}

/// A scheme that failed inside a trial.
#[derive(Debug)]
pub struct MethodFailure {
    pub method: Method,
    pub bits: u32,
    pub seed: u64,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct TrialOutcome {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<MethodFailure>,
}

/// Labels attached to every record of a trial.
#[derive(Debug, Clone)]
pub struct TrialLabel {
    pub sweep_name: String,
    pub sweep_value: f64,
}

/// Seed of trial `index` under `master`, independent of thread count and execution order.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = master.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs every scheme on one scenario draw.
///
/// For each phase resolution in `bits` the schemes run in the order MM, SCA, FixedIRS, NoIRS.
/// The IRS schemes of one resolution share the same random start; all schemes share the channel
/// draw. A failing scheme is reported in `failures` and does not abort the trial.
pub fn run_trial(
    scenario: &ScenarioConfig,
    optimizer: &OptimizerSettings,
    bits: &[u32],
    seed: u64,
    label: &TrialLabel,
    record_wall_time: bool,
) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = generate_scenario(scenario, &mut rng)?;
    let err = calibrate_error_variances(&drawn.est, scenario.nmse, scenario)?;
    let init_seed: u64 = rng.random();
    let base = Problem { dims: scenario.dims, est: drawn.est, err, omega: drawn.omega, p_t: scenario.p_t_mw() };
    let no_irs = base.without_irs();

    let mut outcome = TrialOutcome::default();
    for &b in bits {
        let mut dims = scenario.dims;
        dims.bits = b;
        let problem = Problem { dims, ..base.clone() };
        let init = initialize_state(&dims, &problem.omega, problem.p_t, &mut ChaCha8Rng::seed_from_u64(init_seed));
        for method in Method::ALL {
            let started = Instant::now();
            let result = match method {
                Method::Mm => run_from(&optimizer.for_method(PassiveMethod::Mm, b == 0), &problem, init.clone(), true),
                Method::Sca => {
                    run_from(&optimizer.for_method(PassiveMethod::Sca, b == 0), &problem, init.clone(), true)
                }
                Method::FixedIrs => {
                    run_from(&optimizer.for_method(PassiveMethod::Mm, b == 0), &problem, init.clone(), false)
                }
                Method::NoIrs => {
                    let p = Problem { dims, ..no_irs.clone() };
                    run_from(&optimizer.for_method(PassiveMethod::Mm, b == 0), &p, init.clone(), false)
                }
            };
            let elapsed = started.elapsed().as_secs_f64() * 1e3;
            match result {
                Ok(run) => outcome.records.push(SweepRecord {
                    sweep_name: label.sweep_name.clone(),
                    sweep_value: label.sweep_value,
                    method,
                    bits: b,
                    seed,
                    wsr_bps_hz: run.wsr,
                    outer_iterations: run.iterations,
                    wall_time_ms: if record_wall_time { elapsed } else { 0.0 },
                }),
                Err(error) => outcome.failures.push(MethodFailure { method, bits: b, seed, error }),
            }
        }
    }
    Ok(outcome)
}
