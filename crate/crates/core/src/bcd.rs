//! Block-coordinate-descent driver alternating the transmit block (filters, weights, dual-solved
//! precoders) and the phase block (one or more MM or gradient steps, then quantization), plus the
//! two reference schemes: phases frozen at their random start, and no IRS at all.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::active::{update_filters_and_weights, DualProblem, DualSettings};
use crate::error::{config, Result};
use crate::linalg::CMat;
use crate::model::{weighted_sum_rate, wmmse_objective, BeamformingState, ChannelEstimates, ErrorModel, SystemDims};
pub use crate::passive::PassiveMethod;
use crate::passive::{build_passive_coefficients, mm_update, quantize_phases, sca_update, ArmijoParams};
use crate::random::cscg_matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub method: PassiveMethod,
    pub max_outer: usize,
    /// Fractional decrease of the objective below which the loop stops.
    pub rel_tol: f64,
    pub passive_steps_per_outer: usize,
    pub quantize_each_iteration: bool,
    /// Ignore the phase resolution of the dimensions and optimize continuous phases.
    pub continuous_phases: bool,
    /// Consecutive non-improving iterations tolerated when quantizing inside the loop.
    pub patience: usize,
    pub armijo: ArmijoParams,
    pub dual: DualSettings,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: PassiveMethod::Mm,
            max_outer: 100,
            rel_tol: 1e-4,
            passive_steps_per_outer: 1,
            quantize_each_iteration: true,
            continuous_phases: false,
            patience: 10,
            armijo: ArmijoParams::default(),
            dual: DualSettings::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 {
            return config("max_outer must be at least 1");
        }
        if !(self.rel_tol > 0.0) {
            return config(format!("rel_tol must be positive, got {}", self.rel_tol));
        }
        if self.patience == 0 {
            return config("patience must be at least 1");
        }
        if !(self.armijo.growth > 1.0) || !(self.armijo.c > 0.0) {
            return config("Armijo growth must exceed 1 and the decrease constant must be positive");
        }
        Ok(())
    }
}

/// A downlink instance to optimize: estimates, error statistics, rate weights and power budget.
#[derive(Debug, Clone)]
pub struct Problem {
    pub dims: SystemDims,
    pub est: ChannelEstimates,
    pub err: ErrorModel,
    pub omega: Vec<f64>,
    /// Transmit power budget in mW.
    pub p_t: f64,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.est.check_dims(&self.dims)?;
        self.err.validate(self.dims.k)?;
        if self.omega.len() != self.dims.k || self.omega.iter().any(|&w| !(w > 0.0)) {
            return config("need one positive rate weight per user");
        }
        if !(self.p_t > 0.0) || !self.p_t.is_finite() {
            return config(format!("transmit power must be positive, got {}", self.p_t));
        }
        if self.err.sigma2_n.iter().any(|&s| s <= 0.0) {
            return config("noise power must be positive");
        }
        Ok(())
    }

    /// Same problem with the IRS links and their error variances removed.
    pub fn without_irs(&self) -> Self {
        Self { est: self.est.without_irs(), err: self.err.without_irs(), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// Fractional decrease fell below the threshold.
    Converged,
    MaxIterations,
    /// Patience exhausted under per-iteration quantization; the best iterate is returned.
    NoImprovement,
    /// Converged while the last gradient step failed its backtracking search.
    PassiveStalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// WMMSE objective at the refreshed filters and weights.
    pub objective: f64,
    pub wsr: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub state: BeamformingState,
    pub trace: Vec<TracePoint>,
    pub iterations: usize,
    pub stop: StopReason,
    /// Weighted sum rate of the returned state.
    pub wsr: f64,
}

/// Random start: phases uniform over the alphabet (or `[0, 2pi)` when `bits = 0`), precoders
/// i.i.d. CSCG scaled to use exactly `p_t`.
pub fn initialize_state<R: Rng + ?Sized>(dims: &SystemDims, omega: &[f64], p_t: f64, rng: &mut R) -> BeamformingState {
    // precoders first, so the precoder start does not depend on the phase resolution
    let mut w: Vec<CMat> = (0..dims.k).map(|_| cscg_matrix(rng, dims.m, dims.ns, 1.0)).collect();
    let phi: Vec<f64> = match dims.alphabet_size() {
        Some(levels) => {
            (0..dims.n).map(|_| rng.random_range(0..levels) as f64 * std::f64::consts::TAU / levels as f64).collect()
        }
        None => (0..dims.n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect(),
    };
    let power: f64 = w.iter().map(crate::linalg::fro_norm_sq).sum();
    let scale = (p_t / power).sqrt();
    for wk in &mut w {
        *wk *= num_complex::Complex64::from(scale);
    }
    BeamformingState::new(w, phi, omega.to_vec(), dims.nr)
}

/// Joint design from the random start drawn from `rng`.
pub fn run_joint_design<R: Rng + ?Sized>(cfg: &OptimizerConfig, problem: &Problem, rng: &mut R) -> Result<RunResult> {
    let dims = effective_dims(cfg, problem);
    let init = initialize_state(&dims, &problem.omega, problem.p_t, rng);
    run_from(cfg, problem, init, true)
}

/// Transmit-side optimization only, phases held at their random start.
pub fn run_baseline_fixed_irs<R: Rng + ?Sized>(
    cfg: &OptimizerConfig,
    problem: &Problem,
    rng: &mut R,
) -> Result<RunResult> {
    let dims = effective_dims(cfg, problem);
    let init = initialize_state(&dims, &problem.omega, problem.p_t, rng);
    run_from(cfg, problem, init, false)
}

/// Direct links only: the IRS channels and their errors are zeroed.
pub fn run_baseline_no_irs<R: Rng + ?Sized>(
    cfg: &OptimizerConfig,
    problem: &Problem,
    rng: &mut R,
) -> Result<RunResult> {
    run_baseline_fixed_irs(cfg, &problem.without_irs(), rng)
}

fn effective_dims(cfg: &OptimizerConfig, problem: &Problem) -> SystemDims {
    let mut dims = problem.dims;
    if cfg.continuous_phases {
        dims.bits = 0;
    }
    dims
}

/// Runs the alternating loop from a given state. With `optimize_phases = false` only the
/// transmit block is iterated.
pub fn run_from(
    cfg: &OptimizerConfig,
    problem: &Problem,
    init: BeamformingState,
    optimize_phases: bool,
) -> Result<RunResult> {
    cfg.validate()?;
    problem.validate()?;
    init.check(&problem.est)?;
    let bits = effective_dims(cfg, problem).bits;
    let quantize_inside = bits > 0 && cfg.quantize_each_iteration;
    let (est, err) = (&problem.est, &problem.err);

    let mut state = init;
    let mut trace = Vec::with_capacity(cfg.max_outer);
    let mut best: Option<(f64, BeamformingState, f64)> = None;
    let mut since_best = 0;
    let mut last_stalled = false;
    let mut stop = StopReason::MaxIterations;

    for it in 0..cfg.max_outer {
        update_filters_and_weights(est, err, &mut state)?;
        let objective = wmmse_objective(est, err, &state)?;
        let wsr = weighted_sum_rate(est, err, &state)?;
        trace.push(TracePoint { objective, wsr });

        let improved = best.as_ref().is_none_or(|(f, _, _)| objective < *f);
        if improved {
            best = Some((objective, state.clone(), wsr));
            since_best = 0;
        } else {
            since_best += 1;
        }

        if it > 0 {
            let prev = trace[it - 1].objective;
            let decrease = (prev - objective) / prev.abs().max(f64::MIN_POSITIVE);
            let converged =
                if quantize_inside { (0.0..cfg.rel_tol).contains(&decrease) } else { decrease < cfg.rel_tol };
            if converged {
                stop = if last_stalled { StopReason::PassiveStalled } else { StopReason::Converged };
                break;
            }
            if quantize_inside && since_best >= cfg.patience {
                stop = StopReason::NoImprovement;
                break;
            }
        }
        if it + 1 == cfg.max_outer {
            break;
        }

        let dual = DualProblem::new(est, err, &state.phi, &state.c, &state.t)?;
        let (_, w) = dual.solve(problem.p_t, &cfg.dual)?;
        state.w = w;

        if optimize_phases {
            let coef = build_passive_coefficients(est, err, &state)?;
            let mut phi = state.phi.clone();
            last_stalled = false;
            for _ in 0..cfg.passive_steps_per_outer {
                phi = match cfg.method {
                    PassiveMethod::Mm => mm_update(&coef, &phi),
                    PassiveMethod::Sca => {
                        let step = sca_update(&coef, &phi, &cfg.armijo);
                        last_stalled = step.stalled;
                        step.phi
                    }
                };
            }
            state.phi = if quantize_inside { quantize_phases(&phi, bits) } else { phi };
        }
    }

    let (_, mut state, mut wsr) = best.expect("at least one iteration");
    if bits > 0 && !quantize_inside {
        state.phi = quantize_phases(&state.phi, bits);
        update_filters_and_weights(est, err, &mut state)?;
        wsr = weighted_sum_rate(est, err, &state)?;
    }
    Ok(RunResult { iterations: trace.len(), state, trace, stop, wsr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> CMat {
        CMat::from_element(1, 1, c(v, 0.0))
    }

    #[test]
    fn initial_state_is_deterministic_and_uses_full_power() {
        let dims = SystemDims::new(4, 16, 2, 2, 2, 2).unwrap();
        let a = initialize_state(&dims, &[1.0, 1.0], 0.5, &mut ChaCha8Rng::seed_from_u64(3));
        let b = initialize_state(&dims, &[1.0, 1.0], 0.5, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert!((a.transmit_power() - 0.5).abs() <= 1e-12 * 0.5);
        let alphabet = crate::passive::phase_alphabet(2);
        assert!(a.phi.iter().all(|p| alphabet.contains(p)));
    }

    #[test]
    fn single_scalar_user_reaches_capacity() {
        let est = ChannelEstimates::new(scalar(0.0), vec![scalar(0.9)], vec![scalar(0.0)]).unwrap();
        let problem = Problem {
            dims: SystemDims::new(1, 1, 1, 1, 1, 0).unwrap(),
            est,
            err: ErrorModel::perfect(1, 0.2),
            omega: vec![1.0],
            p_t: 3.0,
        };
        let cfg = OptimizerConfig { continuous_phases: true, ..Default::default() };
        let res = run_joint_design(&cfg, &problem, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let capacity = (1.0 + 3.0 * 0.81 / 0.2f64).log2();
        assert!((res.wsr - capacity).abs() < 1e-9, "{} vs {capacity}", res.wsr);
        let fixed = run_baseline_fixed_irs(&cfg, &problem, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((fixed.wsr - res.wsr).abs() < 1e-12);
    }

    #[test]
    fn no_direct_link_without_irs_gives_zero_rate() {
        let z = CMat::zeros(2, 2);
        let est = ChannelEstimates::new(
            CMat::from_element(3, 2, c(1.0, 0.0)),
            vec![z.clone()],
            vec![CMat::from_element(3, 2, c(1.0, 0.0))],
        )
        .unwrap();
        let problem = Problem {
            dims: SystemDims::new(2, 3, 2, 1, 1, 2).unwrap(),
            est,
            err: ErrorModel::perfect(1, 0.1),
            omega: vec![1.0],
            p_t: 1.0,
        };
        let res =
            run_baseline_no_irs(&OptimizerConfig::default(), &problem, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(res.wsr, 0.0);
        assert!(res.state.transmit_power() <= 1.0 + 1e-6);
    }

    #[test]
    fn invalid_configuration_is_rejected() {
        let cfg = OptimizerConfig { max_outer: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = OptimizerConfig { rel_tol: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
