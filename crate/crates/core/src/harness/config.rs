//! Experiment configuration: one JSON document with `scenario`, `optimizer` and `sweep`
//! sections. Files are overlaid on a built-in profile, so any subset of fields may be given;
//! unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::active::DualSettings;
use crate::bcd::{OptimizerConfig, PassiveMethod};
use crate::channel::ScenarioConfig;
use crate::error::{config, Result};
use crate::passive::ArmijoParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => config(format!("unknown profile `{other}` (expected desk or paper)")),
        }
    }
}

/// Optimizer parameters shared by every scheme; the phase-update rule is chosen per scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    pub max_outer: usize,
    pub rel_tol: f64,
    pub passive_steps_per_outer: usize,
    pub quantize_each_iteration: bool,
    pub patience: usize,
    pub armijo: ArmijoParams,
    pub dual: DualSettings,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            max_outer: d.max_outer,
            rel_tol: d.rel_tol,
            passive_steps_per_outer: d.passive_steps_per_outer,
            quantize_each_iteration: d.quantize_each_iteration,
            patience: d.patience,
            armijo: d.armijo,
            dual: d.dual,
        }
    }
}

impl OptimizerSettings {
    pub fn for_method(&self, method: PassiveMethod, continuous_phases: bool) -> OptimizerConfig {
        OptimizerConfig {
            method,
            max_outer: self.max_outer,
            rel_tol: self.rel_tol,
            passive_steps_per_outer: self.passive_steps_per_outer,
            quantize_each_iteration: self.quantize_each_iteration,
            continuous_phases,
            patience: self.patience,
            armijo: self.armijo,
            dual: self.dual,
        }
    }
}

/// Grid values and phase resolutions of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub values: Vec<f64>,
    /// Phase resolutions to run for the IRS schemes; 0 is continuous.
    pub bits: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub trials: usize,
    pub seed: u64,
    /// Record measured wall time; when off the column is written as 0 and reruns are byte-identical.
    pub record_wall_time: bool,
    /// Phase resolutions for the `run` subcommand.
    pub run_bits: Vec<u32>,
    /// NMSE values.
    pub nmse: GridSpec,
    /// Transmit powers, dBm.
    pub power: GridSpec,
    /// IRS x coordinates, meters.
    pub irs_position: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub optimizer: OptimizerSettings,
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    pub fn profile(profile: Profile) -> Self {
        let (scenario, trials) = match profile {
            Profile::Desk => (ScenarioConfig::desk(), 100),
            Profile::Paper => (ScenarioConfig::paper(), 1000),
        };
        Self {
            scenario,
            optimizer: OptimizerSettings::default(),
            sweep: SweepConfig {
                trials,
                seed: 1,
                record_wall_time: true,
                run_bits: vec![0, 2],
                nmse: GridSpec { values: vec![0.0, 0.02, 0.05, 0.1, 0.15, 0.2], bits: vec![0, 2] },
                power: GridSpec { values: vec![-10.0, -5.0, 0.0, 5.0, 10.0], bits: vec![2] },
                irs_position: GridSpec { values: vec![50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0], bits: vec![2] },
            },
        }
    }

    /// Overlays a JSON document on the given profile.
    pub fn from_json_str(text: &str, profile: Profile) -> Result<Self> {
        let overlay: Value = serde_json::from_str(text)?;
        if !overlay.is_object() {
            return config("configuration must be a JSON object");
        }
        let mut base = serde_json::to_value(Self::profile(profile))?;
        merge(&mut base, overlay);
        let cfg: Self = serde_json::from_value(base).map_err(|e| crate::error::Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, profile: Profile) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, profile)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.optimizer.for_method(PassiveMethod::Mm, false).validate()?;
        if self.sweep.trials == 0 {
            return config("trials must be at least 1");
        }
        for grid in [&self.sweep.nmse, &self.sweep.power, &self.sweep.irs_position] {
            if grid.values.is_empty() || grid.bits.is_empty() {
                return config("sweep grids need at least one value and one phase resolution");
            }
        }
        Ok(())
    }
}

/// Recursive object merge; non-object values in `overlay` replace those in `base`. Keys absent
/// from `base` are inserted so that deserialization can reject them.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (key, value) in o {
                match b.get_mut(&key) {
                    Some(slot) => merge(slot, value),
                    None => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}
