use std::io::Write;
use std::sync::Mutex;

use log::warn;
use rayon::prelude::*;

use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, GridSpec};
use crate::harness::trial::{run_trial, trial_seed, MethodFailure, SweepRecord, TrialLabel, TrialOutcome, CSV_HEADER};

/// Which scenario parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// No sweep: the base scenario, labelled with its NMSE.
    Run,
    Nmse,
    /// Transmit power in dBm.
    Power,
    /// x coordinate of the IRS in meters.
    IrsPosition,
}

impl SweepKind {
    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::Run => "run",
            SweepKind::Nmse => "nmse",
            SweepKind::Power => "power",
            SweepKind::IrsPosition => "irs_position",
        }
    }

    /// Grid values and phase resolutions for this sweep.
    pub fn grid(&self, cfg: &ExperimentConfig) -> GridSpec {
        match self {
            SweepKind::Run => GridSpec { values: vec![cfg.scenario.nmse], bits: cfg.sweep.run_bits.clone() },
            SweepKind::Nmse => cfg.sweep.nmse.clone(),
            SweepKind::Power => cfg.sweep.power.clone(),
            SweepKind::IrsPosition => cfg.sweep.irs_position.clone(),
        }
    }

    /// Scenario with the swept parameter set to `value`.
    pub fn apply(&self, base: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut s = base.clone();
        match self {
            SweepKind::Run | SweepKind::Nmse => s.nmse = value,
            SweepKind::Power => s.pt_dbm = value,
            SweepKind::IrsPosition => s.irs_pos[0] = value,
        }
        s
    }
}

/// Everything a sweep produced.
#[derive(Debug, Default)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<MethodFailure>,
}

/// Runs the full grid x trials factorial, handing each finished trial to `sink`.
///
/// Trial `i` uses the same seed at every grid value, so grid points are paired. With
/// `threads <= 1` trials run in grid-major, trial-minor order on the calling thread; otherwise
/// they run on a dedicated pool and reach `sink` in completion order.
pub fn run_sweep_with<F>(kind: SweepKind, cfg: &ExperimentConfig, threads: usize, sink: F) -> Result<()>
where
    F: FnMut(TrialOutcome) -> Result<()> + Send,
{
    cfg.validate()?;
    let grid = kind.grid(cfg);
    let scenarios = grid
        .values
        .iter()
        .map(|&v| {
            let s = kind.apply(&cfg.scenario, v);
            s.validate().map(|_| (v, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> =
        (0..scenarios.len()).flat_map(|g| (0..cfg.sweep.trials as u64).map(move |t| (g, t))).collect();
    let run_job = |&(g, t): &(usize, u64)| {
        let (value, scenario) = &scenarios[g];
        let label = TrialLabel { sweep_name: kind.name().to_string(), sweep_value: *value };
        let seed = trial_seed(cfg.sweep.seed, t);
        run_trial(scenario, &cfg.optimizer, &grid.bits, seed, &label, cfg.sweep.record_wall_time)
    };

    if threads <= 1 {
        let mut sink = sink;
        for job in &jobs {
            sink(run_job(job)?)?;
        }
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    let sink = Mutex::new(sink);
    pool.install(|| {
        jobs.par_iter().try_for_each(|job| {
            let outcome = run_job(job)?;
            let mut sink = sink.lock().expect("sink poisoned");
            (*sink)(outcome)
        })
    })
}

/// Runs a sweep and keeps every record in memory.
pub fn collect_sweep(kind: SweepKind, cfg: &ExperimentConfig, threads: usize) -> Result<SweepOutput> {
    let mut out = SweepOutput::default();
    run_sweep_with(kind, cfg, threads, |trial| {
        out.records.extend(trial.records);
        out.failures.extend(trial.failures);
        Ok(())
    })?;
    Ok(out)
}

/// Runs a sweep and streams CSV rows to `writer`, one flushed block per trial.
/// Returns the number of records written; failed schemes are logged and skipped.
pub fn write_sweep_csv<W: Write + Send>(
    kind: SweepKind,
    cfg: &ExperimentConfig,
    threads: usize,
    writer: W,
) -> Result<usize> {
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    csv.write_record(CSV_HEADER)?;
    csv.flush()?;
    let mut written = 0;
    let mut first_failure = None;
    run_sweep_with(kind, cfg, threads, |trial| {
        for f in &trial.failures {
            warn!("{} (B={}) failed on seed {}: {}", f.method, f.bits, f.seed, f.error);
            first_failure.get_or_insert_with(|| format!("{} (B={}, seed {}): {}", f.method, f.bits, f.seed, f.error));
        }
        for r in &trial.records {
            csv.serialize(r)?;
            written += 1;
        }
        csv.flush()?;
        Ok(())
    })?;
    if written == 0 {
        let cause = first_failure.unwrap_or_default();
        return Err(Error::Numerical(format!("every scheme failed; first failure: {cause}")));
    }
    Ok(written)
}
