//! Seeded Monte Carlo experiments over the four schemes and CSV result handling.

pub mod config;
pub mod summary;
pub mod sweep;
pub mod trial;

pub use config::{ExperimentConfig, GridSpec, OptimizerSettings, Profile, SweepConfig};
pub use summary::{mean_ci, read_records, summarize, summarize_records, write_summary, SummaryRow};
pub use sweep::{collect_sweep, run_sweep_with, write_sweep_csv, SweepKind, SweepOutput};
pub use trial::{run_trial, trial_seed, Method, MethodFailure, SweepRecord, TrialLabel, TrialOutcome, CSV_HEADER};
