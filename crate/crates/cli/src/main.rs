use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irsbf_core::harness::{summarize, write_summary, write_sweep_csv, ExperimentConfig, Profile, SweepKind};
use irsbf_core::Error;
use log::info;

/// Monte Carlo experiments for IRS-aided multiuser MIMO beamforming under imperfect CSI.
#[derive(Parser)]
#[command(name = "irsbf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// All four schemes on the base scenario.
    Run(RunArgs),
    /// Sweep the normalized MSE of the channel estimates.
    SweepNmse(RunArgs),
    /// Sweep the transmit power (dBm).
    SweepPower(RunArgs),
    /// Sweep the x coordinate of the IRS (m).
    SweepIrsPosition(RunArgs),
    /// Per-cell means and 95% intervals of a result file.
    Summarize {
        /// Result CSV written by one of the other subcommands.
        csv: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON file overlaid on the profile; any subset of fields may be given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Result CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    profile: Profile,
    /// Worker threads; 1 runs trials in order on the main thread.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl RunArgs {
    fn experiment(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                ExperimentConfig::from_json_str(&text, self.profile)?
            }
            None => ExperimentConfig::profile(self.profile),
        };
        if let Some(seed) = self.seed {
            cfg.sweep.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.sweep.trials = trials;
        }
        cfg.validate()?;
        if self.threads == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        Ok(cfg)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write + Send>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout()),
    })
}

fn sweep(kind: SweepKind, args: &RunArgs) -> Result<(), Error> {
    let cfg = args.experiment()?;
    // open the destination before any work so a bad path fails at startup
    let out = output(args.out.as_deref())?;
    info!(
        "{} sweep: {} values x {} trials, seed {}",
        kind.name(),
        kind.grid(&cfg).values.len(),
        cfg.sweep.trials,
        cfg.sweep.seed
    );
    let rows = write_sweep_csv(kind, &cfg, args.threads, out)?;
    info!("wrote {rows} records");
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Json(_) => 2,
        Error::Io(_) | Error::Csv(_) | Error::Schema { .. } => 3,
        Error::Numerical(_) | Error::SingularDual => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => sweep(SweepKind::Run, args),
        Command::SweepNmse(args) => sweep(SweepKind::Nmse, args),
        Command::SweepPower(args) => sweep(SweepKind::Power, args),
        Command::SweepIrsPosition(args) => sweep(SweepKind::IrsPosition, args),
        Command::Summarize { csv, out } => {
            summarize(csv).and_then(|rows| write_summary(&rows, output(out.as_deref())?))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_documented_exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Io(io::Error::other("x"))), 3);
        assert_eq!(exit_code(&Error::Schema { column: "method".into() }), 3);
        assert_eq!(exit_code(&Error::Numerical("x".into())), 4);
        assert_eq!(exit_code(&Error::SingularDual), 4);
    }
}
