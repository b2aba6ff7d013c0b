use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trustcloud::report::{self, Artifacts, SweepParameter};
use trustcloud::sim::ScenarioConfig;
use trustcloud::Error;

/// Trust-cloud secure clustering simulator.
#[derive(Parser)]
#[command(name = "trustcloud", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    config: PathBuf,
    /// Overrides the master seed from the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short, env = "TRUSTCLOUD_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// One seeded run: manifest, per-round and per-cycle CSVs, summary.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Independent replications with 95% confidence intervals.
    Replicate {
        #[command(flatten)]
        common: Common,
        /// Defaults to the scenario's replication count.
        #[arg(long, short)]
        replications: Option<usize>,
    },
    /// Replicated runs over a list of parameter values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// malicious_fraction, devices or area.
        #[arg(long, default_value = "malicious_fraction")]
        parameter: String,
        /// Comma-separated values; defaults to 0.1,0.2,0.3,0.4,0.5.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, short)]
        replications: Option<usize>,
    },
    /// Square areas crossed with device counts.
    Grid {
        #[command(flatten)]
        common: Common,
        /// Comma-separated square side lengths in metres.
        #[arg(long, value_delimiter = ',', required = true)]
        areas: Vec<f64>,
        /// Comma-separated device counts.
        #[arg(long, value_delimiter = ',', required = true)]
        devices: Vec<usize>,
        #[arg(long, short)]
        replications: Option<usize>,
    },
    /// Training phase only; per-device standard clouds.
    Train {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
    }
    Ok(cfg)
}

fn execute(command: Command) -> Result<(Artifacts, PathBuf), Error> {
    let out = |c: &Common| c.out.clone();
    match command {
        Command::Run { common } => {
            let cfg = load(&common)?;
            Ok((report::cmd_run(&cfg, &common.out)?, out(&common)))
        }
        Command::Replicate { common, replications } => {
            let cfg = load(&common)?;
            let n = replications.unwrap_or(cfg.scenario.replications);
            Ok((report::cmd_replicate(&cfg, n, &common.out)?, out(&common)))
        }
        Command::Sweep { common, parameter, values, replications } => {
            let cfg = load(&common)?;
            let parameter = SweepParameter::parse(&parameter)?;
            let values = values.unwrap_or_else(|| report::DEFAULT_SWEEP.to_vec());
            let n = replications.unwrap_or(cfg.scenario.replications);
            Ok((report::cmd_sweep(&cfg, parameter, &values, n, &common.out)?, out(&common)))
        }
        Command::Grid { common, areas, devices, replications } => {
            let cfg = load(&common)?;
            let n = replications.unwrap_or(cfg.scenario.replications);
            Ok((report::cmd_grid(&cfg, &areas, &devices, n, &common.out)?, out(&common)))
        }
        Command::Train { common } => {
            let cfg = load(&common)?;
            Ok((report::cmd_train(&cfg, &common.out)?, out(&common)))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}

fn print_files(dir: &Path, files: &[PathBuf]) {
    for f in files {
        let shown = f.strip_prefix(dir).unwrap_or(f);
        eprintln!("wrote {}", dir.join(shown).display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok((artifacts, dir)) => {
            print!("{}", artifacts.summary);
            print_files(&dir, &artifacts.files);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
