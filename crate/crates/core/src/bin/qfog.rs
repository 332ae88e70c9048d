use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qfog::config;
use qfog::report::{self, CommandError, DEFAULT_ZONE_RANGE};
use qfog::spurious::ZoneThreshold;

/// Noise budget for N00N-state fiber optic gyroscopes.
#[derive(Debug, Parser)]
#[command(name = "qfog", version, about)]
struct Cli {
    /// Worker threads for sweeps and Monte Carlo (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Threshold {
    /// |Δφ_P| below the shot noise
    Shot,
    /// |Δφ_P| below a tenth of the shot noise
    Tenth,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full noise budget at the configured operating point.
    Budget {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write |Δφ_P| versus total phase to CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cusps, undefined intervals and safe bias windows.
    Zones {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "shot")]
        threshold: Threshold,
        #[arg(long, allow_negative_numbers = true, default_value_t = DEFAULT_ZONE_RANGE.0)]
        from: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = DEFAULT_ZONE_RANGE.1)]
        to: f64,
    },
    /// Monte Carlo check of the accidental-coincidence model.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplier on the measurement time, in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Minimum detectable rotation rate.
    OmegaMin {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cmd: Command) -> Result<(), CommandError> {
    match cmd {
        Command::Budget { config } => {
            print!("{}", report::cmd_budget(&config::load(&config)?)?);
        }
        Command::Sweep {
            config,
            from,
            to,
            points,
            out,
        } => {
            let rows = report::cmd_sweep(&config::load(&config)?, from, to, points, &out)?;
            eprintln!("wrote {rows} rows to {}", out.display());
        }
        Command::Zones {
            config,
            threshold,
            from,
            to,
        } => {
            let threshold = match threshold {
                Threshold::Shot => ZoneThreshold::ShotNoise,
                Threshold::Tenth => ZoneThreshold::TenthShotNoise,
            };
            print!("{}", report::cmd_zones(&config::load(&config)?, threshold, from, to)?);
        }
        Command::Mc {
            config,
            trials,
            seed,
            scale,
        } => {
            print!("{}", report::cmd_mc(&config::load(&config)?, trials, seed, scale)?);
        }
        Command::OmegaMin { config } => {
            print!("{}", report::cmd_omega_min(&config::load(&config)?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
