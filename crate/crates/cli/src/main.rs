use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hlps::commands::{self, RunOverrides};
use hlps::config::OutputFormat;

/// Simulator and metrics suite for the H-LPS collaborative location-privacy
/// protocol.
#[derive(Parser)]
#[command(name = "hlps", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write a report.
    ///
    /// The config seed can be overridden with the HLPS_SEED environment
    /// variable.
    Run {
        /// Scenario config (sectioned key-value text, or JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when omitted (overrides the config's
        /// output.path).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report encoding (overrides the config's output.format).
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
        /// Include the full per-round message trace in the report.
        #[arg(long)]
        trace: bool,
    },
    /// Run one simulation per value of a varied parameter.
    ///
    /// Repeat --vary to sweep a cartesian grid. Keys: n_users, rho_max,
    /// serving_radius, privacy_distribution.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Parameter grid axis, e.g. --vary n_users=2,5,10
        #[arg(long, required = true)]
        vary: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Print anonymity-set entropies log2(k) as CSV.
    EntropyTable {
        /// Anonymity set sizes, e.g. --k 3,7,10
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
    },
    /// Probe the final-location kernel's runtime scaling; CSV on stdout.
    Timing {
        /// Point counts to probe, e.g. --sizes 1000,10000,100000,1000000
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Repetitions per size (median is reported; at least 3).
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            format,
            trace,
        } => commands::cmd_run(&config, &RunOverrides { out, format, trace }),
        Command::Sweep {
            config,
            vary,
            out,
            format,
        } => commands::cmd_sweep(
            &config,
            &vary,
            &RunOverrides {
                out,
                format,
                trace: false,
            },
        ),
        Command::EntropyTable { k } => commands::cmd_entropy_table(&k),
        Command::Timing { sizes, reps } => commands::cmd_timing(&sizes, reps),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::FAILURE
        }
    }
}
