use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use smoothtrim::mechanism::MechanismConfig;
use smoothtrim::sensitivity::smooth_sensitivity_input_trunc;
use smoothtrim::{CostOptions, SortedDataset, TrimSpec, TruncationMode};
use smoothtrim_harness::config::{self, Config};
use smoothtrim_harness::data::read_values;
use smoothtrim_harness::experiment::run_experiment;
use smoothtrim_harness::output::emit_csv;
use smoothtrim_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "smoothtrim", version, about = "Private trimmed means with smooth sensitivity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write its CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use 10^6 replicates regardless of the config.
        #[arg(long)]
        paper_scale: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the smooth sensitivity of the trimmed mean as JSON.
    Sens {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        t: f64,
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, allow_negative_numbers = true)]
        b: f64,
    },
    /// Release one private trimmed mean and print the record as JSON.
    Release {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, paper_scale, seed, threads } => {
            let mut spec = config::experiment_spec(Config::load(&config)?)?;
            if paper_scale {
                spec.reps = 1_000_000;
            }
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let result = match threads {
                Some(k) => rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .map_err(|e| HarnessError::Spec(format!("thread pool: {e}")))?
                    .install(|| run_experiment(&spec))?,
                None => run_experiment(&spec)?,
            };
            emit_csv(&result, &out)
        }
        Command::Sens { data, m, t, a, b } => {
            let x = SortedDataset::new(read_values(&data)?)?.truncated(a, b);
            let trim = TrimSpec::new(m, a, b, TruncationMode::Input)?;
            let report = smooth_sensitivity_input_trunc(&x, &trim, t)?;
            print_json(&report)
        }
        Command::Release { config, data } => {
            let r = config::release_spec(Config::load(&config)?)?;
            let x = read_values(&data)?;
            let trim = TrimSpec::new(r.m, r.a, r.b, r.truncation)?;
            let opts = CostOptions { delta: r.delta, omega: r.omega };
            let mech = MechanismConfig::calibrated(r.noise()?, trim, r.t, r.epsilon, opts)?.with_clamped_release(r.clamp);
            print_json(&mech.release(&x, r.seed)?)
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Spec(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
