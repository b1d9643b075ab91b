//! `roughwave`: run inequality checks from a JSON config.
//!
//! Exit codes: 0 every selected check passed, 1 some check failed, 2 the
//! config (or command line) is invalid, 3 a computation or file write
//! failed.

mod config;
mod describe;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "roughwave", version, about = "Numerical checks of rough singular integral bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks selected in a config and write their reports.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output directory; overrides `out` in the config.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, value_name = "K", env = "ROUGHWAVE_JOBS")]
        jobs: Option<usize>,
        /// Replaces the corpus seed (and the decay bank seed).
        #[arg(long, value_name = "S")]
        seed: Option<u64>,
        #[arg(long)]
        no_plots: bool,
    },
    /// List the checks, their anchors and default parameters.
    Describe,
    /// Re-render the plots of an existing output directory.
    Report {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

const DEFAULT_OUT: &str = "roughwave-out";

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Describe => {
            print!("{}", describe::describe());
            ExitCode::SUCCESS
        }
        Command::Report { out } => match run::rerender(&out) {
            Ok(n) => {
                println!("re-rendered {n} plots in {}", out.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(3)
            }
        },
        Command::Run {
            config,
            out,
            jobs,
            seed,
            no_plots,
        } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if jobs == Some(0) {
                eprintln!("error: --jobs must be positive");
                return ExitCode::from(2);
            }
            if let Some(k) = jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global()
                    .expect("global pool is built once");
            }
            let out_dir = out
                .or_else(|| cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            let plots = cfg.plots && !no_plots;
            match run::run(&cfg, &config, out_dir, seed, plots, rayon::current_num_threads()) {
                Ok(outcome) => {
                    for e in &outcome.summary.reports {
                        println!(
                            "{} {:<40} max/median {:.3}",
                            if e.pass { "pass" } else { "FAIL" },
                            e.file,
                            e.max / e.median
                        );
                    }
                    println!("reports in {}", outcome.out_dir.display());
                    if outcome.summary.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
            }
        }
    }
}
