use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use abo_core::harness::experiment::{seed_offset_from_env, ExperimentError};
use abo_core::harness::summary::{method_table, write_csvs};
use abo_core::harness::{exit, run_experiment, run_suite, summarize, ConfigError, ExperimentConfig, RunOptions, Suite, VerifyOptions};

#[derive(Parser)]
#[command(name = "abo", version, about = "Bayesian optimization with similarity-score surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method x seed pair of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
        /// Worker threads (default: one per core).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Write summary.csv and curves.csv for an output directory.
    Summarize {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Run built-in correctness checks.
    Verify {
        /// gp-equivalence, geometric-view, empirical-projection, gradients, fixed-point or all.
        #[arg(long, default_value = "all")]
        suite: Suite,
        /// Scale the surrogate variance by 1.01 before comparing (checks that the suite can fail).
        #[arg(long, hide = true)]
        perturb_variance: bool,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, force, jobs } => run(config, force, jobs),
        Command::Summarize { dir } => {
            let table = match summarize(&dir) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return code(exit::FAILED);
                }
            };
            if let Err(e) = write_csvs(&dir, &table) {
                eprintln!("error: {e}");
                return code(exit::FAILED);
            }
            print!("{}", method_table(&table));
            for p in &table.problems {
                eprintln!("skipped: {p}");
            }
            code(if table.problems.is_empty() { exit::OK } else { exit::FAILED })
        }
        Command::Verify { suite, perturb_variance } => {
            let opts = VerifyOptions {
                variance_scale: if perturb_variance { 1.01 } else { 1.0 },
            };
            match run_suite(suite, &opts, &mut std::io::stdout().lock()) {
                Ok(true) => code(exit::OK),
                Ok(false) => code(exit::FAILED),
                Err(e) => {
                    eprintln!("error: {e}");
                    code(exit::FAILED)
                }
            }
        }
    }
}

fn run(config: PathBuf, force: bool, jobs: Option<usize>) -> ExitCode {
    let cfg = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return code(match e {
                ConfigError::Parse(_) => exit::PARSE,
                ConfigError::Invalid(_) => exit::INVALID,
            });
        }
    };
    let seed_offset = match seed_offset_from_env() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return code(exit::INVALID);
        }
    };
    if jobs == Some(0) {
        eprintln!("error: --jobs must be at least 1");
        return code(exit::INVALID);
    }
    let opts = RunOptions { force, jobs, seed_offset };
    match run_experiment(&cfg, &opts) {
        Ok(manifest) => {
            for r in &manifest.runs {
                match &r.aborted {
                    Some(why) => eprintln!("{} seed {}: aborted: {why}", r.label, r.seed),
                    None => {
                        let best = r.final_best.map_or("none".to_string(), |b| format!("{b:.6}"));
                        println!("{} seed {}: best {best} after {} evaluations", r.label, r.seed, r.evaluations);
                    }
                }
            }
            code(if manifest.complete { exit::OK } else { exit::ABORTED })
        }
        Err(e @ ExperimentError::Refused(_)) => {
            eprintln!("error: {e}");
            code(exit::REFUSED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            code(exit::FAILED)
        }
    }
}
