use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use co4_core::harness::{parse_config, run_grid, verify, ExperimentConfig, Suite, VerifyOptions};
use co4_core::sim::overload_ratio;

/// Coherence-gated attention experiments.
#[derive(Parser)]
#[command(name = "co4", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the paired Baseline/Co4 overload grid.
    Simulate {
        /// Experiment config (JSON). Defaults to the shipped, tuned config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory. Falls back to $CO4_OUT_DIR, then the config's
        /// `output_dir`, then `co4-out`.
        #[arg(long, env = "CO4_OUT_DIR")]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses every core. Results do not depend on it.
        #[arg(long, default_value_t = 0)]
        parallel: usize,
    },
    /// Run a verification suite: gradcheck, oracle or invariants.
    Verify {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instance count; each suite has its own default.
        #[arg(long)]
        instances: Option<usize>,
        /// Corrupt one precision matrix to check that the suite notices.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Print γ = s_c / s_r and its classification.
    Ratio {
        #[arg(long)]
        sc: f64,
        #[arg(long)]
        sr: f64,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Simulate {
            config,
            out,
            parallel,
        } => {
            let cfg = match config {
                Some(path) => parse_config(&path),
                None => Ok(ExperimentConfig::shipped()),
            };
            let cfg = match cfg {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let out = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("co4-out"));
            match run_grid(&cfg, &out, parallel) {
                Ok(report) => {
                    println!(
                        "{:>6} {:>6} {:>6} {:>16} {:>16} {:>6}",
                        "s_r", "s_c", "gamma", "baseline drift", "co4 drift", "wins"
                    );
                    for c in &report.cells {
                        println!(
                            "{:>6} {:>6} {:>6.2} {:>8.3} ± {:<5.3} {:>8.3} ± {:<5.3} {:>3}/{}",
                            c.s_r,
                            c.s_c,
                            c.gamma,
                            c.baseline.mean_rms_drift,
                            c.baseline.std_rms_drift,
                            c.co4.mean_rms_drift,
                            c.co4.std_rms_drift,
                            c.co4_wins,
                            c.seeds
                        );
                    }
                    println!(
                        "report written to {}",
                        out.join(co4_core::harness::REPORT_FILE).display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Verify {
            suite,
            seed,
            instances,
            inject_fault,
        } => {
            let report = verify(
                suite,
                &VerifyOptions {
                    base_seed: seed,
                    instances,
                    inject_fault,
                },
            );
            print!("{report}");
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Ratio { sc, sr } => match overload_ratio(sc, sr) {
            Ok((gamma, class)) => {
                println!("gamma = {gamma} ({class:?})");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
