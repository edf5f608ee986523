use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use infoseek::config::{parse_config, ExperimentConfig};
use infoseek::output::{arm_dir, run_batch};
use infoseek::scenarios;

#[derive(Parser)]
#[command(name = "infoseek", version, about = "Information-based multi-robot source seeking")]
struct Cli {
    /// Print the built-in scenario suite and exit.
    #[arg(long)]
    list_scenarios: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every arm of a config's scenario and write logs.
    Run {
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Print the built-in scenario suite.
    ListScenarios,
    /// Parse and validate a config, printing the resolved arms.
    Validate { config: PathBuf },
}

fn load(path: &Path) -> infoseek::Result<Vec<ExperimentConfig>> {
    parse_config(path)
}

fn run(cli: Cli) -> infoseek::Result<()> {
    if cli.list_scenarios {
        print!("{}", scenarios::listing());
        return Ok(());
    }
    match cli.command {
        None => {
            eprintln!("no command given; see --help");
            Ok(())
        }
        Some(Command::ListScenarios) => {
            print!("{}", scenarios::listing());
            Ok(())
        }
        Some(Command::Validate { config }) => {
            for cfg in load(&config)? {
                println!("ok: {} / {} ({}, {} sensors, {} trials)", cfg.scenario, cfg.arm, cfg.mode.label(), cfg.n_sensors, cfg.trials);
            }
            Ok(())
        }
        Some(Command::Run { config, trials, seed, out, parallel }) => {
            for mut cfg in load(&config)? {
                if let Some(t) = trials {
                    cfg.trials = t;
                }
                if let Some(s) = seed {
                    cfg.base_seed = s;
                }
                cfg.validate()?;
                let root = out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
                let dir = arm_dir(&root, &cfg);
                let batch = run_batch(&cfg, Some(&dir), parallel)?;
                let s = &batch.summary;
                println!(
                    "{} / {}: success {:.2}, perfect finish {:.2}, goal {:.2}, final median dist {:.3}, final est err {:.3} -> {}",
                    s.scenario,
                    s.arm,
                    s.success_rate,
                    s.perfect_finish_rate,
                    s.goal_rate,
                    s.mean_final_median_dist,
                    s.mean_final_est_err,
                    dir.display()
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
