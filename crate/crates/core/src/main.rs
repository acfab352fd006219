use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use meanflow::runner::{exit, exit_code, run_scenario, ExperimentConfig, Scenario};

#[derive(Parser)]
#[command(name = "meanflow", version, about = "Mean fields of Wiener-shifted inviscid flows on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides `seed` in the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and check a config without computing anything.
    Validate { config: PathBuf },
    /// List the available scenarios.
    ListScenarios,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<16} {}", s.name(), s.describe());
            }
            code(exit::SUCCESS)
        }
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                println!("ok: {} (config {})", cfg.scenario.name(), cfg.short_hash());
                code(exit::SUCCESS)
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(exit_code(&e))
            }
        },
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return code(exit_code(&e));
                }
            };
            let cfg = match seed {
                Some(s) => cfg.with_seed(s),
                None => cfg,
            };
            if let Some(k) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
                    eprintln!("error: thread pool: {e}");
                    return code(exit::CONFIG);
                }
            }
            let dir = out
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", cfg.scenario.name(), cfg.short_hash())));
            match run_scenario(&cfg, Some(&dir)) {
                Ok(outcome) => {
                    for c in outcome.sink.criteria() {
                        println!("{}", c.line());
                    }
                    for n in outcome.sink.notes() {
                        println!("note: {n}");
                    }
                    if let Some(e) = &outcome.failure {
                        eprintln!("error: {e}");
                    }
                    println!("artifacts: {}", dir.display());
                    code(outcome.exit_code())
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    code(exit_code(&e))
                }
            }
        }
    }
}
