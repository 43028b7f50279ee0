use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ebk_cli::error::{EXIT_INTERNAL, EXIT_OK};
use ebk_cli::{run, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "ebk", version, about = "Bohr-Sommerfeld spectra with finite-difference cross-checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the configured pipeline and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        verbose: bool,
    },
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Validate { config } => {
            let c = RunConfig::load(&config)?;
            let plan = c.stage_plan();
            println!("config ok: stages {:?}, auto-inserted {:?}", plan.stages, plan.auto_inserted);
            Ok(EXIT_OK)
        }
        Command::Run {
            config,
            output_dir,
            threads,
            verbose,
        } => {
            env_logger::Builder::new()
                .filter_level(if verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
                .init();
            let c = RunConfig::load(&config)?;
            let out = output_dir.unwrap_or_else(|| c.output_dir.clone());
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(t) = threads {
                pool = pool.num_threads(t);
            }
            let pool = pool
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            let manifest = pool.install(|| run(&c, &out))?;
            for check in &manifest.checks {
                println!("{} {}: {}", if check.pass { "PASS" } else { "FAIL" }, check.name, check.detail);
            }
            for stage in manifest.stages.iter().filter(|s| s.status != "ok") {
                match &stage.error {
                    Some(e) => println!("stage {} {}: {e}", stage.name, stage.status),
                    None => println!("stage {} {}", stage.name, stage.status),
                }
            }
            Ok(manifest.exit_code)
        }
    }
}

fn main() -> ExitCode {
    let code = match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_INTERNAL as u8))
}
