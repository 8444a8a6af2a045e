use std::path::PathBuf;
use std::process::ExitCode;

use alsim_cli::{cmd_run, emit_plot_data, load_config, CliError, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alsim", version, about = "Active-learning simulation harness")]
struct Cli {
    /// Log level (error, warn, info, debug); overrides the config file.
    #[arg(long, global = true)]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV outputs.
    Run {
        config: PathBuf,
        /// Output directory (default: config `output_dir`, then $ALSIM_OUTPUT_DIR, then ./alsim-out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Emit gnuplot data and script from an aggregate CSV.
    Plot {
        aggregate: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

fn init_logging(level: Option<&str>) {
    let env = env_logger::Env::default().default_filter_or(level.unwrap_or("info"));
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            jobs,
            trials,
            seed,
        } => {
            let file = load_config(&config)?;
            init_logging(cli.log_level.as_deref().or(file.verbosity.as_deref()));
            if jobs == Some(0) {
                return Err(CliError::Config("--jobs must be at least 1".into()));
            }
            let dir = cmd_run(&file, &RunOptions { out, jobs, trials, seed })?;
            println!("wrote outputs to {}", dir.display());
        }
        Command::Plot { aggregate, out } => {
            init_logging(cli.log_level.as_deref());
            let files = emit_plot_data(&aggregate, &out)?;
            println!(
                "wrote {} and {} ({} schemes)",
                files.data.display(),
                files.script.display(),
                files.schemes.len()
            );
        }
        Command::Validate { config } => {
            init_logging(cli.log_level.as_deref());
            let file = load_config(&config)?;
            let c = &file.experiment;
            println!(
                "ok: {} schemes, {} rounds, {} trials, {} events",
                c.schemes.len(),
                c.rounds,
                c.trials,
                c.events.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("alsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
