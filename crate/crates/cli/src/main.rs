use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ctrlab_cli::{exit, generate_stream, report, run_experiment, CliError, ExperimentFile, RunOptions};

/// Data-efficiency experiments for streaming CTR models.
///
/// Exit codes: 0 success, 1 runtime failure, 2 invalid config,
/// 3 output exists (use --force), 4 incomplete report input.
/// Failures print a JSON error object on stderr.
#[derive(Parser)]
#[command(name = "ctrlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export the synthetic stream declared by a config document.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Destination file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run the experiment declared by a config document.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the document's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Write plot-ready tables and a text summary for a completed run.
    Report {
        /// Output directory of a completed `run`.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(config: &PathBuf, seed_override: Option<u64>) -> Result<ExperimentFile, CliError> {
    let mut exp = ExperimentFile::load(config)?;
    if let Some(seed) = seed_override {
        exp.set_seed(seed);
    }
    Ok(exp)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen {
            config,
            out,
            force,
            seed_override,
        } => {
            let exp = load(&config, seed_override)?;
            let stats = generate_stream(&exp, &out, force)?;
            println!(
                "wrote {} examples to {}; positive rate {:.6} (target {:.6})",
                stats.examples,
                out.display(),
                stats.positive_rate(),
                exp.trial.stream.base_ctr
            );
        }
        Command::Run {
            config,
            out,
            force,
            parallelism,
            seed_override,
        } => {
            let exp = load(&config, seed_override)?;
            let out = out
                .or_else(|| exp.output_dir.clone())
                .ok_or_else(|| CliError::config("output_dir", "no output directory; pass --out"))?;
            run_experiment(&exp, &out, &RunOptions { force, parallelism })?;
            println!("wrote {}", out.display());
        }
        Command::Report { out } => {
            let r = report(&out)?;
            print!("{}", r.text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
