use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use heatlift::{resolve, run, Experiment, Overrides, RunResult};

/// Experiments on spatial rough-path lifts of the stochastic heat equation.
#[derive(Debug, Parser)]
#[command(name = "heatlift", version)]
struct Cli {
    experiment: Experiment,
    /// JSON config, or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one config entry, e.g. `--set converge.params.beta=0.1`.
    #[arg(long = "set", value_name = "PATH=JSON")]
    sets: Vec<String>,
}

fn execute(cli: Cli) -> RunResult<()> {
    let overrides = Overrides {
        sets: cli.sets,
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out,
    };
    let cfg = resolve(cli.experiment, cli.config.as_deref(), &overrides)?;
    let record = run(&cfg)?;
    let summary =
        std::fs::read_to_string(record.output_dir.join("summary.txt")).unwrap_or_default();
    print!("{summary}");
    println!(
        "wrote {} files to {} (config hash {})",
        record.manifest.outputs.len() + 1,
        record.output_dir.display(),
        record.manifest.config_hash
    );
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
