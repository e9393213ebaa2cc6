use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use usal::commands::{self, Options};
use usal::config::Overrides;

/// Uncertainty-sampling active learning experiments.
///
/// Exit status: 0 on success, 1 when a verified bound is violated, 2 on
/// usage, validation or IO errors (reported as one JSON line on stderr).
#[derive(Parser)]
#[command(name = "usal", version)]
struct Cli {
    /// Overrides `data.seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; nothing is written outside it.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run on a single thread.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic train/test LIBSVM files and a metadata sidecar.
    Generate { config: PathBuf },
    /// Train one run per seed and write traces plus a summary.
    Run { config: PathBuf },
    /// Train every (mu, seed) cell and write a sweep table.
    Sweep { config: PathBuf },
}

fn fail(kind: &str, message: &str) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid usage").trim_start_matches("error: ");
            return fail("usage", first);
        }
    };
    if cli.parallelism == Some(0) {
        return fail("usage", "--parallelism must be >= 1");
    }
    let threads = if cli.deterministic {
        1
    } else {
        cli.parallelism
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    };
    let opts = Options { out: cli.out, threads, overrides: Overrides { seed: cli.seed } };
    let result = match &cli.command {
        Command::Generate { config } => commands::generate(config, &opts),
        Command::Run { config } => commands::run(config, &opts),
        Command::Sweep { config } => commands::sweep(config, &opts),
    };
    match result {
        Ok(outcome) => {
            println!("{}", outcome.message);
            if outcome.bound_violation {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail(e.kind(), &e.to_string().replace('\n', " ")),
    }
}
