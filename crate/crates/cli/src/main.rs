use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use supcoupling_cli::{default_output_dir, run, validate, RunConfig, Subcommand, EXIT_IO, EXIT_VALIDATION};

/// Gaussian coupling bounds and Monte Carlo checks for suprema of empirical processes.
#[derive(Debug, Parser)]
#[command(name = "supcoupling", version)]
struct Args {
    /// Subcommand to run; overrides the config's `subcommand`.
    #[arg(value_enum)]
    subcommand: Option<Subcommand>,
    /// JSON run config (a manifest from a previous run also works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn load(args: &Args) -> Result<RunConfig, (i32, String)> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))?;
            validate(&text).map_err(|errs| {
                let msg = errs
                    .iter()
                    .map(|e| format!("{}:{e}", path.display()))
                    .collect::<Vec<_>>()
                    .join("\n");
                (EXIT_VALIDATION, msg)
            })?
        }
        None => match args.subcommand {
            Some(s) => RunConfig::new(s),
            None => return Err((EXIT_VALIDATION, "need a subcommand or --config".into())),
        },
    };
    if let Some(s) = args.subcommand {
        cfg.subcommand = s;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.output {
        cfg.output_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(t) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_IO as u8);
        }
    }
    let cfg = match load(&args) {
        Ok(c) => c,
        Err((code, msg)) => {
            eprintln!("{msg}");
            return ExitCode::from(code as u8);
        }
    };
    let dir = default_output_dir(&cfg);
    match run(&cfg, &dir) {
        Ok(out) => {
            print!("{}", out.summary());
            println!("outputs written to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
