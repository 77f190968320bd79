use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use syncos_cli::{compare, run_to_dir, threads_from_env, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "syncos", version, about = "Run chunked diffusion samplers on analytic toy worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampler named in the config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run several samplers on the same scenario and seed.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated sampler names.
        #[arg(long, value_delimiter = ',', required = true)]
        samplers: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> Result<(RunConfig, PathBuf), CliError> {
    let mut config = RunConfig::load(path)?;
    let mut overrides = serde_json::Map::new();
    if let Some(seed) = seed {
        config.seed = seed;
        overrides.insert("seed".into(), json!(seed));
    }
    if let Some(out) = out {
        overrides.insert("output".into(), json!(out));
        config.output = Some(out);
    }
    if !overrides.is_empty() {
        eprintln!("{}", json!({ "overrides": overrides }));
    }
    let config = config.resolve();
    config.validate()?;
    let out = config
        .output
        .clone()
        .ok_or_else(|| CliError::config("output", "output directory given by --out or config", "missing"))?;
    Ok((config, out))
}

fn dispatch(command: Command) -> Result<serde_json::Value, CliError> {
    match command {
        Command::Run { config, out, seed } => {
            let (config, out) = load(&config, out, seed)?;
            println!("{}", serde_json::to_string(&config).map_err(syncos_core::Error::from)?);
            let metrics = run_to_dir(&config, &out)?;
            Ok(json!({ "status": "ok", "metrics": metrics }))
        }
        Command::Compare {
            config,
            samplers,
            out,
            seed,
        } => {
            let (config, out) = load(&config, out, seed)?;
            println!("{}", serde_json::to_string(&config).map_err(syncos_core::Error::from)?);
            let rows = compare(&config, &samplers, &out)?;
            Ok(json!({ "status": "ok", "summary": rows }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = threads_from_env().and_then(|threads| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::config("SYNCOS_THREADS", "buildable thread pool", e.to_string()))?;
        pool.install(|| dispatch(cli.command))
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("{}", e.to_json());
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
