//! Config-driven runner for the samplers in `syncos-core`.

pub mod config;
pub mod error;
pub mod runner;

pub use config::{RunConfig, SamplerKind};
pub use error::CliError;
pub use runner::{compare, execute, run_to_dir, RunMetrics};

/// Worker threads requested through `SYNCOS_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("SYNCOS_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::config(
                "SYNCOS_THREADS",
                "positive integer",
                format!("got `{v}`"),
            )),
        },
    }
}
