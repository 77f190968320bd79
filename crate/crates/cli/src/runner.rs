//! Builds the scenario and denoiser for a config, runs a sampler and writes
//! its artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use syncos_core::chunking::{make_layout, take_chunks, ChunkLayout};
use syncos_core::conditioning::{build_scenario, chunk_conditions};
use syncos_core::metrics::{divergence_profile, local_fidelity_error, spread_of_chunks};
use syncos_core::samplers::{
    sample_csd_only, sample_gen_l_video, sample_per_chunk_ddim, syncos_sample_into, SamplingSetup,
};
use syncos_core::trace::export_trace;
use syncos_core::{AnalyticDenoiser, FrameSequence, SamplerRunTrace, Scenario};

use crate::config::{RunConfig, SamplerKind};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub sampler: String,
    pub num_chunks: usize,
    pub terminal_spread_shared: f64,
    pub terminal_spread_local: f64,
    pub local_fidelity_error: Vec<f64>,
    pub mean_local_fidelity_error: f64,
    /// `(t, shared spread, local spread)` of the per-chunk clean estimates.
    pub divergence_profile: Vec<(usize, f64, f64)>,
}

pub struct RunOutput {
    pub sample: FrameSequence,
    pub trace: SamplerRunTrace,
    pub metrics: RunMetrics,
    pub seconds: f64,
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(syncos_core::Error::from)?;
    text.push('\n');
    Ok(text)
}

fn metrics(
    kind: SamplerKind,
    sample: &FrameSequence,
    trace: &SamplerRunTrace,
    layout: &ChunkLayout,
    scenario: &Scenario,
) -> Result<RunMetrics, CliError> {
    let chunks = take_chunks(sample, layout)?;
    let fidelity = local_fidelity_error(sample, layout, scenario)?;
    let shared = divergence_profile(trace, &scenario.shared_coords);
    let local = divergence_profile(trace, &scenario.local_coords);
    Ok(RunMetrics {
        sampler: kind.name().to_string(),
        num_chunks: layout.num_chunks(),
        terminal_spread_shared: spread_of_chunks(&chunks, &scenario.shared_coords),
        terminal_spread_local: spread_of_chunks(&chunks, &scenario.local_coords),
        mean_local_fidelity_error: fidelity.iter().sum::<f64>() / fidelity.len() as f64,
        local_fidelity_error: fidelity,
        divergence_profile: shared
            .into_iter()
            .zip(local)
            .map(|((t, s), (_, l))| (t, s, l))
            .collect(),
    })
}

/// Runs `config` in memory. `partial` receives whatever trace exists when a
/// sampler fails.
pub fn execute(config: &RunConfig, partial: &mut Option<SamplerRunTrace>) -> Result<RunOutput, CliError> {
    config.validate()?;
    let schedule = config.noise_schedule()?;
    let sc = &config.scenario;
    let layout = make_layout(sc.frames, sc.chunk_len, config.sampling.stride)?;
    let scenario = build_scenario(
        layout.num_chunks(),
        sc.dim,
        sc.shared_fraction,
        sc.seed.unwrap_or(config.seed),
    )
    .map_err(|e| CliError::config("scenario", "constructible scenario", e.to_string()))?;
    let denoiser = AnalyticDenoiser::new(
        scenario.world(sc.sigma0)?,
        schedule.clone(),
        config.sampling.objective,
    );
    let conditions = chunk_conditions(&scenario);
    let setup = SamplingSetup {
        denoiser: &denoiser,
        schedule: &schedule,
        layout: &layout,
        conditions: &conditions,
        dim: sc.dim,
        config: &config.sampling,
    };

    let start = Instant::now();
    let kind = config.sampler;
    let (sample, trace) = match kind {
        SamplerKind::Syncos => {
            let grid = syncos_core::TimestepGrid::uniform(&schedule, config.sampling.num_steps)?;
            let trace = partial.insert(SamplerRunTrace::new(
                kind.name(),
                config.sampling.clone(),
                layout.clone(),
                grid.steps().to_vec(),
            ));
            let x = syncos_sample_into(&setup, trace)?;
            (x, partial.take().expect("trace present"))
        }
        SamplerKind::GenLVideo => sample_gen_l_video(&setup)?,
        SamplerKind::CsdOnly => sample_csd_only(&setup, config.sampling.csd_iters)?,
        SamplerKind::PerChunkDdim => {
            let x = sample_per_chunk_ddim(&setup)?;
            let trace = SamplerRunTrace::new(kind.name(), config.sampling.clone(), layout.clone(), Vec::new());
            (x, trace)
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let trace = trace.with_scenario(Some(scenario.clone()));
    let metrics = metrics(kind, &sample, &trace, &layout, &scenario)?;
    Ok(RunOutput {
        sample,
        trace,
        metrics,
        seconds,
    })
}

/// Runs one config and writes `config.resolved.json`, `trace.csv`,
/// `trace.json`, `metrics.json` and `timing.json` into `out`. The echoed
/// config leaves out the output location so artifacts do not depend on it.
pub fn run_to_dir(config: &RunConfig, out: &Path) -> Result<RunMetrics, CliError> {
    config.validate()?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let echoed = RunConfig { output: None, ..config.clone() };
    write(&out.join("config.resolved.json"), &pretty(&echoed)?)?;
    let mut partial = None;
    let result = execute(config, &mut partial);
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            if let Some(trace) = partial {
                export_trace(&trace, &out.join("trace.csv"))?;
            }
            return Err(e);
        }
    };
    export_trace(&output.trace, &out.join("trace.csv"))?;
    write(&out.join("metrics.json"), &pretty(&output.metrics)?)?;
    write(
        &out.join("timing.json"),
        &pretty(&json!({ "sampler": config.sampler.name(), "wall_clock_seconds": output.seconds }))?,
    )?;
    Ok(output.metrics)
}

/// Runs every sampler on the same scenario and seed. Sampler names are
/// checked before anything runs.
pub fn compare(config: &RunConfig, samplers: &[String], out: &Path) -> Result<Vec<RunMetrics>, CliError> {
    if samplers.len() < 2 {
        return Err(CliError::config("samplers", "at least two samplers", format!("got {}", samplers.len())));
    }
    let kinds = samplers
        .iter()
        .map(|s| SamplerKind::parse(s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    for &kind in &kinds {
        RunConfig { sampler: kind, ..config.clone() }.validate()?;
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut rows = Vec::with_capacity(kinds.len());
    for (idx, &kind) in kinds.iter().enumerate() {
        let cfg = RunConfig { sampler: kind, ..config.clone() };
        rows.push(run_to_dir(&cfg, &run_dir(out, idx, kind))?);
    }
    write(&out.join("summary.json"), &pretty(&rows)?)?;
    write(&out.join("summary.csv"), &summary_csv(&rows))?;
    Ok(rows)
}

pub fn run_dir(out: &Path, idx: usize, kind: SamplerKind) -> PathBuf {
    out.join(format!("{idx}_{}", kind.name()))
}

fn summary_csv(rows: &[RunMetrics]) -> String {
    let mut out = String::from(
        "sampler,terminal_spread_shared,terminal_spread_local,mean_local_fidelity_error,local_fidelity_error\n",
    );
    for r in rows {
        let fid: Vec<String> = r.local_fidelity_error.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{}\n",
            r.sampler,
            r.terminal_spread_shared,
            r.terminal_spread_local,
            r.mean_local_fidelity_error,
            fid.join(";")
        ));
    }
    out
}
