//! Sampler instrumentation and its CSV / JSON export.
//!
//! The CSV has one row per (event, chunk): `step_index, timestep, stage,
//! iteration, chunk_id`, the chunk's mean frame as `m0..m{D-1}`, and the
//! noise fingerprint as 16 hex digits (empty when the event has none).
//! Floats use 17 significant digits so values parse back bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chunking::ChunkLayout;
use crate::conditioning::Scenario;
use crate::samplers::SamplerConfig;
use crate::tensor::FrameSequence;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    /// Per-chunk clean estimates before fusion.
    Predict = 1,
    /// One refinement iteration on the fused estimate.
    Refine = 2,
    /// Reversion of the refined estimate to the next timestep.
    Revert = 3,
}

impl Stage {
    pub fn id(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEvent {
    /// Position on the sampling grid (or iteration index for samplers
    /// without a grid).
    pub step_index: usize,
    pub timestep: usize,
    pub stage: Stage,
    pub iteration: usize,
    /// Timestep handed to the denoiser, when the event queried it.
    pub prediction_timestep: Option<usize>,
    pub noise_fingerprint: Option<u64>,
    /// Chunks whose predictions fed this event.
    pub active_chunks: Vec<usize>,
    /// Clean-sample snapshot of every chunk, in chunk order.
    pub chunks: Vec<FrameSequence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerRunTrace {
    pub sampler: String,
    pub config: SamplerConfig,
    pub layout: ChunkLayout,
    pub grid: Vec<usize>,
    pub scenario: Option<Scenario>,
    pub events: Vec<StageEvent>,
}

/// Sidecar written next to the CSV.
#[derive(Serialize)]
struct Sidecar<'a> {
    sampler: &'a str,
    config: &'a SamplerConfig,
    layout: &'a ChunkLayout,
    grid: &'a [usize],
    scenario: &'a Option<Scenario>,
    event_count: usize,
}

impl SamplerRunTrace {
    pub fn new(sampler: &str, config: SamplerConfig, layout: ChunkLayout, grid: Vec<usize>) -> Self {
        Self {
            sampler: sampler.to_string(),
            config,
            layout,
            grid,
            scenario: None,
            events: Vec::new(),
        }
    }

    pub fn with_scenario(mut self, scenario: Option<Scenario>) -> Self {
        self.scenario = scenario;
        self
    }

    pub fn push(&mut self, event: StageEvent) {
        self.events.push(event);
    }

    pub fn stage_events(&self, stage: Stage) -> impl Iterator<Item = &StageEvent> {
        self.events.iter().filter(move |e| e.stage == stage)
    }

    /// The per-chunk clean estimates recorded at timestep `t`.
    pub fn predictions_at(&self, t: usize) -> Option<&StageEvent> {
        self.stage_events(Stage::Predict).find(|e| e.timestep == t)
    }

    pub fn to_csv(&self) -> String {
        let dim = self
            .events
            .iter()
            .find_map(|e| e.chunks.first().map(FrameSequence::dim))
            .unwrap_or(0);
        let mut out = String::from("step_index,timestep,stage,iteration,chunk_id");
        for c in 0..dim {
            let _ = write!(out, ",m{c}");
        }
        out.push_str(",noise_fingerprint\n");
        for e in &self.events {
            let fp = e
                .noise_fingerprint
                .map(|f| format!("{f:016x}"))
                .unwrap_or_default();
            for (chunk_id, chunk) in e.chunks.iter().enumerate() {
                let _ = write!(
                    out,
                    "{},{},{},{},{}",
                    e.step_index,
                    e.timestep,
                    e.stage.id(),
                    e.iteration,
                    chunk_id
                );
                for v in chunk.mean_frame() {
                    let _ = write!(out, ",{v:.16e}");
                }
                let _ = writeln!(out, ",{fp}");
            }
        }
        out
    }

    pub fn sidecar_json(&self) -> Result<String> {
        let sidecar = Sidecar {
            sampler: &self.sampler,
            config: &self.config,
            layout: &self.layout,
            grid: &self.grid,
            scenario: &self.scenario,
            event_count: self.events.len(),
        };
        let mut text = serde_json::to_string_pretty(&sidecar)?;
        text.push('\n');
        Ok(text)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the CSV to `path` and the JSON sidecar to `path` with a `.json`
/// extension. Returns the sidecar path.
pub fn export_trace(trace: &SamplerRunTrace, path: &Path) -> Result<PathBuf> {
    write_file(path, &trace.to_csv())?;
    let sidecar = path.with_extension("json");
    write_file(&sidecar, &trace.sidecar_json()?)?;
    Ok(sidecar)
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step_index: usize,
    pub timestep: usize,
    pub stage: u8,
    pub iteration: usize,
    pub chunk_id: usize,
    pub mean: Vec<f64>,
    pub noise_fingerprint: Option<u64>,
}

/// Parses CSV text produced by [`SamplerRunTrace::to_csv`].
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let bad = |line: usize, what: &str| Error::invalid("trace csv", format!("line {line}: {what}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "missing header"))?;
    let columns = header.split(',').count();
    if columns < 6 {
        return Err(bad(1, "too few columns"));
    }
    let dim = columns - 6;
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let n = k + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(bad(n, "column count"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(n, "integer field"));
        let mean = fields[5..5 + dim]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad(n, "float field")))
            .collect::<Result<Vec<_>>>()?;
        let fp = match fields[columns - 1] {
            "" => None,
            s => Some(u64::from_str_radix(s, 16).map_err(|_| bad(n, "fingerprint"))?),
        };
        rows.push(TraceRow {
            step_index: int(fields[0])?,
            timestep: int(fields[1])?,
            stage: fields[2].parse().map_err(|_| bad(n, "stage"))?,
            iteration: int(fields[3])?,
            chunk_id: int(fields[4])?,
            mean,
            noise_fingerprint: fp,
        });
    }
    Ok(rows)
}
