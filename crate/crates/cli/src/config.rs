//! Run configuration: one JSON file with sampler, scenario and schedule
//! sections. Everything is validated up front, before any sampling.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use syncos_core::chunking::make_layout;
use syncos_core::{NoiseSchedule, SamplerConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Syncos,
    GenLVideo,
    CsdOnly,
    PerChunkDdim,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [
        SamplerKind::Syncos,
        SamplerKind::GenLVideo,
        SamplerKind::CsdOnly,
        SamplerKind::PerChunkDdim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Syncos => "syncos",
            SamplerKind::GenLVideo => "gen_l_video",
            SamplerKind::CsdOnly => "csd_only",
            SamplerKind::PerChunkDdim => "per_chunk_ddim",
        }
    }

    pub fn parse(name: &str) -> Result<Self, CliError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| {
                CliError::config(
                    "samplers",
                    "sampler name is one of syncos, gen_l_video, csd_only, per_chunk_ddim",
                    format!("unknown sampler `{name}`"),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// Total frames `F`.
    pub frames: usize,
    /// Chunk length `f`.
    pub chunk_len: usize,
    /// Coordinates per frame `D`.
    pub dim: usize,
    /// Must equal the number of chunks when given.
    pub num_local_targets: Option<usize>,
    pub shared_fraction: f64,
    pub sigma0: f64,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            frames: 16,
            chunk_len: 8,
            dim: 8,
            num_local_targets: None,
            shared_fraction: 0.5,
            sigma0: 0.25,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub train_steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            train_steps: 1000,
            beta_min: 1e-4,
            beta_max: 2e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sampler: SamplerKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub sampling: SamplerConfig,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Applies the run seed everywhere it is implied, so the resolved config
    /// alone regenerates every artifact.
    pub fn resolve(mut self) -> Self {
        self.sampling.seed = self.seed;
        if self.scenario.seed.is_none() {
            self.scenario.seed = Some(self.seed);
        }
        self
    }

    pub fn num_chunks(&self) -> Result<usize, CliError> {
        let s = &self.scenario;
        make_layout(s.frames, s.chunk_len, self.sampling.stride)
            .map(|l| l.num_chunks())
            .map_err(|e| CliError::config("scenario", "valid layout", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.scenario;
        let c = &self.sampling;
        if s.frames < 1 {
            return Err(CliError::config("scenario.frames", "F >= 1", format!("got {}", s.frames)));
        }
        if s.chunk_len < 1 || s.chunk_len > s.frames {
            return Err(CliError::config(
                "scenario.chunk_len",
                "1 <= f <= F",
                format!("f = {}, F = {}", s.chunk_len, s.frames),
            ));
        }
        if c.stride < 1 || c.stride > s.chunk_len {
            return Err(CliError::config(
                "sampling.stride",
                "1 <= s <= f",
                format!("s = {}, f = {}", c.stride, s.chunk_len),
            ));
        }
        if s.dim < 2 {
            return Err(CliError::config("scenario.dim", "D >= 2", format!("got {}", s.dim)));
        }
        if !(s.shared_fraction > 0.0 && s.shared_fraction < 1.0) {
            return Err(CliError::config(
                "scenario.shared_fraction",
                "0 < shared_fraction < 1",
                format!("got {}", s.shared_fraction),
            ));
        }
        let shared = (s.dim as f64 * s.shared_fraction).round() as usize;
        if shared == 0 || shared >= s.dim {
            return Err(CliError::config(
                "scenario.shared_fraction",
                "round(D * shared_fraction) in [1, D - 1]",
                format!("{shared} shared coordinates out of {}", s.dim),
            ));
        }
        if !(s.sigma0 >= 0.0 && s.sigma0.is_finite()) {
            return Err(CliError::config("scenario.sigma0", "sigma0 >= 0", format!("got {}", s.sigma0)));
        }
        let n = self.num_chunks()?;
        if let Some(k) = s.num_local_targets {
            if k != n {
                return Err(CliError::config(
                    "scenario.num_local_targets",
                    "num_local_targets = N",
                    format!("{k} local targets for {n} chunks"),
                ));
            }
        }
        if let Some(b) = c.minibatch_b {
            if b < 1 || b > n {
                return Err(CliError::config(
                    "sampling.minibatch_b",
                    "1 <= minibatch_B <= N",
                    format!("B = {b}, N = {n}"),
                ));
            }
        }
        let schedule = self.noise_schedule()?;
        c.validate(&schedule).map_err(|e| match &e {
            syncos_core::Error::InvalidArgument { name, reason } => {
                CliError::config_owned(format!("sampling.{name}"), reason.clone(), e.to_string())
            }
            other => CliError::config("sampling", "valid sampler config", other.to_string()),
        })
    }

    pub fn noise_schedule(&self) -> Result<NoiseSchedule, CliError> {
        let s = &self.schedule;
        NoiseSchedule::linear(s.train_steps, s.beta_min, s.beta_max).map_err(|e| {
            CliError::config(
                "schedule",
                "T >= 1 and 0 < beta_min <= beta_max < 1",
                e.to_string(),
            )
        })
    }
}
