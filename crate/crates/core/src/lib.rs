//! Chunked long-sequence diffusion sampling with synchronized coupling.
//!
//! A long sequence of `F` frames is split into overlapping windows of `f`
//! frames. Each window is denoised under its own condition and the windows
//! are fused back into one sequence. Three samplers ship as baselines
//! (independent per-chunk DDIM, posterior fusion, and loss-fused score
//! distillation) next to the three-stage synchronized sampler in
//! [`samplers::syncos`].
//!
//! Every sampler talks to a [`denoiser::Denoiser`]. The crate ships analytic
//! Gaussian-mixture denoisers whose scores are known in closed form, so every
//! stage can be checked against exact values.

pub mod chunking;
pub mod conditioning;
pub mod denoiser;
pub mod diffusion;
pub mod distill;
mod error;
pub mod metrics;
pub mod samplers;
pub mod tensor;
pub mod trace;

pub use chunking::ChunkLayout;
pub use conditioning::{Scenario, StructuredCondition};
pub use denoiser::{
    AnalyticDenoiser, Denoiser, GaussianMixtureWorld, OracleDenoiser, Prediction, PredictionKind,
};
pub use diffusion::{NoiseSchedule, Objective, TimestepGrid};
pub use error::{Error, Result};
pub use samplers::{Optimizer, SamplerConfig};
pub use tensor::{FrameSequence, NoiseTensor};
pub use trace::{SamplerRunTrace, Stage, StageEvent};
