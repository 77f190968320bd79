//! Chunked samplers: SynCoS and the three baselines it is compared against.
//!
//! Every sampler draws from one `ChaCha8Rng` seeded with `config.seed`, in a
//! fixed order documented on each function. Per-chunk denoiser calls run on
//! the rayon pool and are collected in chunk order, so the thread count never
//! changes a result.

mod baselines;
mod syncos;

pub use baselines::{sample_csd_only, sample_ddim, sample_gen_l_video, sample_per_chunk_ddim};
pub use syncos::{
    syncos_sample, syncos_sample_into, syncos_stage1, syncos_stage2, syncos_stage3, Stage1Output,
    Stage2Output,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chunking::ChunkLayout;
use crate::conditioning::StructuredCondition;
use crate::denoiser::{Denoiser, Prediction};
use crate::diffusion::{NoiseSchedule, Objective, TimestepGrid};
use crate::distill::KernelParams;
use crate::tensor::FrameSequence;
use crate::{Error, Result};

/// Update rule for the refinement step on the clean sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    /// `x <- x - lr * grad`.
    #[default]
    Sgd,
    /// Adam with decoupled weight decay. State resets at each denoising step.
    AdamW {
        beta1: f64,
        beta2: f64,
        eps: f64,
        weight_decay: f64,
    },
}

impl Optimizer {
    pub fn adamw() -> Self {
        Optimizer::AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

pub(crate) struct OptimizerState {
    rule: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: i32,
}

impl OptimizerState {
    pub(crate) fn new(rule: Optimizer, len: usize) -> Self {
        let (m, v) = match rule {
            Optimizer::Sgd => (Vec::new(), Vec::new()),
            Optimizer::AdamW { .. } => (vec![0.0; len], vec![0.0; len]),
        };
        Self { rule, m, v, steps: 0 }
    }

    pub(crate) fn step(&mut self, x: &mut FrameSequence, grad: &FrameSequence, lr: f64) -> Result<()> {
        x.ensure_same_shape(grad)?;
        match self.rule {
            Optimizer::Sgd => {
                for (p, g) in x.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                    *p -= lr * g;
                }
            }
            Optimizer::AdamW {
                beta1,
                beta2,
                eps,
                weight_decay,
            } => {
                self.steps += 1;
                let c1 = 1.0 - beta1.powi(self.steps);
                let c2 = 1.0 - beta2.powi(self.steps);
                let params = x.as_mut_slice().iter_mut();
                for (((p, g), m), v) in params
                    .zip(grad.as_slice())
                    .zip(&mut self.m)
                    .zip(&mut self.v)
                {
                    *p -= lr * weight_decay * *p;
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("refined sample"));
        }
        Ok(())
    }
}

fn default_num_steps() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "default_num_steps")]
    pub num_steps: usize,
    pub eta: f64,
    /// Classifier-free guidance scale.
    pub gamma: f64,
    /// Refinement runs only at timesteps strictly above this.
    pub t_min: usize,
    /// Refinement iterations per denoising step.
    pub iters: usize,
    pub lr: f64,
    /// Chunks per refinement iteration; `None` means `min(N, 4)`.
    pub minibatch_b: Option<usize>,
    /// Stride used to build the layout. The samplers themselves follow the
    /// layout they are given.
    pub stride: usize,
    pub seed: u64,
    pub objective: Objective,
    pub optimizer: Optimizer,
    /// Use the guided prediction inside the refinement residual.
    pub guide_refinement: bool,
    pub kernel: KernelParams,
    /// Distillation weight `w`.
    pub distill_weight: f64,
    /// Inclusive timestep range the CSD-only sampler draws from.
    pub csd_t_range: [usize; 2],
    /// Iterations of the CSD-only sampler.
    pub csd_iters: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            num_steps: default_num_steps(),
            eta: 0.0,
            gamma: 6.0,
            t_min: 850,
            iters: 20,
            lr: 0.75,
            minibatch_b: None,
            stride: 4,
            seed: 0,
            objective: Objective::Epsilon,
            optimizer: Optimizer::Sgd,
            guide_refinement: true,
            kernel: KernelParams::MedianHeuristic,
            distill_weight: 1.0,
            csd_t_range: [20, 980],
            csd_iters: 1000,
        }
    }
}

impl SamplerConfig {
    /// Resolved minibatch size for `n` chunks.
    pub fn minibatch_for(&self, n: usize) -> usize {
        self.minibatch_b.unwrap_or(n.min(4))
    }

    /// Checks the invariants that do not depend on a layout.
    pub fn validate(&self, schedule: &NoiseSchedule) -> Result<()> {
        let big_t = schedule.train_steps();
        if self.num_steps < 1 || self.num_steps > big_t {
            return Err(Error::invalid(
                "num_steps",
                format!("must lie in [1, {big_t}], got {}", self.num_steps),
            ));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid("eta", format!("must lie in [0, 1], got {}", self.eta)));
        }
        if !self.gamma.is_finite() {
            return Err(Error::invalid("gamma", "must be finite"));
        }
        if self.t_min > big_t {
            return Err(Error::invalid(
                "t_min",
                format!("must lie in [0, {big_t}], got {}", self.t_min),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("lr", format!("must be > 0, got {}", self.lr)));
        }
        if self.minibatch_b == Some(0) {
            return Err(Error::invalid("minibatch_b", "must be >= 1"));
        }
        if !(self.distill_weight.is_finite()) {
            return Err(Error::invalid("distill_weight", "must be finite"));
        }
        if let KernelParams::Fixed(h) = self.kernel {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid("kernel", format!("bandwidth must be > 0, got {h}")));
            }
        }
        let [lo, hi] = self.csd_t_range;
        if lo < 1 || lo > hi || hi > big_t {
            return Err(Error::invalid(
                "csd_t_range",
                format!("need 1 <= lo <= hi <= {big_t}, got [{lo}, {hi}]"),
            ));
        }
        if let Optimizer::AdamW {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.optimizer
        {
            let unit = 0.0..1.0;
            if !unit.contains(&beta1) || !unit.contains(&beta2) || !(eps > 0.0) || !(weight_decay >= 0.0) {
                return Err(Error::invalid("optimizer", "adamw needs betas in [0, 1), eps > 0, weight_decay >= 0"));
            }
        }
        Ok(())
    }
}

/// Everything a sampler needs besides its random stream.
#[derive(Clone, Copy)]
pub struct SamplingSetup<'a> {
    pub denoiser: &'a dyn Denoiser,
    pub schedule: &'a NoiseSchedule,
    pub layout: &'a ChunkLayout,
    /// One condition per chunk, in chunk order.
    pub conditions: &'a [StructuredCondition],
    /// Latent coordinates per frame.
    pub dim: usize,
    pub config: &'a SamplerConfig,
}

impl<'a> SamplingSetup<'a> {
    pub fn validate(&self) -> Result<()> {
        self.config.validate(self.schedule)?;
        let n = self.layout.num_chunks();
        if self.conditions.len() != n {
            return Err(Error::invalid(
                "conditions",
                format!("{} conditions for {n} chunks", self.conditions.len()),
            ));
        }
        if self.dim < 1 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        let b = self.config.minibatch_for(n);
        if b < 1 || b > n {
            return Err(Error::invalid(
                "minibatch_b",
                format!("must lie in [1, {n}], got {b}"),
            ));
        }
        let kind = self.config.objective.prediction_kind();
        if self.denoiser.kind() != kind {
            return Err(Error::KindMismatch {
                expected: kind,
                actual: self.denoiser.kind(),
            });
        }
        Ok(())
    }

    pub(crate) fn grid(&self) -> Result<TimestepGrid> {
        TimestepGrid::uniform(self.schedule, self.config.num_steps)
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.config.seed)
    }

    pub(crate) fn initial_noise(&self, rng: &mut ChaCha8Rng) -> FrameSequence {
        FrameSequence::standard_normal(self.layout.total_frames(), self.dim, rng)
    }

    /// Guided predictions for `chunks`, where `chunks[k]` belongs to chunk
    /// `indices[k]`.
    pub(crate) fn predict_chunks(
        &self,
        chunks: &[FrameSequence],
        indices: &[usize],
        t: usize,
        gamma: f64,
    ) -> Result<Vec<Prediction>> {
        let preds: Vec<Prediction> = chunks
            .par_iter()
            .zip(indices.par_iter())
            .map(|(chunk, &i)| self.denoiser.predict_guided(chunk, &self.conditions[i], t, gamma))
            .collect::<Result<_>>()?;
        for p in &preds {
            if !p.value.is_finite() {
                return Err(Error::NonFinite("denoiser prediction"));
            }
        }
        Ok(preds)
    }

    /// Noise for a stochastic reversion step, drawn only when it can matter.
    pub(crate) fn reversion_noise(
        &self,
        frames: usize,
        t_prev: usize,
        rng: &mut ChaCha8Rng,
    ) -> Option<FrameSequence> {
        let stochastic = self.config.eta > 0.0 && t_prev > 0 && self.config.objective == Objective::Epsilon;
        stochastic.then(|| FrameSequence::standard_normal(frames, self.dim, rng))
    }
}
