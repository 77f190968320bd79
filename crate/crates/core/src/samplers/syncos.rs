//! Synchronized coupled sampling.
//!
//! Each grid step runs three stages: fuse the per-chunk Tweedie estimates,
//! refine the fused clean sample with kernel-coupled distillation at the
//! current timestep under one fixed noise draw, and revert the refined sample
//! to the next timestep with that same noise.
//!
//! Draw order: the `F x D` initial noise; then per grid step, if refinement
//! runs, the `F x D` baseline noise followed by one minibatch draw per
//! iteration (skipped when the minibatch is every chunk); then, when
//! `eta > 0` and the step does not land on 0, one `F x D` reversion tensor.

use rand_chacha::ChaCha8Rng;

use super::{OptimizerState, SamplingSetup};
use crate::chunking::{fuse, fuse_subset, take_chunk, take_chunks};
use crate::denoiser::Prediction;
use crate::distill::csd_gradients;
use crate::tensor::{FrameSequence, NoiseTensor};
use crate::trace::{SamplerRunTrace, Stage, StageEvent};
use crate::Result;

pub struct Stage1Output {
    pub x0_fused: FrameSequence,
    /// Per-chunk clean estimates before fusion.
    pub x0_chunks: Vec<FrameSequence>,
    pub predictions: Vec<Prediction>,
}

/// Guided prediction per chunk, Tweedie estimate per chunk, then fusion of
/// the estimates.
pub fn syncos_stage1(setup: &SamplingSetup, x_t: &FrameSequence, t: usize) -> Result<Stage1Output> {
    let chunks = take_chunks(x_t, setup.layout)?;
    let all: Vec<usize> = (0..chunks.len()).collect();
    let predictions = setup.predict_chunks(&chunks, &all, t, setup.config.gamma)?;
    let x0_chunks = chunks
        .iter()
        .zip(&predictions)
        .map(|(c, p)| setup.config.objective.x0_from_prediction(c, p, t, setup.schedule))
        .collect::<Result<Vec<_>>>()?;
    let x0_fused = fuse(&x0_chunks, setup.layout)?;
    Ok(Stage1Output {
        x0_fused,
        x0_chunks,
        predictions,
    })
}

pub struct Stage2Output {
    pub x0_refined: FrameSequence,
    pub eps_base: NoiseTensor,
    /// Per iteration: the sorted minibatch and the sample after the update.
    pub iterations: Vec<(Vec<usize>, FrameSequence)>,
}

/// Refinement at the grounded timestep `t`.
///
/// Draws the baseline noise once, then for each iteration picks a minibatch
/// of chunks without replacement, re-noises them with their slice of the
/// baseline noise, and descends along the kernel-coupled gradients fused
/// over the minibatch.
pub fn syncos_stage2(
    setup: &SamplingSetup,
    x0_fused: &FrameSequence,
    t: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Stage2Output> {
    let config = setup.config;
    let layout = setup.layout;
    let n = layout.num_chunks();
    let b = config.minibatch_for(n);
    let objective = config.objective;
    let gamma = if config.guide_refinement { config.gamma } else { 1.0 };

    let eps_base = FrameSequence::standard_normal(layout.total_frames(), setup.dim, rng);
    let mut x0 = x0_fused.clone();
    let mut opt = OptimizerState::new(config.optimizer, x0.as_slice().len());
    let mut iterations = Vec::with_capacity(config.iters);
    for _ in 0..config.iters {
        let minibatch: Vec<usize> = if b == n {
            (0..n).collect()
        } else {
            let mut idx = rand::seq::index::sample(rng, n, b).into_vec();
            idx.sort_unstable();
            idx
        };
        let mut noisy = Vec::with_capacity(b);
        let mut targets = Vec::with_capacity(b);
        for &i in &minibatch {
            let x_i = take_chunk(&x0, layout, i)?;
            let e_i = take_chunk(&eps_base, layout, i)?;
            noisy.push(objective.add_noise(&x_i, &e_i, t, setup.schedule)?);
            targets.push(objective.distill_target(&e_i, &x_i)?);
        }
        let preds = setup.predict_chunks(&noisy, &minibatch, t, gamma)?;
        let grads = csd_gradients(&noisy, &preds, &targets, config.distill_weight, config.kernel)?;
        let fused = fuse_subset(&grads, &minibatch, layout)?;
        opt.step(&mut x0, &fused, config.lr)?;
        iterations.push((minibatch, x0.clone()));
    }
    Ok(Stage2Output {
        x0_refined: x0,
        eps_base,
        iterations,
    })
}

/// Moves the refined sample from `t` to `t_prev` along `noise`.
pub fn syncos_stage3(
    setup: &SamplingSetup,
    x0_refined: &FrameSequence,
    noise: &NoiseTensor,
    t: usize,
    t_prev: usize,
    eps_rand: Option<&NoiseTensor>,
) -> Result<FrameSequence> {
    setup.config.objective.revert(
        x0_refined,
        noise,
        t,
        t_prev,
        setup.config.eta,
        eps_rand,
        setup.schedule,
    )
}

/// Runs the full sampler, appending every event to `trace` as it happens so
/// the trace survives a failure part-way through.
pub fn syncos_sample_into(setup: &SamplingSetup, trace: &mut SamplerRunTrace) -> Result<FrameSequence> {
    setup.validate()?;
    let grid = setup.grid()?;
    let config = setup.config;
    let layout = setup.layout;
    let all: Vec<usize> = (0..layout.num_chunks()).collect();
    let mut rng = setup.rng();
    let mut x = setup.initial_noise(&mut rng);

    for (k, (t, t_prev)) in grid.transitions().enumerate() {
        let stage1 = syncos_stage1(setup, &x, t)?;
        trace.push(StageEvent {
            step_index: k,
            timestep: t,
            stage: Stage::Predict,
            iteration: 0,
            prediction_timestep: Some(t),
            noise_fingerprint: None,
            active_chunks: all.clone(),
            chunks: stage1.x0_chunks,
        });

        let (x0_refined, noise) = if t > config.t_min {
            let out = syncos_stage2(setup, &stage1.x0_fused, t, &mut rng)?;
            let fingerprint = out.eps_base.fingerprint();
            for (it, (minibatch, snapshot)) in out.iterations.into_iter().enumerate() {
                trace.push(StageEvent {
                    step_index: k,
                    timestep: t,
                    stage: Stage::Refine,
                    iteration: it,
                    prediction_timestep: Some(t),
                    noise_fingerprint: Some(fingerprint),
                    active_chunks: minibatch,
                    chunks: take_chunks(&snapshot, layout)?,
                });
            }
            (out.x0_refined, out.eps_base)
        } else {
            let noise = config
                .objective
                .noise_between(&x, &stage1.x0_fused, t, setup.schedule)?;
            (stage1.x0_fused, noise)
        };

        let eps_rand = setup.reversion_noise(layout.total_frames(), t_prev, &mut rng);
        x = syncos_stage3(setup, &x0_refined, &noise, t, t_prev, eps_rand.as_ref())?;
        trace.push(StageEvent {
            step_index: k,
            timestep: t,
            stage: Stage::Revert,
            iteration: 0,
            prediction_timestep: None,
            noise_fingerprint: Some(noise.fingerprint()),
            active_chunks: all.clone(),
            chunks: take_chunks(&x0_refined, layout)?,
        });
    }
    if !x.is_finite() {
        return Err(crate::Error::NonFinite("syncos sample"));
    }
    Ok(x)
}

pub fn syncos_sample(setup: &SamplingSetup) -> Result<(FrameSequence, SamplerRunTrace)> {
    let grid = setup.grid()?;
    let mut trace = SamplerRunTrace::new(
        "syncos",
        setup.config.clone(),
        setup.layout.clone(),
        grid.steps().to_vec(),
    );
    let x = syncos_sample_into(setup, &mut trace)?;
    Ok((x, trace))
}
