use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{OptimizerState, SamplingSetup};
use crate::chunking::{fuse, take_chunks};
use crate::conditioning::StructuredCondition;
use crate::denoiser::Denoiser;
use crate::diffusion::{NoiseSchedule, TimestepGrid};
use crate::distill::csd_gradients;
use crate::tensor::FrameSequence;
use crate::trace::{SamplerRunTrace, Stage, StageEvent};
use crate::{Error, Result};

/// DDIM (or Euler, for flow models) over a whole sequence with one
/// condition. Draws one `frames x dim` noise tensor per stochastic step.
pub fn sample_ddim(
    denoiser: &dyn Denoiser,
    x_big_t: &FrameSequence,
    condition: &StructuredCondition,
    config: &super::SamplerConfig,
    schedule: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<FrameSequence> {
    config.validate(schedule)?;
    let grid = TimestepGrid::uniform(schedule, config.num_steps)?;
    let objective = config.objective;
    let stochastic = config.eta > 0.0 && objective == crate::Objective::Epsilon;
    let mut x = x_big_t.clone();
    for (t, t_prev) in grid.transitions() {
        let pred = denoiser.predict_guided(&x, condition, t, config.gamma)?;
        let eps_rand =
            (stochastic && t_prev > 0).then(|| FrameSequence::standard_normal(x.frames(), x.dim(), rng));
        x = objective.posterior(&x, &pred, t, t_prev, config.eta, eps_rand.as_ref(), schedule)?;
    }
    Ok(x)
}

/// Each chunk is sampled in isolation from its slice of one shared initial
/// noise; overlapped frames keep the value of the highest-indexed chunk.
///
/// Draw order: the `F x D` initial noise, then each chunk's stochastic-step
/// noise, chunk by chunk.
pub fn sample_per_chunk_ddim(setup: &SamplingSetup) -> Result<FrameSequence> {
    setup.validate()?;
    let mut rng = setup.rng();
    let x_big_t = setup.initial_noise(&mut rng);
    let mut out = x_big_t.clone();
    for (i, chunk) in take_chunks(&x_big_t, setup.layout)?.iter().enumerate() {
        let x0 = sample_ddim(
            setup.denoiser,
            chunk,
            &setup.conditions[i],
            setup.config,
            setup.schedule,
            &mut rng,
        )?;
        for (k, j) in setup.layout.frames_of(i)?.enumerate() {
            out.frame_mut(j).copy_from_slice(x0.frame(k));
        }
    }
    Ok(out)
}

/// Posterior fusion: every chunk takes its own DDIM step and the resulting
/// `x_{t_prev}` chunks are averaged.
///
/// Draw order: the `F x D` initial noise, then per stochastic step one
/// `f x D` tensor per chunk in chunk order.
pub fn sample_gen_l_video(setup: &SamplingSetup) -> Result<(FrameSequence, SamplerRunTrace)> {
    setup.validate()?;
    let grid = setup.grid()?;
    let mut trace = SamplerRunTrace::new(
        "gen_l_video",
        setup.config.clone(),
        setup.layout.clone(),
        grid.steps().to_vec(),
    );
    let mut rng = setup.rng();
    let mut x = setup.initial_noise(&mut rng);
    let objective = setup.config.objective;
    let all: Vec<usize> = (0..setup.layout.num_chunks()).collect();
    let f = setup.layout.chunk_len();
    for (k, (t, t_prev)) in grid.transitions().enumerate() {
        let chunks = take_chunks(&x, setup.layout)?;
        let preds = setup.predict_chunks(&chunks, &all, t, setup.config.gamma)?;
        let mut x0_hats = Vec::with_capacity(chunks.len());
        let mut posteriors = Vec::with_capacity(chunks.len());
        for (chunk, pred) in chunks.iter().zip(&preds) {
            x0_hats.push(objective.x0_from_prediction(chunk, pred, t, setup.schedule)?);
            let eps_rand = setup.reversion_noise(f, t_prev, &mut rng);
            posteriors.push(objective.posterior(
                chunk,
                pred,
                t,
                t_prev,
                setup.config.eta,
                eps_rand.as_ref(),
                setup.schedule,
            )?);
        }
        trace.push(StageEvent {
            step_index: k,
            timestep: t,
            stage: Stage::Predict,
            iteration: 0,
            prediction_timestep: Some(t),
            noise_fingerprint: None,
            active_chunks: all.clone(),
            chunks: x0_hats,
        });
        x = fuse(&posteriors, setup.layout)?;
    }
    Ok((x, trace))
}

/// Loss fusion from scratch: the clean sample starts as standard normal and
/// is optimized with fused CSD gradients at a random timestep per iteration.
///
/// Draw order: the `F x D` initialization, then per iteration the timestep
/// followed by one `f x D` noise tensor per chunk in chunk order.
pub fn sample_csd_only(
    setup: &SamplingSetup,
    total_iters: usize,
) -> Result<(FrameSequence, SamplerRunTrace)> {
    setup.validate()?;
    let config = setup.config;
    let mut trace = SamplerRunTrace::new("csd_only", config.clone(), setup.layout.clone(), Vec::new());
    let mut rng = setup.rng();
    let mut x0 = setup.initial_noise(&mut rng);
    let mut opt = OptimizerState::new(config.optimizer, x0.as_slice().len());
    let objective = config.objective;
    let gamma = if config.guide_refinement { config.gamma } else { 1.0 };
    let n = setup.layout.num_chunks();
    let all: Vec<usize> = (0..n).collect();
    let [lo, hi] = config.csd_t_range;
    for it in 0..total_iters {
        let t = rng.random_range(lo..=hi);
        let noise: Vec<FrameSequence> = (0..n)
            .map(|_| FrameSequence::standard_normal(setup.layout.chunk_len(), setup.dim, &mut rng))
            .collect();
        let clean = take_chunks(&x0, setup.layout)?;
        let noisy = clean
            .iter()
            .zip(&noise)
            .map(|(c, e)| objective.add_noise(c, e, t, setup.schedule))
            .collect::<Result<Vec<_>>>()?;
        let preds = setup.predict_chunks(&noisy, &all, t, gamma)?;
        let targets = noise
            .iter()
            .zip(&clean)
            .map(|(e, c)| objective.distill_target(e, c))
            .collect::<Result<Vec<_>>>()?;
        let grads = csd_gradients(&noisy, &preds, &targets, config.distill_weight, config.kernel)?;
        opt.step(&mut x0, &fuse(&grads, setup.layout)?, config.lr)?;

        let stacked: Vec<f64> = noise.iter().flat_map(|e| e.as_slice().iter().copied()).collect();
        let fingerprint = FrameSequence::from_vec(n * setup.layout.chunk_len(), setup.dim, stacked)?.fingerprint();
        trace.push(StageEvent {
            step_index: it,
            timestep: t,
            stage: Stage::Refine,
            iteration: it,
            prediction_timestep: Some(t),
            noise_fingerprint: Some(fingerprint),
            active_chunks: all.clone(),
            chunks: take_chunks(&x0, setup.layout)?,
        });
    }
    if !x0.is_finite() {
        return Err(Error::NonFinite("csd sample"));
    }
    Ok((x0, trace))
}
