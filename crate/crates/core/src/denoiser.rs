//! The prediction interface every sampler drives, plus closed-form denoisers.
//!
//! [`GaussianMixtureWorld`] places one isotropic Gaussian per condition. Its
//! noised marginals stay Gaussian, so the exact noise and velocity
//! predictions are available in closed form. The null condition predicts
//! under the full mixture, which is what classifier-free guidance contrasts
//! against.

use serde::{Deserialize, Serialize};

use crate::chunking::ChunkLayout;
use crate::conditioning::{null_condition, StructuredCondition};
use crate::diffusion::{effective_noise, NoiseSchedule, Objective};
use crate::tensor::FrameSequence;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionKind {
    Epsilon,
    Velocity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub kind: PredictionKind,
    pub value: FrameSequence,
}

impl Prediction {
    pub fn epsilon(value: FrameSequence) -> Self {
        Self {
            kind: PredictionKind::Epsilon,
            value,
        }
    }

    pub fn velocity(value: FrameSequence) -> Self {
        Self {
            kind: PredictionKind::Velocity,
            value,
        }
    }
}

/// A noise- or velocity-prediction model.
///
/// `t` is the integer diffusion step in `[1, T]`; flow models read it as the
/// continuous time `t / T`. Predictions must be deterministic and preserve
/// the chunk shape.
pub trait Denoiser: Send + Sync {
    fn kind(&self) -> PredictionKind;

    fn predict(
        &self,
        chunk: &FrameSequence,
        condition: &StructuredCondition,
        t: usize,
    ) -> Result<Prediction>;

    /// Classifier-free guided prediction with scale `gamma`.
    fn predict_guided(
        &self,
        chunk: &FrameSequence,
        condition: &StructuredCondition,
        t: usize,
        gamma: f64,
    ) -> Result<Prediction> {
        let cond = self.predict(chunk, condition, t)?;
        if gamma == 1.0 {
            return Ok(cond);
        }
        let null = self.predict(chunk, &null_condition(), t)?;
        cfg_combine(&cond, &null, gamma)
    }
}

/// `eps_null + gamma (eps_cond - eps_null)`.
pub fn cfg_combine(cond: &Prediction, null: &Prediction, gamma: f64) -> Result<Prediction> {
    if cond.kind != null.kind {
        return Err(Error::KindMismatch {
            expected: cond.kind,
            actual: null.kind,
        });
    }
    if gamma == 1.0 {
        cond.value.ensure_same_shape(&null.value)?;
        return Ok(cond.clone());
    }
    if gamma == 0.0 {
        cond.value.ensure_same_shape(&null.value)?;
        return Ok(null.clone());
    }
    let value = cond
        .value
        .zip_map(&null.value, |c, n| n + gamma * (c - n))?;
    Ok(Prediction {
        kind: cond.kind,
        value,
    })
}

/// One isotropic Gaussian `N(mu_c, sigma0^2 I)` per condition id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureWorld {
    means: Vec<Vec<f64>>,
    sigma0: f64,
    weights: Vec<f64>,
}

impl GaussianMixtureWorld {
    pub fn new(means: Vec<Vec<f64>>, sigma0: f64, weights: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::invalid("means", "need at least one component"));
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) {
            return Err(Error::invalid("means", "components must share a nonzero dimension"));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixture means"));
        }
        if !(sigma0.is_finite() && sigma0 >= 0.0) {
            return Err(Error::invalid("sigma0", format!("must be finite and >= 0, got {sigma0}")));
        }
        if weights.len() != means.len() || weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::invalid("weights", "one nonnegative weight per component"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("weights", format!("must sum to 1, got {total}")));
        }
        Ok(Self {
            means,
            sigma0,
            weights,
        })
    }

    /// Equal weights over the given means.
    pub fn uniform(means: Vec<Vec<f64>>, sigma0: f64) -> Result<Self> {
        let n = means.len().max(1);
        let weights = vec![1.0 / n as f64; means.len()];
        Self::new(means, sigma0, weights)
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Target mean for a non-null condition.
    pub fn mean_for(&self, condition: &StructuredCondition) -> Result<&[f64]> {
        if condition.is_null {
            return Err(Error::UnknownCondition(None));
        }
        condition
            .id
            .and_then(|id| self.means.get(id))
            .map(Vec::as_slice)
            .ok_or(Error::UnknownCondition(condition.id))
    }

    fn check_chunk(&self, x: &FrameSequence) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: (x.frames(), self.dim()),
                actual: x.shape(),
            });
        }
        Ok(())
    }

    /// Per-frame component posteriors under `N(scale mu_c, var I)`.
    fn responsibilities(&self, frame: &[f64], scale: f64, var: f64) -> Vec<f64> {
        let logits: Vec<f64> = self
            .means
            .iter()
            .zip(&self.weights)
            .map(|(mu, &w)| {
                let sq: f64 = frame
                    .iter()
                    .zip(mu)
                    .map(|(x, m)| (x - scale * m).powi(2))
                    .sum();
                w.ln() - sq / (2.0 * var)
            })
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / z).collect()
    }

    /// Per-frame prediction: a fixed-component rule for conditional inputs,
    /// and the responsibility-weighted average of it for the null condition.
    fn per_frame(
        &self,
        x: &FrameSequence,
        condition: &StructuredCondition,
        scale: f64,
        var: f64,
        rule: impl Fn(f64, f64) -> f64,
    ) -> Result<FrameSequence> {
        self.check_chunk(x)?;
        let mut out = FrameSequence::zeros(x.frames(), x.dim());
        if condition.is_null {
            for j in 0..x.frames() {
                let frame = x.frame(j);
                let resp = self.responsibilities(frame, scale, var);
                let row = out.frame_mut(j);
                for (r, mu) in resp.iter().zip(&self.means) {
                    for ((o, &xv), &m) in row.iter_mut().zip(frame).zip(mu) {
                        *o += r * rule(xv, m);
                    }
                }
            }
        } else {
            let mu = self.mean_for(condition)?;
            for j in 0..x.frames() {
                let frame = x.frame(j);
                for ((o, &xv), &m) in out.frame_mut(j).iter_mut().zip(frame).zip(mu) {
                    *o = rule(xv, m);
                }
            }
        }
        Ok(out)
    }

    /// Closed-form log density of the noised marginal at step `ab`, summed
    /// over frames. Test oracles difference this numerically.
    pub fn log_density(
        &self,
        x: &FrameSequence,
        condition: &StructuredCondition,
        scale: f64,
        var: f64,
    ) -> Result<f64> {
        self.check_chunk(x)?;
        let d = self.dim() as f64;
        let norm = -0.5 * d * (2.0 * std::f64::consts::PI * var).ln();
        let component = |frame: &[f64], mu: &[f64]| {
            let sq: f64 = frame
                .iter()
                .zip(mu)
                .map(|(a, m)| (a - scale * m).powi(2))
                .sum();
            norm - sq / (2.0 * var)
        };
        let mut total = 0.0;
        for j in 0..x.frames() {
            let frame = x.frame(j);
            total += if condition.is_null {
                let terms: Vec<f64> = self
                    .means
                    .iter()
                    .zip(&self.weights)
                    .map(|(mu, &w)| w.ln() + component(frame, mu))
                    .collect();
                let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                top + terms.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
            } else {
                component(frame, self.mean_for(condition)?)
            };
        }
        Ok(total)
    }

    /// `(scale, variance)` of the noised marginal at diffusion step `t`.
    pub fn diffusion_marginal(&self, t: usize, schedule: &NoiseSchedule) -> Result<(f64, f64)> {
        let ab = schedule.alpha_bar(t)?;
        Ok((ab.sqrt(), ab * self.sigma0.powi(2) + 1.0 - ab))
    }

    /// `(scale, variance)` of the flow marginal at time `t`.
    pub fn flow_marginal(&self, t: f64) -> (f64, f64) {
        (1.0 - t, t * t + (1.0 - t).powi(2) * self.sigma0.powi(2))
    }
}

/// Exact noise prediction `-sqrt(1 - ab_t) grad log p_t(x_t | c)`.
pub fn analytic_epsilon(
    world: &GaussianMixtureWorld,
    x_t: &FrameSequence,
    condition: &StructuredCondition,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<Prediction> {
    if t == 0 {
        return Err(Error::TimestepOutOfRange {
            t,
            min: 1,
            max: schedule.train_steps(),
        });
    }
    let (scale, var) = world.diffusion_marginal(t, schedule)?;
    let noise_std = (1.0 - scale * scale).sqrt();
    let value = world.per_frame(x_t, condition, scale, var, |x, m| {
        noise_std * (x - scale * m) / var
    })?;
    Ok(Prediction::epsilon(value))
}

/// Exact flow velocity `E[eps - x0 | x_t, c]` at time `t in (0, 1]`.
pub fn analytic_velocity(
    world: &GaussianMixtureWorld,
    x_t: &FrameSequence,
    condition: &StructuredCondition,
    t: f64,
) -> Result<Prediction> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::FlowTimeOutOfRange { t });
    }
    let (scale, var) = world.flow_marginal(t);
    let gain = (t - (1.0 - t) * world.sigma0.powi(2)) / var;
    let value = world.per_frame(x_t, condition, scale, var, |x, m| {
        gain * (x - scale * m) - m
    })?;
    Ok(Prediction::velocity(value))
}

/// Noise prediction of a model that knows the clean sample.
pub fn oracle_epsilon(
    x_t: &FrameSequence,
    x0_true: &FrameSequence,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<Prediction> {
    effective_noise(x_t, x0_true, t, schedule).map(Prediction::epsilon)
}

/// Straight-path velocity `(x_t - x0) / t` of a model that knows the clean
/// sample.
pub fn oracle_velocity(x_t: &FrameSequence, x0_true: &FrameSequence, t: f64) -> Result<Prediction> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::FlowTimeOutOfRange { t });
    }
    x_t.zip_map(x0_true, |x, z| (x - z) / t)
        .map(Prediction::velocity)
}

/// Closed-form denoiser over a [`GaussianMixtureWorld`].
#[derive(Debug, Clone)]
pub struct AnalyticDenoiser {
    world: GaussianMixtureWorld,
    schedule: NoiseSchedule,
    objective: Objective,
}

impl AnalyticDenoiser {
    pub fn new(world: GaussianMixtureWorld, schedule: NoiseSchedule, objective: Objective) -> Self {
        Self {
            world,
            schedule,
            objective,
        }
    }

    pub fn world(&self) -> &GaussianMixtureWorld {
        &self.world
    }
}

impl Denoiser for AnalyticDenoiser {
    fn kind(&self) -> PredictionKind {
        self.objective.prediction_kind()
    }

    fn predict(
        &self,
        chunk: &FrameSequence,
        condition: &StructuredCondition,
        t: usize,
    ) -> Result<Prediction> {
        match self.objective {
            Objective::Epsilon => analytic_epsilon(&self.world, chunk, condition, t, &self.schedule),
            Objective::Flow => {
                analytic_velocity(&self.world, chunk, condition, self.schedule.flow_time(t))
            }
        }
    }
}

/// Perfect predictor for a known long sample: condition `i` resolves to the
/// `i`-th chunk of the true sequence.
#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    targets: Vec<FrameSequence>,
    schedule: NoiseSchedule,
    objective: Objective,
}

impl OracleDenoiser {
    pub fn new(
        x0_true: &FrameSequence,
        layout: &ChunkLayout,
        schedule: NoiseSchedule,
        objective: Objective,
    ) -> Result<Self> {
        let targets = (0..layout.num_chunks())
            .map(|i| crate::chunking::take_chunk(x0_true, layout, i))
            .collect::<Result<_>>()?;
        Ok(Self {
            targets,
            schedule,
            objective,
        })
    }

    fn target(&self, condition: &StructuredCondition) -> Result<&FrameSequence> {
        if condition.is_null {
            return Err(Error::UnknownCondition(None));
        }
        condition
            .id
            .and_then(|id| self.targets.get(id))
            .ok_or(Error::UnknownCondition(condition.id))
    }
}

impl Denoiser for OracleDenoiser {
    fn kind(&self) -> PredictionKind {
        self.objective.prediction_kind()
    }

    fn predict(
        &self,
        chunk: &FrameSequence,
        condition: &StructuredCondition,
        t: usize,
    ) -> Result<Prediction> {
        let target = self.target(condition)?;
        match self.objective {
            Objective::Epsilon => oracle_epsilon(chunk, target, t, &self.schedule),
            Objective::Flow => oracle_velocity(chunk, target, self.schedule.flow_time(t)),
        }
    }

    /// Both guidance branches of a perfect predictor coincide, so any scale
    /// returns the conditional prediction.
    fn predict_guided(
        &self,
        chunk: &FrameSequence,
        condition: &StructuredCondition,
        t: usize,
        _gamma: f64,
    ) -> Result<Prediction> {
        self.predict(chunk, condition, t)
    }
}
