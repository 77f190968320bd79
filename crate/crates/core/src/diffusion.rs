//! Noise schedules, the forward process, Tweedie estimates and the DDIM /
//! rectified-flow update rules.
//!
//! Discrete timesteps are integers in `[0, T]` with `alpha_bar(0) = 1`. The
//! flow objective reuses the same integer grid and maps a step `t` to the
//! continuous time `t / T` in `(0, 1]`.

use serde::{Deserialize, Serialize};

use crate::denoiser::{Prediction, PredictionKind};
use crate::tensor::{FrameSequence, NoiseTensor};
use crate::{Error, Result};

/// Linear variance schedule with its cumulative products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    train_steps: usize,
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Betas interpolated linearly from `beta_min` (step 1) to `beta_max`
    /// (step `T`).
    pub fn linear(train_steps: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if train_steps < 1 {
            return Err(Error::invalid("T", "must be >= 1"));
        }
        if !beta_min.is_finite() || !beta_max.is_finite() {
            return Err(Error::NonFinite("beta range"));
        }
        if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
            return Err(Error::invalid(
                "beta range",
                format!("need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]"),
            ));
        }
        let betas: Vec<f64> = (0..train_steps)
            .map(|k| {
                if train_steps == 1 {
                    beta_min
                } else {
                    let frac = k as f64 / (train_steps - 1) as f64;
                    beta_min + frac * (beta_max - beta_min)
                }
            })
            .collect();
        let mut alpha_bars = Vec::with_capacity(train_steps + 1);
        let mut acc = 1.0;
        alpha_bars.push(acc);
        for beta in &betas {
            acc *= 1.0 - beta;
            alpha_bars.push(acc);
        }
        Ok(Self {
            train_steps,
            betas,
            alpha_bars,
        })
    }

    /// The reference DDPM configuration: 1000 steps, betas in `[1e-4, 2e-2]`.
    pub fn reference() -> Self {
        Self::linear(1000, 1e-4, 2e-2).expect("reference schedule is valid")
    }

    pub fn train_steps(&self) -> usize {
        self.train_steps
    }

    /// `betas[k - 1]` is the variance added at step `k`.
    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.alpha_bars
            .get(t)
            .copied()
            .ok_or(Error::TimestepOutOfRange {
                t,
                min: 0,
                max: self.train_steps,
            })
    }

    /// Continuous flow time for integer step `t`.
    pub fn flow_time(&self, t: usize) -> f64 {
        t as f64 / self.train_steps as f64
    }

    fn noisy_alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::TimestepOutOfRange {
                t,
                min: 1,
                max: self.train_steps,
            });
        }
        self.alpha_bar(t)
    }
}

/// Descending sampling timesteps `t_K = T > ... > t_1 >= 1`. The sampler
/// steps from `t_1` to 0 as its final transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestepGrid {
    steps: Vec<usize>,
}

impl TimestepGrid {
    /// `num_steps` timesteps `floor(k * T / num_steps)` for `k = num_steps..=1`.
    pub fn uniform(schedule: &NoiseSchedule, num_steps: usize) -> Result<Self> {
        let total = schedule.train_steps();
        if num_steps < 1 || num_steps > total {
            return Err(Error::invalid(
                "num_steps",
                format!("must lie in [1, {total}], got {num_steps}"),
            ));
        }
        let steps = (1..=num_steps)
            .rev()
            .map(|k| k * total / num_steps)
            .collect();
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `(t, t_prev)` pairs in sampling order, ending with `(t_1, 0)`.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.steps
            .iter()
            .enumerate()
            .map(|(k, &t)| (t, self.steps.get(k + 1).copied().unwrap_or(0)))
    }
}

/// `sqrt(ab_t) x0 + sqrt(1 - ab_t) eps`.
pub fn forward_diffuse(
    x0: &FrameSequence,
    eps: &NoiseTensor,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<FrameSequence> {
    let ab = schedule.alpha_bar(t)?;
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    x0.zip_map(eps, |x, e| a * x + b * e)
}

/// Tweedie estimate `(x_t - sqrt(1 - ab_t) eps_pred) / sqrt(ab_t)`.
pub fn tweedie_x0(
    x_t: &FrameSequence,
    eps_pred: &NoiseTensor,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<FrameSequence> {
    let ab = schedule.noisy_alpha_bar(t)?;
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    x_t.zip_map(eps_pred, |x, e| (x - b * e) / a)
}

/// Noise that maps `x0` to `x_t` under the forward process.
pub fn effective_noise(
    x_t: &FrameSequence,
    x0: &FrameSequence,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<NoiseTensor> {
    let ab = schedule.noisy_alpha_bar(t)?;
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    x_t.zip_map(x0, |x, z| (x - a * z) / b)
}

/// One DDIM transition from `t` to `t_prev`.
///
/// `eps_rand` only enters when `eta > 0`; with `eta = 0` the result does not
/// depend on it at all.
pub fn ddim_step(
    x0_hat: &FrameSequence,
    eps_dir: &NoiseTensor,
    t: usize,
    t_prev: usize,
    eta: f64,
    eps_rand: Option<&NoiseTensor>,
    schedule: &NoiseSchedule,
) -> Result<FrameSequence> {
    if t <= t_prev {
        return Err(Error::invalid(
            "t_prev",
            format!("need t > t_prev, got t={t}, t_prev={t_prev}"),
        ));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid("eta", format!("must lie in [0, 1], got {eta}")));
    }
    x0_hat.ensure_same_shape(eps_dir)?;
    let ab_t = schedule.noisy_alpha_bar(t)?;
    let ab_prev = schedule.alpha_bar(t_prev)?;
    let budget = 1.0 - ab_prev;
    let sigma = if eta == 0.0 {
        0.0
    } else {
        eta * ((1.0 - ab_prev) / (1.0 - ab_t)).sqrt() * (1.0 - ab_t / ab_prev).max(0.0).sqrt()
    };
    let sigma_sq = sigma * sigma;
    if sigma_sq > budget + 1e-15 {
        return Err(Error::ScheduleCorruption {
            t,
            t_prev,
            sigma_sq,
            budget,
        });
    }
    let a = ab_prev.sqrt();
    let dir = (budget - sigma_sq).max(0.0).sqrt();
    let mut out = x0_hat.zip_map(eps_dir, |x, e| a * x + dir * e)?;
    if sigma > 0.0 {
        let rand = eps_rand.ok_or_else(|| Error::invalid("eps_rand", "required when eta > 0"))?;
        x0_hat.ensure_same_shape(rand)?;
        for (o, r) in out.as_mut_slice().iter_mut().zip(rand.as_slice()) {
            *o += sigma * r;
        }
    }
    Ok(out)
}

fn check_flow_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::FlowTimeOutOfRange { t });
    }
    Ok(())
}

/// Straight interpolation `t eps + (1 - t) x0`.
pub fn flow_forward(x0: &FrameSequence, eps: &NoiseTensor, t: f64) -> Result<FrameSequence> {
    check_flow_time(t)?;
    x0.zip_map(eps, |x, e| t * e + (1.0 - t) * x)
}

/// Explicit Euler step of `dx = v dt` from `t` down to `t_prev`.
pub fn flow_step(
    x_t: &FrameSequence,
    v_pred: &FrameSequence,
    t: f64,
    t_prev: f64,
) -> Result<FrameSequence> {
    check_flow_time(t)?;
    check_flow_time(t_prev)?;
    if t_prev >= t {
        return Err(Error::invalid(
            "t_prev",
            format!("need t_prev < t, got t={t}, t_prev={t_prev}"),
        ));
    }
    let dt = t_prev - t;
    x_t.zip_map(v_pred, |x, v| x + dt * v)
}

/// Training objective of the denoiser the samplers drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Epsilon,
    Flow,
}

impl Objective {
    pub fn prediction_kind(self) -> PredictionKind {
        match self {
            Objective::Epsilon => PredictionKind::Epsilon,
            Objective::Flow => PredictionKind::Velocity,
        }
    }

    fn expect(self, pred: &Prediction) -> Result<()> {
        if pred.kind != self.prediction_kind() {
            return Err(Error::KindMismatch {
                expected: self.prediction_kind(),
                actual: pred.kind,
            });
        }
        Ok(())
    }

    /// Noised sample at step `t`.
    pub fn add_noise(
        self,
        x0: &FrameSequence,
        eps: &NoiseTensor,
        t: usize,
        schedule: &NoiseSchedule,
    ) -> Result<FrameSequence> {
        match self {
            Objective::Epsilon => forward_diffuse(x0, eps, t, schedule),
            Objective::Flow => flow_forward(x0, eps, schedule.flow_time(t)),
        }
    }

    /// Clean-sample estimate implied by a prediction at step `t >= 1`.
    pub fn x0_from_prediction(
        self,
        x_t: &FrameSequence,
        pred: &Prediction,
        t: usize,
        schedule: &NoiseSchedule,
    ) -> Result<FrameSequence> {
        self.expect(pred)?;
        match self {
            Objective::Epsilon => tweedie_x0(x_t, &pred.value, t, schedule),
            Objective::Flow => {
                let tau = positive_flow_time(t, schedule)?;
                x_t.zip_map(&pred.value, |x, v| x - tau * v)
            }
        }
    }

    /// Noise implied by a prediction at step `t >= 1`.
    pub fn noise_from_prediction(
        self,
        x_t: &FrameSequence,
        pred: &Prediction,
        t: usize,
        schedule: &NoiseSchedule,
    ) -> Result<NoiseTensor> {
        self.expect(pred)?;
        match self {
            Objective::Epsilon => Ok(pred.value.clone()),
            Objective::Flow => {
                let tau = positive_flow_time(t, schedule)?;
                x_t.zip_map(&pred.value, |x, v| x + (1.0 - tau) * v)
            }
        }
    }

    /// Noise that maps `x0` to `x_t` at step `t >= 1`.
    pub fn noise_between(
        self,
        x_t: &FrameSequence,
        x0: &FrameSequence,
        t: usize,
        schedule: &NoiseSchedule,
    ) -> Result<NoiseTensor> {
        match self {
            Objective::Epsilon => effective_noise(x_t, x0, t, schedule),
            Objective::Flow => {
                let tau = positive_flow_time(t, schedule)?;
                x_t.zip_map(x0, |x, z| (x - (1.0 - tau) * z) / tau)
            }
        }
    }

    /// Move a clean estimate and its noise from `t` to `t_prev`.
    ///
    /// The flow branch re-derives `x_t` with `flow_forward` and takes one Euler
    /// step with the straight-path velocity `eps_dir - x0`; it is
    /// deterministic and ignores `eta`.
    #[allow(clippy::too_many_arguments)]
    pub fn revert(
        self,
        x0: &FrameSequence,
        eps_dir: &NoiseTensor,
        t: usize,
        t_prev: usize,
        eta: f64,
        eps_rand: Option<&NoiseTensor>,
        schedule: &NoiseSchedule,
    ) -> Result<FrameSequence> {
        match self {
            Objective::Epsilon => ddim_step(x0, eps_dir, t, t_prev, eta, eps_rand, schedule),
            Objective::Flow => {
                let (tau, tau_prev) = (schedule.flow_time(t), schedule.flow_time(t_prev));
                let x_t = flow_forward(x0, eps_dir, tau)?;
                let velocity = eps_dir.zip_map(x0, |e, z| e - z)?;
                flow_step(&x_t, &velocity, tau, tau_prev)
            }
        }
    }

    /// Per-chunk posterior update used by the fusion baselines: DDIM from the
    /// Tweedie estimate, or an Euler step along the predicted velocity.
    #[allow(clippy::too_many_arguments)]
    pub fn posterior(
        self,
        x_t: &FrameSequence,
        pred: &Prediction,
        t: usize,
        t_prev: usize,
        eta: f64,
        eps_rand: Option<&NoiseTensor>,
        schedule: &NoiseSchedule,
    ) -> Result<FrameSequence> {
        self.expect(pred)?;
        match self {
            Objective::Epsilon => {
                let x0_hat = tweedie_x0(x_t, &pred.value, t, schedule)?;
                ddim_step(&x0_hat, &pred.value, t, t_prev, eta, eps_rand, schedule)
            }
            Objective::Flow => flow_step(
                x_t,
                &pred.value,
                schedule.flow_time(t),
                schedule.flow_time(t_prev),
            ),
        }
    }

    /// Regression target the distillation residual compares against: the
    /// noise itself, or the straight-path velocity `eps - x`.
    pub fn distill_target(self, eps: &NoiseTensor, x0: &FrameSequence) -> Result<NoiseTensor> {
        match self {
            Objective::Epsilon => Ok(eps.clone()),
            Objective::Flow => eps.zip_map(x0, |e, z| e - z),
        }
    }
}

fn positive_flow_time(t: usize, schedule: &NoiseSchedule) -> Result<f64> {
    if t == 0 {
        return Err(Error::TimestepOutOfRange {
            t,
            min: 1,
            max: schedule.train_steps(),
        });
    }
    Ok(schedule.flow_time(t))
}
