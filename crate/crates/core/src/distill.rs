//! Score-distillation gradients: SDS, its kernel-coupled form (CSD) and the
//! flow-matching variant. The Jacobian of the denoiser is dropped
//! throughout, and the optimized variable is the sample itself, so every
//! gradient is taken directly with respect to the chunk.

use serde::{Deserialize, Serialize};

use crate::denoiser::{Prediction, PredictionKind};
use crate::tensor::{FrameSequence, NoiseTensor};
use crate::{Error, Result};

pub const BANDWIDTH_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "rule", content = "h")]
pub enum KernelParams {
    /// Recomputed from the particles on every call.
    #[default]
    MedianHeuristic,
    Fixed(f64),
}

/// RBF kernel `exp(-|a-b|^2 / (2 h^2))` and its gradient in `a`.
pub fn rbf_kernel(a: &[f64], b: &[f64], h: f64) -> Result<(f64, Vec<f64>)> {
    if !(h > 0.0) {
        return Err(Error::invalid("h", format!("bandwidth must be > 0, got {h}")));
    }
    if a.len() != b.len() {
        return Err(Error::invalid(
            "kernel input",
            format!("length {} vs {}", a.len(), b.len()),
        ));
    }
    let h2 = h * h;
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let k = (-sq / (2.0 * h2)).exp();
    let grad = a.iter().zip(b).map(|(x, y)| -(x - y) / h2 * k).collect();
    Ok((k, grad))
}

/// `sqrt(median / (2 ln(N + 1)))` over the off-diagonal squared distances,
/// floored at [`BANDWIDTH_FLOOR`].
pub fn median_bandwidth(pairwise_sq_dists: &[Vec<f64>]) -> f64 {
    let n = pairwise_sq_dists.len();
    if n < 2 {
        return BANDWIDTH_FLOOR;
    }
    let mut off: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| pairwise_sq_dists[i][j])
        .collect();
    off.sort_by(f64::total_cmp);
    let m = off.len();
    let median = if m % 2 == 1 {
        off[m / 2]
    } else {
        0.5 * (off[m / 2 - 1] + off[m / 2])
    };
    (median / (2.0 * ((n + 1) as f64).ln()))
        .sqrt()
        .max(BANDWIDTH_FLOOR)
}

pub fn pairwise_sq_dists(points: &[&[f64]]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = points[i]
                .iter()
                .zip(points[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    out
}

fn expect_kind(pred: &Prediction, kind: PredictionKind) -> Result<()> {
    if pred.kind != kind {
        return Err(Error::KindMismatch {
            expected: kind,
            actual: pred.kind,
        });
    }
    Ok(())
}

/// `w (eps_pred - eps)`.
pub fn sds_gradient(eps_pred: &Prediction, eps: &NoiseTensor, w: f64) -> Result<FrameSequence> {
    expect_kind(eps_pred, PredictionKind::Epsilon)?;
    eps_pred.value.zip_map(eps, |p, e| w * (p - e))
}

/// `w (v_pred - (eps - x))`.
pub fn flow_sds_gradient(
    v_pred: &Prediction,
    eps: &NoiseTensor,
    x: &FrameSequence,
    w: f64,
) -> Result<FrameSequence> {
    expect_kind(v_pred, PredictionKind::Velocity)?;
    x.ensure_same_shape(eps)?;
    let target = eps.zip_map(x, |e, z| e - z)?;
    v_pred.value.zip_map(&target, |v, t| w * (v - t))
}

/// Kernel-coupled distillation gradient for each of `N` chunks:
///
/// ```text
/// grad_i = (w / N) sum_j [ k(x_j, x_i) (pred_i - target_i) + grad_{x_j} k(x_j, x_i) ]
/// ```
///
/// `noisy` holds the noised chunks the kernel compares. `targets` are the
/// regression targets of the predictions: the base noise for epsilon models,
/// `eps - x` for velocity models (see [`flow_csd_gradients`]).
pub fn csd_gradients(
    noisy: &[FrameSequence],
    preds: &[Prediction],
    targets: &[NoiseTensor],
    w: f64,
    kernel: KernelParams,
) -> Result<Vec<FrameSequence>> {
    let n = noisy.len();
    if n == 0 {
        return Err(Error::invalid("chunks", "csd needs at least one chunk"));
    }
    if preds.len() != n || targets.len() != n {
        return Err(Error::invalid(
            "chunks",
            format!("{n} chunks, {} predictions, {} targets", preds.len(), targets.len()),
        ));
    }
    let kind = preds[0].kind;
    for ((x, p), e) in noisy.iter().zip(preds).zip(targets) {
        expect_kind(p, kind)?;
        noisy[0].ensure_same_shape(x)?;
        x.ensure_same_shape(&p.value)?;
        x.ensure_same_shape(e)?;
    }

    let flat: Vec<&[f64]> = noisy.iter().map(FrameSequence::as_slice).collect();
    let h = match kernel {
        KernelParams::MedianHeuristic => median_bandwidth(&pairwise_sq_dists(&flat)),
        KernelParams::Fixed(h) => h,
    };
    let scale = w / n as f64;

    let mut grads = Vec::with_capacity(n);
    for i in 0..n {
        let residual: Vec<f64> = preds[i]
            .value
            .as_slice()
            .iter()
            .zip(targets[i].as_slice())
            .map(|(p, e)| p - e)
            .collect();
        let mut acc = vec![0.0; residual.len()];
        for xj in &flat {
            let (k, grad_k) = rbf_kernel(xj, flat[i], h)?;
            for ((a, r), g) in acc.iter_mut().zip(&residual).zip(&grad_k) {
                *a += k * r + g;
            }
        }
        acc.iter_mut().for_each(|a| *a *= scale);
        grads.push(FrameSequence::from_vec(
            noisy[i].frames(),
            noisy[i].dim(),
            acc,
        )?);
    }
    Ok(grads)
}

/// [`csd_gradients`] for velocity predictions, with targets `eps_i - x_i`.
pub fn flow_csd_gradients(
    noisy: &[FrameSequence],
    preds: &[Prediction],
    eps: &[NoiseTensor],
    clean: &[FrameSequence],
    w: f64,
    kernel: KernelParams,
) -> Result<Vec<FrameSequence>> {
    if eps.len() != clean.len() {
        return Err(Error::invalid("chunks", "one clean chunk per noise chunk"));
    }
    let targets = eps
        .iter()
        .zip(clean)
        .map(|(e, x)| e.zip_map(x, |a, b| a - b))
        .collect::<Result<Vec<_>>>()?;
    for p in preds {
        expect_kind(p, PredictionKind::Velocity)?;
    }
    csd_gradients(noisy, preds, &targets, w, kernel)
}
