//! Divergence and fidelity measures over sampler outputs and traces.

use crate::chunking::{take_chunks, ChunkLayout};
use crate::conditioning::Scenario;
use crate::tensor::FrameSequence;
use crate::trace::SamplerRunTrace;
use crate::{Error, Result};

fn restricted_distance(a: &[f64], b: &[f64], coords: &[usize]) -> f64 {
    coords
        .iter()
        .map(|&c| (a[c] - b[c]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Mean pairwise distance between the chunks' mean frames on `coords`.
/// Zero for fewer than two chunks.
pub fn spread_of_chunks(chunks: &[FrameSequence], coords: &[usize]) -> f64 {
    let means: Vec<Vec<f64>> = chunks.iter().map(FrameSequence::mean_frame).collect();
    let n = means.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += restricted_distance(&means[i], &means[j], coords);
        }
    }
    total / (n * (n - 1) / 2) as f64
}

/// Spread of the per-chunk clean estimates recorded at timestep `t`.
pub fn chunk_spread(trace: &SamplerRunTrace, t: usize, coords: &[usize]) -> Result<f64> {
    let event = trace.predictions_at(t).ok_or(Error::TimestepNotInTrace(t))?;
    Ok(spread_of_chunks(&event.chunks, coords))
}

/// `(t, spread)` at every recorded grid step, in sampling order.
pub fn divergence_profile(trace: &SamplerRunTrace, coords: &[usize]) -> Vec<(usize, f64)> {
    trace
        .stage_events(crate::trace::Stage::Predict)
        .map(|e| (e.timestep, spread_of_chunks(&e.chunks, coords)))
        .collect()
}

/// Per chunk: distance from its mean frame to its target on the local block,
/// relative to the target's local-block norm.
pub fn local_fidelity_error(
    sample: &FrameSequence,
    layout: &ChunkLayout,
    scenario: &Scenario,
) -> Result<Vec<f64>> {
    if layout.num_chunks() != scenario.num_chunks {
        return Err(Error::invalid(
            "scenario",
            format!(
                "{} targets for {} chunks",
                scenario.num_chunks,
                layout.num_chunks()
            ),
        ));
    }
    let coords = &scenario.local_coords;
    take_chunks(sample, layout)?
        .iter()
        .enumerate()
        .map(|(i, chunk)| {
            let mu = scenario.target(i)?;
            let norm = coords.iter().map(|&c| mu[c] * mu[c]).sum::<f64>().sqrt();
            Ok(restricted_distance(&chunk.mean_frame(), &mu, coords) / norm)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditioning::build_scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spread_cases() {
        let a = FrameSequence::repeat_frame(3, &[1.0, 2.0, 3.0]);
        assert_eq!(spread_of_chunks(&[a.clone(), a.clone(), a.clone()], &[0, 1, 2]), 0.0);
        assert_eq!(spread_of_chunks(std::slice::from_ref(&a), &[0]), 0.0);
        let b = FrameSequence::repeat_frame(3, &[4.0, 6.0, -100.0]);
        assert!((spread_of_chunks(&[a.clone(), b.clone()], &[0, 1]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn spread_matches_double_loop_and_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let chunks: Vec<_> = (0..4).map(|_| FrameSequence::standard_normal(5, 4, &mut rng)).collect();
        let coords = [0usize, 2, 3];
        let means: Vec<Vec<f64>> = chunks.iter().map(|c| c.mean_frame()).collect();
        let mut sum = 0.0;
        let mut pairs = 0;
        for i in 0..4 {
            for j in 0..4 {
                if i < j {
                    sum += coords.iter().map(|&c| (means[i][c] - means[j][c]).powi(2)).sum::<f64>().sqrt();
                    pairs += 1;
                }
            }
        }
        let got = spread_of_chunks(&chunks, &coords);
        assert!((got - sum / pairs as f64).abs() < 1e-14);

        let mut perm = chunks.clone();
        perm.reverse();
        perm.swap(0, 2);
        assert!((spread_of_chunks(&perm, &coords) - got).abs() < 1e-14);
        let shift = [0.5, -2.0, 3.0, 7.0];
        let moved: Vec<_> = chunks
            .iter()
            .map(|c| {
                let mut c = c.clone();
                for j in 0..c.frames() {
                    c.frame_mut(j).iter_mut().zip(shift).for_each(|(v, s)| *v += s);
                }
                c
            })
            .collect();
        assert!((spread_of_chunks(&moved, &coords) - got).abs() < 1e-12);
    }

    #[test]
    fn fidelity_cases() {
        let sc = build_scenario(3, 8, 0.5, 5).unwrap();
        let layout = ChunkLayout::new(12, 4, 4).unwrap();
        let mut x = FrameSequence::zeros(12, 8);
        for i in 0..3 {
            let mu = sc.target(i).unwrap();
            for j in 4 * i..4 * i + 4 {
                x.frame_mut(j).copy_from_slice(&mu);
            }
        }
        assert!(local_fidelity_error(&x, &layout, &sc).unwrap().iter().all(|&e| e == 0.0));
        let delta = 0.3;
        let c = sc.local_coords[1];
        for j in 4..8 {
            x.frame_mut(j)[c] += delta;
        }
        let errs = local_fidelity_error(&x, &layout, &sc).unwrap();
        let mu = sc.target(1).unwrap();
        let norm = sc.local_coords.iter().map(|&c| mu[c] * mu[c]).sum::<f64>().sqrt();
        assert!((errs[1] - delta / norm).abs() < 1e-12);
        assert_eq!(errs[0], 0.0);
    }
}
