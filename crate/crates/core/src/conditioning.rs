//! Vector stand-ins for a structured prompt.
//!
//! The latent coordinates split into a shared block and a local block. Every
//! chunk target agrees on the shared block (the scenario-wide part) and
//! carries its own values on the local block (the per-chunk part).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::denoiser::GaussianMixtureWorld;
use crate::tensor::FrameSequence;
use crate::{Error, Result};

/// Minimum distance between any two local targets on the local block.
pub const MIN_LOCAL_SEPARATION: f64 = 0.25;

const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredCondition {
    /// Mixture component this condition resolves to; `None` for the null
    /// condition.
    pub id: Option<usize>,
    pub global_vec: Vec<f64>,
    pub local_vec: Vec<f64>,
    pub is_null: bool,
}

impl StructuredCondition {
    pub fn for_id(id: usize, global_vec: Vec<f64>, local_vec: Vec<f64>) -> Self {
        Self {
            id: Some(id),
            global_vec,
            local_vec,
            is_null: false,
        }
    }
}

/// The unconditional branch used by classifier-free guidance.
pub fn null_condition() -> StructuredCondition {
    StructuredCondition {
        id: None,
        global_vec: Vec::new(),
        local_vec: Vec::new(),
        is_null: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub num_chunks: usize,
    pub dim: usize,
    pub seed: u64,
    pub shared_coords: Vec<usize>,
    pub local_coords: Vec<usize>,
    /// Length `dim`; zero outside `shared_coords`.
    pub shared_target: Vec<f64>,
    /// One length-`dim` vector per chunk; zero outside `local_coords`.
    pub local_targets: Vec<Vec<f64>>,
    /// Smallest pairwise local-block distance among the drawn targets.
    pub local_separation: Option<f64>,
}

fn unit_block<R: rand::Rng>(dim: usize, coords: &[usize], rng: &mut R) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    loop {
        for &c in coords {
            v[c] = rng.sample(rand_distr::StandardNormal);
        }
        let norm = coords.iter().map(|&c| v[c] * v[c]).sum::<f64>().sqrt();
        if norm > 1e-12 {
            coords.iter().for_each(|&c| v[c] /= norm);
            return v;
        }
    }
}

fn block_distance(a: &[f64], b: &[f64], coords: &[usize]) -> f64 {
    coords
        .iter()
        .map(|&c| (a[c] - b[c]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Deterministic scenario for `num_chunks` chunks in `dim` coordinates.
///
/// The first `round(dim * shared_fraction)` coordinates form the shared
/// block. Targets on each block are standard normal draws scaled to unit
/// norm; local targets are redrawn until they sit at least
/// [`MIN_LOCAL_SEPARATION`] apart.
pub fn build_scenario(
    num_chunks: usize,
    dim: usize,
    shared_fraction: f64,
    seed: u64,
) -> Result<Scenario> {
    if num_chunks < 1 {
        return Err(Error::invalid("num_chunks", "must be >= 1"));
    }
    if !(shared_fraction > 0.0 && shared_fraction < 1.0) {
        return Err(Error::invalid(
            "shared_fraction",
            format!("must lie in (0, 1), got {shared_fraction}"),
        ));
    }
    let shared = (dim as f64 * shared_fraction).round() as usize;
    if shared == 0 || shared >= dim {
        return Err(Error::invalid(
            "dim",
            format!("{dim} coordinates cannot split at fraction {shared_fraction}"),
        ));
    }
    let shared_coords: Vec<usize> = (0..shared).collect();
    let local_coords: Vec<usize> = (shared..dim).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared_target = unit_block(dim, &shared_coords, &mut rng);
    let mut local_targets: Vec<Vec<f64>> = Vec::with_capacity(num_chunks);
    while local_targets.len() < num_chunks {
        let mut tries = 0;
        let candidate = loop {
            let v = unit_block(dim, &local_coords, &mut rng);
            if local_targets
                .iter()
                .all(|u| block_distance(u, &v, &local_coords) >= MIN_LOCAL_SEPARATION)
            {
                break v;
            }
            tries += 1;
            if tries >= MAX_REJECTIONS {
                return Err(Error::invalid(
                    "num_chunks",
                    format!(
                        "cannot place {num_chunks} local targets {MIN_LOCAL_SEPARATION} apart in {} coordinates",
                        local_coords.len()
                    ),
                ));
            }
        };
        local_targets.push(candidate);
    }

    let mut separation: Option<f64> = None;
    for i in 0..num_chunks {
        for j in i + 1..num_chunks {
            let d = block_distance(&local_targets[i], &local_targets[j], &local_coords);
            separation = Some(separation.map_or(d, |s: f64| s.min(d)));
        }
    }

    Ok(Scenario {
        num_chunks,
        dim,
        seed,
        shared_coords,
        local_coords,
        shared_target,
        local_targets,
        local_separation: separation,
    })
}

impl Scenario {
    /// Mixture target of chunk `i`: shared block from the global target,
    /// local block from the chunk's own target.
    pub fn target(&self, i: usize) -> Result<Vec<f64>> {
        let local = self.local_targets.get(i).ok_or(Error::ChunkOutOfRange {
            index: i,
            count: self.num_chunks,
        })?;
        let mut mu = vec![0.0; self.dim];
        for &c in &self.shared_coords {
            mu[c] = self.shared_target[c];
        }
        for &c in &self.local_coords {
            mu[c] = local[c];
        }
        Ok(mu)
    }

    pub fn targets(&self) -> Vec<Vec<f64>> {
        (0..self.num_chunks)
            .map(|i| self.target(i).expect("index in range"))
            .collect()
    }

    /// Reassembles the full target vector carried by a condition.
    pub fn compose(&self, condition: &StructuredCondition) -> Result<Vec<f64>> {
        if condition.is_null
            || condition.global_vec.len() != self.shared_coords.len()
            || condition.local_vec.len() != self.local_coords.len()
        {
            return Err(Error::UnknownCondition(condition.id));
        }
        let mut mu = vec![0.0; self.dim];
        for (&c, &v) in self.shared_coords.iter().zip(&condition.global_vec) {
            mu[c] = v;
        }
        for (&c, &v) in self.local_coords.iter().zip(&condition.local_vec) {
            mu[c] = v;
        }
        Ok(mu)
    }

    /// Mixture world with one equally weighted component per chunk target.
    pub fn world(&self, sigma0: f64) -> Result<GaussianMixtureWorld> {
        GaussianMixtureWorld::uniform(self.targets(), sigma0)
    }

    /// `frames` copies of chunk `i`'s target.
    pub fn target_sequence(&self, i: usize, frames: usize) -> Result<FrameSequence> {
        Ok(FrameSequence::repeat_frame(frames, &self.target(i)?))
    }
}

pub fn condition_for_chunk(scenario: &Scenario, i: usize) -> Result<StructuredCondition> {
    let local = scenario
        .local_targets
        .get(i)
        .ok_or(Error::ChunkOutOfRange {
            index: i,
            count: scenario.num_chunks,
        })?;
    Ok(StructuredCondition::for_id(
        i,
        scenario
            .shared_coords
            .iter()
            .map(|&c| scenario.shared_target[c])
            .collect(),
        scenario.local_coords.iter().map(|&c| local[c]).collect(),
    ))
}

/// Conditions for every chunk, in chunk order.
pub fn chunk_conditions(scenario: &Scenario) -> Vec<StructuredCondition> {
    (0..scenario.num_chunks)
        .map(|i| condition_for_chunk(scenario, i).expect("index in range"))
        .collect()
}
