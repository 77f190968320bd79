//! Dense `F x D` frame matrices.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// A sequence of `frames` latent vectors of length `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSequence {
    frames: usize,
    dim: usize,
    data: Vec<f64>,
}

/// Noise shares the sample layout; the alias keeps signatures readable.
pub type NoiseTensor = FrameSequence;

impl FrameSequence {
    pub fn zeros(frames: usize, dim: usize) -> Self {
        Self {
            frames,
            dim,
            data: vec![0.0; frames * dim],
        }
    }

    pub fn from_vec(frames: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(Error::invalid("shape", "frames and dim must be >= 1"));
        }
        if data.len() != frames * dim {
            return Err(Error::invalid(
                "data",
                format!("length {} != {frames} x {dim}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frame sequence"));
        }
        Ok(Self { frames, dim, data })
    }

    /// Every frame set to `row`.
    pub fn repeat_frame(frames: usize, row: &[f64]) -> Self {
        let dim = row.len();
        let mut data = Vec::with_capacity(frames * dim);
        for _ in 0..frames {
            data.extend_from_slice(row);
        }
        Self { frames, dim, data }
    }

    /// Draws every entry from a standard normal, row-major order.
    pub fn standard_normal<R: Rng + ?Sized>(frames: usize, dim: usize, rng: &mut R) -> Self {
        let data = (0..frames * dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { frames, dim, data }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn frame(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn frame_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn get(&self, j: usize, c: usize) -> f64 {
        self.data[j * self.dim + c]
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise `f(self, other)`.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            frames: self.frames,
            dim: self.dim,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            frames: self.frames,
            dim: self.dim,
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    /// Contiguous frames `[start, start + len)`.
    pub fn slice_frames(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.frames {
            return Err(Error::invalid(
                "frame range",
                format!("[{start}, {}) exceeds {} frames", start + len, self.frames),
            ));
        }
        Ok(Self {
            frames: len,
            dim: self.dim,
            data: self.data[start * self.dim..(start + len) * self.dim].to_vec(),
        })
    }

    /// Arithmetic mean over frames.
    pub fn mean_frame(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for j in 0..self.frames {
            for (a, v) in acc.iter_mut().zip(self.frame(j)) {
                *a += v;
            }
        }
        let n = self.frames as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Stable 64-bit digest of the exact bit pattern, used to tell noise
    /// draws apart in traces.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update((self.frames as u64).to_le_bytes());
        hasher.update((self.dim as u64).to_le_bytes());
        for v in &self.data {
            hasher.update(v.to_bits().to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(head)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(FrameSequence::from_vec(0, 2, vec![]).is_err());
        assert!(FrameSequence::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(FrameSequence::from_vec(1, 2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn fingerprint_tracks_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = FrameSequence::standard_normal(4, 3, &mut rng);
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.as_mut_slice()[5] += 1e-15;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn mean_frame_and_slice() {
        let x = FrameSequence::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 9.0]).unwrap();
        assert_eq!(x.mean_frame(), vec![3.0, 5.0]);
        let s = x.slice_frames(1, 2).unwrap();
        assert_eq!(s.as_slice(), &[3.0, 4.0, 5.0, 9.0]);
        assert!(x.slice_frames(2, 2).is_err());
    }
}
