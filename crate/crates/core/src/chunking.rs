//! Overlapping windows over a long sequence and the averaging fusion that
//! stitches them back together.

use serde::{Deserialize, Serialize};

use crate::tensor::FrameSequence;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkLayout {
    total_frames: usize,
    chunk_len: usize,
    stride: usize,
    starts: Vec<usize>,
}

impl ChunkLayout {
    /// Windows at `0, s, 2s, ...`; the last start is clamped to `F - f` so the
    /// tail is covered without shortening any window.
    pub fn new(total_frames: usize, chunk_len: usize, stride: usize) -> Result<Self> {
        if chunk_len < 1 {
            return Err(Error::invalid("f", "chunk length must be >= 1"));
        }
        if chunk_len > total_frames {
            return Err(Error::invalid(
                "f",
                format!("chunk length {chunk_len} exceeds {total_frames} frames"),
            ));
        }
        if stride < 1 {
            return Err(Error::invalid("s", "stride must be >= 1"));
        }
        if stride > chunk_len {
            return Err(Error::invalid(
                "s",
                format!("stride {stride} > chunk length {chunk_len} leaves uncovered frames"),
            ));
        }
        let last = total_frames - chunk_len;
        let mut starts: Vec<usize> = (0..).map(|k| k * stride).take_while(|&s| s < last).collect();
        starts.push(last);
        Ok(Self {
            total_frames,
            chunk_len,
            stride,
            starts,
        })
    }

    pub fn total_frames(&self) -> usize {
        self.total_frames
    }

    pub fn chunk_len(&self) -> usize {
        self.chunk_len
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn num_chunks(&self) -> usize {
        self.starts.len()
    }

    fn start(&self, i: usize) -> Result<usize> {
        self.starts.get(i).copied().ok_or(Error::ChunkOutOfRange {
            index: i,
            count: self.starts.len(),
        })
    }

    /// Frame range `[start, start + f)` of chunk `i`.
    pub fn frames_of(&self, i: usize) -> Result<std::ops::Range<usize>> {
        let s = self.start(i)?;
        Ok(s..s + self.chunk_len)
    }
}

pub fn make_layout(total_frames: usize, chunk_len: usize, stride: usize) -> Result<ChunkLayout> {
    ChunkLayout::new(total_frames, chunk_len, stride)
}

pub fn take_chunk(seq: &FrameSequence, layout: &ChunkLayout, i: usize) -> Result<FrameSequence> {
    if seq.frames() != layout.total_frames() {
        return Err(Error::ShapeMismatch {
            expected: (layout.total_frames(), seq.dim()),
            actual: seq.shape(),
        });
    }
    seq.slice_frames(layout.start(i)?, layout.chunk_len())
}

/// All chunks in chunk order.
pub fn take_chunks(seq: &FrameSequence, layout: &ChunkLayout) -> Result<Vec<FrameSequence>> {
    (0..layout.num_chunks())
        .map(|i| take_chunk(seq, layout, i))
        .collect()
}

/// Number of chunks covering each frame.
pub fn contribution_counts(layout: &ChunkLayout) -> Vec<usize> {
    subset_counts(layout, 0..layout.num_chunks())
}

fn subset_counts(layout: &ChunkLayout, chunks: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut counts = vec![0; layout.total_frames()];
    for i in chunks {
        let s = layout.starts[i];
        for c in &mut counts[s..s + layout.chunk_len()] {
            *c += 1;
        }
    }
    counts
}

/// Averages overlapping chunk values frame by frame.
pub fn fuse(chunks: &[FrameSequence], layout: &ChunkLayout) -> Result<FrameSequence> {
    if chunks.len() != layout.num_chunks() {
        return Err(Error::invalid(
            "chunks",
            format!("expected {} chunks, got {}", layout.num_chunks(), chunks.len()),
        ));
    }
    let indices: Vec<usize> = (0..chunks.len()).collect();
    fuse_subset(chunks, &indices, layout)
}

/// Fuses the chunks at `indices` only, normalizing by their own coverage.
/// Frames no selected chunk covers come out as zero.
pub fn fuse_subset(
    chunks: &[FrameSequence],
    indices: &[usize],
    layout: &ChunkLayout,
) -> Result<FrameSequence> {
    if chunks.len() != indices.len() {
        return Err(Error::invalid(
            "chunks",
            format!("{} chunks for {} indices", chunks.len(), indices.len()),
        ));
    }
    let dim = chunks
        .first()
        .map(FrameSequence::dim)
        .ok_or_else(|| Error::invalid("chunks", "nothing to fuse"))?;
    for chunk in chunks {
        if chunk.shape() != (layout.chunk_len(), dim) {
            return Err(Error::ShapeMismatch {
                expected: (layout.chunk_len(), dim),
                actual: chunk.shape(),
            });
        }
    }
    for &i in indices {
        layout.start(i)?;
    }
    let counts = subset_counts(layout, indices.iter().copied());
    let mut out = FrameSequence::zeros(layout.total_frames(), dim);
    for (chunk, &i) in chunks.iter().zip(indices) {
        let s = layout.starts[i];
        for k in 0..layout.chunk_len() {
            for (o, v) in out.frame_mut(s + k).iter_mut().zip(chunk.frame(k)) {
                *o += v;
            }
        }
    }
    for (j, &n) in counts.iter().enumerate() {
        if n > 0 {
            let n = n as f64;
            out.frame_mut(j).iter_mut().for_each(|v| *v /= n);
        }
    }
    Ok(out)
}
