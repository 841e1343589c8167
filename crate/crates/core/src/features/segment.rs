use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::skeleton::SkeletonTopology;

#[derive(Debug, Clone, PartialEq)]
pub enum Modality {
    Descriptor,
    /// Each frame holds `3 * topology.num_joints()` coordinates, joint-major.
    Skeleton(SkeletonTopology),
}

/// Ordered per-frame descriptors of uniform dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStream<T> {
    frames: Vec<Vec<T>>,
    modality: Modality,
}

impl<T: Scalar> FrameStream<T> {
    pub fn new(frames: Vec<Vec<T>>, modality: Modality) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::invalid("frame stream is empty"));
        };
        let dim = first.len();
        if let Some(bad) = frames.iter().find(|f| f.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if let Modality::Skeleton(topology) = &modality {
            if dim != 3 * topology.num_joints() {
                return Err(Error::DimensionMismatch {
                    expected: 3 * topology.num_joints(),
                    got: dim,
                });
            }
        }
        Ok(Self { frames, modality })
    }

    pub fn frames(&self) -> &[Vec<T>] {
        &self.frames
    }

    pub fn modality(&self) -> &Modality {
        &self.modality
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Floor-rule boundaries: window `t` (0-based) covers `[⌊t·F/T⌋, ⌊(t+1)·F/T⌋)`.
///
/// Windows can be empty when `frames < segments`.
pub fn segment_bounds(frames: usize, segments: usize) -> Vec<Range<usize>> {
    (0..segments)
        .map(|t| (t * frames / segments)..((t + 1) * frames / segments))
        .collect()
}

/// Split a stream into `segments` uniform windows.
///
/// An empty window (only possible with fewer frames than segments) is filled
/// with the nearest preceding frame, or frame 0 when nothing precedes it.
pub fn segment_uniform<T: Scalar>(
    stream: &FrameStream<T>,
    segments: usize,
) -> Result<Vec<&[Vec<T>]>> {
    if stream.is_empty() {
        return Err(Error::invalid("frame stream is empty"));
    }
    if segments == 0 {
        return Err(Error::invalid("segment count must be at least 1"));
    }
    let frames = stream.frames();
    Ok(segment_bounds(frames.len(), segments)
        .into_iter()
        .map(|r| {
            if r.is_empty() {
                let i = r.start.saturating_sub(1);
                &frames[i..=i]
            } else {
                &frames[r]
            }
        })
        .collect())
}
