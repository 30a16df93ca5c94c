//! Temporal 2x down-sampling and midpoint up-sampling.
//!
//! Down-sampling keeps frames 0, 2, 4, ... (an artifact convention). The
//! decoder rebuilds each dropped frame from its two kept neighbours. Both
//! neighbours sit on the same spatial grid, so trilinear interpolation at the
//! temporal midpoint is the elementwise mean. A dropped trailing frame (even
//! original count) has one neighbour and is a copy of it.

use thiserror::Error;

use crate::tensor::{FeatureLayer, FeatureTensorSet};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("temporal info expects {expected} frames for original count {original}, got {got}")]
pub struct MismatchError {
    pub original: usize,
    pub expected: usize,
    pub got: usize,
}

/// What the decoder needs to undo down-sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalInfo {
    pub original_frames: usize,
    pub enabled: bool,
}

impl TemporalInfo {
    /// Number of frames actually coded.
    pub fn kept_frames(&self) -> usize {
        if self.enabled {
            self.original_frames.div_ceil(2)
        } else {
            self.original_frames
        }
    }

    /// GOP length to hand the inner codec: 8 normally, 4 after 2x temporal sampling.
    pub fn gop_hint(&self) -> u16 {
        if self.enabled {
            4
        } else {
            8
        }
    }
}

pub fn temporal_downsample(
    set: &FeatureTensorSet,
    enabled: bool,
) -> (FeatureTensorSet, TemporalInfo) {
    let info = TemporalInfo {
        original_frames: set.frame_count(),
        enabled,
    };
    if !enabled {
        return (set.clone(), info);
    }
    let kept: Vec<_> = set.frames().iter().step_by(2).cloned().collect();
    let out =
        FeatureTensorSet::new(kept, set.frame_rate()).expect("subset of a valid set is valid");
    (out, info)
}

pub fn temporal_upsample(
    set: &FeatureTensorSet,
    info: TemporalInfo,
) -> Result<FeatureTensorSet, MismatchError> {
    let expected = info.kept_frames();
    if set.frame_count() != expected || info.original_frames == 0 {
        return Err(MismatchError {
            original: info.original_frames,
            expected,
            got: set.frame_count(),
        });
    }
    if !info.enabled {
        return Ok(set.clone());
    }
    let kept = set.frames();
    let frames = (0..info.original_frames)
        .map(|i| {
            if i % 2 == 0 {
                kept[i / 2].clone()
            } else if let Some(next) = kept.get(i / 2 + 1) {
                midpoint_frame(&kept[i / 2], next)
            } else {
                kept[i / 2].clone()
            }
        })
        .collect();
    Ok(FeatureTensorSet::new(frames, set.frame_rate()).expect("shapes preserved"))
}

fn midpoint_frame(a: &[FeatureLayer], b: &[FeatureLayer]) -> Vec<FeatureLayer> {
    a.iter()
        .zip(b)
        .map(|(la, lb)| {
            let data = la
                .data()
                .iter()
                .zip(lb.data())
                .map(|(&x, &y)| midpoint(x, y))
                .collect();
            FeatureLayer::from_parts(la.shape(), data)
        })
        .collect()
}

/// Correctly rounded (x + y) / 2 for finite f32; cannot overflow.
fn midpoint(x: f32, y: f32) -> f32 {
    ((x as f64 + y as f64) * 0.5) as f32
}
