//! Multi-scale feature fusion and restoration.
//!
//! Fusion runs a cascade over the pyramid, largest layer first:
//!
//! ```text
//! s_0 = L_0 -> block          (spatial /2)
//! s_k = concat(s_{k-1}, L_k) -> block
//! ```
//!
//! so the fused tensor is half the size of the smallest layer. The encoding
//! block is pluggable through [`Reducer`]. Two deterministic reducers ship:
//!
//! * [`SpaceToDepth`]: each 2x2 block becomes 4 channels. Lossless.
//! * [`AvgPool`]: 2x2 mean per channel. Lossy; restored by nearest-neighbour
//!   up-sampling with a half-weight mix of the coarser branch.
//!
//! The fused tensor is then scaled per channel by a [`GainVector`]; restoration
//! divides by it first.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::tensor::{check_pyramid, FeatureLayer, LayerShape, TensorShapeDescriptor};

#[derive(Debug, Error, PartialEq)]
pub enum ReductionError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("gain vector has {got} multipliers, fused tensor has {expected} channels")]
    GainLength { expected: usize, got: usize },
    #[error("invalid gain vector: {0}")]
    InvalidGain(String),
    #[error("unknown gain index {0}")]
    UnknownGainIndex(u16),
    #[error("reducer mismatch: {0}")]
    ReducerMismatch(String),
    #[error("unknown reducer id {0}")]
    UnknownReducer(u8),
}

fn shape_err(msg: impl Into<String>) -> ReductionError {
    ReductionError::Shape(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ReducerId {
    S2d = 0,
    AvgPool = 1,
}

impl ReducerId {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, ReductionError> {
        match code {
            0 => Ok(ReducerId::S2d),
            1 => Ok(ReducerId::AvgPool),
            other => Err(ReductionError::UnknownReducer(other)),
        }
    }

    pub fn reducer(self) -> &'static dyn Reducer {
        match self {
            ReducerId::S2d => &SpaceToDepth,
            ReducerId::AvgPool => &AvgPool,
        }
    }
}

impl fmt::Display for ReducerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReducerId::S2d => "s2d",
            ReducerId::AvgPool => "avgpool",
        })
    }
}

impl FromStr for ReducerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "s2d" | "space_to_depth" => Ok(ReducerId::S2d),
            "avgpool" | "avg_pool" => Ok(ReducerId::AvgPool),
            _ => Err(format!("unknown reducer '{s}' (expected s2d or avgpool)")),
        }
    }
}

/// An encoding-block cascade and its inverse. Implementations must be
/// deterministic; learned reducers can slot in behind the same surface.
pub trait Reducer: Send + Sync {
    fn id(&self) -> ReducerId;

    /// Output shape of the cascade for the given pyramid.
    fn fused_shape(&self, layers: &[LayerShape]) -> Result<LayerShape, ReductionError>;

    fn fuse_layers(&self, layers: &[FeatureLayer]) -> Result<FeatureLayer, ReductionError>;

    fn restore_layers(
        &self,
        fused: &FeatureLayer,
        shapes: &[LayerShape],
    ) -> Result<Vec<FeatureLayer>, ReductionError>;
}

/// Shape checks common to every reducer; returns the fused spatial size.
fn fused_spatial(layers: &[LayerShape]) -> Result<(usize, usize), ReductionError> {
    let last = layers
        .last()
        .ok_or_else(|| shape_err("no layers to fuse"))?;
    check_pyramid(layers).map_err(|e| shape_err(e.to_string()))?;
    if layers.iter().any(|s| s.channels == 0) {
        return Err(shape_err("zero-channel layer"));
    }
    if last.height % 2 != 0 || last.width % 2 != 0 || last.height == 0 || last.width == 0 {
        return Err(shape_err(format!(
            "smallest layer {last} must have even, non-zero spatial dims"
        )));
    }
    Ok((last.height / 2, last.width / 2))
}

/// Channel count of the cascade state after each layer.
fn cascade_channels(layers: &[LayerShape], per_block: usize) -> Vec<usize> {
    let mut acc = 0usize;
    layers
        .iter()
        .map(|s| {
            acc = (acc + s.channels) * per_block;
            acc
        })
        .collect()
}

fn concat(state: Option<FeatureLayer>, layer: &FeatureLayer) -> (Vec<f32>, usize) {
    match state {
        None => (layer.data().to_vec(), layer.channels()),
        Some(s) => {
            let c = s.channels() + layer.channels();
            let mut d = s.into_data();
            d.extend_from_slice(layer.data());
            (d, c)
        }
    }
}

/// Rearranges each 2x2 spatial block into 4 channels: output channel
/// `4c + 2dy + dx` holds input `(c, 2y + dy, 2x + dx)`.
pub fn space_to_depth(data: &[f32], channels: usize, height: usize, width: usize) -> Vec<f32> {
    let (oh, ow) = (height / 2, width / 2);
    let mut out = vec![0f32; data.len()];
    for c in 0..channels {
        for dy in 0..2 {
            for dx in 0..2 {
                let oc = 4 * c + 2 * dy + dx;
                for y in 0..oh {
                    let src = c * height * width + (2 * y + dy) * width + dx;
                    let dst = oc * oh * ow + y * ow;
                    for x in 0..ow {
                        out[dst + x] = data[src + 2 * x];
                    }
                }
            }
        }
    }
    out
}

/// Inverse of [`space_to_depth`]; `channels` is the input (deep) channel count.
pub fn depth_to_space(data: &[f32], channels: usize, height: usize, width: usize) -> Vec<f32> {
    let (oh, ow) = (2 * height, 2 * width);
    let mut out = vec![0f32; data.len()];
    for ic in 0..channels {
        let (c, dy, dx) = (ic / 4, (ic % 4) / 2, ic % 2);
        for y in 0..height {
            let src = ic * height * width + y * width;
            let dst = c * oh * ow + (2 * y + dy) * ow + dx;
            for x in 0..width {
                out[dst + 2 * x] = data[src + x];
            }
        }
    }
    out
}

/// 2x2 mean per channel, accumulated in f64.
pub fn avg_pool2(data: &[f32], channels: usize, height: usize, width: usize) -> Vec<f32> {
    let (oh, ow) = (height / 2, width / 2);
    let mut out = Vec::with_capacity(channels * oh * ow);
    for c in 0..channels {
        let plane = &data[c * height * width..(c + 1) * height * width];
        for y in 0..oh {
            let r0 = &plane[2 * y * width..(2 * y + 1) * width];
            let r1 = &plane[(2 * y + 1) * width..(2 * y + 2) * width];
            for x in 0..ow {
                let s = r0[2 * x] as f64
                    + r0[2 * x + 1] as f64
                    + r1[2 * x] as f64
                    + r1[2 * x + 1] as f64;
                out.push((s * 0.25) as f32);
            }
        }
    }
    out
}

/// Nearest-neighbour up-sampling of one plane by an integer factor.
fn upsample_nearest(plane: &[f32], height: usize, width: usize, factor: usize) -> Vec<f32> {
    let ow = width * factor;
    let mut out = Vec::with_capacity(plane.len() * factor * factor);
    for y in 0..height * factor {
        let row = &plane[(y / factor) * width..(y / factor + 1) * width];
        out.extend((0..ow).map(|x| row[x / factor]));
    }
    out
}

fn check_fused(
    fused: &FeatureLayer,
    expected: LayerShape,
    id: ReducerId,
) -> Result<(), ReductionError> {
    if fused.shape() != expected {
        return Err(ReductionError::ReducerMismatch(format!(
            "fused tensor {} does not match {id} cascade output {expected}",
            fused.shape()
        )));
    }
    Ok(())
}

fn check_inputs(layers: &[FeatureLayer]) -> Result<(), ReductionError> {
    let shapes: Vec<_> = layers.iter().map(FeatureLayer::shape).collect();
    fused_spatial(&shapes).map(|_| ())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SpaceToDepth;

impl Reducer for SpaceToDepth {
    fn id(&self) -> ReducerId {
        ReducerId::S2d
    }

    fn fused_shape(&self, layers: &[LayerShape]) -> Result<LayerShape, ReductionError> {
        let (h, w) = fused_spatial(layers)?;
        let c = *cascade_channels(layers, 4).last().unwrap();
        Ok(LayerShape::new(c, h, w))
    }

    fn fuse_layers(&self, layers: &[FeatureLayer]) -> Result<FeatureLayer, ReductionError> {
        check_inputs(layers)?;
        let mut state: Option<FeatureLayer> = None;
        for layer in layers {
            let (h, w) = (layer.height(), layer.width());
            let (joined, c) = concat(state.take(), layer);
            let data = space_to_depth(&joined, c, h, w);
            state = Some(FeatureLayer::from_parts(
                LayerShape::new(4 * c, h / 2, w / 2),
                data,
            ));
        }
        Ok(state.unwrap())
    }

    fn restore_layers(
        &self,
        fused: &FeatureLayer,
        shapes: &[LayerShape],
    ) -> Result<Vec<FeatureLayer>, ReductionError> {
        check_fused(fused, self.fused_shape(shapes)?, self.id())?;
        let counts = cascade_channels(shapes, 4);
        let mut out = vec![None; shapes.len()];
        let mut state = fused.data().to_vec();
        for k in (0..shapes.len()).rev() {
            let s = shapes[k];
            let expanded = depth_to_space(&state, counts[k], s.height / 2, s.width / 2);
            let prev = counts[k] / 4 - s.channels;
            let split = prev * s.plane_len();
            out[k] = Some(FeatureLayer::from_parts(s, expanded[split..].to_vec()));
            state = expanded[..split].to_vec();
        }
        Ok(out.into_iter().map(Option::unwrap).collect())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AvgPool;

impl Reducer for AvgPool {
    fn id(&self) -> ReducerId {
        ReducerId::AvgPool
    }

    fn fused_shape(&self, layers: &[LayerShape]) -> Result<LayerShape, ReductionError> {
        let (h, w) = fused_spatial(layers)?;
        let c = layers.iter().map(|s| s.channels).sum();
        Ok(LayerShape::new(c, h, w))
    }

    fn fuse_layers(&self, layers: &[FeatureLayer]) -> Result<FeatureLayer, ReductionError> {
        check_inputs(layers)?;
        let mut state: Option<FeatureLayer> = None;
        for layer in layers {
            let (h, w) = (layer.height(), layer.width());
            let (joined, c) = concat(state.take(), layer);
            let data = avg_pool2(&joined, c, h, w);
            state = Some(FeatureLayer::from_parts(
                LayerShape::new(c, h / 2, w / 2),
                data,
            ));
        }
        Ok(state.unwrap())
    }

    fn restore_layers(
        &self,
        fused: &FeatureLayer,
        shapes: &[LayerShape],
    ) -> Result<Vec<FeatureLayer>, ReductionError> {
        check_fused(fused, self.fused_shape(shapes)?, self.id())?;
        let (fh, fw) = (fused.height(), fused.width());

        // Channels of layer k sit contiguously in the fused tensor, in layer order.
        let mut branches = Vec::with_capacity(shapes.len());
        let mut channel = 0;
        for s in shapes {
            let factor = s.height / fh;
            let mut data = Vec::with_capacity(s.len());
            for c in channel..channel + s.channels {
                data.extend(upsample_nearest(fused.plane(c), fh, fw, factor));
            }
            channel += s.channels;
            branches.push(data);
        }

        // Feature mixing: fold the mean-centred coarse branch into the next
        // finer one at half weight. Centring keeps per-channel means and
        // constant inputs intact.
        let mut mixed = branches.clone();
        for k in 0..shapes.len().saturating_sub(1) {
            let (fine, coarse) = (shapes[k], shapes[k + 1]);
            for c in 0..fine.channels {
                let cc = c % coarse.channels;
                let cplane =
                    &branches[k + 1][cc * coarse.plane_len()..(cc + 1) * coarse.plane_len()];
                let mean = cplane.iter().map(|&v| v as f64).sum::<f64>() / cplane.len() as f64;
                let up = upsample_nearest(cplane, coarse.height, coarse.width, 2);
                let fplane = &mut mixed[k][c * fine.plane_len()..(c + 1) * fine.plane_len()];
                for (f, u) in fplane.iter_mut().zip(up) {
                    *f = (*f as f64 + 0.5 * (u as f64 - mean)) as f32;
                }
            }
        }

        Ok(shapes
            .iter()
            .zip(mixed)
            .map(|(s, d)| FeatureLayer::from_parts(*s, d))
            .collect())
    }
}

/// Per-channel positive multipliers applied to the fused tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GainVector {
    index: u16,
    multipliers: Vec<f32>,
}

impl GainVector {
    pub fn new(index: u16, multipliers: Vec<f32>) -> Result<Self, ReductionError> {
        if multipliers.is_empty() {
            return Err(ReductionError::InvalidGain("no multipliers".into()));
        }
        if let Some(m) = multipliers.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(ReductionError::InvalidGain(format!(
                "multiplier {m} must be finite and > 0"
            )));
        }
        Ok(GainVector { index, multipliers })
    }

    pub fn unit(index: u16, channels: usize) -> Self {
        GainVector {
            index,
            multipliers: vec![1.0; channels],
        }
    }

    pub fn index(&self) -> u16 {
        self.index
    }

    pub fn multipliers(&self) -> &[f32] {
        &self.multipliers
    }

    fn check_len(&self, channels: usize) -> Result<(), ReductionError> {
        if self.multipliers.len() != channels {
            return Err(ReductionError::GainLength {
                expected: channels,
                got: self.multipliers.len(),
            });
        }
        Ok(())
    }
}

/// Gain vectors indexed by quality level. Index 0 defaults to unit gain
/// when the table has no entry for it.
///
/// Text form, one entry per line, `#` starts a comment:
///
/// ```text
/// 0: 1.0, 1.0, 1.0, 1.0
/// 3: 2.0, 1.5, 1.0, 0.5
/// ```
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GainTable {
    entries: BTreeMap<u16, Vec<f32>>,
}

impl GainTable {
    pub fn insert(&mut self, index: u16, multipliers: Vec<f32>) -> Result<(), ReductionError> {
        let g = GainVector::new(index, multipliers)?;
        self.entries.insert(index, g.multipliers);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ReductionError> {
        let mut table = GainTable::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad =
                |what: &str| ReductionError::InvalidGain(format!("line {}: {what}", lineno + 1));
            let (idx, values) = line
                .split_once(':')
                .ok_or_else(|| bad("expected '<index>: <m>, ...'"))?;
            let index: u16 = idx.trim().parse().map_err(|_| bad("index is not a u16"))?;
            let multipliers = values
                .split(',')
                .map(|v| v.trim().parse::<f32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad("multiplier is not a number"))?;
            if table.entries.contains_key(&index) {
                return Err(bad("duplicate index"));
            }
            table
                .insert(index, multipliers)
                .map_err(|e| bad(&e.to_string()))?;
        }
        Ok(table)
    }

    pub fn resolve(&self, index: u16, channels: usize) -> Result<GainVector, ReductionError> {
        let g = match self.entries.get(&index) {
            Some(m) => GainVector {
                index,
                multipliers: m.clone(),
            },
            None if index == 0 => GainVector::unit(0, channels),
            None => return Err(ReductionError::UnknownGainIndex(index)),
        };
        g.check_len(channels)?;
        Ok(g)
    }
}

/// Reduced tensor with gain applied.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedTensor {
    pub layer: FeatureLayer,
    pub gain_index: u16,
    pub reducer: ReducerId,
}

impl FusedTensor {
    pub fn shape(&self) -> LayerShape {
        self.layer.shape()
    }
}

fn scale_channels(layer: &FeatureLayer, gain: &GainVector, invert: bool) -> FeatureLayer {
    let n = layer.shape().plane_len();
    let data = layer
        .data()
        .chunks_exact(n)
        .zip(&gain.multipliers)
        .flat_map(|(plane, &g)| {
            plane
                .iter()
                .map(move |&v| if invert { v / g } else { v * g })
        })
        .collect();
    FeatureLayer::from_parts(layer.shape(), data)
}

/// Fuses one frame's pyramid into a single tensor and applies the gain.
pub fn fuse(
    frame_layers: &[FeatureLayer],
    reducer: ReducerId,
    gain: &GainVector,
) -> Result<FusedTensor, ReductionError> {
    let r = reducer.reducer();
    let shapes: Vec<_> = frame_layers.iter().map(FeatureLayer::shape).collect();
    gain.check_len(r.fused_shape(&shapes)?.channels)?;
    let fused = r.fuse_layers(frame_layers)?;
    let layer = scale_channels(&fused, gain, false);
    if layer.data().iter().any(|v| !v.is_finite()) {
        return Err(shape_err("gain produced non-finite fused values"));
    }
    Ok(FusedTensor {
        layer,
        gain_index: gain.index,
        reducer,
    })
}

/// Divides out the gain and expands the fused tensor back into the pyramid.
pub fn restore(
    fused: &FusedTensor,
    reducer: ReducerId,
    gain: &GainVector,
    shapes: &TensorShapeDescriptor,
) -> Result<Vec<FeatureLayer>, ReductionError> {
    if fused.reducer != reducer {
        return Err(ReductionError::ReducerMismatch(format!(
            "tensor was fused with {}, restoring with {reducer}",
            fused.reducer
        )));
    }
    if fused.gain_index != gain.index {
        return Err(ReductionError::InvalidGain(format!(
            "tensor used gain index {}, got vector {}",
            fused.gain_index, gain.index
        )));
    }
    gain.check_len(fused.layer.channels())?;
    let unscaled = scale_channels(&fused.layer, gain, true);
    reducer.reducer().restore_layers(&unscaled, &shapes.layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_layer(c: usize, h: usize, w: usize, offset: f32) -> FeatureLayer {
        FeatureLayer::from_fn(LayerShape::new(c, h, w), |i| offset + i as f32).unwrap()
    }

    fn desc(layers: &[FeatureLayer]) -> TensorShapeDescriptor {
        TensorShapeDescriptor::new(layers.iter().map(FeatureLayer::shape).collect(), 1, false)
            .unwrap()
    }

    #[test]
    fn s2d_single_layer_by_hand() {
        // Input plane (row-major 4x4):
        //  0  1  2  3
        //  4  5  6  7
        //  8  9 10 11
        // 12 13 14 15
        let l = seq_layer(1, 4, 4, 0.0);
        let f = fuse(&[l], ReducerId::S2d, &GainVector::unit(0, 4)).unwrap();
        assert_eq!(f.shape(), LayerShape::new(4, 2, 2));
        #[rustfmt::skip]
        let expected = [
            0.0, 2.0, 8.0, 10.0,   // (dy,dx) = (0,0)
            1.0, 3.0, 9.0, 11.0,   // (0,1)
            4.0, 6.0, 12.0, 14.0,  // (1,0)
            5.0, 7.0, 13.0, 15.0,  // (1,1)
        ];
        assert_eq!(f.layer.data(), &expected);
    }

    #[test]
    fn s2d_two_layer_channel_arithmetic() {
        let layers = [seq_layer(1, 4, 4, 0.0), seq_layer(1, 2, 2, 100.0)];
        let g = GainVector::unit(0, 20);
        let f = fuse(&layers, ReducerId::S2d, &g).unwrap();
        assert_eq!(f.shape(), LayerShape::new(20, 1, 1));
        let back = restore(&f, ReducerId::S2d, &g, &desc(&layers)).unwrap();
        assert_eq!(back, layers);
    }

    #[test]
    fn avgpool_constant() {
        let l = FeatureLayer::filled(LayerShape::new(3, 4, 6), 0.1).unwrap();
        let f = fuse(
            std::slice::from_ref(&l),
            ReducerId::AvgPool,
            &GainVector::unit(0, 3),
        )
        .unwrap();
        assert_eq!(f.shape(), LayerShape::new(3, 2, 3));
        assert!(f.layer.data().iter().all(|&v| v == 0.1));
    }

    #[test]
    fn avgpool_restores_constants() {
        let layers = vec![
            FeatureLayer::filled(LayerShape::new(2, 8, 8), 0.3).unwrap(),
            FeatureLayer::filled(LayerShape::new(3, 4, 4), -1.7).unwrap(),
            FeatureLayer::filled(LayerShape::new(1, 2, 2), 5.0).unwrap(),
        ];
        let g = GainVector::unit(0, 6);
        let f = fuse(&layers, ReducerId::AvgPool, &g).unwrap();
        assert_eq!(f.shape(), LayerShape::new(6, 1, 1));
        let back = restore(&f, ReducerId::AvgPool, &g, &desc(&layers)).unwrap();
        assert_eq!(back, layers);
    }

    #[test]
    fn gain_two_cancels() {
        let l = seq_layer(1, 4, 4, -3.3);
        let g = GainVector::new(5, vec![1.0, 2.0, 1.0, 1.0]).unwrap();
        let f = fuse(std::slice::from_ref(&l), ReducerId::S2d, &g).unwrap();
        assert_eq!(f.layer.plane(1)[0], 2.0 * l.data()[1]);
        let back = restore(&f, ReducerId::S2d, &g, &desc(std::slice::from_ref(&l))).unwrap();
        assert_eq!(back[0], l);
    }

    #[test]
    fn error_paths() {
        let l = seq_layer(1, 4, 4, 0.0);
        assert!(matches!(
            fuse(
                std::slice::from_ref(&l),
                ReducerId::S2d,
                &GainVector::unit(0, 3)
            ),
            Err(ReductionError::GainLength {
                expected: 4,
                got: 3
            })
        ));
        let odd = seq_layer(1, 3, 4, 0.0);
        assert!(matches!(
            fuse(&[odd], ReducerId::S2d, &GainVector::unit(0, 4)),
            Err(ReductionError::Shape(_))
        ));
        let f = fuse(
            std::slice::from_ref(&l),
            ReducerId::S2d,
            &GainVector::unit(0, 4),
        )
        .unwrap();
        assert!(matches!(
            restore(
                &f,
                ReducerId::AvgPool,
                &GainVector::unit(0, 4),
                &desc(std::slice::from_ref(&l))
            ),
            Err(ReductionError::ReducerMismatch(_))
        ));
        // A tensor relabelled to the other reducer fails the shape check.
        let relabelled = FusedTensor {
            reducer: ReducerId::AvgPool,
            ..f
        };
        assert!(matches!(
            restore(
                &relabelled,
                ReducerId::AvgPool,
                &GainVector::unit(0, 4),
                &desc(&[l])
            ),
            Err(ReductionError::ReducerMismatch(_))
        ));
        assert!(GainVector::new(0, vec![1.0, 0.0]).is_err());
        assert!(GainVector::new(0, vec![-1.0]).is_err());
    }

    #[test]
    fn gain_table_text() {
        let t = GainTable::parse("# gains\n0: 1, 1\n2: 2.0, 0.5 # half\n").unwrap();
        assert_eq!(t.resolve(2, 2).unwrap().multipliers(), &[2.0, 0.5]);
        assert!(matches!(
            t.resolve(2, 3),
            Err(ReductionError::GainLength { .. })
        ));
        assert!(matches!(
            t.resolve(7, 2),
            Err(ReductionError::UnknownGainIndex(7))
        ));
        assert_eq!(
            GainTable::default().resolve(0, 3).unwrap(),
            GainVector::unit(0, 3)
        );
        assert!(GainTable::parse("1: 1.0, nope").is_err());
        assert!(GainTable::parse("1: 1.0\n1: 2.0").is_err());
        assert!(GainTable::parse("1 1.0").is_err());
    }

    #[test]
    fn reducer_codes_round_trip() {
        for id in [ReducerId::S2d, ReducerId::AvgPool] {
            assert_eq!(ReducerId::from_code(id.code()).unwrap(), id);
            assert_eq!(id.to_string().parse::<ReducerId>().unwrap(), id);
        }
        assert_eq!(
            ReducerId::from_code(9),
            Err(ReductionError::UnknownReducer(9))
        );
    }
}
