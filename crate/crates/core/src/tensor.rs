//! Feature tensors and the FTS1 on-disk format.
//!
//! A [`FeatureTensorSet`] holds one multi-scale feature pyramid per frame.
//! Layers are ordered largest first and each layer is exactly half the
//! height and width of the one before it.
//!
//! FTS1 layout (all fields little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FTS1"
//! 4       2     version (u16, = 1)
//! 6       4     frame count (u32, > 0)
//! 10      2     layer count (u16, > 0)
//! 12      4     frame rate (f32, > 0)
//! 16      10*L  per layer: channels u16, height u32, width u32
//! ...           f32 samples, frame-major, then layer, then channel plane
//! ```

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

pub const FTS_MAGIC: &[u8; 4] = b"FTS1";
pub const FTS_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },
    #[error("shape error: {0}")]
    Shape(String),
}

impl TensorError {
    pub(crate) fn format(offset: usize, msg: impl Into<String>) -> Self {
        TensorError::Format {
            offset,
            msg: msg.into(),
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        TensorError::Shape(msg.into())
    }
}

/// (channels, height, width) of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl LayerShape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        LayerShape {
            channels,
            height,
            width,
        }
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same as [`LayerShape::len`] but `None` on overflow, for untrusted sizes.
    pub fn checked_len(&self) -> Option<usize> {
        self.channels
            .checked_mul(self.height)?
            .checked_mul(self.width)
    }
}

impl std::fmt::Display for LayerShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.channels, self.height, self.width)
    }
}

/// One feature layer: `channels` planes of `height x width` f32 samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLayer {
    shape: LayerShape,
    data: Vec<f32>,
}

impl FeatureLayer {
    /// Builds a layer, checking the data length and that every value is finite.
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self, TensorError> {
        let shape = LayerShape::new(channels, height, width);
        if channels == 0 || height == 0 || width == 0 {
            return Err(TensorError::shape(format!("empty layer shape {shape}")));
        }
        if data.len() != shape.len() {
            return Err(TensorError::shape(format!(
                "layer {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::shape(format!(
                "non-finite value {} at index {i}",
                data[i]
            )));
        }
        Ok(FeatureLayer { shape, data })
    }

    pub fn from_fn(shape: LayerShape, f: impl FnMut(usize) -> f32) -> Result<Self, TensorError> {
        let data = (0..shape.len()).map(f).collect();
        Self::new(shape.channels, shape.height, shape.width, data)
    }

    pub fn filled(shape: LayerShape, value: f32) -> Result<Self, TensorError> {
        Self::new(
            shape.channels,
            shape.height,
            shape.width,
            vec![value; shape.len()],
        )
    }

    /// Internal constructor for data produced by our own (finite-preserving) stages.
    pub(crate) fn from_parts(shape: LayerShape, data: Vec<f32>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        FeatureLayer { shape, data }
    }

    pub fn shape(&self) -> LayerShape {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f32] {
        let n = self.shape.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }
}

/// Exact (min, max) over every element of the layer.
pub fn tensor_stats(layer: &FeatureLayer) -> (f32, f32) {
    min_max(layer.data()).expect("layers are never empty")
}

/// Exact (min, max) of a slice, `None` when empty.
pub fn min_max(values: &[f32]) -> Option<(f32, f32)> {
    let (&first, rest) = values.split_first()?;
    Some(rest.iter().fold((first, first), |(lo, hi), &v| {
        (if v < lo { v } else { lo }, if v > hi { v } else { hi })
    }))
}

/// Per-layer shapes plus frame bookkeeping; what the decoder needs to rebuild a set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorShapeDescriptor {
    pub layers: Vec<LayerShape>,
    pub frame_count: usize,
    pub temporal: bool,
}

impl TensorShapeDescriptor {
    pub fn new(
        layers: Vec<LayerShape>,
        frame_count: usize,
        temporal: bool,
    ) -> Result<Self, TensorError> {
        let d = TensorShapeDescriptor {
            layers,
            frame_count,
            temporal,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        if self.layers.is_empty() {
            return Err(TensorError::shape("descriptor has no layers"));
        }
        for s in &self.layers {
            if s.channels == 0 || s.height == 0 || s.width == 0 {
                return Err(TensorError::shape(format!("empty layer shape {s}")));
            }
        }
        check_pyramid(&self.layers)
    }
}

/// Checks the half-size rule: each layer is exactly half the previous in both axes.
pub fn check_pyramid(layers: &[LayerShape]) -> Result<(), TensorError> {
    for (k, pair) in layers.windows(2).enumerate() {
        let (big, small) = (pair[0], pair[1]);
        if big.height != 2 * small.height || big.width != 2 * small.width {
            return Err(TensorError::shape(format!(
                "layer {} {small} is not half of layer {k} {big}",
                k + 1
            )));
        }
    }
    Ok(())
}

/// Ordered frames of multi-scale feature layers.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensorSet {
    frames: Vec<Vec<FeatureLayer>>,
    frame_rate: f32,
}

impl FeatureTensorSet {
    pub fn new(frames: Vec<Vec<FeatureLayer>>, frame_rate: f32) -> Result<Self, TensorError> {
        if frames.is_empty() {
            return Err(TensorError::format(0, "zero frames"));
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(TensorError::format(
                0,
                format!("frame rate {frame_rate} must be > 0"),
            ));
        }
        let shapes: Vec<LayerShape> = frames[0].iter().map(FeatureLayer::shape).collect();
        if shapes.is_empty() {
            return Err(TensorError::format(0, "zero layers"));
        }
        check_pyramid(&shapes)?;
        for (i, frame) in frames.iter().enumerate().skip(1) {
            let same = frame.len() == shapes.len()
                && frame.iter().zip(&shapes).all(|(l, s)| l.shape() == *s);
            if !same {
                return Err(TensorError::shape(format!(
                    "frame {i} layer shapes differ from frame 0"
                )));
            }
        }
        Ok(FeatureTensorSet { frames, frame_rate })
    }

    pub fn frames(&self) -> &[Vec<FeatureLayer>] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Vec<FeatureLayer>> {
        self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frame_rate(&self) -> f32 {
        self.frame_rate
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        self.frames[0].iter().map(FeatureLayer::shape).collect()
    }

    pub fn descriptor(&self, temporal: bool) -> TensorShapeDescriptor {
        TensorShapeDescriptor {
            layers: self.layer_shapes(),
            frame_count: self.frame_count(),
            temporal,
        }
    }

    /// Total number of f32 samples across frames and layers.
    pub fn element_count(&self) -> usize {
        self.frame_count()
            * self
                .layer_shapes()
                .iter()
                .map(LayerShape::len)
                .sum::<usize>()
    }
}

pub fn fts_header_len(layer_count: usize) -> usize {
    16 + 10 * layer_count
}

/// Serializes a set to FTS1 bytes. Output is byte-deterministic.
pub fn encode_fts(set: &FeatureTensorSet) -> Result<Vec<u8>, TensorError> {
    let shapes = set.layer_shapes();
    let frame_count = u32::try_from(set.frame_count())
        .map_err(|_| TensorError::format(6, "too many frames for FTS1"))?;
    let layer_count = u16::try_from(shapes.len())
        .map_err(|_| TensorError::format(10, "too many layers for FTS1"))?;

    let mut out = Vec::with_capacity(fts_header_len(shapes.len()) + 4 * set.element_count());
    out.extend_from_slice(FTS_MAGIC);
    out.extend_from_slice(&FTS_VERSION.to_le_bytes());
    out.extend_from_slice(&frame_count.to_le_bytes());
    out.extend_from_slice(&layer_count.to_le_bytes());
    out.extend_from_slice(&set.frame_rate().to_le_bytes());
    for s in &shapes {
        let c = u16::try_from(s.channels)
            .map_err(|_| TensorError::shape(format!("{s}: channels exceed u16")))?;
        let h = u32::try_from(s.height)
            .map_err(|_| TensorError::shape(format!("{s}: height exceeds u32")))?;
        let w = u32::try_from(s.width)
            .map_err(|_| TensorError::shape(format!("{s}: width exceeds u32")))?;
        out.extend_from_slice(&c.to_le_bytes());
        out.extend_from_slice(&h.to_le_bytes());
        out.extend_from_slice(&w.to_le_bytes());
    }
    for frame in set.frames() {
        for layer in frame {
            for v in layer.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Returns `None` (leaving the cursor untouched) when fewer than `n` bytes remain.
    pub(crate) fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.remaining() < n {
            return None;
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Some(s)
    }

    pub(crate) fn array<const N: usize>(&mut self) -> Option<[u8; N]> {
        self.take(N).map(|s| s.try_into().unwrap())
    }

    pub(crate) fn u8(&mut self) -> Option<u8> {
        self.array::<1>().map(|b| b[0])
    }

    pub(crate) fn u16(&mut self) -> Option<u16> {
        self.array().map(u16::from_le_bytes)
    }

    pub(crate) fn u32(&mut self) -> Option<u32> {
        self.array().map(u32::from_le_bytes)
    }

    pub(crate) fn u64(&mut self) -> Option<u64> {
        self.array().map(u64::from_le_bytes)
    }

    pub(crate) fn i32(&mut self) -> Option<i32> {
        self.array().map(i32::from_le_bytes)
    }

    pub(crate) fn f32(&mut self) -> Option<f32> {
        self.array().map(f32::from_le_bytes)
    }
}

/// Parses and validates FTS1 bytes.
pub fn decode_fts(bytes: &[u8]) -> Result<FeatureTensorSet, TensorError> {
    let mut r = Reader::new(bytes);
    let truncated =
        |r: &Reader, what: &str| TensorError::format(r.pos(), format!("truncated {what}"));

    let magic = r.array::<4>().ok_or_else(|| truncated(&r, "magic"))?;
    if &magic != FTS_MAGIC {
        return Err(TensorError::format(0, format!("bad magic {magic:02x?}")));
    }
    let version = r.u16().ok_or_else(|| truncated(&r, "version"))?;
    if version != FTS_VERSION {
        return Err(TensorError::format(
            4,
            format!("unsupported version {version}"),
        ));
    }
    let frame_count = r.u32().ok_or_else(|| truncated(&r, "frame count"))? as usize;
    if frame_count == 0 {
        return Err(TensorError::format(6, "zero frames"));
    }
    let layer_count = r.u16().ok_or_else(|| truncated(&r, "layer count"))? as usize;
    if layer_count == 0 {
        return Err(TensorError::format(10, "zero layers"));
    }
    let frame_rate = r.f32().ok_or_else(|| truncated(&r, "frame rate"))?;
    if !(frame_rate.is_finite() && frame_rate > 0.0) {
        return Err(TensorError::format(
            12,
            format!("frame rate {frame_rate} must be > 0"),
        ));
    }

    let mut shapes = Vec::with_capacity(layer_count);
    for k in 0..layer_count {
        let at = r.pos();
        let (Some(c), Some(h), Some(w)) = (r.u16(), r.u32(), r.u32()) else {
            return Err(TensorError::format(
                at,
                format!("truncated shape table at layer {k}"),
            ));
        };
        let s = LayerShape::new(c as usize, h as usize, w as usize);
        if s.channels == 0 || s.height == 0 || s.width == 0 {
            return Err(TensorError::format(at, format!("empty layer shape {s}")));
        }
        shapes.push(s);
    }
    check_pyramid(&shapes)?;

    let per_frame = shapes
        .iter()
        .try_fold(0usize, |acc, s| acc.checked_add(s.checked_len()?))
        .ok_or_else(|| TensorError::format(16, "layer sizes overflow"))?;
    let payload = per_frame
        .checked_mul(frame_count)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| TensorError::format(16, "payload size overflows"))?;
    if r.remaining() < payload {
        return Err(TensorError::format(
            bytes.len(),
            format!(
                "truncated payload: need {payload} bytes, have {}",
                r.remaining()
            ),
        ));
    }
    if r.remaining() > payload {
        return Err(TensorError::format(
            r.pos() + payload,
            format!("{} trailing bytes", r.remaining() - payload),
        ));
    }

    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        let mut layers = Vec::with_capacity(shapes.len());
        for s in &shapes {
            let at = r.pos();
            let raw = r.take(4 * s.len()).expect("length checked above");
            let data: Vec<f32> = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                return Err(TensorError::format(at + 4 * i, "non-finite sample"));
            }
            layers.push(FeatureLayer::from_parts(*s, data));
        }
        frames.push(layers);
    }
    FeatureTensorSet::new(frames, frame_rate)
}

pub fn load_fts(path: impl AsRef<Path>) -> Result<FeatureTensorSet, TensorError> {
    decode_fts(&fs::read(path)?)
}

pub fn save_fts(set: &FeatureTensorSet, path: impl AsRef<Path>) -> Result<(), TensorError> {
    fs::write(path, encode_fts(set)?)?;
    Ok(())
}
