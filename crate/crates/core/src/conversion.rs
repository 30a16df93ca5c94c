//! Packing fused channels into one monochrome frame, linear quantization,
//! and their inverses.
//!
//! Channels are tiled in raster order on a `rows x cols` grid with
//! `cols = ceil(sqrt(C))` and `rows = ceil(C / cols)`; the grid is therefore
//! reproducible from the channel count alone. Unused trailing cells are 0.
//!
//! Quantization maps `[x_min, x_max]` of each packed frame linearly onto
//! `0..=2^bitdepth - 1` with floor rounding and clamping.

use thiserror::Error;

use crate::reduction::{FusedTensor, ReducerId};
use crate::tensor::{min_max, FeatureLayer, LayerShape};

#[derive(Debug, Error, PartialEq)]
pub enum ConversionError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("bitdepth {0} outside 8..=16")]
    Bitdepth(u8),
    #[error("invalid range: x_min {x_min} > x_max {x_max} or non-finite")]
    Range { x_min: f32, x_max: f32 },
}

pub const DEFAULT_BITDEPTH: u8 = 10;

/// Tiling grid plus the shape of the tensor it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackLayout {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub source: LayerShape,
}

impl PackLayout {
    pub fn for_shape(source: LayerShape) -> Self {
        let cols = ceil_sqrt(source.channels);
        let rows = source.channels.div_ceil(cols);
        PackLayout {
            grid_rows: rows,
            grid_cols: cols,
            source,
        }
    }

    pub fn height(&self) -> usize {
        self.grid_rows * self.source.height
    }

    pub fn width(&self) -> usize {
        self.grid_cols * self.source.width
    }

    pub fn sample_count(&self) -> usize {
        self.height() * self.width()
    }

    /// Grid cell (row, col) of a channel.
    pub fn cell(&self, channel: usize) -> (usize, usize) {
        (channel / self.grid_cols, channel % self.grid_cols)
    }
}

/// Smallest `n` with `n * n >= v` (1 for v == 0).
pub fn ceil_sqrt(v: usize) -> usize {
    if v <= 1 {
        return 1;
    }
    let mut n = (v as f64).sqrt() as usize;
    while n * n < v {
        n += 1;
    }
    while n > 1 && (n - 1) * (n - 1) >= v {
        n -= 1;
    }
    n
}

/// A packed single-channel frame. `S` is `f32` before quantization and
/// `u16` after.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedFrame<S> {
    layout: PackLayout,
    samples: Vec<S>,
}

impl<S: Copy> PackedFrame<S> {
    pub fn new(layout: PackLayout, samples: Vec<S>) -> Result<Self, ConversionError> {
        if samples.len() != layout.sample_count() {
            return Err(ConversionError::Shape(format!(
                "frame {}x{} needs {} samples, got {}",
                layout.height(),
                layout.width(),
                layout.sample_count(),
                samples.len()
            )));
        }
        Ok(PackedFrame { layout, samples })
    }

    pub fn layout(&self) -> PackLayout {
        self.layout
    }

    pub fn height(&self) -> usize {
        self.layout.height()
    }

    pub fn width(&self) -> usize {
        self.layout.width()
    }

    pub fn samples(&self) -> &[S] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<S> {
        self.samples
    }
}

/// Bitdepth and the f32 range a frame was quantized against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationParams {
    pub bitdepth: u8,
    pub x_min: f32,
    pub x_max: f32,
}

impl QuantizationParams {
    pub fn new(bitdepth: u8, x_min: f32, x_max: f32) -> Result<Self, ConversionError> {
        if !(8..=16).contains(&bitdepth) {
            return Err(ConversionError::Bitdepth(bitdepth));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_min <= x_max) {
            return Err(ConversionError::Range { x_min, x_max });
        }
        Ok(QuantizationParams {
            bitdepth,
            x_min,
            x_max,
        })
    }

    /// Params adapted to this frame's own extrema.
    pub fn for_frame(frame: &PackedFrame<f32>, bitdepth: u8) -> Result<Self, ConversionError> {
        let (lo, hi) = min_max(frame.samples()).expect("packed frames are never empty");
        Self::new(bitdepth, lo, hi)
    }

    /// `2^bitdepth - 1`.
    pub fn max_num_bits(&self) -> u32 {
        (1u32 << self.bitdepth) - 1
    }

    pub fn step(&self) -> f64 {
        (self.x_max as f64 - self.x_min as f64) / self.max_num_bits() as f64
    }

    pub fn quantize_sample(&self, x: f32) -> u16 {
        let range = self.x_max as f64 - self.x_min as f64;
        if range <= 0.0 {
            return 0;
        }
        let t = ((x as f64 - self.x_min as f64) / range).clamp(0.0, 1.0);
        (t * self.max_num_bits() as f64).floor() as u16
    }

    pub fn dequantize_sample(&self, q: u16) -> f32 {
        let max = self.max_num_bits();
        if u32::from(q) >= max {
            return self.x_max;
        }
        let (lo, hi) = (self.x_min as f64, self.x_max as f64);
        let v = (q as f64 / max as f64 * (hi - lo) + lo).clamp(lo, hi);
        // Round up, not to nearest: every x that floored to q is an f32 >= v,
        // so the reconstruction never overshoots it and the error stays below a step.
        let f = v as f32;
        if (f as f64) < v {
            f.next_up().min(self.x_max)
        } else {
            f
        }
    }
}

/// Tiles the fused channels into a square-like frame in raster order.
pub fn pack(fused: &FeatureLayer) -> PackedFrame<f32> {
    let layout = PackLayout::for_shape(fused.shape());
    let (h, w) = (fused.height(), fused.width());
    let fw = layout.width();
    let mut samples = vec![0f32; layout.sample_count()];
    for c in 0..fused.channels() {
        let (row, col) = layout.cell(c);
        let plane = fused.plane(c);
        for y in 0..h {
            let dst = (row * h + y) * fw + col * w;
            samples[dst..dst + w].copy_from_slice(&plane[y * w..(y + 1) * w]);
        }
    }
    PackedFrame { layout, samples }
}

/// Inverse of [`pack`]; padding cells are dropped.
pub fn unpack(frame: &PackedFrame<f32>) -> Result<FeatureLayer, ConversionError> {
    let layout = frame.layout;
    if layout != PackLayout::for_shape(layout.source) {
        return Err(ConversionError::Shape(format!(
            "grid {}x{} is not the packing grid for {}",
            layout.grid_rows, layout.grid_cols, layout.source
        )));
    }
    let LayerShape {
        channels,
        height: h,
        width: w,
    } = layout.source;
    let fw = layout.width();
    let mut data = Vec::with_capacity(layout.source.len());
    for c in 0..channels {
        let (row, col) = layout.cell(c);
        for y in 0..h {
            let src = (row * h + y) * fw + col * w;
            data.extend_from_slice(&frame.samples[src..src + w]);
        }
    }
    Ok(FeatureLayer::from_parts(layout.source, data))
}

pub fn pack_fused(fused: &FusedTensor) -> PackedFrame<f32> {
    pack(&fused.layer)
}

pub fn unpack_fused(
    frame: &PackedFrame<f32>,
    gain_index: u16,
    reducer: ReducerId,
) -> Result<FusedTensor, ConversionError> {
    Ok(FusedTensor {
        layer: unpack(frame)?,
        gain_index,
        reducer,
    })
}

pub fn quantize(frame: &PackedFrame<f32>, params: &QuantizationParams) -> PackedFrame<u16> {
    PackedFrame {
        layout: frame.layout,
        samples: frame
            .samples
            .iter()
            .map(|&x| params.quantize_sample(x))
            .collect(),
    }
}

pub fn dequantize(frame: &PackedFrame<u16>, params: &QuantizationParams) -> PackedFrame<f32> {
    PackedFrame {
        layout: frame.layout,
        samples: frame
            .samples
            .iter()
            .map(|&q| params.dequantize_sample(q))
            .collect(),
    }
}
