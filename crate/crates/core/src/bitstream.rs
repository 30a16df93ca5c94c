//! FCMB v1 container: side-channel header followed by the inner payload.
//!
//! All multi-byte fields are little-endian. `L` is the layer count, `F` the
//! number of coded frames (the original count, halved and rounded up when
//! temporal sampling is on).
//!
//! ```text
//! size  field
//! 4     magic "FCMB"
//! 2     version u16 (= 1)
//! 1     reducer id u8          0 = s2d, 1 = avgpool
//! 1     inner codec id u8      0 = raw, 1 = lossless, 2 = external
//! 1     temporal flag u8       0 | 1
//! 4     original frame count u32
//! 4     frame rate f32
//! 2     gain index u16
//! 2     layer count u16
//! 10*L  per layer: channels u16, height u32, width u32
//! 12    fused shape: channels u32, height u32, width u32
//! 4     grid rows u16, grid cols u16
//! 1     bitdepth u8            8..=16, or 0 for unquantized f32 samples
//! 8*F   per coded frame: x_min f32, x_max f32
//! 4     quality i32
//! 2     gop hint u16
//! 1     low delay u8           0 | 1
//! 8     payload length u64
//! ...   payload
//! ```
//!
//! The header is `53 + 10*L + 8*F` bytes and can be parsed without the payload.

use thiserror::Error;

use crate::conversion::{PackLayout, QuantizationParams};
use crate::inner_codec::InnerCodecId;
use crate::reduction::ReducerId;
use crate::temporal::TemporalInfo;
use crate::tensor::{check_pyramid, LayerShape, Reader, TensorShapeDescriptor};

pub const FCMB_MAGIC: &[u8; 4] = b"FCMB";
pub const FCMB_VERSION: u16 = 1;
/// Bitdepth value signalling that samples bypassed quantization.
pub const BYPASS_BITDEPTH: u8 = 0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitstreamError {
    #[error("bad magic {0:02x?}, expected \"FCMB\"")]
    BadMagic(Vec<u8>),
    #[error("unsupported FCMB version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated at byte {offset} while reading {field}")]
    Truncated { offset: usize, field: &'static str },
    #[error("inconsistent stream: {0}")]
    Consistency(String),
}

fn inconsistent(msg: impl Into<String>) -> BitstreamError {
    BitstreamError::Consistency(msg.into())
}

/// Parsed FCMB header.
#[derive(Debug, Clone, PartialEq)]
pub struct FcmHeader {
    pub reducer: ReducerId,
    pub codec: InnerCodecId,
    pub temporal: TemporalInfo,
    pub frame_rate: f32,
    pub gain_index: u16,
    pub layers: Vec<LayerShape>,
    pub fused: LayerShape,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub bitdepth: u8,
    /// (x_min, x_max) per coded frame.
    pub frame_ranges: Vec<(f32, f32)>,
    pub quality: i32,
    pub gop_hint: u16,
    pub low_delay: bool,
    pub payload_len: u64,
}

impl FcmHeader {
    pub fn coded_frames(&self) -> usize {
        self.temporal.kept_frames()
    }

    pub fn header_len(&self) -> usize {
        header_len(self.layers.len(), self.frame_ranges.len())
    }

    pub fn layout(&self) -> PackLayout {
        PackLayout {
            grid_rows: self.grid_rows,
            grid_cols: self.grid_cols,
            source: self.fused,
        }
    }

    pub fn bypass(&self) -> bool {
        self.bitdepth == BYPASS_BITDEPTH
    }

    pub fn descriptor(&self) -> TensorShapeDescriptor {
        TensorShapeDescriptor {
            layers: self.layers.clone(),
            frame_count: self.temporal.original_frames,
            temporal: self.temporal.enabled,
        }
    }

    /// Quantization params of coded frame `i`; `None` in bypass mode.
    pub fn quant_params(&self, i: usize) -> Option<QuantizationParams> {
        if self.bypass() {
            return None;
        }
        let (lo, hi) = self.frame_ranges[i];
        QuantizationParams::new(self.bitdepth, lo, hi).ok()
    }

    /// Stream bitrate in kbit/s over the original frame count.
    pub fn bitrate_kbps(&self, stream_bytes: usize) -> f64 {
        stream_bytes as f64 * 8.0 * self.frame_rate as f64
            / self.temporal.original_frames as f64
            / 1000.0
    }

    /// Cross-field checks shared by mux and demux.
    pub fn validate(&self) -> Result<(), BitstreamError> {
        if self.temporal.original_frames == 0
            || u32::try_from(self.temporal.original_frames).is_err()
        {
            return Err(inconsistent(format!(
                "original frame count {} outside 1..=u32::MAX",
                self.temporal.original_frames
            )));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(inconsistent(format!(
                "frame rate {} must be > 0",
                self.frame_rate
            )));
        }
        if self.layers.is_empty() || self.layers.len() > u16::MAX as usize {
            return Err(inconsistent(format!(
                "layer count {} outside 1..=65535",
                self.layers.len()
            )));
        }
        for s in &self.layers {
            if s.channels == 0 || s.height == 0 || s.width == 0 {
                return Err(inconsistent(format!("empty layer shape {s}")));
            }
            if s.channels > u16::MAX as usize
                || s.height > u32::MAX as usize
                || s.width > u32::MAX as usize
            {
                return Err(inconsistent(format!(
                    "layer shape {s} exceeds field widths"
                )));
            }
        }
        check_pyramid(&self.layers).map_err(|e| inconsistent(e.to_string()))?;
        let expected = self
            .reducer
            .reducer()
            .fused_shape(&self.layers)
            .map_err(|e| inconsistent(format!("{}: {e}", self.reducer)))?;
        if self.fused != expected {
            return Err(inconsistent(format!(
                "fused shape {} does not match {} output {expected} for the layer table",
                self.fused, self.reducer
            )));
        }
        if self.fused.channels > u32::MAX as usize
            || self.fused.height > u32::MAX as usize
            || self.fused.width > u32::MAX as usize
        {
            return Err(inconsistent(format!(
                "fused shape {} exceeds field widths",
                self.fused
            )));
        }
        let grid = PackLayout::for_shape(self.fused);
        if (self.grid_rows, self.grid_cols) != (grid.grid_rows, grid.grid_cols) {
            return Err(inconsistent(format!(
                "grid {}x{} does not match packing grid {}x{} for {} channels",
                self.grid_rows, self.grid_cols, grid.grid_rows, grid.grid_cols, self.fused.channels
            )));
        }
        if self.grid_rows > u16::MAX as usize || self.grid_cols > u16::MAX as usize {
            return Err(inconsistent("grid exceeds u16 fields"));
        }
        if self.bitdepth != BYPASS_BITDEPTH && !(8..=16).contains(&self.bitdepth) {
            return Err(inconsistent(format!(
                "bitdepth {} outside 8..=16",
                self.bitdepth
            )));
        }
        if self.bypass() && self.codec == InnerCodecId::External {
            return Err(inconsistent(
                "quantization bypass cannot use the external codec",
            ));
        }
        if self.frame_ranges.len() != self.coded_frames() {
            return Err(inconsistent(format!(
                "{} quantization ranges for {} coded frames",
                self.frame_ranges.len(),
                self.coded_frames()
            )));
        }
        for (i, &(lo, hi)) in self.frame_ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(inconsistent(format!(
                    "frame {i} range [{lo}, {hi}] is invalid"
                )));
            }
        }
        let (qlo, qhi) = self.codec.quality_range();
        if !(qlo..=qhi).contains(&self.quality) {
            return Err(inconsistent(format!(
                "quality {} outside {} range {qlo}..={qhi}",
                self.quality, self.codec
            )));
        }
        Ok(())
    }
}

pub fn header_len(layer_count: usize, coded_frames: usize) -> usize {
    53 + 10 * layer_count + 8 * coded_frames
}

/// Serializes header and payload. Byte-deterministic.
pub fn mux(header: &FcmHeader, payload: &[u8]) -> Result<Vec<u8>, BitstreamError> {
    header.validate()?;
    if header.payload_len != payload.len() as u64 {
        return Err(inconsistent(format!(
            "header declares {} payload bytes, got {}",
            header.payload_len,
            payload.len()
        )));
    }
    let mut out = Vec::with_capacity(header.header_len() + payload.len());
    out.extend_from_slice(FCMB_MAGIC);
    out.extend_from_slice(&FCMB_VERSION.to_le_bytes());
    out.push(header.reducer.code());
    out.push(header.codec.code());
    out.push(header.temporal.enabled as u8);
    out.extend_from_slice(&(header.temporal.original_frames as u32).to_le_bytes());
    out.extend_from_slice(&header.frame_rate.to_le_bytes());
    out.extend_from_slice(&header.gain_index.to_le_bytes());
    out.extend_from_slice(&(header.layers.len() as u16).to_le_bytes());
    for s in &header.layers {
        out.extend_from_slice(&(s.channels as u16).to_le_bytes());
        out.extend_from_slice(&(s.height as u32).to_le_bytes());
        out.extend_from_slice(&(s.width as u32).to_le_bytes());
    }
    for v in [
        header.fused.channels,
        header.fused.height,
        header.fused.width,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(header.grid_rows as u16).to_le_bytes());
    out.extend_from_slice(&(header.grid_cols as u16).to_le_bytes());
    out.push(header.bitdepth);
    for (lo, hi) in &header.frame_ranges {
        out.extend_from_slice(&lo.to_le_bytes());
        out.extend_from_slice(&hi.to_le_bytes());
    }
    out.extend_from_slice(&header.quality.to_le_bytes());
    out.extend_from_slice(&header.gop_hint.to_le_bytes());
    out.push(header.low_delay as u8);
    out.extend_from_slice(&header.payload_len.to_le_bytes());
    debug_assert_eq!(out.len(), header.header_len());
    out.extend_from_slice(payload);
    Ok(out)
}

/// Parses and validates the header only; returns it with its byte length.
/// Does not require the payload to be present.
pub fn parse_header(bytes: &[u8]) -> Result<(FcmHeader, usize), BitstreamError> {
    let mut r = Reader::new(bytes);
    macro_rules! field {
        ($read:ident, $name:expr) => {{
            let at = r.pos();
            r.$read().ok_or(BitstreamError::Truncated {
                offset: at,
                field: $name,
            })?
        }};
    }

    let magic = r.take(4).ok_or(BitstreamError::Truncated {
        offset: 0,
        field: "magic",
    })?;
    if magic != FCMB_MAGIC {
        return Err(BitstreamError::BadMagic(magic.to_vec()));
    }
    let version = field!(u16, "version");
    if version != FCMB_VERSION {
        return Err(BitstreamError::UnsupportedVersion(version));
    }
    let reducer_code = field!(u8, "reducer id");
    let reducer = ReducerId::from_code(reducer_code)
        .map_err(|_| inconsistent(format!("unknown reducer id {reducer_code}")))?;
    let codec_code = field!(u8, "inner codec id");
    let codec = InnerCodecId::from_code(codec_code)
        .map_err(|_| inconsistent(format!("unknown inner codec id {codec_code}")))?;
    let temporal_flag = field!(u8, "temporal flag");
    if temporal_flag > 1 {
        return Err(inconsistent(format!(
            "temporal flag {temporal_flag} is not 0 or 1"
        )));
    }
    let original_frames = field!(u32, "original frame count") as usize;
    let frame_rate = field!(f32, "frame rate");
    let gain_index = field!(u16, "gain index");
    let layer_count = field!(u16, "layer count") as usize;
    if r.remaining() < 10 * layer_count {
        return Err(BitstreamError::Truncated {
            offset: r.pos() + 10 * (r.remaining() / 10),
            field: "layer shape table",
        });
    }
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let c = field!(u16, "layer channels");
        let h = field!(u32, "layer height");
        let w = field!(u32, "layer width");
        layers.push(LayerShape::new(c as usize, h as usize, w as usize));
    }
    let fc = field!(u32, "fused channels");
    let fh = field!(u32, "fused height");
    let fw = field!(u32, "fused width");
    let grid_rows = field!(u16, "grid rows") as usize;
    let grid_cols = field!(u16, "grid cols") as usize;
    let bitdepth = field!(u8, "bitdepth");

    let temporal = TemporalInfo {
        original_frames,
        enabled: temporal_flag == 1,
    };
    let coded = temporal.kept_frames();
    if r.remaining() < 8 * coded {
        return Err(BitstreamError::Truncated {
            offset: r.pos() + 8 * (r.remaining() / 8),
            field: "quantization ranges",
        });
    }
    let mut frame_ranges = Vec::with_capacity(coded);
    for _ in 0..coded {
        let lo = field!(f32, "x_min");
        let hi = field!(f32, "x_max");
        frame_ranges.push((lo, hi));
    }
    let quality = field!(i32, "quality");
    let gop_hint = field!(u16, "gop hint");
    let low_delay = field!(u8, "low delay flag");
    if low_delay > 1 {
        return Err(inconsistent(format!(
            "low delay flag {low_delay} is not 0 or 1"
        )));
    }
    let payload_len = field!(u64, "payload length");

    let header = FcmHeader {
        reducer,
        codec,
        temporal,
        frame_rate,
        gain_index,
        layers,
        fused: LayerShape::new(fc as usize, fh as usize, fw as usize),
        grid_rows,
        grid_cols,
        bitdepth,
        frame_ranges,
        quality,
        gop_hint,
        low_delay: low_delay == 1,
        payload_len,
    };
    header.validate()?;
    Ok((header, r.pos()))
}

/// Parses a complete stream into its header and payload slice.
pub fn demux(bytes: &[u8]) -> Result<(FcmHeader, &[u8]), BitstreamError> {
    let (header, at) = parse_header(bytes)?;
    let available = (bytes.len() - at) as u64;
    if available < header.payload_len {
        return Err(BitstreamError::Truncated {
            offset: bytes.len(),
            field: "payload",
        });
    }
    if available > header.payload_len {
        return Err(inconsistent(format!(
            "{} trailing bytes after payload",
            available - header.payload_len
        )));
    }
    Ok((header, &bytes[at..]))
}
