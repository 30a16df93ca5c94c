//! End-to-end encoder and decoder.
//!
//! Encoder: temporal down-sampling, fusion, packing, quantization, inner
//! encoding, mux. Decoder: the inverse chain. Fusion, packing and
//! quantization (and their inverses) run per frame on the rayon pool.

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::bitstream::{demux, mux, BitstreamError, FcmHeader, BYPASS_BITDEPTH};
use crate::config::{DecodeConfig, EncodeConfig};
use crate::conversion::{self, ConversionError, PackLayout, PackedFrame, QuantizationParams};
use crate::inner_codec::{self, InnerCodecError, InnerConfig};
use crate::reduction::{self, FusedTensor, ReductionError};
use crate::temporal::{self, MismatchError};
use crate::tensor::{FeatureLayer, FeatureTensorSet, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    TemporalDownsample,
    Reduction,
    Conversion,
    InnerEncode,
    Mux,
    Demux,
    InnerDecode,
    InverseConversion,
    Restoration,
    TemporalUpsample,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::TemporalDownsample => "temporal_downsample",
            Stage::Reduction => "reduction",
            Stage::Conversion => "conversion",
            Stage::InnerEncode => "inner_encode",
            Stage::Mux => "mux",
            Stage::Demux => "demux",
            Stage::InnerDecode => "inner_decode",
            Stage::InverseConversion => "inverse_conversion",
            Stage::Restoration => "restoration",
            Stage::TemporalUpsample => "temporal_upsample",
        })
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Temporal(#[from] MismatchError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Conversion(#[from] ConversionError),
    #[error(transparent)]
    InnerCodec(#[from] InnerCodecError),
    #[error(transparent)]
    Bitstream(#[from] BitstreamError),
}

/// A stage failure, tagged with the stage that raised it.
#[derive(Debug, Error)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<StageError>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError {
            stage,
            source: e.into(),
        })
    }
}

/// Wall-clock time of the six encoder/decoder stages.
///
/// Temporal sampling is counted with reduction/restoration; mux and demux
/// are counted with inner encode/decode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimes {
    pub reduction: Duration,
    pub conversion: Duration,
    pub inner_encode: Duration,
    pub inner_decode: Duration,
    pub inverse_conversion: Duration,
    pub restoration: Duration,
    pub encode_total: Duration,
    pub decode_total: Duration,
}

impl StageTimes {
    pub const STAGE_NAMES: [&'static str; 6] = [
        "reduction",
        "conversion",
        "inner_encode",
        "inner_decode",
        "inverse_conversion",
        "restoration",
    ];

    /// (name, duration) for each of the six stages, encoder first.
    pub fn stages(&self) -> [(&'static str, Duration); 6] {
        let n = Self::STAGE_NAMES;
        [
            (n[0], self.reduction),
            (n[1], self.conversion),
            (n[2], self.inner_encode),
            (n[3], self.inner_decode),
            (n[4], self.inverse_conversion),
            (n[5], self.restoration),
        ]
    }

    pub fn encoder_stage_sum(&self) -> Duration {
        self.reduction + self.conversion + self.inner_encode
    }

    pub fn decoder_stage_sum(&self) -> Duration {
        self.inner_decode + self.inverse_conversion + self.restoration
    }
}

/// Result of a timed encode + decode.
#[derive(Debug, Clone)]
pub struct TimingReport {
    pub times: StageTimes,
    pub stream_bytes: usize,
    pub bitrate_kbps: f64,
    pub decoded: FeatureTensorSet,
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}

pub fn encode(set: &FeatureTensorSet, cfg: &EncodeConfig) -> Result<Vec<u8>, PipelineError> {
    encode_timed(set, cfg, &mut StageTimes::default())
}

pub fn decode(stream: &[u8], cfg: &DecodeConfig) -> Result<FeatureTensorSet, PipelineError> {
    decode_timed(stream, cfg, &mut StageTimes::default())
}

/// Encodes, recording per-stage times into `times`.
pub fn encode_timed(
    set: &FeatureTensorSet,
    cfg: &EncodeConfig,
    times: &mut StageTimes,
) -> Result<Vec<u8>, PipelineError> {
    let start = Instant::now();

    let (info, fused, gain_index) = timed(&mut times.reduction, || {
        let (kept, info) = temporal::temporal_downsample(set, cfg.temporal);
        let fused_shape = cfg
            .reducer
            .reducer()
            .fused_shape(&set.layer_shapes())
            .at(Stage::Reduction)?;
        let gain = cfg
            .gains
            .resolve(cfg.gain_index, fused_shape.channels)
            .at(Stage::Reduction)?;
        let fused: Vec<FusedTensor> = kept
            .frames()
            .par_iter()
            .map(|frame| reduction::fuse(frame, cfg.reducer, &gain))
            .collect::<Result<_, _>>()
            .at(Stage::Reduction)?;
        Ok::<_, PipelineError>((info, fused, gain.index()))
    })?;
    let layout = PackLayout::for_shape(fused[0].shape());

    enum Coded {
        Float(Vec<PackedFrame<f32>>),
        Quantized(Vec<PackedFrame<u16>>),
    }
    let (coded, frame_ranges) = timed(&mut times.conversion, || {
        let packed: Vec<PackedFrame<f32>> = fused.par_iter().map(conversion::pack_fused).collect();
        let ranges: Vec<(f32, f32)> = packed
            .iter()
            .map(|p| crate::tensor::min_max(p.samples()).expect("non-empty frame"))
            .collect();
        if cfg.bypass_quantization {
            return Ok::<_, PipelineError>((Coded::Float(packed), ranges));
        }
        let quantized = packed
            .par_iter()
            .zip(&ranges)
            .map(|(p, &(lo, hi))| {
                let params = QuantizationParams::new(cfg.bitdepth, lo, hi)?;
                Ok(conversion::quantize(p, &params))
            })
            .collect::<Result<Vec<_>, ConversionError>>()
            .at(Stage::Conversion)?;
        Ok((Coded::Quantized(quantized), ranges))
    })?;

    let inner = InnerConfig {
        gop_hint: if cfg.temporal {
            (cfg.inner.gop_hint / 2).max(1)
        } else {
            cfg.inner.gop_hint
        },
        fps: if cfg.temporal {
            set.frame_rate() / 2.0
        } else {
            set.frame_rate()
        },
        ..cfg.inner.clone()
    };

    let stream = timed(&mut times.inner_encode, || {
        let (payload, bitdepth) = match &coded {
            Coded::Float(frames) => (
                inner_codec::inner_encode_float(frames, layout, &inner).at(Stage::InnerEncode)?,
                BYPASS_BITDEPTH,
            ),
            Coded::Quantized(frames) => (
                inner_codec::inner_encode(frames, layout, cfg.bitdepth, &inner)
                    .at(Stage::InnerEncode)?,
                cfg.bitdepth,
            ),
        };
        let header = FcmHeader {
            reducer: cfg.reducer,
            codec: inner.codec,
            temporal: info,
            frame_rate: set.frame_rate(),
            gain_index,
            layers: set.layer_shapes(),
            fused: layout.source,
            grid_rows: layout.grid_rows,
            grid_cols: layout.grid_cols,
            bitdepth,
            frame_ranges,
            quality: inner.quality,
            gop_hint: inner.gop_hint,
            low_delay: inner.low_delay,
            payload_len: payload.len() as u64,
        };
        mux(&header, &payload).at(Stage::Mux)
    })?;

    times.encode_total += start.elapsed();
    Ok(stream)
}

/// Decodes, recording per-stage times into `times`.
pub fn decode_timed(
    stream: &[u8],
    cfg: &DecodeConfig,
    times: &mut StageTimes,
) -> Result<FeatureTensorSet, PipelineError> {
    let start = Instant::now();

    let (header, frames) = timed(&mut times.inner_decode, || {
        let (header, payload) = demux(stream).at(Stage::Demux)?;
        let inner = InnerConfig {
            codec: header.codec,
            quality: header.quality,
            gop_hint: header.gop_hint,
            low_delay: header.low_delay,
            fps: if header.temporal.enabled {
                header.frame_rate / 2.0
            } else {
                header.frame_rate
            },
            external: cfg.external.clone(),
        };
        let layout = header.layout();
        let count = header.coded_frames();
        let frames = if header.bypass() {
            inner_codec::inner_decode_float(payload, layout, count, &inner)
                .map(DecodedFrames::Float)
                .at(Stage::InnerDecode)?
        } else {
            inner_codec::inner_decode(payload, layout, header.bitdepth, count, &inner)
                .map(DecodedFrames::Quantized)
                .at(Stage::InnerDecode)?
        };
        Ok::<_, PipelineError>((header, frames))
    })?;

    let fused = timed(&mut times.inverse_conversion, || {
        let packed: Vec<PackedFrame<f32>> = match frames {
            DecodedFrames::Float(f) => f,
            DecodedFrames::Quantized(q) => q
                .par_iter()
                .enumerate()
                .map(|(i, f)| {
                    let params = header.quant_params(i).expect("validated at demux");
                    conversion::dequantize(f, &params)
                })
                .collect(),
        };
        packed
            .par_iter()
            .map(|p| conversion::unpack_fused(p, header.gain_index, header.reducer))
            .collect::<Result<Vec<_>, _>>()
            .at(Stage::InverseConversion)
    })?;

    let set = timed(&mut times.restoration, || {
        let gain = cfg
            .gains
            .resolve(header.gain_index, header.fused.channels)
            .at(Stage::Restoration)?;
        let descriptor = header.descriptor();
        let frames: Vec<Vec<FeatureLayer>> = fused
            .par_iter()
            .map(|f| reduction::restore(f, header.reducer, &gain, &descriptor))
            .collect::<Result<_, _>>()
            .at(Stage::Restoration)?;
        let kept = FeatureTensorSet::new(frames, header.frame_rate).at(Stage::Restoration)?;
        temporal::temporal_upsample(&kept, header.temporal).at(Stage::TemporalUpsample)
    })?;

    times.decode_total += start.elapsed();
    Ok(set)
}

enum DecodedFrames {
    Float(Vec<PackedFrame<f32>>),
    Quantized(Vec<PackedFrame<u16>>),
}

/// Runs encode then decode, reporting per-stage wall-clock times.
pub fn measure_stage_times(
    set: &FeatureTensorSet,
    enc: &EncodeConfig,
    dec: &DecodeConfig,
) -> Result<TimingReport, PipelineError> {
    let mut times = StageTimes::default();
    let stream = encode_timed(set, enc, &mut times)?;
    let decoded = decode_timed(&stream, dec, &mut times)?;
    let (header, _) = demux(&stream).at(Stage::Demux)?;
    Ok(TimingReport {
        bitrate_kbps: header.bitrate_kbps(stream.len()),
        stream_bytes: stream.len(),
        times,
        decoded,
    })
}
