//! Inner coding of packed monochrome frames.
//!
//! Three codecs:
//!
//! * `RAW`: samples as 16-bit little-endian words, frame after frame.
//! * `LOSSLESS`: the RAW payload through zlib (deflate, fixed level).
//! * `EXTERNAL`: a video encoder run as a subprocess. Frames are handed over
//!   as raw planar 4:0:0 video, 10-bit samples in the low bits of 16-bit LE
//!   words, and the tool's output file becomes the payload.
//!
//! External commands are templates run through `sh -c` with these
//! placeholders: `{input}`, `{output}`, `{qp}`, `{width}`, `{height}`,
//! `{fps}`, `{frames}`, `{bitdepth}`, `{gop}`, `{low_delay}`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::process::Command;
use std::str::FromStr;

use flate2::bufread::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::conversion::{PackLayout, PackedFrame};

#[derive(Debug, Error)]
pub enum InnerCodecError {
    #[error("frame {index} is {got_h}x{got_w}, expected {want_h}x{want_w}")]
    DimensionMismatch {
        index: usize,
        got_h: usize,
        got_w: usize,
        want_h: usize,
        want_w: usize,
    },
    #[error("sample {value} exceeds {max} for bitdepth {bitdepth}")]
    SampleRange { value: u16, max: u16, bitdepth: u8 },
    #[error("quality {quality} outside {codec} range {lo}..={hi}")]
    Quality {
        codec: InnerCodecId,
        quality: i32,
        lo: i32,
        hi: i32,
    },
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error("external tool error: {0}")]
    ExternalTool(String),
    #[error("unknown inner codec id {0}")]
    UnknownCodec(u8),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum InnerCodecId {
    Raw = 0,
    Lossless = 1,
    External = 2,
}

impl InnerCodecId {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, InnerCodecError> {
        match code {
            0 => Ok(InnerCodecId::Raw),
            1 => Ok(InnerCodecId::Lossless),
            2 => Ok(InnerCodecId::External),
            other => Err(InnerCodecError::UnknownCodec(other)),
        }
    }

    /// Accepted quality values. RAW and LOSSLESS ignore quality but share
    /// the VVC QP range so one config can drive any codec.
    pub fn quality_range(self) -> (i32, i32) {
        (0, 63)
    }
}

impl fmt::Display for InnerCodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InnerCodecId::Raw => "raw",
            InnerCodecId::Lossless => "lossless",
            InnerCodecId::External => "external",
        })
    }
}

impl FromStr for InnerCodecId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(InnerCodecId::Raw),
            "lossless" => Ok(InnerCodecId::Lossless),
            "external" => Ok(InnerCodecId::External),
            _ => Err(format!(
                "unknown inner codec '{s}' (expected raw, lossless or external)"
            )),
        }
    }
}

/// Command templates for an out-of-process codec.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExternalCodec {
    pub encode_template: String,
    pub decode_template: String,
}

/// Inner codec settings. Everything but `external` is signalled in the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerConfig {
    pub codec: InnerCodecId,
    pub quality: i32,
    pub gop_hint: u16,
    pub low_delay: bool,
    pub fps: f32,
    pub external: Option<ExternalCodec>,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig {
            codec: InnerCodecId::Lossless,
            quality: 32,
            gop_hint: 8,
            low_delay: true,
            fps: 30.0,
            external: None,
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<(), InnerCodecError> {
        let (lo, hi) = self.codec.quality_range();
        if !(lo..=hi).contains(&self.quality) {
            return Err(InnerCodecError::Quality {
                codec: self.codec,
                quality: self.quality,
                lo,
                hi,
            });
        }
        Ok(())
    }
}

fn check_frames<S>(frames: &[PackedFrame<S>], layout: PackLayout) -> Result<(), InnerCodecError>
where
    S: Copy,
{
    for (index, f) in frames.iter().enumerate() {
        if f.height() != layout.height() || f.width() != layout.width() {
            return Err(InnerCodecError::DimensionMismatch {
                index,
                got_h: f.height(),
                got_w: f.width(),
                want_h: layout.height(),
                want_w: layout.width(),
            });
        }
    }
    Ok(())
}

fn max_sample(bitdepth: u8) -> u16 {
    ((1u32 << bitdepth) - 1) as u16
}

/// Raw planar 4:0:0 video: 16-bit LE words, frame after frame.
pub fn write_raw_video(frames: &[PackedFrame<u16>]) -> Vec<u8> {
    let n: usize = frames.iter().map(|f| f.samples().len()).sum();
    let mut out = Vec::with_capacity(2 * n);
    for f in frames {
        for s in f.samples() {
            out.extend_from_slice(&s.to_le_bytes());
        }
    }
    out
}

/// Splits raw planar video bytes into frames of `layout`.
pub fn read_raw_video(
    bytes: &[u8],
    layout: PackLayout,
    count: usize,
) -> Result<Vec<PackedFrame<u16>>, InnerCodecError> {
    let per_frame = layout.sample_count();
    let expected = per_frame
        .checked_mul(count)
        .and_then(|n| n.checked_mul(2))
        .ok_or_else(|| InnerCodecError::CorruptPayload("frame size overflows".into()))?;
    if bytes.len() != expected {
        return Err(InnerCodecError::CorruptPayload(format!(
            "expected {expected} sample bytes, got {}",
            bytes.len()
        )));
    }
    if per_frame == 0 {
        return Ok(Vec::new());
    }
    Ok(bytes
        .chunks_exact(2 * per_frame)
        .map(|chunk| {
            let samples = chunk
                .chunks_exact(2)
                .map(|b| u16::from_le_bytes([b[0], b[1]]))
                .collect();
            PackedFrame::new(layout, samples).expect("length checked")
        })
        .collect())
}

fn deflate(raw: &[u8]) -> Vec<u8> {
    let mut enc = ZlibEncoder::new(
        Vec::with_capacity(raw.len() / 2 + 64),
        Compression::default(),
    );
    enc.write_all(raw).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

/// Inflates exactly `expected` bytes; anything else is corruption.
fn inflate(payload: &[u8], expected: usize) -> Result<Vec<u8>, InnerCodecError> {
    let mut dec = ZlibDecoder::new(payload);
    let mut out = Vec::with_capacity(expected.min(1 << 26));
    (&mut dec)
        .take(expected as u64 + 1)
        .read_to_end(&mut out)
        .map_err(|e| InnerCodecError::CorruptPayload(format!("zlib: {e}")))?;
    if out.len() != expected {
        return Err(InnerCodecError::CorruptPayload(format!(
            "inflated {} bytes, expected {expected}",
            out.len()
        )));
    }
    if !dec.get_ref().is_empty() {
        return Err(InnerCodecError::CorruptPayload(format!(
            "{} bytes after end of zlib stream",
            dec.get_ref().len()
        )));
    }
    Ok(out)
}

/// Encodes quantized frames. All frames must share `layout` and fit `bitdepth`.
pub fn inner_encode(
    frames: &[PackedFrame<u16>],
    layout: PackLayout,
    bitdepth: u8,
    cfg: &InnerConfig,
) -> Result<Vec<u8>, InnerCodecError> {
    cfg.validate()?;
    check_frames(frames, layout)?;
    let max = max_sample(bitdepth);
    if let Some(&value) = frames.iter().flat_map(|f| f.samples()).find(|&&s| s > max) {
        return Err(InnerCodecError::SampleRange {
            value,
            max,
            bitdepth,
        });
    }
    match cfg.codec {
        InnerCodecId::Raw => Ok(write_raw_video(frames)),
        InnerCodecId::Lossless => Ok(deflate(&write_raw_video(frames))),
        InnerCodecId::External => external_encode(frames, layout, bitdepth, cfg),
    }
}

/// Decodes `count` frames of `layout`. External output is clamped to the bitdepth.
pub fn inner_decode(
    payload: &[u8],
    layout: PackLayout,
    bitdepth: u8,
    count: usize,
    cfg: &InnerConfig,
) -> Result<Vec<PackedFrame<u16>>, InnerCodecError> {
    let raw_len = || {
        layout
            .sample_count()
            .checked_mul(count)
            .and_then(|n| n.checked_mul(2))
            .ok_or_else(|| InnerCodecError::CorruptPayload("frame size overflows".into()))
    };
    match cfg.codec {
        InnerCodecId::Raw => read_raw_video(payload, layout, count),
        InnerCodecId::Lossless => read_raw_video(&inflate(payload, raw_len()?)?, layout, count),
        InnerCodecId::External => {
            let max = max_sample(bitdepth);
            let frames = external_decode(payload, layout, bitdepth, count, cfg)?;
            Ok(frames
                .into_iter()
                .map(|f| {
                    let l = f.layout();
                    let clamped = f.into_samples().into_iter().map(|s| s.min(max)).collect();
                    PackedFrame::new(l, clamped).unwrap()
                })
                .collect())
        }
    }
}

/// Stores unquantized f32 frames (quantization bypass). RAW and LOSSLESS only.
pub fn inner_encode_float(
    frames: &[PackedFrame<f32>],
    layout: PackLayout,
    cfg: &InnerConfig,
) -> Result<Vec<u8>, InnerCodecError> {
    cfg.validate()?;
    check_frames(frames, layout)?;
    let mut raw = Vec::with_capacity(4 * layout.sample_count() * frames.len());
    for f in frames {
        for s in f.samples() {
            raw.extend_from_slice(&s.to_le_bytes());
        }
    }
    match cfg.codec {
        InnerCodecId::Raw => Ok(raw),
        InnerCodecId::Lossless => Ok(deflate(&raw)),
        InnerCodecId::External => Err(InnerCodecError::Unsupported(
            "quantization bypass needs the raw or lossless inner codec".into(),
        )),
    }
}

pub fn inner_decode_float(
    payload: &[u8],
    layout: PackLayout,
    count: usize,
    cfg: &InnerConfig,
) -> Result<Vec<PackedFrame<f32>>, InnerCodecError> {
    let per_frame = layout.sample_count();
    let expected = per_frame
        .checked_mul(count)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| InnerCodecError::CorruptPayload("frame size overflows".into()))?;
    let inflated;
    let raw = match cfg.codec {
        InnerCodecId::Raw => payload,
        InnerCodecId::Lossless => {
            inflated = inflate(payload, expected)?;
            &inflated[..]
        }
        InnerCodecId::External => {
            return Err(InnerCodecError::Unsupported(
                "quantization bypass needs the raw or lossless inner codec".into(),
            ))
        }
    };
    if raw.len() != expected {
        return Err(InnerCodecError::CorruptPayload(format!(
            "expected {expected} float bytes, got {}",
            raw.len()
        )));
    }
    if per_frame == 0 {
        return Ok(Vec::new());
    }
    raw.chunks_exact(4 * per_frame)
        .map(|chunk| {
            let samples: Vec<f32> = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            if samples.iter().any(|v| !v.is_finite()) {
                return Err(InnerCodecError::CorruptPayload(
                    "non-finite float sample".into(),
                ));
            }
            Ok(PackedFrame::new(layout, samples).unwrap())
        })
        .collect()
}

struct Substitutions<'a> {
    input: &'a Path,
    output: &'a Path,
    layout: PackLayout,
    bitdepth: u8,
    count: usize,
    cfg: &'a InnerConfig,
}

/// Expands the placeholders of a command template.
pub fn render_template(
    template: &str,
    input: &Path,
    output: &Path,
    layout: PackLayout,
    bitdepth: u8,
    count: usize,
    cfg: &InnerConfig,
) -> String {
    Substitutions {
        input,
        output,
        layout,
        bitdepth,
        count,
        cfg,
    }
    .render(template)
}

impl Substitutions<'_> {
    fn render(&self, template: &str) -> String {
        template
            .replace("{input}", &self.input.display().to_string())
            .replace("{output}", &self.output.display().to_string())
            .replace("{qp}", &self.cfg.quality.to_string())
            .replace("{width}", &self.layout.width().to_string())
            .replace("{height}", &self.layout.height().to_string())
            .replace("{fps}", &self.cfg.fps.to_string())
            .replace("{frames}", &self.count.to_string())
            .replace("{bitdepth}", &self.bitdepth.to_string())
            .replace("{gop}", &self.cfg.gop_hint.to_string())
            .replace("{low_delay}", if self.cfg.low_delay { "1" } else { "0" })
    }
}

fn run_shell(cmd: &str) -> Result<(), InnerCodecError> {
    log::debug!("running external codec: {cmd}");
    let out = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .output()
        .map_err(|e| InnerCodecError::ExternalTool(format!("cannot spawn sh: {e}")))?;
    if !out.status.success() {
        let stderr = String::from_utf8_lossy(&out.stderr);
        return Err(InnerCodecError::ExternalTool(format!(
            "`{cmd}` exited with {}: {}",
            out.status,
            stderr.trim()
        )));
    }
    Ok(())
}

fn external_templates(cfg: &InnerConfig) -> Result<&ExternalCodec, InnerCodecError> {
    cfg.external
        .as_ref()
        .ok_or_else(|| InnerCodecError::ExternalTool("no external codec command configured".into()))
}

fn io_err(what: &str) -> impl Fn(std::io::Error) -> InnerCodecError + '_ {
    move |e| InnerCodecError::ExternalTool(format!("{what}: {e}"))
}

fn external_encode(
    frames: &[PackedFrame<u16>],
    layout: PackLayout,
    bitdepth: u8,
    cfg: &InnerConfig,
) -> Result<Vec<u8>, InnerCodecError> {
    let t = external_templates(cfg)?;
    if t.encode_template.trim().is_empty() {
        return Err(InnerCodecError::ExternalTool(
            "empty encoder command template".into(),
        ));
    }
    let dir = tempfile::tempdir().map_err(io_err("temp dir"))?;
    let input = dir.path().join("input.yuv");
    let output = dir.path().join("output.bin");
    std::fs::write(&input, write_raw_video(frames)).map_err(io_err("writing raw video"))?;
    let subs = Substitutions {
        input: &input,
        output: &output,
        layout,
        bitdepth,
        count: frames.len(),
        cfg,
    };
    run_shell(&subs.render(&t.encode_template))?;
    std::fs::read(&output).map_err(io_err("reading encoder output"))
}

fn external_decode(
    payload: &[u8],
    layout: PackLayout,
    bitdepth: u8,
    count: usize,
    cfg: &InnerConfig,
) -> Result<Vec<PackedFrame<u16>>, InnerCodecError> {
    let t = external_templates(cfg)?;
    if t.decode_template.trim().is_empty() {
        return Err(InnerCodecError::ExternalTool(
            "empty decoder command template".into(),
        ));
    }
    let dir = tempfile::tempdir().map_err(io_err("temp dir"))?;
    let input = dir.path().join("input.bin");
    let output = dir.path().join("output.yuv");
    std::fs::write(&input, payload).map_err(io_err("writing payload"))?;
    let subs = Substitutions {
        input: &input,
        output: &output,
        layout,
        bitdepth,
        count,
        cfg,
    };
    run_shell(&subs.render(&t.decode_template))?;
    let raw = std::fs::read(&output).map_err(io_err("reading decoder output"))?;
    read_raw_video(&raw, layout, count).map_err(|e| match e {
        InnerCodecError::CorruptPayload(m) => {
            InnerCodecError::ExternalTool(format!("decoder output: {m}"))
        }
        other => other,
    })
}
