//! Python bindings: `import pyfcm`.

use std::collections::HashMap;

use fcm_core::bitstream::parse_header;
use fcm_core::conversion::{PackLayout, PackedFrame, QuantizationParams};
use fcm_core::eval::{self, RdCurve, RdPoint};
use fcm_core::tensor::{decode_fts, encode_fts, load_fts, save_fts};
use fcm_core::{pipeline, CodecConfig, FeatureLayer, FeatureTensorSet, LayerShape};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

create_exception!(pyfcm, FcmError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    FcmError::new_err(e.to_string())
}

type LayerTuple = (usize, usize, usize, Vec<f32>);

/// Frames of multi-scale feature layers plus a frame rate.
///
/// Built from `frames[t][k] = (channels, height, width, flat_values)`.
#[pyclass(name = "FeatureSet", module = "pyfcm", frozen)]
struct PyFeatureSet {
    inner: FeatureTensorSet,
}

#[pymethods]
impl PyFeatureSet {
    #[new]
    #[pyo3(signature = (frames, fps = 30.0))]
    fn new(frames: Vec<Vec<LayerTuple>>, fps: f32) -> PyResult<Self> {
        let frames = frames
            .into_iter()
            .map(|layers| {
                layers
                    .into_iter()
                    .map(|(c, h, w, data)| FeatureLayer::new(c, h, w, data))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        Ok(PyFeatureSet {
            inner: FeatureTensorSet::new(frames, fps).map_err(err)?,
        })
    }

    /// Reads an FTS1 file.
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyFeatureSet {
            inner: load_fts(path).map_err(err)?,
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        save_fts(&self.inner, path).map_err(err)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(PyFeatureSet {
            inner: decode_fts(data).map_err(err)?,
        })
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &encode_fts(&self.inner).map_err(err)?))
    }

    #[getter]
    fn frame_count(&self) -> usize {
        self.inner.frame_count()
    }

    #[getter]
    fn fps(&self) -> f32 {
        self.inner.frame_rate()
    }

    /// `[(channels, height, width), ...]`, largest layer first.
    #[getter]
    fn layer_shapes(&self) -> Vec<(usize, usize, usize)> {
        self.inner
            .layer_shapes()
            .iter()
            .map(|s| (s.channels, s.height, s.width))
            .collect()
    }

    /// Inverse of the constructor.
    fn to_lists(&self) -> Vec<Vec<LayerTuple>> {
        self.inner
            .frames()
            .iter()
            .map(|layers| {
                layers
                    .iter()
                    .map(|l| (l.channels(), l.height(), l.width(), l.data().to_vec()))
                    .collect()
            })
            .collect()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "FeatureSet(frames={}, fps={}, layers={:?})",
            self.inner.frame_count(),
            self.inner.frame_rate(),
            self.layer_shapes()
        )
    }
}

fn config(options: Option<HashMap<String, String>>) -> PyResult<CodecConfig> {
    let mut cfg = CodecConfig::default();
    for (k, v) in options.unwrap_or_default() {
        cfg.set(&k, &v).map_err(err)?;
    }
    cfg.apply_env();
    Ok(cfg)
}

/// Encodes to an FCMB stream. `options` uses config-file keys, e.g. `{"qp": "27"}`.
#[pyfunction]
#[pyo3(signature = (features, options = None))]
fn encode<'py>(
    py: Python<'py>,
    features: &PyFeatureSet,
    options: Option<HashMap<String, String>>,
) -> PyResult<Bound<'py, PyBytes>> {
    let cfg = config(options)?.encode_config();
    let set = features.inner.clone();
    let stream = py.detach(|| pipeline::encode(&set, &cfg)).map_err(err)?;
    Ok(PyBytes::new(py, &stream))
}

#[pyfunction]
#[pyo3(signature = (stream, options = None))]
fn decode(
    py: Python<'_>,
    stream: Vec<u8>,
    options: Option<HashMap<String, String>>,
) -> PyResult<PyFeatureSet> {
    let cfg = config(options)?.decode_config();
    let inner = py.detach(|| pipeline::decode(&stream, &cfg)).map_err(err)?;
    Ok(PyFeatureSet { inner })
}

/// Header fields of an FCMB stream as a dict.
#[pyfunction]
fn inspect<'py>(py: Python<'py>, stream: &[u8]) -> PyResult<Bound<'py, PyDict>> {
    let (h, len) = parse_header(stream).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("reducer", h.reducer.to_string())?;
    d.set_item("codec", h.codec.to_string())?;
    d.set_item("temporal", h.temporal.enabled)?;
    d.set_item("frames", h.temporal.original_frames)?;
    d.set_item("coded_frames", h.coded_frames())?;
    d.set_item("fps", h.frame_rate)?;
    d.set_item("gain_index", h.gain_index)?;
    d.set_item(
        "layers",
        h.layers
            .iter()
            .map(|s| (s.channels, s.height, s.width))
            .collect::<Vec<_>>(),
    )?;
    d.set_item("fused", (h.fused.channels, h.fused.height, h.fused.width))?;
    d.set_item("grid", (h.grid_rows, h.grid_cols))?;
    d.set_item("bitdepth", h.bitdepth)?;
    d.set_item("frame_ranges", h.frame_ranges.clone())?;
    d.set_item("quality", h.quality)?;
    d.set_item("gop", h.gop_hint)?;
    d.set_item("low_delay", h.low_delay)?;
    d.set_item("header_bytes", len)?;
    d.set_item("payload_bytes", h.payload_len)?;
    d.set_item("bitrate_kbps", h.bitrate_kbps(stream.len()))?;
    Ok(d)
}

/// Feature PSNR in dB (capped at 999 for exact matches).
#[pyfunction]
fn quality_metric(original: &PyFeatureSet, reconstructed: &PyFeatureSet) -> PyResult<f64> {
    Ok(eval::quality_metric(&original.inner, &reconstructed.inner)
        .map_err(err)?
        .db)
}

fn curve(points: Vec<(f64, f64)>) -> PyResult<RdCurve> {
    RdCurve::new(
        points
            .into_iter()
            .map(|(r, q)| RdPoint::new(r, q))
            .collect(),
    )
    .map_err(err)
}

/// `(percent, method)` for two lists of `(bitrate, quality)` points.
#[pyfunction]
fn bd_rate(reference: Vec<(f64, f64)>, test: Vec<(f64, f64)>) -> PyResult<(f64, String)> {
    let r = eval::bd_rate(&curve(reference)?, &curve(test)?).map_err(err)?;
    Ok((r.percent, r.method.to_string()))
}

/// `(encoder_ratio, decoder_ratio, encoder_holds, decoder_holds)`.
#[pyfunction]
fn complexity_ratios(
    fcm_encoder: f64,
    fcm_decoder: f64,
    nn_part1: f64,
    nn_part2: f64,
) -> PyResult<(f64, f64, bool, bool)> {
    let r = eval::complexity_ratios(fcm_encoder, fcm_decoder, nn_part1, nn_part2).map_err(err)?;
    Ok((
        r.encoder_ratio,
        r.decoder_ratio,
        r.encoder_offload_cheaper(),
        r.decoder_cheaper(),
    ))
}

/// `(rows, cols)` of the packing grid for `channels` channels.
#[pyfunction]
fn pack_grid(channels: usize) -> PyResult<(usize, usize)> {
    if channels == 0 {
        return Err(err("channels must be positive"));
    }
    let l = PackLayout::for_shape(LayerShape::new(channels, 1, 1));
    Ok((l.grid_rows, l.grid_cols))
}

fn flat_frame<S: Copy>(samples: Vec<S>) -> PyResult<PackedFrame<S>> {
    if samples.is_empty() {
        return Err(err("no samples"));
    }
    let layout = PackLayout::for_shape(LayerShape::new(1, 1, samples.len()));
    PackedFrame::new(layout, samples).map_err(err)
}

/// Quantizes against the values' own range: `(codes, x_min, x_max)`.
#[pyfunction]
#[pyo3(signature = (values, bitdepth = 10))]
fn quantize(values: Vec<f32>, bitdepth: u8) -> PyResult<(Vec<u16>, f32, f32)> {
    let frame = flat_frame(values)?;
    let p = QuantizationParams::for_frame(&frame, bitdepth).map_err(err)?;
    let q = fcm_core::conversion::quantize(&frame, &p);
    Ok((q.into_samples(), p.x_min, p.x_max))
}

#[pyfunction]
#[pyo3(signature = (codes, x_min, x_max, bitdepth = 10))]
fn dequantize(codes: Vec<u16>, x_min: f32, x_max: f32, bitdepth: u8) -> PyResult<Vec<f32>> {
    let p = QuantizationParams::new(bitdepth, x_min, x_max).map_err(err)?;
    if let Some(&c) = codes.iter().find(|&&c| u32::from(c) > p.max_num_bits()) {
        return Err(err(format!("code {c} exceeds {}", p.max_num_bits())));
    }
    Ok(fcm_core::conversion::dequantize(&flat_frame(codes)?, &p).into_samples())
}

#[pymodule]
fn pyfcm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FcmError", m.py().get_type::<FcmError>())?;
    m.add_class::<PyFeatureSet>()?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(inspect, m)?)?;
    m.add_function(wrap_pyfunction!(quality_metric, m)?)?;
    m.add_function(wrap_pyfunction!(bd_rate, m)?)?;
    m.add_function(wrap_pyfunction!(complexity_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(pack_grid, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(dequantize, m)?)?;
    Ok(())
}
