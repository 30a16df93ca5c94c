//! Rate-quality evaluation: RD curves, Bjøntegaard delta rate, feature PSNR,
//! complexity ratios and sweeps.
//!
//! Task accuracy needs the task networks, which are not part of this crate,
//! so the quality axis is feature PSNR, a proxy.

use std::io::{Read, Write};
use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::bitstream;
use crate::config::{CodecConfig, ConfigError, DecodeConfig};
use crate::pipeline::{self, PipelineError, StageTimes};
use crate::tensor::FeatureTensorSet;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("curve needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("invalid rd point {index}: {msg}")]
    InvalidPoint { index: usize, msg: String },
    #[error("curves do not overlap in quality: [{lo}, {hi}]")]
    InsufficientOverlap { lo: f64, hi: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("time '{name}' must be > 0, got {value}")]
    NonPositiveTime { name: &'static str, value: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("ladder needs at least 4 settings, got {0}")]
    LadderTooShort(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv: {0}")]
    CsvSchema(String),
}

pub const MIN_CURVE_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    /// kbit/s.
    pub bitrate: f64,
    /// Higher is better.
    pub quality: f64,
}

impl RdPoint {
    pub fn new(bitrate: f64, quality: f64) -> Self {
        RdPoint { bitrate, quality }
    }
}

/// At least four points ordered by bitrate.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
    warnings: Vec<String>,
}

impl RdCurve {
    /// Sorts by bitrate. Bitrate ties and quality that drops as rate rises
    /// are kept but recorded as warnings.
    pub fn new(mut points: Vec<RdPoint>) -> Result<Self, EvalError> {
        if points.len() < MIN_CURVE_POINTS {
            return Err(EvalError::TooFewPoints {
                min: MIN_CURVE_POINTS,
                got: points.len(),
            });
        }
        for (index, p) in points.iter().enumerate() {
            if !(p.bitrate.is_finite() && p.bitrate > 0.0) {
                return Err(EvalError::InvalidPoint {
                    index,
                    msg: format!("bitrate {} must be finite and > 0", p.bitrate),
                });
            }
            if !p.quality.is_finite() {
                return Err(EvalError::InvalidPoint {
                    index,
                    msg: format!("quality {} is not finite", p.quality),
                });
            }
        }
        points.sort_by(|a, b| a.bitrate.total_cmp(&b.bitrate));
        let mut warnings = Vec::new();
        for w in points.windows(2) {
            if w[1].bitrate == w[0].bitrate {
                warnings.push(format!("bitrate tie at {} kbps", w[0].bitrate));
            } else if w[1].quality < w[0].quality {
                warnings.push(format!(
                    "quality drops from {} to {} as bitrate rises to {}",
                    w[0].quality, w[1].quality, w[1].bitrate
                ));
            }
        }
        for w in &warnings {
            log::warn!("rd curve: {w}");
        }
        Ok(RdCurve { points, warnings })
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Copy with every bitrate multiplied by `k`.
    pub fn scaled(&self, k: f64) -> RdCurve {
        RdCurve {
            points: self
                .points
                .iter()
                .map(|p| RdPoint::new(p.bitrate * k, p.quality))
                .collect(),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdMethod {
    /// Identical curves, no fit needed.
    Identical,
    /// Least-squares cubic in quality.
    Polynomial,
    /// Piecewise cubic Hermite (monotone) interpolation.
    Pchip,
}

impl std::fmt::Display for BdMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BdMethod::Identical => "identical",
            BdMethod::Polynomial => "polynomial",
            BdMethod::Pchip => "pchip",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdRate {
    /// Average rate difference of `test` vs `reference` at equal quality;
    /// negative means `test` needs less rate.
    pub percent: f64,
    pub method: BdMethod,
}

/// Scaled-Vandermonde condition number above which the cubic is abandoned.
const MAX_CONDITION: f64 = 1e8;

/// log10(rate) as a function of quality, for one curve.
#[derive(Debug, Clone)]
enum RateModel {
    Cubic {
        coeffs: [f64; 4],
        center: f64,
        scale: f64,
    },
    Pchip(Pchip),
}

impl RateModel {
    fn integrate(&self, lo: f64, hi: f64) -> f64 {
        match self {
            RateModel::Cubic {
                coeffs,
                center,
                scale,
            } => {
                let anti = |u: f64| {
                    coeffs[0] * u
                        + coeffs[1] * u * u / 2.0
                        + coeffs[2] * u.powi(3) / 3.0
                        + coeffs[3] * u.powi(4) / 4.0
                };
                scale * (anti((hi - center) / scale) - anti((lo - center) / scale))
            }
            RateModel::Pchip(p) => p.integrate(lo, hi),
        }
    }
}

/// (quality, log10 rate) sorted by quality; quality must strictly increase.
fn log_rate_samples(curve: &RdCurve) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    let mut pts: Vec<_> = curve.points().to_vec();
    pts.sort_by(|a, b| a.quality.total_cmp(&b.quality));
    for w in pts.windows(2) {
        if w[1].quality <= w[0].quality {
            return Err(EvalError::DegenerateFit(format!(
                "quality {} repeats; log-rate is not a function of quality",
                w[0].quality
            )));
        }
        if w[1].bitrate < w[0].bitrate {
            return Err(EvalError::DegenerateFit(format!(
                "quality is not monotone in bitrate near {} kbps",
                w[1].bitrate
            )));
        }
    }
    Ok((
        pts.iter().map(|p| p.quality).collect(),
        pts.iter().map(|p| p.bitrate.log10()).collect(),
    ))
}

/// Least-squares cubic fit on quality mapped to [-1, 1]. `None` when
/// ill-conditioned or non-monotone over the data range.
fn fit_cubic(q: &[f64], y: &[f64]) -> Option<RateModel> {
    let (lo, hi) = (q[0], q[q.len() - 1]);
    let center = 0.5 * (lo + hi);
    let scale = 0.5 * (hi - lo);
    let n = q.len();
    let vander = DMatrix::from_fn(n, 4, |r, c| ((q[r] - center) / scale).powi(c as i32));
    let svd = vander.svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if smin.is_nan() || smin <= 0.0 || smax / smin > MAX_CONDITION {
        return None;
    }
    let sol = svd.solve(&DVector::from_column_slice(y), 0.0).ok()?;
    let coeffs = [sol[0], sol[1], sol[2], sol[3]];
    // Rate must not fall as quality rises anywhere on the data range.
    let slope = |u: f64| coeffs[1] + 2.0 * coeffs[2] * u + 3.0 * coeffs[3] * u * u;
    if (0..=100).any(|i| slope(-1.0 + i as f64 / 50.0) < 0.0) {
        return None;
    }
    Some(RateModel::Cubic {
        coeffs,
        center,
        scale,
    })
}

/// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// `x` strictly increasing, at least two points.
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
        } else {
            for k in 1..n - 1 {
                if m[k - 1] * m[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                }
            }
            d[0] = Self::edge(h[0], h[1], m[0], m[1]);
            d[n - 1] = Self::edge(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Pchip {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        }
    }

    /// One-sided three-point end slope, shape preserving.
    fn edge(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
        let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if d.signum() != m0.signum() {
            0.0
        } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
            3.0 * m0
        } else {
            d
        }
    }

    /// Polynomial coefficients of segment `k` in local `s = x - x_k`.
    fn segment(&self, k: usize) -> [f64; 4] {
        let h = self.x[k + 1] - self.x[k];
        let m = (self.y[k + 1] - self.y[k]) / h;
        let (d0, d1) = (self.d[k], self.d[k + 1]);
        [
            self.y[k],
            d0,
            (3.0 * m - 2.0 * d0 - d1) / h,
            (d0 + d1 - 2.0 * m) / (h * h),
        ]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.locate(x);
        let c = self.segment(k);
        let s = x - self.x[k];
        c[0] + s * (c[1] + s * (c[2] + s * c[3]))
    }

    fn locate(&self, x: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&v| v <= x) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Exact integral over `[lo, hi]` (within the knot range).
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let anti = |c: &[f64; 4], s: f64| {
            c[0] * s + c[1] * s * s / 2.0 + c[2] * s.powi(3) / 3.0 + c[3] * s.powi(4) / 4.0
        };
        let mut total = 0.0;
        for k in 0..self.x.len() - 1 {
            let (a, b) = (self.x[k].max(lo), self.x[k + 1].min(hi));
            if b <= a {
                continue;
            }
            let c = self.segment(k);
            total += anti(&c, b - self.x[k]) - anti(&c, a - self.x[k]);
        }
        total
    }
}

/// Bjøntegaard delta rate of `test` against `reference`, in percent.
///
/// Fits log10(rate) as a cubic in quality for each curve, averages the
/// difference over the common quality interval, and returns
/// `100 * (10^avg - 1)`. Falls back to PCHIP when either cubic is
/// ill-conditioned or non-monotone; the method used is returned.
pub fn bd_rate(reference: &RdCurve, test: &RdCurve) -> Result<BdRate, EvalError> {
    if reference.points() == test.points() {
        return Ok(BdRate {
            percent: 0.0,
            method: BdMethod::Identical,
        });
    }
    let (qr, yr) = log_rate_samples(reference)?;
    let (qt, yt) = log_rate_samples(test)?;
    let lo = qr[0].max(qt[0]);
    let hi = qr[qr.len() - 1].min(qt[qt.len() - 1]);
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Err(EvalError::InsufficientOverlap { lo, hi });
    }
    let (mr, mt, method) = match (fit_cubic(&qr, &yr), fit_cubic(&qt, &yt)) {
        (Some(a), Some(b)) => (a, b, BdMethod::Polynomial),
        _ => (
            RateModel::Pchip(Pchip::new(&qr, &yr)),
            RateModel::Pchip(Pchip::new(&qt, &yt)),
            BdMethod::Pchip,
        ),
    };
    let avg = (mt.integrate(lo, hi) - mr.integrate(lo, hi)) / (hi - lo);
    Ok(BdRate {
        percent: (10f64.powf(avg) - 1.0) * 100.0,
        method,
    })
}

/// Peak signal-to-noise ratio of reconstructed features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePsnr {
    /// Capped at [`PSNR_CAP_DB`] for exact matches.
    pub db: f64,
    pub mse: f64,
    pub exact: bool,
}

pub const PSNR_CAP_DB: f64 = 999.0;

/// `10 log10(peak^2 / MSE)` with `peak = max |original|` (1.0 if all zero),
/// MSE over every element of every layer and frame.
pub fn quality_metric(
    original: &FeatureTensorSet,
    reconstructed: &FeatureTensorSet,
) -> Result<FeaturePsnr, EvalError> {
    if original.frame_count() != reconstructed.frame_count()
        || original.layer_shapes() != reconstructed.layer_shapes()
    {
        return Err(EvalError::ShapeMismatch(format!(
            "{} frames {:?} vs {} frames {:?}",
            original.frame_count(),
            original.layer_shapes(),
            reconstructed.frame_count(),
            reconstructed.layer_shapes()
        )));
    }
    let mut sse = 0f64;
    let mut peak = 0f64;
    let mut n = 0usize;
    for (a, b) in original
        .frames()
        .iter()
        .flatten()
        .zip(reconstructed.frames().iter().flatten())
    {
        for (&x, &y) in a.data().iter().zip(b.data()) {
            let e = x as f64 - y as f64;
            sse += e * e;
            peak = peak.max((x as f64).abs());
        }
        n += a.data().len();
    }
    let mse = sse / n as f64;
    if mse == 0.0 {
        return Ok(FeaturePsnr {
            db: PSNR_CAP_DB,
            mse,
            exact: true,
        });
    }
    let peak = if peak == 0.0 { 1.0 } else { peak };
    Ok(FeaturePsnr {
        db: (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB),
        mse,
        exact: false,
    })
}

/// Execution-time complexity of the codec relative to the split network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityReport {
    pub fcm_encoder_time: f64,
    pub fcm_decoder_time: f64,
    pub nn_part1_time: f64,
    pub nn_part2_time: f64,
    /// FCM encoder / NN part 2.
    pub encoder_ratio: f64,
    /// FCM decoder / NN part 1.
    pub decoder_ratio: f64,
}

impl ComplexityReport {
    /// Encoding at the edge beats running NN part 2 there too.
    pub fn encoder_offload_cheaper(&self) -> bool {
        self.encoder_ratio < 1.0
    }

    /// Decoding at the server beats running NN part 1 there.
    pub fn decoder_cheaper(&self) -> bool {
        self.decoder_ratio < 1.0
    }

    pub fn verdict(holds: bool) -> &'static str {
        if holds {
            "satisfied"
        } else {
            "NOT satisfied"
        }
    }
}

/// All times in seconds.
pub fn complexity_ratios(
    fcm_encoder_time: f64,
    fcm_decoder_time: f64,
    nn_part1_time: f64,
    nn_part2_time: f64,
) -> Result<ComplexityReport, EvalError> {
    for (name, value) in [
        ("fcm_encoder_time", fcm_encoder_time),
        ("fcm_decoder_time", fcm_decoder_time),
        ("nn_part1_time", nn_part1_time),
        ("nn_part2_time", nn_part2_time),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(EvalError::NonPositiveTime { name, value });
        }
    }
    Ok(ComplexityReport {
        fcm_encoder_time,
        fcm_decoder_time,
        nn_part1_time,
        nn_part2_time,
        encoder_ratio: fcm_encoder_time / nn_part2_time,
        decoder_ratio: fcm_decoder_time / nn_part1_time,
    })
}

/// Values to try for one configuration key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ladder {
    pub key: String,
    pub values: Vec<String>,
}

impl Ladder {
    pub fn new(key: impl Into<String>, values: impl IntoIterator<Item = impl ToString>) -> Self {
        Ladder {
            key: key.into(),
            values: values.into_iter().map(|v| v.to_string()).collect(),
        }
    }
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config_id: String,
    pub qp: i32,
    pub bitrate_kbps: f64,
    pub quality_db: f64,
    pub bytes: usize,
    pub enc_time_s: f64,
    pub dec_time_s: f64,
}

impl SweepRow {
    pub fn point(&self) -> RdPoint {
        RdPoint::new(self.bitrate_kbps, self.quality_db)
    }
}

pub const CSV_COLUMNS: [&str; 7] = [
    "config_id",
    "qp",
    "bitrate_kbps",
    "quality_db",
    "bytes",
    "enc_time_s",
    "dec_time_s",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    pub fn points(&self) -> Vec<RdPoint> {
        self.rows.iter().map(SweepRow::point).collect()
    }

    pub fn curve(&self) -> Result<RdCurve, EvalError> {
        RdCurve::new(self.points())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.config_id.clone(),
                r.qp.to_string(),
                format!("{:.6}", r.bitrate_kbps),
                format!("{:.6}", r.quality_db),
                r.bytes.to_string(),
                format!("{:.6}", r.enc_time_s),
                format!("{:.6}", r.dec_time_s),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Sweep, EvalError> {
        let mut rd = csv::Reader::from_reader(input);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
            return Err(EvalError::CsvSchema(format!(
                "expected columns {}, got {}",
                CSV_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let field = |j: usize| rec.get(j).unwrap_or("");
            let num = |j: usize| {
                field(j).parse::<f64>().map_err(|_| {
                    EvalError::CsvSchema(format!(
                        "row {}: column {} is not a number",
                        i + 1,
                        CSV_COLUMNS[j]
                    ))
                })
            };
            rows.push(SweepRow {
                config_id: field(0).to_string(),
                qp: num(1)? as i32,
                bitrate_kbps: num(2)?,
                quality_db: num(3)?,
                bytes: num(4)? as usize,
                enc_time_s: num(5)?,
                dec_time_s: num(6)?,
            });
        }
        Ok(Sweep { rows })
    }
}

/// Encodes and decodes `set` once per ladder value, collecting rate and
/// feature PSNR. Points run sequentially so their timings do not interfere.
pub fn sweep(
    set: &FeatureTensorSet,
    base: &CodecConfig,
    ladder: &Ladder,
) -> Result<Sweep, EvalError> {
    if ladder.values.len() < MIN_CURVE_POINTS {
        return Err(EvalError::LadderTooShort(ladder.values.len()));
    }
    let mut rows = Vec::with_capacity(ladder.values.len());
    for value in &ladder.values {
        let mut cfg = base.clone();
        cfg.set(&ladder.key, value)?;
        let enc = cfg.encode_config();
        let dec: DecodeConfig = cfg.decode_config();
        let mut times = StageTimes::default();
        let stream = pipeline::encode_timed(set, &enc, &mut times)?;
        let decoded = pipeline::decode_timed(&stream, &dec, &mut times)?;
        let (header, _) = bitstream::parse_header(&stream).expect("stream produced by encode");
        let psnr = quality_metric(set, &decoded)?;
        rows.push(SweepRow {
            config_id: format!("{}={}", ladder.key, value),
            qp: enc.inner.quality,
            bitrate_kbps: header.bitrate_kbps(stream.len()),
            quality_db: psnr.db,
            bytes: stream.len(),
            enc_time_s: secs(times.encode_total),
            dec_time_s: secs(times.decode_total),
        });
    }
    Ok(Sweep { rows })
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve() -> RdCurve {
        RdCurve::new(vec![
            RdPoint::new(100.0, 30.0),
            RdPoint::new(200.0, 33.5),
            RdPoint::new(400.0, 36.2),
            RdPoint::new(800.0, 38.1),
        ])
        .unwrap()
    }

    #[test]
    fn identical_curves_give_zero() {
        let c = curve();
        assert_eq!(bd_rate(&c, &c).unwrap().percent, 0.0);
    }

    #[test]
    fn rate_scaling_closed_form() {
        let c = curve();
        for (k, want) in [(2.0, 100.0), (0.5, -50.0), (4.0, 300.0)] {
            let r = bd_rate(&c, &c.scaled(k)).unwrap();
            assert!((r.percent - want).abs() < 0.1, "k={k}: {r:?}");
        }
    }

    #[test]
    fn pchip_matches_linear_data() {
        let p = Pchip::new(&[0.0, 1.0, 2.0, 4.0], &[1.0, 3.0, 5.0, 9.0]);
        assert!((p.eval(3.0) - 7.0).abs() < 1e-12);
        // integral of 2x + 1 over [0.5, 3.5] = [x^2 + x] = 15.75 - 0.75
        assert!((p.integrate(0.5, 3.5) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_quality_is_degenerate() {
        let c = RdCurve::new(vec![
            RdPoint::new(100.0, 30.0),
            RdPoint::new(200.0, 30.0),
            RdPoint::new(400.0, 36.0),
            RdPoint::new(800.0, 38.0),
        ])
        .unwrap();
        assert!(matches!(
            bd_rate(&curve(), &c),
            Err(EvalError::DegenerateFit(_))
        ));
        let dropping = RdCurve::new(vec![
            RdPoint::new(100.0, 30.0),
            RdPoint::new(200.0, 35.0),
            RdPoint::new(400.0, 33.0),
            RdPoint::new(800.0, 38.0),
        ])
        .unwrap();
        assert_eq!(dropping.warnings().len(), 1);
        assert!(matches!(
            bd_rate(&curve(), &dropping),
            Err(EvalError::DegenerateFit(_))
        ));
    }

    #[test]
    fn no_overlap() {
        let far = RdCurve::new(
            (0..4)
                .map(|i| RdPoint::new(100.0 * (i + 1) as f64, 50.0 + i as f64))
                .collect(),
        )
        .unwrap();
        assert!(matches!(
            bd_rate(&curve(), &far),
            Err(EvalError::InsufficientOverlap { .. })
        ));
    }

    #[test]
    fn curve_validation() {
        assert!(matches!(
            RdCurve::new(vec![RdPoint::new(1.0, 1.0); 3]),
            Err(EvalError::TooFewPoints { .. })
        ));
        let mut pts = curve().points().to_vec();
        pts[2].bitrate = 0.0;
        assert!(matches!(
            RdCurve::new(pts),
            Err(EvalError::InvalidPoint { index: 2, .. })
        ));
    }

    #[test]
    fn complexity_examples() {
        let r = complexity_ratios(12.0, 0.3, 1.0, 1.0).unwrap();
        assert_eq!(r.encoder_ratio, 12.0);
        assert!(!r.encoder_offload_cheaper());
        assert_eq!(r.decoder_ratio, 0.3);
        assert!(r.decoder_cheaper());
        let eq = complexity_ratios(2.0, 2.0, 2.0, 2.0).unwrap();
        assert_eq!(eq.encoder_ratio, 1.0);
        assert!(!eq.encoder_offload_cheaper() && !eq.decoder_cheaper());
        assert!(matches!(
            complexity_ratios(1.0, 0.0, 1.0, 1.0),
            Err(EvalError::NonPositiveTime {
                name: "fcm_decoder_time",
                ..
            })
        ));
    }

    #[test]
    fn csv_round_trip_and_schema() {
        let s = Sweep {
            rows: vec![SweepRow {
                config_id: "qp=22".into(),
                qp: 22,
                bitrate_kbps: 12.5,
                quality_db: 41.25,
                bytes: 1234,
                enc_time_s: 0.5,
                dec_time_s: 0.25,
            }],
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("config_id,qp,bitrate_kbps,quality_db,bytes,enc_time_s,dec_time_s\n")
        );
        assert_eq!(Sweep::read_csv(&buf[..]).unwrap(), s);
        assert!(Sweep::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
