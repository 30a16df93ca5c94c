//! `fcm`: encode, decode and evaluate feature streams.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O or parse failure, 3 pipeline error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fcm_core::bitstream::{parse_header, FcmHeader};
use fcm_core::config::{load_gain_table, CodecConfig, ConfigError};
use fcm_core::eval::{
    bd_rate, complexity_ratios, sweep, ComplexityReport, EvalError, Ladder, Sweep,
};
use fcm_core::pipeline::{self, PipelineError, StageTimes};
use fcm_core::tensor::{load_fts, save_fts, TensorError};
use fcm_core::FeatureTensorSet;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "fcm", version, about = "Feature coding for split inference")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Encode an FTS1 feature file into an FCMB stream.
    Encode(EncodeArgs),
    /// Decode an FCMB stream back into an FTS1 feature file.
    Decode(DecodeArgs),
    /// Print the header of an FCMB stream.
    Inspect {
        #[arg(long)]
        input: PathBuf,
    },
    /// Encode/decode over a ladder of one config key and write rate-quality CSV.
    Sweep(SweepArgs),
    /// BD-rate of a test curve against a reference curve (sweep CSVs).
    Bdrate {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Complexity ratios of the codec against the two network parts.
    Complexity(ComplexityArgs),
}

#[derive(Debug, Args)]
struct CodecArgs {
    /// Override a config key, e.g. `--set qp=27`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    #[arg(long)]
    gain_table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    codec: CodecArgs,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, required_unless_present = "inspect_only")]
    output: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    codec: CodecArgs,
    /// Print the header and stop.
    #[arg(long)]
    inspect_only: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "qp")]
    ladder_key: String,
    /// Comma-separated values, at least four.
    #[arg(long, value_delimiter = ',', required = true)]
    ladder: Vec<String>,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    codec: CodecArgs,
}

#[derive(Debug, Args)]
struct ComplexityArgs {
    /// Seconds.
    #[arg(long, required_unless_present = "report")]
    fcm_encoder: Option<f64>,
    #[arg(long, required_unless_present = "report")]
    fcm_decoder: Option<f64>,
    #[arg(long, required_unless_present = "report")]
    nn_part1: Option<f64>,
    #[arg(long, required_unless_present = "report")]
    nn_part2: Option<f64>,
    /// `key = seconds` lines for fcm_encoder, fcm_decoder, nn_part1, nn_part2.
    #[arg(long, conflicts_with_all = ["fcm_encoder", "fcm_decoder", "nn_part1", "nn_part2"])]
    report: Option<PathBuf>,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("pipeline stage {0}")]
    Pipeline(#[from] PipelineError),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Pipeline(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(format!("config: {e}")),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Pipeline(p) => CliError::Pipeline(p),
            EvalError::Config(c) => c.into(),
            EvalError::Csv(_) | EvalError::CsvSchema(_) => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn load_features(path: &Path) -> Result<FeatureTensorSet, CliError> {
    load_fts(path).map_err(|e| match e {
        TensorError::Shape(_) => CliError::Usage(format!("{}: {e}", path.display())),
        _ => CliError::Io(format!("{}: {e}", path.display())),
    })
}

fn codec_config(path: Option<&Path>, args: &CodecArgs) -> Result<CodecConfig, CliError> {
    let mut cfg = match path {
        Some(p) => CodecConfig::load(p)?,
        None => CodecConfig::default(),
    };
    for (k, v) in &args.overrides {
        cfg.set(k, v)?;
    }
    if let Some(p) = &args.gain_table {
        cfg.set_gain_table(load_gain_table(p)?);
    }
    cfg.apply_env();
    Ok(cfg)
}

fn print_times(out: &mut impl Write, times: &StageTimes, names: &[&str]) -> io::Result<()> {
    for (name, d) in times.stages() {
        if names.contains(&name) {
            writeln!(out, "time_{name}_s={:.6}", d.as_secs_f64())?;
        }
    }
    Ok(())
}

fn print_header(out: &mut impl Write, h: &FcmHeader, stream_bytes: usize) -> io::Result<()> {
    writeln!(out, "reducer={}", h.reducer)?;
    writeln!(out, "codec={}", h.codec)?;
    writeln!(out, "temporal={}", h.temporal.enabled)?;
    writeln!(out, "frames={}", h.temporal.original_frames)?;
    writeln!(out, "coded_frames={}", h.coded_frames())?;
    writeln!(out, "fps={}", h.frame_rate)?;
    writeln!(out, "gain_index={}", h.gain_index)?;
    for (k, s) in h.layers.iter().enumerate() {
        writeln!(out, "layer{k}={s}")?;
    }
    writeln!(out, "fused={}", h.fused)?;
    writeln!(out, "grid={}x{}", h.grid_rows, h.grid_cols)?;
    if h.bypass() {
        writeln!(out, "bitdepth=bypass")?;
    } else {
        writeln!(out, "bitdepth={}", h.bitdepth)?;
    }
    writeln!(out, "quality={}", h.quality)?;
    writeln!(out, "gop={}", h.gop_hint)?;
    writeln!(out, "low_delay={}", h.low_delay)?;
    writeln!(out, "payload_bytes={}", h.payload_len)?;
    writeln!(out, "stream_bytes={stream_bytes}")?;
    writeln!(out, "bitrate_kbps={:.3}", h.bitrate_kbps(stream_bytes))
}

fn read_stream(path: &Path) -> Result<(Vec<u8>, FcmHeader), CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let (header, _) = parse_header(&bytes).map_err(|e| {
        CliError::Pipeline(PipelineError {
            stage: pipeline::Stage::Demux,
            source: e.into(),
        })
    })?;
    Ok((bytes, header))
}

fn encode(a: &EncodeArgs, out: &mut impl Write) -> Result<(), CliError> {
    let cfg = codec_config(Some(&a.config), &a.codec)?;
    let set = load_features(&a.input)?;
    let mut times = StageTimes::default();
    let stream = pipeline::encode_timed(&set, &cfg.encode_config(), &mut times)?;
    fs::write(&a.output, &stream).map_err(io_err(&a.output))?;
    let (header, _) = parse_header(&stream).expect("encoder output parses");
    let w = || CliError::Io("stdout".into());
    writeln!(out, "bytes={}", stream.len()).map_err(|_| w())?;
    writeln!(out, "bitrate_kbps={:.3}", header.bitrate_kbps(stream.len())).map_err(|_| w())?;
    print_times(out, &times, &StageTimes::STAGE_NAMES[..3]).map_err(|_| w())?;
    writeln!(
        out,
        "time_encode_total_s={:.6}",
        times.encode_total.as_secs_f64()
    )
    .map_err(|_| w())
}

fn decode(a: &DecodeArgs, out: &mut impl Write) -> Result<(), CliError> {
    let w = |_| CliError::Io("stdout".into());
    let (bytes, header) = read_stream(&a.input)?;
    if a.inspect_only {
        return print_header(out, &header, bytes.len()).map_err(w);
    }
    let cfg = codec_config(a.config.as_deref(), &a.codec)?;
    let mut times = StageTimes::default();
    let set = pipeline::decode_timed(&bytes, &cfg.decode_config(), &mut times)?;
    let path = a
        .output
        .as_deref()
        .expect("clap requires --output without --inspect-only");
    save_fts(&set, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    writeln!(out, "frames={}", set.frame_count()).map_err(w)?;
    writeln!(out, "fps={}", set.frame_rate()).map_err(w)?;
    for (k, s) in set.layer_shapes().iter().enumerate() {
        writeln!(out, "layer{k}={s}").map_err(w)?;
    }
    print_times(out, &times, &StageTimes::STAGE_NAMES[3..]).map_err(w)?;
    writeln!(
        out,
        "time_decode_total_s={:.6}",
        times.decode_total.as_secs_f64()
    )
    .map_err(w)
}

fn run_sweep(a: &SweepArgs, out: &mut impl Write) -> Result<(), CliError> {
    let cfg = codec_config(Some(&a.config), &a.codec)?;
    let ladder = Ladder::new(&a.ladder_key, &a.ladder);
    if ladder.values.len() < fcm_core::eval::MIN_CURVE_POINTS {
        return Err(EvalError::LadderTooShort(ladder.values.len()).into());
    }
    let set = load_features(&a.input)?;
    let result = sweep(&set, &cfg, &ladder)?;
    match &a.output {
        Some(p) => {
            let f = fs::File::create(p).map_err(io_err(p))?;
            result.write_csv(f)?;
        }
        None => result.write_csv(out)?,
    }
    Ok(())
}

fn read_curve(path: &Path) -> Result<fcm_core::eval::RdCurve, CliError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let sweep = Sweep::read_csv(f).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let curve = sweep
        .curve()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    for w in curve.warnings() {
        log::warn!("{}: {w}", path.display());
    }
    Ok(curve)
}

fn bdrate(reference: &Path, test: &Path, out: &mut impl Write) -> Result<(), CliError> {
    let r = bd_rate(&read_curve(reference)?, &read_curve(test)?)?;
    let w = |_| CliError::Io("stdout".into());
    writeln!(out, "bd_rate={:.2}%", r.percent).map_err(w)?;
    writeln!(out, "method={}", r.method).map_err(w)
}

fn parse_report(path: &Path) -> Result<[f64; 4], CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let keys = ["fcm_encoder", "fcm_decoder", "nn_part1", "nn_part2"];
    let mut vals = [None; 4];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: String| CliError::Usage(format!("{}:{}: {m}", path.display(), i + 1));
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key = seconds, got '{line}'")))?;
        let slot = keys
            .iter()
            .position(|&name| name == k.trim())
            .ok_or_else(|| bad(format!("unknown key '{}'", k.trim())))?;
        vals[slot] = Some(
            v.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("'{}' is not a number", v.trim())))?,
        );
    }
    let mut out = [0.0; 4];
    for (i, v) in vals.iter().enumerate() {
        out[i] =
            v.ok_or_else(|| CliError::Usage(format!("{}: missing '{}'", path.display(), keys[i])))?;
    }
    Ok(out)
}

fn complexity(a: &ComplexityArgs, out: &mut impl Write) -> Result<(), CliError> {
    let [enc, dec, nn1, nn2] = match &a.report {
        Some(p) => parse_report(p)?,
        None => [
            a.fcm_encoder.unwrap_or_default(),
            a.fcm_decoder.unwrap_or_default(),
            a.nn_part1.unwrap_or_default(),
            a.nn_part2.unwrap_or_default(),
        ],
    };
    let r = complexity_ratios(enc, dec, nn1, nn2)?;
    let w = |_| CliError::Io("stdout".into());
    writeln!(out, "encoder_ratio={:.2}", r.encoder_ratio).map_err(w)?;
    writeln!(out, "decoder_ratio={:.2}", r.decoder_ratio).map_err(w)?;
    writeln!(
        out,
        "encoder inequality (fcm_encoder < nn_part2): {}",
        ComplexityReport::verdict(r.encoder_offload_cheaper())
    )
    .map_err(w)?;
    writeln!(
        out,
        "decoder inequality (fcm_decoder < nn_part1): {}",
        ComplexityReport::verdict(r.decoder_cheaper())
    )
    .map_err(w)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Cmd::Encode(a) => encode(a, &mut out),
        Cmd::Decode(a) => decode(a, &mut out),
        Cmd::Inspect { input } => {
            let (bytes, header) = read_stream(input)?;
            print_header(&mut out, &header, bytes.len()).map_err(|_| CliError::Io("stdout".into()))
        }
        Cmd::Sweep(a) => run_sweep(a, &mut out),
        Cmd::Bdrate { reference, test } => bdrate(reference, test, &mut out),
        Cmd::Complexity(a) => complexity(a, &mut out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(CliError::Usage(format!("thread pool: {e}"))),
        },
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
