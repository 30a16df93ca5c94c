//! `key = value` configuration files for encoding and decoding.
//!
//! Blank lines and `#` comments are ignored. Keys:
//!
//! | key                   | values                      | default    |
//! |-----------------------|-----------------------------|------------|
//! | `reducer`             | `s2d`, `avgpool`            | `s2d`      |
//! | `gain_index`          | u16                         | `0`        |
//! | `gain_table`          | path to a gain table file   | none       |
//! | `temporal`            | bool                        | `false`    |
//! | `codec`               | `raw`, `lossless`, `external` | `lossless` |
//! | `qp`                  | i32 in 0..=63               | `32`       |
//! | `gop`                 | u16, halved when temporal   | `8`        |
//! | `low_delay`           | bool                        | `true`     |
//! | `bitdepth`            | 8..=16                      | `10`       |
//! | `bypass_quantization` | bool (debug: store raw f32) | `false`    |
//! | `external_encoder`    | command template            | none       |
//! | `external_decoder`    | command template            | none       |
//!
//! Booleans accept `true/false`, `on/off`, `yes/no`, `1/0`.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::conversion::DEFAULT_BITDEPTH;
use crate::inner_codec::{ExternalCodec, InnerCodecId, InnerConfig};
use crate::reduction::{GainTable, ReducerId};

/// Environment variable overriding the external encoder template.
pub const EXTERNAL_CODEC_ENV: &str = "FCM_EXTERNAL_CODEC";
/// Environment variable overriding the external decoder template.
pub const EXTERNAL_DECODER_ENV: &str = "FCM_EXTERNAL_DECODER";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("bad value for '{key}': {msg}")]
    Value { key: String, msg: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        msg: msg.into(),
    }
}

pub fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(bad(key, format!("'{v}' is not a boolean"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| bad(key, format!("'{v}' is not a valid number")))
}

/// Everything the encoder needs besides the features themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeConfig {
    pub reducer: ReducerId,
    pub gain_index: u16,
    pub gains: GainTable,
    pub temporal: bool,
    pub bitdepth: u8,
    pub bypass_quantization: bool,
    pub inner: InnerConfig,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            reducer: ReducerId::S2d,
            gain_index: 0,
            gains: GainTable::default(),
            temporal: false,
            bitdepth: DEFAULT_BITDEPTH,
            bypass_quantization: false,
            inner: InnerConfig::default(),
        }
    }
}

/// Decoder-side settings: everything else travels in the stream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecodeConfig {
    pub gains: GainTable,
    pub external: Option<ExternalCodec>,
}

/// A parsed configuration file driving both directions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CodecConfig {
    pub encode: EncodeConfig,
    pub external: ExternalCodec,
    base_dir: PathBuf,
}

impl CodecConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ConfigError> {
        let mut cfg = CodecConfig {
            base_dir: base_dir.into(),
            ..Default::default()
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                msg: format!("expected key=value, got '{line}'"),
            })?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| ConfigError::Syntax {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
        }
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Sets one key; used by the file parser and by command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let e = &mut self.encode;
        match key {
            "reducer" => e.reducer = value.parse().map_err(|m: String| bad(key, m))?,
            "gain_index" => e.gain_index = parse_num(key, value)?,
            "gain_table" => {
                let path = self.base_dir.join(value);
                e.gains = load_gain_table(&path)?;
            }
            "temporal" => e.temporal = parse_bool(key, value)?,
            "codec" => e.inner.codec = value.parse::<InnerCodecId>().map_err(|m| bad(key, m))?,
            "qp" | "quality" => e.inner.quality = parse_num(key, value)?,
            "gop" => e.inner.gop_hint = parse_num(key, value)?,
            "low_delay" => e.inner.low_delay = parse_bool(key, value)?,
            "bitdepth" => {
                let b: u8 = parse_num(key, value)?;
                if !(8..=16).contains(&b) {
                    return Err(bad(key, format!("{b} outside 8..=16")));
                }
                e.bitdepth = b;
            }
            "bypass_quantization" => e.bypass_quantization = parse_bool(key, value)?,
            "external_encoder" => self.external.encode_template = value.to_string(),
            "external_decoder" => self.external.decode_template = value.to_string(),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies `FCM_EXTERNAL_CODEC` / `FCM_EXTERNAL_DECODER` if set.
    pub fn apply_env(&mut self) {
        if let Ok(t) = std::env::var(EXTERNAL_CODEC_ENV) {
            self.external.encode_template = t;
        }
        if let Ok(t) = std::env::var(EXTERNAL_DECODER_ENV) {
            self.external.decode_template = t;
        }
    }

    pub fn set_gain_table(&mut self, gains: GainTable) {
        self.encode.gains = gains;
    }

    fn external(&self) -> Option<ExternalCodec> {
        let ext = &self.external;
        if ext.encode_template.is_empty() && ext.decode_template.is_empty() {
            None
        } else {
            Some(ext.clone())
        }
    }

    pub fn encode_config(&self) -> EncodeConfig {
        let mut e = self.encode.clone();
        e.inner.external = self.external();
        e
    }

    pub fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            gains: self.encode.gains.clone(),
            external: self.external(),
        }
    }
}

pub fn load_gain_table(path: &Path) -> Result<GainTable, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    GainTable::parse(&text).map_err(|e| bad("gain_table", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let text = "\
# sweep base
reducer = avgpool
gain_index = 0
temporal = on
codec = raw
qp = 22
gop = 8
low_delay = false
bitdepth = 12
bypass_quantization = no
external_encoder = enc {input} {output}
external_decoder = dec {input} {output}
";
        let c = CodecConfig::parse(text, ".").unwrap();
        let e = c.encode_config();
        assert_eq!(e.reducer, ReducerId::AvgPool);
        assert!(e.temporal);
        assert_eq!(e.inner.codec, InnerCodecId::Raw);
        assert_eq!(e.inner.quality, 22);
        assert!(!e.inner.low_delay);
        assert_eq!(e.bitdepth, 12);
        assert_eq!(
            e.inner.external.unwrap().decode_template,
            "dec {input} {output}"
        );
    }

    #[test]
    fn errors_name_the_line() {
        let err = CodecConfig::parse("qp = 3\nbitdepth = 40\n", ".").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }), "{err}");
        assert!(CodecConfig::parse("colour = red", ".").is_err());
        assert!(CodecConfig::parse("just words", ".").is_err());
        assert!(CodecConfig::parse("temporal = maybe", ".").is_err());
    }

    #[test]
    fn gain_table_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("gains.txt"), "0: 1.0, 2.0\n").unwrap();
        let cfg_path = dir.path().join("enc.cfg");
        fs::write(&cfg_path, "gain_table = gains.txt\n").unwrap();
        let c = CodecConfig::load(&cfg_path).unwrap();
        assert_eq!(
            c.decode_config().gains.resolve(0, 2).unwrap().multipliers(),
            &[1.0, 2.0]
        );
    }
}
