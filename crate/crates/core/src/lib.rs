//! Feature coding for split inference.
//!
//! Intermediate network features are reduced (temporal sampling, multi-scale
//! fusion), converted (packing into one monochrome frame, linear
//! quantization), coded with an inner video-style codec and muxed into an
//! FCMB stream with the side information needed to invert every step.
//!
//! ```no_run
//! use fcm_core::{config::{DecodeConfig, EncodeConfig}, pipeline, tensor};
//!
//! let set = tensor::load_fts("features.fts")?;
//! let stream = pipeline::encode(&set, &EncodeConfig::default())?;
//! let restored = pipeline::decode(&stream, &DecodeConfig::default())?;
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod bitstream;
pub mod config;
pub mod conversion;
pub mod eval;
pub mod inner_codec;
pub mod pipeline;
pub mod reduction;
pub mod temporal;
pub mod tensor;

pub use bitstream::{demux, mux, FcmHeader};
pub use config::{CodecConfig, DecodeConfig, EncodeConfig};
pub use conversion::{PackLayout, PackedFrame, QuantizationParams};
pub use inner_codec::{InnerCodecId, InnerConfig};
pub use pipeline::{decode, encode, PipelineError, Stage};
pub use reduction::{FusedTensor, GainTable, GainVector, ReducerId};
pub use temporal::TemporalInfo;
pub use tensor::{FeatureLayer, FeatureTensorSet, LayerShape, TensorShapeDescriptor};
