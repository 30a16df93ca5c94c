#![allow(dead_code)]

use fcm_core::*;

/// Encoding of [`golden_set`] with the RAW codec and default settings.
pub const GOLDEN_HEX: &str = "46434d420100000000010000000000f041000002000100040000000400000002000200000002000000180000000100000001000000050005000a0000e0bf00003040200000000800013200000000000000aa001c017102e202e3005501aa021b038d01ff015403c603c60138028d03ff0300007100e3005501c6013802aa021b038d01";

pub fn golden_set() -> FeatureTensorSet {
    let l1 = FeatureLayer::from_fn(LayerShape::new(1, 4, 4), |i| i as f32 * 0.25 - 1.0).unwrap();
    let l2 = FeatureLayer::from_fn(LayerShape::new(2, 2, 2), |i| (i as f32 - 3.5) * 0.5).unwrap();
    FeatureTensorSet::new(vec![vec![l1, l2]], 30.0).unwrap()
}

pub fn raw_config() -> EncodeConfig {
    let mut cfg = EncodeConfig::default();
    cfg.inner.codec = InnerCodecId::Raw;
    cfg
}

pub fn unhex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}
