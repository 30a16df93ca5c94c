use fcm_core::bitstream::{demux, header_len, mux, FcmHeader};
use fcm_core::config::{DecodeConfig, EncodeConfig};
use fcm_core::conversion::{dequantize, pack, quantize, unpack, PackLayout, QuantizationParams};
use fcm_core::eval::{bd_rate, RdCurve, RdPoint};
use fcm_core::inner_codec::{inner_decode, inner_encode, InnerCodecId, InnerConfig};
use fcm_core::reduction::{fuse, restore, GainVector, ReducerId};
use fcm_core::temporal::{temporal_downsample, temporal_upsample};
use fcm_core::tensor::{decode_fts, encode_fts, tensor_stats};
use fcm_core::{
    pipeline, FeatureLayer, FeatureTensorSet, LayerShape, PackedFrame, TemporalInfo,
    TensorShapeDescriptor,
};
use proptest::prelude::*;

fn layer_strategy(shape: LayerShape) -> impl Strategy<Value = FeatureLayer> {
    prop::collection::vec(-1.0e3f32..1.0e3, shape.len())
        .prop_map(move |d| FeatureLayer::new(shape.channels, shape.height, shape.width, d).unwrap())
}

/// Pyramid shapes: 1..=3 layers, smallest layer has even dims.
fn pyramid_shapes() -> impl Strategy<Value = Vec<LayerShape>> {
    (
        1usize..=3,
        1usize..=3,
        1usize..=3,
        prop::collection::vec(1usize..=4, 3),
    )
        .prop_map(|(layers, hb, wb, chans)| {
            (0..layers)
                .map(|k| {
                    let f = 1 << (layers - 1 - k);
                    LayerShape::new(chans[k], 2 * hb * f, 2 * wb * f)
                })
                .collect()
        })
}

fn frame_strategy(shapes: Vec<LayerShape>) -> impl Strategy<Value = Vec<FeatureLayer>> {
    shapes.into_iter().map(layer_strategy).collect::<Vec<_>>()
}

fn set_strategy(max_frames: usize) -> impl Strategy<Value = FeatureTensorSet> {
    (pyramid_shapes(), 1..=max_frames).prop_flat_map(|(shapes, n)| {
        prop::collection::vec(frame_strategy(shapes), n)
            .prop_map(|frames| FeatureTensorSet::new(frames, 30.0).unwrap())
    })
}

/// Independent brute-force scan for min/max.
fn scan_min_max(v: &[f32]) -> (f32, f32) {
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for &x in v {
        if x < lo {
            lo = x;
        }
        if x > hi {
            hi = x;
        }
    }
    (lo, hi)
}

fn ulp_distance(a: f32, b: f32) -> u32 {
    if a == b {
        return 0;
    }
    let (ia, ib) = (a.to_bits() as i32, b.to_bits() as i32);
    let key = |i: i32| if i < 0 { i32::MIN - i } else { i };
    key(ia).abs_diff(key(ib))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fts_round_trip_is_exact(set in set_strategy(3)) {
        let bytes = encode_fts(&set).unwrap();
        let back = decode_fts(&bytes).unwrap();
        prop_assert_eq!(encode_fts(&back).unwrap(), bytes);
        prop_assert_eq!(back, set);
    }

    #[test]
    fn stats_match_scan(layer in layer_strategy(LayerShape::new(3, 5, 7))) {
        let (lo, hi) = tensor_stats(&layer);
        prop_assert_eq!((lo, hi), scan_min_max(layer.data()));
        prop_assert!(layer.data().iter().all(|&x| lo <= x && x <= hi));
    }

    #[test]
    fn s2d_restore_inverts_fuse(frame in pyramid_shapes().prop_flat_map(frame_strategy)) {
        let shapes: Vec<_> = frame.iter().map(FeatureLayer::shape).collect();
        let smallest = *shapes.last().unwrap();
        let desc = TensorShapeDescriptor::new(shapes, 1, false).unwrap();
        let fused_c = ReducerId::S2d.reducer().fused_shape(&desc.layers).unwrap().channels;
        let g = GainVector::unit(0, fused_c);
        let f = fuse(&frame, ReducerId::S2d, &g).unwrap();
        prop_assert_eq!((f.shape().height, f.shape().width), (smallest.height / 2, smallest.width / 2));
        prop_assert_eq!(restore(&f, ReducerId::S2d, &g, &desc).unwrap(), frame);
    }

    #[test]
    fn s2d_with_gain_within_one_ulp(
        frame in pyramid_shapes().prop_flat_map(frame_strategy),
        seed in prop::collection::vec(0.05f32..20.0, 1..64),
    ) {
        let shapes: Vec<_> = frame.iter().map(FeatureLayer::shape).collect();
        let desc = TensorShapeDescriptor::new(shapes, 1, false).unwrap();
        let c = ReducerId::S2d.reducer().fused_shape(&desc.layers).unwrap().channels;
        let g = GainVector::new(3, (0..c).map(|i| seed[i % seed.len()]).collect()).unwrap();
        let back = restore(&fuse(&frame, ReducerId::S2d, &g).unwrap(), ReducerId::S2d, &g, &desc).unwrap();
        for (a, b) in frame.iter().zip(&back) {
            for (&x, &y) in a.data().iter().zip(b.data()) {
                prop_assert!(ulp_distance(x, y) <= 1, "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn avgpool_preserves_channel_means(frame in pyramid_shapes().prop_flat_map(frame_strategy)) {
        let shapes: Vec<_> = frame.iter().map(FeatureLayer::shape).collect();
        let smallest = *shapes.last().unwrap();
        let desc = TensorShapeDescriptor::new(shapes, 1, false).unwrap();
        let c = ReducerId::AvgPool.reducer().fused_shape(&desc.layers).unwrap().channels;
        let g = GainVector::unit(0, c);
        let f = fuse(&frame, ReducerId::AvgPool, &g).unwrap();
        prop_assert_eq!((f.shape().height, f.shape().width), (smallest.height / 2, smallest.width / 2));
        let back = restore(&f, ReducerId::AvgPool, &g, &desc).unwrap();
        for (a, b) in frame.iter().zip(&back) {
            prop_assert_eq!(a.shape(), b.shape());
            for ch in 0..a.channels() {
                let mean = |p: &[f32]| p.iter().map(|&v| v as f64).sum::<f64>() / p.len() as f64;
                let (ma, mb) = (mean(a.plane(ch)), mean(b.plane(ch)));
                // Values are up to 1e3 in magnitude; scale the tolerance to the data.
                let scale = a.plane(ch).iter().fold(1.0f64, |m, &v| m.max(v.abs() as f64));
                prop_assert!((ma - mb).abs() <= 1e-5 * scale, "channel {}: {} vs {}", ch, ma, mb);
            }
        }
    }

    #[test]
    fn pack_unpack_bijection(c in 1usize..=64, h in 1usize..=16, w in 1usize..=16, seed in any::<u32>()) {
        let shape = LayerShape::new(c, 2 * h, 2 * w);
        let layer = FeatureLayer::from_fn(shape, |i| ((i as u32).wrapping_mul(2654435761) ^ seed) as f32 * 1e-6).unwrap();
        let p = pack(&layer);
        let l = p.layout();
        prop_assert!(l.grid_rows * l.grid_cols >= c && (l.grid_rows - 1) * l.grid_cols < c);
        prop_assert_eq!(unpack(&p).unwrap(), layer);
    }

    #[test]
    fn quantizer_bounds(
        values in prop::collection::vec(-100.0f32..100.0, 2..200),
        bitdepth in 8u8..=16,
    ) {
        let layout = PackLayout::for_shape(LayerShape::new(1, 1, values.len()));
        let frame = PackedFrame::new(layout, values.clone()).unwrap();
        let params = QuantizationParams::for_frame(&frame, bitdepth).unwrap();
        let q = quantize(&frame, &params);
        prop_assert!(q.samples().iter().all(|&s| u32::from(s) <= params.max_num_bits()));
        let back = dequantize(&q, &params);
        let step = params.step();
        for (&x, &y) in values.iter().zip(back.samples()) {
            prop_assert!(((x as f64) - (y as f64)).abs() < step.max(f64::MIN_POSITIVE) || step == 0.0);
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        for w in order.windows(2) {
            prop_assert!(back.samples()[w[0]] <= back.samples()[w[1]]);
        }
    }

    #[test]
    fn temporal_invariants(set in set_strategy(6), enabled in any::<bool>()) {
        let (down, info) = temporal_downsample(&set, enabled);
        let up = temporal_upsample(&down, info).unwrap();
        prop_assert_eq!(up.frame_count(), set.frame_count());
        for i in (1..set.frame_count().saturating_sub(1)).step_by(2) {
            if !enabled { break; }
            for ((prev, next), mid) in set.frames()[i - 1].iter().zip(&set.frames()[i + 1]).zip(&up.frames()[i]) {
                for ((&a, &b), &m) in prev.data().iter().zip(next.data()).zip(mid.data()) {
                    prop_assert!(a.min(b) <= m && m <= a.max(b));
                }
            }
        }
        let constant = FeatureTensorSet::new(vec![set.frames()[0].clone(); set.frame_count()], 30.0).unwrap();
        let (d, i) = temporal_downsample(&constant, enabled);
        prop_assert_eq!(temporal_upsample(&d, i).unwrap(), constant);
    }

    #[test]
    fn lossless_round_trip_and_size(
        w in 1usize..40, h in 1usize..40, frames in 1usize..4,
        data in prop::collection::vec(0u16..1024, 4800),
    ) {
        let layout = PackLayout::for_shape(LayerShape::new(1, h, w));
        let fr: Vec<_> = (0..frames)
            .map(|f| PackedFrame::new(layout, (0..h * w).map(|i| data[(f * h * w + i) % data.len()]).collect()).unwrap())
            .collect();
        let cfg = |codec| InnerConfig { codec, ..InnerConfig::default() };
        let raw = inner_encode(&fr, layout, 10, &cfg(InnerCodecId::Raw)).unwrap();
        let z = inner_encode(&fr, layout, 10, &cfg(InnerCodecId::Lossless)).unwrap();
        prop_assert!(z.len() <= raw.len() + 64, "{} > {} + 64", z.len(), raw.len());
        prop_assert_eq!(inner_decode(&z, layout, 10, frames, &cfg(InnerCodecId::Lossless)).unwrap(), fr);
    }

    #[test]
    fn mux_demux_identity(
        shapes in pyramid_shapes(),
        reducer in prop_oneof![Just(ReducerId::S2d), Just(ReducerId::AvgPool)],
        codec in prop_oneof![Just(InnerCodecId::Raw), Just(InnerCodecId::Lossless), Just(InnerCodecId::External)],
        frames in 1usize..20, temporal in any::<bool>(),
        ranges in prop::collection::vec((-50f32..0.0, 0f32..50.0), 20),
        payload in prop::collection::vec(any::<u8>(), 0..64),
        quality in 0i32..=63, gop in any::<u16>(), low_delay in any::<bool>(), gain_index in any::<u16>(),
        bitdepth in 8u8..=16,
    ) {
        let header = random_header(shapes, reducer, codec, frames, temporal, &ranges, payload.len(), quality, gop, low_delay, gain_index, bitdepth);
        let bytes = mux(&header, &payload).unwrap();
        prop_assert_eq!(bytes.len(), header_len(header.layers.len(), header.coded_frames()) + payload.len());
        let (h, p) = demux(&bytes).unwrap();
        prop_assert_eq!(p, &payload[..]);
        prop_assert_eq!(mux(&h, p).unwrap(), bytes.clone());
        prop_assert_eq!(h, header);
        for cut in 0..bytes.len() {
            prop_assert!(demux(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn bd_rate_scaling_and_antisymmetry(
        base in 10.0f64..1000.0,
        steps in prop::collection::vec((1.1f64..2.5, 0.5f64..4.0), 4..7),
        other in prop::collection::vec(0.6f64..1.6, 7),
    ) {
        let mut pts = Vec::new();
        let (mut r, mut q) = (base, 25.0);
        for (dr, dq) in &steps {
            pts.push(RdPoint::new(r, q));
            r *= dr;
            q += dq;
        }
        let a = RdCurve::new(pts.clone()).unwrap();
        prop_assert_eq!(bd_rate(&a, &a).unwrap().percent, 0.0);
        for k in [0.5, 2.0, 4.0] {
            let got = bd_rate(&a, &a.scaled(k)).unwrap().percent;
            prop_assert!((got - 100.0 * (k - 1.0)).abs() <= 0.1, "k={} got {}", k, got);
        }
        let b = RdCurve::new(pts.iter().zip(&other).map(|(p, f)| RdPoint::new(p.bitrate * f, p.quality)).collect()).unwrap();
        if let (Ok(ab), Ok(ba)) = (bd_rate(&a, &b), bd_rate(&b, &a)) {
            if ab.method == ba.method {
                prop_assert!(((1.0 + ab.percent / 100.0) * (1.0 + ba.percent / 100.0) - 1.0).abs() < 1e-3);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn random_header(
    layers: Vec<LayerShape>,
    reducer: ReducerId,
    codec: InnerCodecId,
    frames: usize,
    temporal: bool,
    ranges: &[(f32, f32)],
    payload_len: usize,
    quality: i32,
    gop_hint: u16,
    low_delay: bool,
    gain_index: u16,
    bitdepth: u8,
) -> FcmHeader {
    let fused = reducer.reducer().fused_shape(&layers).unwrap();
    let layout = PackLayout::for_shape(fused);
    let info = TemporalInfo {
        original_frames: frames,
        enabled: temporal,
    };
    FcmHeader {
        reducer,
        codec,
        temporal: info,
        frame_rate: 25.0,
        gain_index,
        layers,
        fused,
        grid_rows: layout.grid_rows,
        grid_cols: layout.grid_cols,
        bitdepth,
        frame_ranges: ranges[..info.kept_frames()].to_vec(),
        quality,
        gop_hint,
        low_delay,
        payload_len: payload_len as u64,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Decoded shapes always equal the input shapes, for every configuration.
    #[test]
    fn pipeline_shape_fidelity(
        set in set_strategy(4),
        reducer in prop_oneof![Just(ReducerId::S2d), Just(ReducerId::AvgPool)],
        codec in prop_oneof![Just(InnerCodecId::Raw), Just(InnerCodecId::Lossless)],
        temporal in any::<bool>(), bitdepth in 8u8..=16, bypass in any::<bool>(),
    ) {
        let mut cfg = EncodeConfig { reducer, temporal, bitdepth, bypass_quantization: bypass, ..EncodeConfig::default() };
        cfg.inner.codec = codec;
        let stream = pipeline::encode(&set, &cfg).unwrap();
        let out = pipeline::decode(&stream, &DecodeConfig::default()).unwrap();
        prop_assert_eq!(out.frame_count(), set.frame_count());
        prop_assert_eq!(out.layer_shapes(), set.layer_shapes());
        prop_assert_eq!(pipeline::decode(&stream, &DecodeConfig::default()).unwrap(), out);
    }

    #[test]
    fn higher_bitdepth_never_hurts(set in set_strategy(2)) {
        let mut last = f32::INFINITY;
        for bitdepth in [8u8, 10, 12] {
            let cfg = EncodeConfig { bitdepth, ..EncodeConfig::default() };
            let out = pipeline::decode(&pipeline::encode(&set, &cfg).unwrap(), &DecodeConfig::default()).unwrap();
            let err = set.frames().iter().flatten().zip(out.frames().iter().flatten())
                .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()))
                .fold(0.0f32, f32::max);
            prop_assert!(err <= last, "bitdepth {} error {} > {}", bitdepth, err, last);
            last = err;
        }
    }
}
