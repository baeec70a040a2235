use cinetrans_core::codec::{decode_ctf, encode_ctf};
use cinetrans_core::features::{extract_features, BuiltinExtractor};
use cinetrans_core::frame::{l2_norm, Pixels};
use cinetrans_core::synthetic::{gen_synthetic_multishot, ShotSpec, SyntheticSpec};
use cinetrans_core::FrameSequence;
use proptest::prelude::*;

fn sequence() -> impl Strategy<Value = FrameSequence> {
    (1usize..5, 1usize..6, 1usize..6, 1usize..4, any::<bool>(), any::<u64>()).prop_map(|(n, h, w, c, float, seed)| {
        let mut rng = cinetrans_core::rng::SplitMix64::new(seed);
        let len = n * h * w * c;
        let pixels = if float {
            Pixels::Float32((0..len).map(|_| rng.next_f64() as f32).collect())
        } else {
            Pixels::Byte((0..len).map(|_| rng.range_inclusive(0, 255) as u8).collect())
        };
        FrameSequence::new(n, h, w, c, pixels).unwrap()
    })
}

fn spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        shot_specs: vec![
            ShotSpec {
                length_frames: 4,
                base_color: vec![30.0, 90.0, 150.0],
                noise_amplitude: 12.0,
                drift_per_frame: vec![1.0, 0.0, -1.0],
            },
            ShotSpec {
                length_frames: 3,
                base_color: vec![200.0, 20.0, 60.0],
                noise_amplitude: 12.0,
                drift_per_frame: vec![],
            },
        ],
        gradual_spans: vec![],
        seed,
        height: 8,
        width: 8,
        channels: 3,
    }
}

proptest! {
    #[test]
    fn ctf_round_trip(seq in sequence()) {
        let bytes = encode_ctf(&seq).unwrap();
        let back = decode_ctf(&bytes).unwrap();
        prop_assert_eq!(encode_ctf(&back).unwrap(), bytes);
        prop_assert_eq!(back, seq);
    }

    #[test]
    fn generator_is_pure(seed in any::<u64>()) {
        prop_assert_eq!(gen_synthetic_multishot(&spec(seed)).unwrap(), gen_synthetic_multishot(&spec(seed)).unwrap());
    }

    #[test]
    fn features_are_unit_and_follow_frame_order(seq in sequence(), rot in 0usize..5) {
        let n = seq.frame_count();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let permuted = seq.select_frames(&order).unwrap();
        for id in BuiltinExtractor::IDS {
            let f = extract_features(&seq, id).unwrap();
            let g = extract_features(&permuted, id).unwrap();
            for (i, &o) in order.iter().enumerate() {
                prop_assert!((l2_norm(f.vector(o)) - 1.0).abs() < 1e-6);
                prop_assert_eq!(g.vector(i), f.vector(o));
            }
        }
    }
}
