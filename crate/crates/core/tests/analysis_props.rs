use cinetrans_core::analysis::{
    group_attention_by_frame, intra_inter_ratio, AttnCapture, AttnMaps, FrameAttentionMap,
};
use cinetrans_core::attention::{scaled_dot_product_attention, DenseMatrix};
use cinetrans_core::rng::SplitMix64;
use cinetrans_core::shotmask::build_block_diagonal_mask;
use cinetrans_core::{ShotPartition, TokenLayout};
use proptest::prelude::*;

fn random_probs(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let m = DenseMatrix::from_fn(n, 4, |_, _| rng.symmetric(2.0)).unwrap();
    scaled_dot_product_attention(&m, &m, &m, None).unwrap().probs.into_values()
}

proptest! {
    #[test]
    fn per_frame_grouping_is_identity(n in 2usize..12, seed in any::<u64>()) {
        let probs = random_probs(n, seed);
        let maps = AttnMaps::from_maps(1, 1, &[&probs]).unwrap();
        let capture = AttnCapture::new(maps.clone(), TokenLayout::per_frame(n).unwrap()).unwrap();
        let grouped = group_attention_by_frame(&capture, 0, 0).unwrap();
        for (g, m) in grouped.values().iter().zip(maps.values()) {
            prop_assert!((g - *m as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn ratio_ignores_uniform_scaling(n in 4usize..12, seed in any::<u64>(), scale in 0.01f64..100.0) {
        let probs = random_probs(n, seed);
        let partition = ShotPartition::new(vec![0, n / 2, n]).unwrap();
        let a = FrameAttentionMap::new(n, probs.clone()).unwrap();
        let b = FrameAttentionMap::from_weights(n, probs.iter().map(|p| p * scale).collect()).unwrap();
        let ra = intra_inter_ratio(&a, &partition).unwrap().ratio;
        let rb = intra_inter_ratio(&b, &partition).unwrap().ratio;
        prop_assert!((ra - rb).abs() <= 1e-9 * ra.abs().max(1.0));
    }

    #[test]
    fn block_masked_capture_has_infinite_ratio(seed in any::<u64>(), p in 1usize..3) {
        let n_frames = 8;
        let layout = TokenLayout::new(n_frames, 1, p).unwrap();
        let partition = ShotPartition::new(vec![0, 3, 8]).unwrap();
        let mask = build_block_diagonal_mask(&partition, &layout).unwrap();
        let n = layout.n_tokens();
        let mut rng = SplitMix64::new(seed);
        let x = DenseMatrix::from_fn(n, 4, |_, _| rng.symmetric(2.0)).unwrap();
        let probs = scaled_dot_product_attention(&x, &x, &x, Some(&mask)).unwrap().probs.into_values();
        let capture = AttnCapture::new(AttnMaps::from_maps(1, 1, &[&probs]).unwrap(), layout).unwrap();
        let map = group_attention_by_frame(&capture, 0, 0).unwrap();
        for f in 0..n_frames {
            for g in 0..n_frames {
                if partition.shot_of_frame(f).unwrap() != partition.shot_of_frame(g).unwrap() {
                    prop_assert_eq!(map.get(f, g), 0.0);
                }
            }
        }
        prop_assert!(intra_inter_ratio(&map, &partition).unwrap().is_infinite());
    }
}
