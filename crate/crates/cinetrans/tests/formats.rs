use cinetrans::io::{read_ctf, read_json, write_ctf, write_json};
use cinetrans_core::codec;
use cinetrans_core::frame::Pixels;
use cinetrans_core::metrics::Histogram;
use cinetrans_core::{AttnMask, FrameSequence, ShotLabels, ShotPartition, Span};
use proptest::prelude::*;

fn sequence() -> impl Strategy<Value = FrameSequence> {
    (1usize..4, 1usize..5, 1usize..5, 1usize..4)
        .prop_flat_map(|(n, h, w, c)| {
            let len = n * h * w * c;
            let pixels = prop_oneof![
                proptest::collection::vec(any::<u8>(), len).prop_map(Pixels::Byte),
                proptest::collection::vec(-1e6f32..1e6, len).prop_map(Pixels::Float32),
            ];
            (Just((n, h, w, c)), pixels)
        })
        .prop_map(|((n, h, w, c), px)| FrameSequence::new(n, h, w, c, px).unwrap())
}

fn labels() -> impl Strategy<Value = ShotLabels> {
    (1usize..30)
        .prop_flat_map(|n| (Just(n), proptest::collection::btree_set(1..n.max(2), 0..4), any::<bool>()))
        .prop_map(|(n, cuts, trim)| {
            let cuts: Vec<usize> = cuts.into_iter().filter(|&c| c < n).collect();
            let part = ShotPartition::from_cuts(n, &cuts).unwrap();
            let mut shots = Vec::new();
            let mut gradual = Vec::new();
            for s in part.shots() {
                if trim && s.len() > 1 {
                    shots.push(Span::new(s.start + 1, s.end));
                    gradual.push(s.start);
                } else {
                    shots.push(s);
                }
            }
            ShotLabels::new(n, shots, gradual).unwrap()
        })
}

proptest! {
    #[test]
    fn ctf_file_round_trip(seq in sequence()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.ctf");
        write_ctf(&path, &seq).unwrap();
        prop_assert_eq!(read_ctf(&path).unwrap(), seq);
    }

    #[test]
    fn mask_bytes_round_trip(n in 1usize..10, bits in proptest::collection::vec(any::<bool>(), 100)) {
        let mut allowed: Vec<bool> = bits.into_iter().cycle().take(n * n).collect();
        (0..n).for_each(|i| allowed[i * n + i] = true);
        let mask = AttnMask::from_allowed(n, allowed).unwrap();
        let bytes = codec::encode_mask(&mask).unwrap();
        prop_assert_eq!(bytes.len(), 5 + 4 + n * n);
        prop_assert_eq!(codec::decode_mask(&bytes).unwrap(), mask);
    }

    #[test]
    fn labels_json_round_trip(l in labels()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.json");
        write_json(&path, &l).unwrap();
        let back: ShotLabels = read_json(&path).unwrap();
        prop_assert_eq!(back, l);
    }

    #[test]
    fn histogram_json_round_trip(scores in proptest::collection::vec(0.0f64..=1.0, 1..40), bins in 1usize..60) {
        let h = Histogram::from_scores(&scores, bins, 1e-9).unwrap();
        let text = serde_json::to_string(&h).unwrap();
        let back: Histogram = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
        prop_assert_eq!(back, h);
    }
}

#[test]
fn invalid_json_artifacts_are_rejected() {
    assert!(serde_json::from_str::<ShotLabels>(r#"{"n_frames": 4, "shots": [{"start": 0, "end": 3}]}"#).is_err());
    assert!(serde_json::from_str::<Histogram>(r#"{"bins": 2, "epsilon": 1e-9, "masses": [0.2, 0.2]}"#).is_err());
    let ok: ShotLabels = serde_json::from_str(r#"{"n_frames": 4, "shots": [{"start": 0, "end": 4}]}"#).unwrap();
    assert!(ok.gradual_frames().is_empty());
}
