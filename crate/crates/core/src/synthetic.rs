//! Seeded multi-shot fixtures with optional crossfades.
//!
//! Frame `t` of shot `m` is `base_m + t·drift_m + u`, with `u` uniform in
//! `±noise_m` drawn from [`SplitMix64`] seeded with `spec.seed`, rounded and
//! clamped to `[0, 255]`. A crossfade of `L` frames at boundary `b` covers
//! frames `b − ⌊L/2⌋ .. b − ⌊L/2⌋ + L`; its `j`-th frame blends the two shot
//! signals with weight `(j + 1) / (L + 1)` on the incoming shot. Noise is
//! drawn frame by frame, pixel by pixel, channel by channel, outgoing shot
//! first inside blends.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::frame::FrameSequence;
use crate::rng::SplitMix64;
use crate::shotmask::{ShotLabels, Span};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ShotSpec {
    pub length_frames: usize,
    pub base_color: Vec<f64>,
    #[serde(default)]
    pub noise_amplitude: f64,
    #[serde(default)]
    pub drift_per_frame: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GradualSpan {
    /// Frame index of the shot boundary the crossfade straddles.
    pub position: usize,
    pub crossfade_frames: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    pub shot_specs: Vec<ShotSpec>,
    #[serde(default)]
    pub gradual_spans: Vec<GradualSpan>,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

#[derive(Clone, Copy)]
enum FrameKind {
    Pure(usize),
    Blend { from: usize, weight: f64 },
}

impl SyntheticSpec {
    pub fn total_frames(&self) -> usize {
        self.shot_specs.iter().map(|s| s.length_frames).sum()
    }

    fn boundaries(&self) -> Vec<usize> {
        let mut b = vec![0];
        for s in &self.shot_specs {
            b.push(b.last().unwrap() + s.length_frames);
        }
        b
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            bail!(Validation, "frame dimensions must be positive");
        }
        if self.shot_specs.is_empty() {
            bail!(Validation, "at least one shot is required");
        }
        for (m, s) in self.shot_specs.iter().enumerate() {
            if s.length_frames == 0 {
                bail!(Validation, "shot {m} has zero length");
            }
            if s.base_color.len() != self.channels {
                bail!(Validation, "shot {m} base color has {} channels, expected {}", s.base_color.len(), self.channels);
            }
            if !s.drift_per_frame.is_empty() && s.drift_per_frame.len() != self.channels {
                bail!(Validation, "shot {m} drift has {} channels, expected {}", s.drift_per_frame.len(), self.channels);
            }
            if !(s.noise_amplitude >= 0.0) || !s.noise_amplitude.is_finite() {
                bail!(Validation, "shot {m} noise amplitude must be finite and nonnegative");
            }
            if s.base_color.iter().chain(&s.drift_per_frame).any(|v| !v.is_finite()) {
                bail!(Validation, "shot {m} has a non-finite color or drift");
            }
        }
        if self.total_frames() < 2 {
            bail!(Validation, "a fixture needs at least two frames");
        }
        let b = self.boundaries();
        let mut used = vec![0usize; self.shot_specs.len()];
        let mut seen = Vec::new();
        for g in &self.gradual_spans {
            let Some(k) = b[1..b.len() - 1].iter().position(|&x| x == g.position).map(|i| i + 1) else {
                bail!(Validation, "crossfade position {} is not an interior shot boundary", g.position);
            };
            if seen.contains(&k) {
                bail!(Validation, "two crossfades at boundary {}", g.position);
            }
            seen.push(k);
            let before = self.shot_specs[k - 1].length_frames;
            let after = self.shot_specs[k].length_frames;
            if g.crossfade_frames >= before.min(after) {
                bail!(
                    Validation,
                    "crossfade of {} frames at {} must be shorter than both adjacent shots",
                    g.crossfade_frames,
                    g.position
                );
            }
            let lead = g.crossfade_frames / 2;
            used[k - 1] += lead;
            used[k] += g.crossfade_frames - lead;
        }
        if let Some(m) = (0..used.len()).find(|&m| used[m] >= self.shot_specs[m].length_frames) {
            bail!(Validation, "crossfades consume every frame of shot {m}");
        }
        Ok(())
    }

    fn frame_kinds(&self) -> Vec<FrameKind> {
        let b = self.boundaries();
        let mut kinds = Vec::with_capacity(self.total_frames());
        for (m, s) in self.shot_specs.iter().enumerate() {
            kinds.extend(core::iter::repeat_n(FrameKind::Pure(m), s.length_frames));
        }
        for g in &self.gradual_spans {
            let k = b.iter().position(|&x| x == g.position).unwrap();
            let start = g.position - g.crossfade_frames / 2;
            for j in 0..g.crossfade_frames {
                kinds[start + j] = FrameKind::Blend {
                    from: k - 1,
                    weight: (j + 1) as f64 / (g.crossfade_frames + 1) as f64,
                };
            }
        }
        kinds
    }
}

/// Renders the fixture and its ground-truth labels (crossfade frames are
/// listed as gradual and belong to no shot).
pub fn gen_synthetic_multishot(spec: &SyntheticSpec) -> Result<(FrameSequence, ShotLabels)> {
    spec.validate()?;
    let n = spec.total_frames();
    let starts = spec.boundaries();
    let kinds = spec.frame_kinds();
    let mut rng = SplitMix64::new(spec.seed);
    let pixels_per_frame = spec.height * spec.width;
    let mut data = Vec::with_capacity(n * pixels_per_frame * spec.channels);

    let signal = |m: usize, f: usize, c: usize, rng: &mut SplitMix64| {
        let s = &spec.shot_specs[m];
        let t = f as f64 - starts[m] as f64;
        let drift = s.drift_per_frame.get(c).copied().unwrap_or(0.0);
        let noise = if s.noise_amplitude > 0.0 { rng.symmetric(s.noise_amplitude) } else { 0.0 };
        s.base_color[c] + t * drift + noise
    };

    for (f, kind) in kinds.iter().enumerate() {
        for _ in 0..pixels_per_frame {
            for c in 0..spec.channels {
                let v = match *kind {
                    FrameKind::Pure(m) => signal(m, f, c, &mut rng),
                    FrameKind::Blend { from, weight } => {
                        let a = signal(from, f, c, &mut rng);
                        let b = signal(from + 1, f, c, &mut rng);
                        (1.0 - weight) * a + weight * b
                    }
                };
                data.push(libm::round(v).clamp(0.0, 255.0) as u8);
            }
        }
    }

    let mut shots = Vec::new();
    let mut gradual = Vec::new();
    for m in 0..spec.shot_specs.len() {
        let frames: Vec<usize> = (starts[m]..starts[m + 1])
            .filter(|&f| matches!(kinds[f], FrameKind::Pure(_)))
            .collect();
        shots.push(Span::new(frames[0], frames[frames.len() - 1] + 1));
    }
    for (f, k) in kinds.iter().enumerate() {
        if matches!(k, FrameKind::Blend { .. }) {
            gradual.push(f);
        }
    }
    let seq = FrameSequence::from_bytes(n, spec.height, spec.width, spec.channels, data)?;
    Ok((seq, ShotLabels::new(n, shots, gradual)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Pixels;

    fn two_shot(crossfade: usize) -> SyntheticSpec {
        SyntheticSpec {
            shot_specs: vec![
                ShotSpec {
                    length_frames: 8,
                    base_color: vec![0.0; 3],
                    noise_amplitude: 0.0,
                    drift_per_frame: vec![],
                },
                ShotSpec {
                    length_frames: 8,
                    base_color: vec![255.0; 3],
                    noise_amplitude: 0.0,
                    drift_per_frame: vec![],
                },
            ],
            gradual_spans: if crossfade > 0 {
                vec![GradualSpan {
                    position: 8,
                    crossfade_frames: crossfade,
                }]
            } else {
                vec![]
            },
            seed: 1,
            height: 4,
            width: 4,
            channels: 3,
        }
    }

    fn frame_bytes(seq: &FrameSequence, f: usize) -> &[u8] {
        let Pixels::Byte(v) = seq.pixels() else { unreachable!() };
        &v[f * seq.frame_len()..(f + 1) * seq.frame_len()]
    }

    #[test]
    fn hard_cut_fixture() {
        let (seq, labels) = gen_synthetic_multishot(&two_shot(0)).unwrap();
        assert!(frame_bytes(&seq, 7).iter().all(|&b| b == 0));
        assert!(frame_bytes(&seq, 8).iter().all(|&b| b == 255));
        assert_eq!(labels.to_partition().boundaries(), &[0, 8, 16]);
        assert!(labels.gradual_frames().is_empty());
    }

    #[test]
    fn deterministic() {
        let mut spec = two_shot(4);
        spec.shot_specs[0].noise_amplitude = 20.0;
        spec.shot_specs[1].base_color = vec![120.0, 30.0, 200.0];
        spec.shot_specs[1].noise_amplitude = 5.0;
        let a = gen_synthetic_multishot(&spec).unwrap();
        let b = gen_synthetic_multishot(&spec).unwrap();
        assert_eq!(a, b);
        spec.seed += 1;
        assert_ne!(gen_synthetic_multishot(&spec).unwrap().0, a.0);
    }

    #[test]
    fn crossfade_is_monotone_blend() {
        let (seq, labels) = gen_synthetic_multishot(&two_shot(4)).unwrap();
        assert_eq!(labels.gradual_frames(), &[6, 7, 8, 9]);
        assert_eq!(labels.shots(), &[Span::new(0, 6), Span::new(10, 16)]);
        // Oracle: round(255 * (j+1)/5) for j = 0..4 on frames 6..9
        let expect: Vec<u8> = (0..4).map(|j| libm::round(255.0 * (j + 1) as f64 / 5.0) as u8).collect();
        for (j, f) in (6..10).enumerate() {
            assert!(frame_bytes(&seq, f).iter().all(|&b| b == expect[j]));
        }
        let series: Vec<u8> = (5..11).map(|f| frame_bytes(&seq, f)[0]).collect();
        assert!(series.windows(2).all(|w| w[0] < w[1]), "{series:?}");
    }

    #[test]
    fn drift_and_clamp() {
        let mut spec = two_shot(0);
        spec.shot_specs[0].base_color = vec![250.0, 10.0, 0.0];
        spec.shot_specs[0].drift_per_frame = vec![2.0, -3.0, 1.5];
        let (seq, _) = gen_synthetic_multishot(&spec).unwrap();
        assert_eq!(&frame_bytes(&seq, 2)[..3], &[254, 4, 3]);
        assert_eq!(&frame_bytes(&seq, 7)[..3], &[255, 0, 11]);
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut s = two_shot(8);
        assert!(gen_synthetic_multishot(&s).is_err());
        s.gradual_spans[0] = GradualSpan {
            position: 5,
            crossfade_frames: 2,
        };
        assert!(gen_synthetic_multishot(&s).is_err());
        let mut s = two_shot(0);
        s.shot_specs[0].base_color.pop();
        assert!(gen_synthetic_multishot(&s).is_err());
        let mut s = two_shot(0);
        s.shot_specs.truncate(1);
        s.shot_specs[0].length_frames = 1;
        assert!(gen_synthetic_multishot(&s).is_err());
    }
}
