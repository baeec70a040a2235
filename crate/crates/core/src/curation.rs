//! Split/stitch dataset assembly: endpoint distances, the sequential
//! drop/join rules, clip filters and dataset records.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{bail, Error, Result};
use crate::frame::{l2_norm, FrameSequence};
use crate::shotmask::ShotLabels;

const UNIT_TOL: f64 = 1e-6;

/// A detected segment with the semantic embeddings of its first and last
/// frames.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Segment {
    pub id: usize,
    pub first_embed: Vec<f64>,
    pub end_embed: Vec<f64>,
    pub length_frames: usize,
}

impl Segment {
    pub fn new(id: usize, first_embed: Vec<f64>, end_embed: Vec<f64>, length_frames: usize) -> Result<Self> {
        let s = Self {
            id,
            first_embed,
            end_embed,
            length_frames,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length_frames == 0 {
            bail!(Validation, "segment {} has no frames", self.id);
        }
        if self.first_embed.len() != self.end_embed.len() || self.first_embed.is_empty() {
            bail!(Shape, "segment {} endpoint embeddings differ in dimension", self.id);
        }
        for e in [&self.first_embed, &self.end_embed] {
            if (l2_norm(e) - 1.0).abs() > UNIT_TOL {
                bail!(Validation, "segment {} embedding is not unit norm", self.id);
            }
        }
        Ok(())
    }
}

/// Which segment the begin–end coherence check compares against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaAnchor {
    /// First segment of the open group.
    #[default]
    GroupHead,
    /// The immediately preceding segment.
    Predecessor,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StitchConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub gamma_anchor: GammaAnchor,
}

impl Default for StitchConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            beta: 0.7,
            gamma: 0.8,
            gamma_anchor: GammaAnchor::GroupHead,
        }
    }
}

impl StitchConfig {
    pub fn validate(&self) -> Result<()> {
        // infinity is allowed and disables a bound
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v > 0.0) {
                bail!(Config, "{name} must be positive, got {v}");
            }
        }
        Ok(())
    }
}

pub fn endpoint_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        bail!(Shape, "embedding dims {} and {} differ", a.len(), b.len());
    }
    Ok(libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()))
}

/// Scans segments left to right. A segment whose own endpoints are more
/// than `alpha` apart is dropped and closes the open group. A segment
/// after a dropped one (or the first) opens a group. Otherwise it joins
/// when its start is within `beta` of the previous end and its end is
/// within `gamma` of the anchor's start; else it opens a new group.
///
/// Returned ranges index into `segments`; dropped segments appear in no
/// range.
pub fn split_stitch(segments: &[Segment], config: &StitchConfig) -> Result<Vec<Range<usize>>> {
    config.validate()?;
    let dim = segments.first().map(|s| s.first_embed.len());
    for s in segments {
        s.validate()?;
        if Some(s.first_embed.len()) != dim {
            bail!(Shape, "segment {} has a different embedding dimension", s.id);
        }
    }
    let mut groups: Vec<Range<usize>> = Vec::new();
    let mut open: Option<Range<usize>> = None;
    for (i, seg) in segments.iter().enumerate() {
        if endpoint_distance(&seg.first_embed, &seg.end_embed)? > config.alpha {
            groups.extend(open.take());
            continue;
        }
        let Some(group) = open.as_mut() else {
            open = Some(i..i + 1);
            continue;
        };
        let prev = &segments[i - 1];
        let anchor = match config.gamma_anchor {
            GammaAnchor::GroupHead => &segments[group.start],
            GammaAnchor::Predecessor => prev,
        };
        let adjacent = endpoint_distance(&prev.end_embed, &seg.first_embed)? < config.beta;
        let coherent = endpoint_distance(&anchor.first_embed, &seg.end_embed)? < config.gamma;
        if adjacent && coherent {
            group.end = i + 1;
        } else {
            groups.extend(open.replace(i..i + 1));
        }
    }
    groups.extend(open);
    Ok(groups)
}

/// One curated clip. Caption slots stay empty when no captioner ran.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "RecordRepr", into = "RecordRepr")]
pub struct DatasetRecord {
    pub id: String,
    pub labels: ShotLabels,
    pub general_caption: String,
    pub shot_captions: Vec<String>,
    pub aesthetic_score: Option<f64>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct RecordRepr {
    id: String,
    n_frames: usize,
    shots: Vec<crate::shotmask::Span>,
    gradual_frames: Vec<usize>,
    general_caption: String,
    shot_captions: Vec<String>,
    aesthetic_score: Option<f64>,
}

impl TryFrom<RecordRepr> for DatasetRecord {
    type Error = Error;

    fn try_from(r: RecordRepr) -> Result<Self> {
        let labels = ShotLabels::new(r.n_frames, r.shots, r.gradual_frames)?;
        if r.shot_captions.len() != labels.shot_count() {
            bail!(Validation, "{} shot captions for {} shots", r.shot_captions.len(), labels.shot_count());
        }
        Ok(Self {
            id: r.id,
            labels,
            general_caption: r.general_caption,
            shot_captions: r.shot_captions,
            aesthetic_score: r.aesthetic_score,
        })
    }
}

impl From<DatasetRecord> for RecordRepr {
    fn from(d: DatasetRecord) -> Self {
        RecordRepr {
            id: d.id,
            n_frames: d.labels.n_frames(),
            shots: d.labels.shots().to_vec(),
            gradual_frames: d.labels.gradual_frames().to_vec(),
            general_caption: d.general_caption,
            shot_captions: d.shot_captions,
            aesthetic_score: d.aesthetic_score,
        }
    }
}

impl DatasetRecord {
    pub fn duration_frames(&self) -> usize {
        self.labels.n_frames()
    }

    pub fn shot_count(&self) -> usize {
        self.labels.shot_count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Captions {
    pub general: String,
    pub shots: Vec<String>,
}

pub fn build_dataset_record(
    id: impl Into<String>,
    seq: &FrameSequence,
    labels: &ShotLabels,
    captions: Option<Captions>,
    aesthetic_score: Option<f64>,
) -> Result<DatasetRecord> {
    if labels.n_frames() != seq.frame_count() {
        bail!(Validation, "labels cover {} frames, video has {}", labels.n_frames(), seq.frame_count());
    }
    let m = labels.shot_count();
    let (general_caption, shot_captions) = match captions {
        Some(c) => {
            if c.shots.len() != m {
                bail!(Validation, "{} shot captions for {m} shots", c.shots.len());
            }
            (c.general, c.shots)
        }
        None => (String::new(), vec![String::new(); m]),
    };
    Ok(DatasetRecord {
        id: id.into(),
        labels: labels.clone(),
        general_caption,
        shot_captions,
        aesthetic_score,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipFilter {
    pub min_duration: usize,
    pub max_duration: usize,
    /// Inclusive bounds on the shot count.
    pub shot_range: (usize, usize),
    pub min_aesthetic: Option<f64>,
}

impl ClipFilter {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.shot_range;
        if lo < 1 || lo > hi {
            bail!(Config, "invalid shot range [{lo}, {hi}]");
        }
        if self.min_duration > self.max_duration {
            bail!(Config, "min duration {} exceeds max {}", self.min_duration, self.max_duration);
        }
        Ok(())
    }

    pub fn accepts(&self, r: &DatasetRecord) -> bool {
        let d = r.duration_frames();
        let m = r.shot_count();
        let aesthetic_ok = match (self.min_aesthetic, r.aesthetic_score) {
            (None, _) => true,
            (Some(min), Some(a)) => a >= min,
            (Some(_), None) => false,
        };
        (self.min_duration..=self.max_duration).contains(&d)
            && (self.shot_range.0..=self.shot_range.1).contains(&m)
            && aesthetic_ok
    }
}

pub fn filter_clips(records: Vec<DatasetRecord>, filter: &ClipFilter) -> Result<Vec<DatasetRecord>> {
    filter.validate()?;
    Ok(records.into_iter().filter(|r| filter.accepts(r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shotmask::ShotPartition;
    use core::f64::consts::SQRT_2;

    /// Unit vector in the plane at angle `t`.
    fn at(t: f64) -> Vec<f64> {
        vec![libm::cos(t), libm::sin(t)]
    }

    /// Angle whose chord length is `d`.
    fn chord(d: f64) -> f64 {
        2.0 * libm::asin(d / 2.0)
    }

    fn seg(id: usize, a: f64, b: f64) -> Segment {
        Segment::new(id, at(a), at(b), 10).unwrap()
    }

    #[test]
    fn distances() {
        let a = [1.0, 0.0];
        assert_eq!(endpoint_distance(&a, &a).unwrap(), 0.0);
        assert!((endpoint_distance(&a, &[0.0, 1.0]).unwrap() - SQRT_2).abs() < 1e-15);
        assert_eq!(endpoint_distance(&a, &[-1.0, 0.0]).unwrap(), 2.0);
        assert!(endpoint_distance(&a, &[1.0]).is_err());
    }

    #[test]
    fn incoherent_segment_is_dropped() {
        let s = seg(0, 0.0, chord(0.95));
        assert!(split_stitch(&[s], &StitchConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn two_segments_join() {
        // end_1 -> first_2 is 0.5 and first_1 -> end_2 is 0.6, all on one arc
        let s1 = seg(0, 0.0, 0.0);
        let s2 = seg(1, chord(0.5), chord(0.6));
        assert!((endpoint_distance(&s1.end_embed, &s2.first_embed).unwrap() - 0.5).abs() < 1e-12);
        assert!((endpoint_distance(&s1.first_embed, &s2.end_embed).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(split_stitch(&[s1, s2], &StitchConfig::default()).unwrap(), vec![0..2]);
    }

    #[test]
    fn distant_neighbours_stay_apart() {
        let s1 = seg(0, 0.0, 0.0);
        let s2 = seg(1, chord(0.75), chord(0.75));
        assert_eq!(split_stitch(&[s1, s2], &StitchConfig::default()).unwrap(), vec![0..1, 1..2]);
    }

    #[test]
    fn dropped_segment_breaks_group() {
        let segs = [seg(0, 0.0, 0.0), seg(1, 0.0, chord(1.5)), seg(2, 0.0, 0.0)];
        assert_eq!(split_stitch(&segs, &StitchConfig::default()).unwrap(), vec![0..1, 2..3]);
    }

    #[test]
    fn gamma_anchor_switch() {
        // each step moves 0.5 along the arc, so the pairwise check passes
        // while the head drifts out of range at the third segment
        let step = chord(0.5);
        let segs: Vec<Segment> = (0..3).map(|i| seg(i, i as f64 * step, i as f64 * step)).collect();
        let head = StitchConfig::default();
        assert_eq!(split_stitch(&segs, &head).unwrap(), vec![0..2, 2..3]);
        let pairwise = StitchConfig {
            gamma_anchor: GammaAnchor::Predecessor,
            ..head
        };
        assert_eq!(split_stitch(&segs, &pairwise).unwrap(), vec![0..3]);
    }

    #[test]
    fn empty_and_invalid() {
        assert!(split_stitch(&[], &StitchConfig::default()).unwrap().is_empty());
        let bad = StitchConfig {
            beta: 0.0,
            ..Default::default()
        };
        assert!(split_stitch(&[], &bad).is_err());
        assert!(Segment::new(0, vec![1.0, 1.0], vec![1.0, 0.0], 3).is_err());
    }

    fn record(shots: usize, n: usize, aesthetic: Option<f64>) -> DatasetRecord {
        let cuts: Vec<usize> = (1..shots).map(|i| i * n / shots).collect();
        let labels = ShotPartition::from_cuts(n, &cuts).unwrap().to_labels();
        let seq = FrameSequence::from_bytes(n, 1, 1, 1, vec![0; n]).unwrap();
        build_dataset_record("clip", &seq, &labels, None, aesthetic).unwrap()
    }

    #[test]
    fn records_have_empty_caption_slots() {
        let r = record(2, 10, None);
        assert_eq!(r.shot_captions, vec![String::new(), String::new()]);
        let seq = FrameSequence::from_bytes(10, 1, 1, 1, vec![0; 10]).unwrap();
        let caps = Captions {
            general: "g".into(),
            shots: vec!["a".into()],
        };
        assert!(build_dataset_record("x", &seq, &r.labels, Some(caps), None).is_err());
    }

    #[test]
    fn clip_filtering() {
        let f = ClipFilter {
            min_duration: 5,
            max_duration: 100,
            shot_range: (2, 5),
            min_aesthetic: None,
        };
        assert!(!f.accepts(&record(1, 20, None)));
        assert!(f.accepts(&record(3, 20, None)));
        let strict = ClipFilter {
            min_aesthetic: Some(0.5),
            ..f
        };
        assert!(!strict.accepts(&record(3, 20, None)));
        assert!(strict.accepts(&record(3, 20, Some(0.7))));
        let bad = ClipFilter {
            shot_range: (4, 2),
            ..f
        };
        assert!(filter_clips(vec![], &bad).is_err());
    }
}
