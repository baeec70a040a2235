//! Shot segmentation: histogram cut scores, peak picking, and a two-head
//! gradual-transition detector whose thresholds follow the single-frame /
//! all-frame convention of learned shot detectors.
//!
//! The two heads are signal-processing emulations over the frame
//! difference signal `e(t)` (cut score between frames `t−1` and `t`, with
//! `e(0) = 0`; values below `min_activity` count as 0):
//!
//! * single-frame head: how far `e(t)` stands above every other difference
//!   within `±single_window`, divided by the window maximum;
//! * all-frame head: the share of the `±all_window` neighborhood whose
//!   activity `max(e(t), e(t+1))` exceeds half the neighborhood maximum,
//!   smoothed with a `[1, 2, 1] / 4` kernel.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::frame::FrameSequence;
use crate::shotmask::{ShotLabels, ShotPartition, Span};

pub const CUT_BINS: usize = 32;

/// Content difference between consecutive frames on the 0–255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CutScores(pub Vec<f64>);

/// Per-frame probabilities of the two gradual-transition heads.
#[derive(Debug, Clone, PartialEq)]
pub struct GradualScores {
    pub single_frame: Vec<f64>,
    pub all_frame: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GradualConfig {
    pub single_window: usize,
    pub all_window: usize,
    /// Differences below this level (0–255 scale) are treated as noise.
    pub min_activity: f64,
}

impl Default for GradualConfig {
    fn default() -> Self {
        Self {
            single_window: 8,
            all_window: 4,
            min_activity: 12.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SegmentConfig {
    pub cut_threshold: f64,
    pub single_threshold: f64,
    pub all_threshold: f64,
    #[serde(default)]
    pub gradual: GradualConfig,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            cut_threshold: 27.0,
            single_threshold: 0.45,
            all_threshold: 0.50,
            gradual: GradualConfig::default(),
        }
    }
}

fn channel_histograms(seq: &FrameSequence, frame: usize) -> Vec<f64> {
    let ch = seq.channels();
    let mut hist = vec![0.0; CUT_BINS * ch];
    for (i, u) in seq.frame_unit_values(frame).into_iter().enumerate() {
        let bin = (libm::floor(u.clamp(0.0, 1.0) * CUT_BINS as f64) as usize).min(CUT_BINS - 1);
        hist[(i % ch) * CUT_BINS + bin] += 1.0;
    }
    let pixels = (seq.height() * seq.width()) as f64;
    hist.iter_mut().for_each(|h| *h /= pixels);
    hist
}

/// `255 · Σ_c Σ_bin |h_t − h_{t+1}| / (2C)` over per-channel 32-bin
/// histograms, so a black↔white cut scores exactly 255.
pub fn content_cut_scores(seq: &FrameSequence) -> Result<CutScores> {
    let n = seq.frame_count();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    let norm = 255.0 / (2 * seq.channels()) as f64;
    let mut prev = channel_histograms(seq, 0);
    let mut scores = Vec::with_capacity(n - 1);
    for f in 1..n {
        let cur = channel_histograms(seq, f);
        let l1: f64 = prev.iter().zip(&cur).map(|(a, b)| (a - b).abs()).sum();
        scores.push(l1 * norm);
        prev = cur;
    }
    Ok(CutScores(scores))
}

/// Boundary `t + 1` for every peak `t` with `score(t) ≥ threshold`. A peak
/// is a maximal run of equal values higher than both neighbors; plateaus
/// report their earliest index.
pub fn detect_cuts(scores: &CutScores, threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0) {
        bail!(Config, "cut threshold must be positive, got {threshold}");
    }
    let s = &scores.0;
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        let left_ok = i == 0 || s[i - 1] < s[i];
        let right_ok = j + 1 == s.len() || s[j + 1] < s[i];
        if left_ok && right_ok && s[i] >= threshold {
            cuts.push(i + 1);
        }
        i = j + 1;
    }
    Ok(cuts)
}

pub fn gradual_scores(seq: &FrameSequence) -> Result<GradualScores> {
    gradual_scores_with(seq, &GradualConfig::default())
}

pub fn gradual_scores_with(seq: &FrameSequence, config: &GradualConfig) -> Result<GradualScores> {
    let n = seq.frame_count();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    Ok(gradual_scores_from_cuts(&content_cut_scores(seq)?, config))
}

fn window(t: usize, radius: usize, n: usize) -> core::ops::Range<usize> {
    t.saturating_sub(radius)..(t + radius + 1).min(n)
}

/// Both heads computed from precomputed cut scores (`N − 1` entries).
pub fn gradual_scores_from_cuts(scores: &CutScores, config: &GradualConfig) -> GradualScores {
    let n = scores.0.len() + 1;
    let floor = |v: f64| if v < config.min_activity { 0.0 } else { v };
    let e: Vec<f64> = core::iter::once(0.0)
        .chain(scores.0.iter().map(|&v| floor(v)))
        .collect();

    let single_frame = (0..n)
        .map(|t| {
            let w = window(t, config.single_window, n);
            let max = e[w.clone()].iter().copied().fold(0.0, f64::max);
            if max == 0.0 {
                return 0.0;
            }
            let others = w.filter(|&u| u != t).map(|u| e[u]).fold(0.0, f64::max);
            ((e[t] - others).max(0.0) / max).clamp(0.0, 1.0)
        })
        .collect();

    let activity: Vec<f64> = (0..n)
        .map(|t| e[t].max(e.get(t + 1).copied().unwrap_or(0.0)))
        .collect();
    let width = (2 * config.all_window + 1) as f64;
    let raw: Vec<f64> = (0..n)
        .map(|t| {
            let w = window(t, config.all_window, n);
            let local = activity[w.clone()].iter().copied().fold(0.0, f64::max);
            if local == 0.0 {
                return 0.0;
            }
            w.filter(|&u| activity[u] > local / 2.0).count() as f64 / width
        })
        .collect();
    let all_frame = (0..n)
        .map(|t| {
            let l = raw[t.saturating_sub(1)];
            let r = raw[(t + 1).min(n - 1)];
            ((l + 2.0 * raw[t] + r) / 4.0).clamp(0.0, 1.0)
        })
        .collect();

    GradualScores {
        single_frame,
        all_frame,
    }
}

/// Result of gradual-frame removal.
#[derive(Debug, Clone, PartialEq)]
pub struct GradualRemoval {
    /// Surviving frames in original indices, ascending.
    pub kept_frames: Vec<usize>,
    /// Shots over the re-indexed kept frames.
    pub partition: ShotPartition,
    pub gradual_frames: Vec<usize>,
}

impl GradualRemoval {
    /// Shot labels in original frame indices.
    pub fn labels(&self, n_frames: usize) -> Result<ShotLabels> {
        let shots = self
            .partition
            .shots()
            .map(|s| Span::new(self.kept_frames[s.start], self.kept_frames[s.end - 1] + 1))
            .collect();
        ShotLabels::new(n_frames, shots, self.gradual_frames.clone())
    }
}

/// Marks frames whose all-frame probability reaches `all_threshold` as
/// gradual, except runs of at most two such frames holding a single-frame
/// peak at or above `single_threshold` (instantaneous cuts). Every gradual
/// run between kept frames becomes a shot boundary; candidate cuts touching
/// a gradual frame are absorbed by it.
pub fn remove_gradual_frames(
    candidates: &[usize],
    preds: &GradualScores,
    single_threshold: f64,
    all_threshold: f64,
) -> Result<GradualRemoval> {
    for (name, t) in [("single", single_threshold), ("all", all_threshold)] {
        if !(t > 0.0 && t < 1.0) {
            bail!(Config, "{name}-frame threshold must lie in (0, 1), got {t}");
        }
    }
    let n = preds.all_frame.len();
    if preds.single_frame.len() != n {
        bail!(Shape, "prediction heads differ in length");
    }
    let mut gradual = vec![false; n];
    let mut runs = Vec::new();
    let mut t = 0;
    while t < n {
        if preds.all_frame[t] < all_threshold {
            t += 1;
            continue;
        }
        let start = t;
        while t < n && preds.all_frame[t] >= all_threshold {
            t += 1;
        }
        let peak = preds.single_frame[start..t].iter().copied().fold(0.0, f64::max);
        if t - start <= 2 && peak >= single_threshold {
            continue;
        }
        gradual[start..t].iter_mut().for_each(|g| *g = true);
        runs.push((start, t));
    }

    let kept_frames: Vec<usize> = (0..n).filter(|&f| !gradual[f]).collect();
    if kept_frames.is_empty() {
        return Err(Error::EmptyOutput);
    }
    let mut reindex = vec![usize::MAX; n];
    for (i, &f) in kept_frames.iter().enumerate() {
        reindex[f] = i;
    }

    let mut cuts = Vec::new();
    for &c in candidates {
        if c == 0 || c >= n {
            bail!(Validation, "candidate cut {c} outside 1..{n}");
        }
        if !gradual[c - 1] && !gradual[c] {
            cuts.push(reindex[c]);
        }
    }
    for &(_, end) in &runs {
        if end < n && reindex[end] > 0 {
            cuts.push(reindex[end]);
        }
    }
    cuts.sort_unstable();
    cuts.dedup();
    let partition = ShotPartition::from_cuts(kept_frames.len(), &cuts)?;
    Ok(GradualRemoval {
        kept_frames,
        partition,
        gradual_frames: (0..n).filter(|&f| gradual[f]).collect(),
    })
}

/// Cut scores → peak picking → gradual heads → gradual removal.
pub fn segment(seq: &FrameSequence, config: &SegmentConfig) -> Result<ShotLabels> {
    let n = seq.frame_count();
    let scores = content_cut_scores(seq)?;
    let candidates = detect_cuts(&scores, config.cut_threshold)?;
    let preds = if n >= 3 {
        gradual_scores_from_cuts(&scores, &config.gradual)
    } else {
        GradualScores {
            single_frame: vec![0.0; n],
            all_frame: vec![0.0; n],
        }
    };
    remove_gradual_frames(&candidates, &preds, config.single_threshold, config.all_threshold)?.labels(n)
}
