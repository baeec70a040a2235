//! Multi-shot evaluation: transition control, intra-/inter-shot
//! consistency, reference histograms and the Jensen–Shannon consistency gap.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::features::extract_features;
use crate::frame::{cosine, FeatureSequence, FrameSequence};
use crate::shotmask::{ShotLabels, Span};

/// `x^k · e^{−k(x−1)}` with `x = detected / specified`, `k = 2` below the
/// target and `1.6` at or above it. A single detected shot scores 0.
pub fn transition_control_score(detected: usize, specified: usize) -> Result<f64> {
    if specified < 2 {
        bail!(Domain, "specified shot count must be at least 2, got {specified}");
    }
    if detected == 0 {
        bail!(Domain, "detected shot count must be positive");
    }
    if detected == 1 {
        return Ok(0.0);
    }
    if detected == specified {
        return Ok(1.0);
    }
    Ok(transition_control_curve(detected as f64 / specified as f64))
}

/// The score as a function of the ratio `x > 0` alone; peaks at 1 for
/// `x = 1`.
pub fn transition_control_curve(x: f64) -> f64 {
    let k = if x < 1.0 { 2.0 } else { 1.6 };
    libm::pow(x, k) * libm::exp(-k * (x - 1.0))
}

/// `start + ⌊(len − 1) / 2⌋`.
pub fn middle_frame(shot: Span) -> Result<usize> {
    if shot.is_empty() {
        bail!(Validation, "empty shot {}..{}", shot.start, shot.end);
    }
    Ok(shot.start + (shot.len() - 1) / 2)
}

fn check_features(features: &FeatureSequence, labels: &ShotLabels) -> Result<()> {
    if features.frame_count() != labels.n_frames() {
        bail!(Shape, "{} feature rows for {} frames", features.frame_count(), labels.n_frames());
    }
    Ok(())
}

fn shot_adjacent_similarity(features: &FeatureSequence, shot: Span) -> f64 {
    if shot.len() < 2 {
        return 1.0;
    }
    let sum: f64 = (shot.start..shot.end - 1)
        .map(|f| cosine(features.vector(f), features.vector(f + 1)))
        .sum();
    (sum / (shot.len() - 1) as f64).clamp(0.0, 1.0)
}

/// Mean consecutive-frame cosine per shot, clamped to `[0, 1]`, then
/// averaged over shots; returned as `(subject, background)`.
pub fn intra_shot_consistency(
    subject: &FeatureSequence,
    background: &FeatureSequence,
    labels: &ShotLabels,
) -> Result<(f64, f64)> {
    check_features(subject, labels)?;
    check_features(background, labels)?;
    let m = labels.shot_count() as f64;
    let s = labels.shots().iter().map(|&sh| shot_adjacent_similarity(subject, sh)).sum::<f64>() / m;
    let b = labels.shots().iter().map(|&sh| shot_adjacent_similarity(background, sh)).sum::<f64>() / m;
    Ok((s, b))
}

fn not_computable_single(labels: &ShotLabels) -> Result<()> {
    if labels.shot_count() < 2 {
        return Err(Error::NotComputable(String::from(
            "inter-shot consistency needs at least two shots",
        )));
    }
    Ok(())
}

fn mean_pairwise_cosine(vectors: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            sum += cosine(&vectors[i], &vectors[j]);
            pairs += 1;
        }
    }
    sum / pairs as f64
}

/// Mean cosine over all shot pairs of the renormalized per-shot mean
/// feature, clamped to `[0, 1]`.
pub fn inter_shot_semantic_consistency(features: &FeatureSequence, labels: &ShotLabels) -> Result<f64> {
    check_features(features, labels)?;
    not_computable_single(labels)?;
    let shot_vectors: Vec<Vec<f64>> = labels
        .shots()
        .iter()
        .map(|s| {
            let mut acc = vec![0.0; features.dim()];
            for f in s.start..s.end {
                acc.iter_mut().zip(features.vector(f)).for_each(|(a, v)| *a += v);
            }
            let norm = crate::frame::l2_norm(&acc);
            if norm > 0.0 {
                acc.iter_mut().for_each(|a| *a /= norm);
            }
            acc
        })
        .collect();
    Ok(mean_pairwise_cosine(&shot_vectors).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisualConsistency {
    /// Pair-averaged middle-frame cosine of subject features (unclamped).
    pub subject: f64,
    pub background: f64,
    /// Mean of the two, clamped to `[0, 1]`.
    pub score: f64,
}

pub fn inter_shot_visual_consistency(
    subject: &FeatureSequence,
    background: &FeatureSequence,
    labels: &ShotLabels,
) -> Result<VisualConsistency> {
    check_features(subject, labels)?;
    check_features(background, labels)?;
    not_computable_single(labels)?;
    let mids = labels
        .shots()
        .iter()
        .map(|&s| middle_frame(s))
        .collect::<Result<Vec<_>>>()?;
    let pick = |fs: &FeatureSequence| mids.iter().map(|&m| fs.vector(m).to_vec()).collect::<Vec<_>>();
    let s = mean_pairwise_cosine(&pick(subject));
    let b = mean_pairwise_cosine(&pick(background));
    Ok(VisualConsistency {
        subject: s,
        background: b,
        score: ((s + b) / 2.0).clamp(0.0, 1.0),
    })
}

/// Equal-width histogram over `[0, 1]` with additive smoothing.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "HistogramRepr", into = "HistogramRepr")]
pub struct Histogram {
    bin_count: usize,
    epsilon: f64,
    masses: Vec<f64>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct HistogramRepr {
    bins: usize,
    epsilon: f64,
    masses: Vec<f64>,
}

impl TryFrom<HistogramRepr> for Histogram {
    type Error = Error;

    fn try_from(r: HistogramRepr) -> Result<Self> {
        Histogram::new(r.bins, r.epsilon, r.masses)
    }
}

impl From<Histogram> for HistogramRepr {
    fn from(h: Histogram) -> Self {
        HistogramRepr {
            bins: h.bin_count,
            epsilon: h.epsilon,
            masses: h.masses,
        }
    }
}

pub const MASS_TOL: f64 = 1e-9;

impl Histogram {
    /// Validates an already smoothed histogram.
    pub fn new(bin_count: usize, epsilon: f64, masses: Vec<f64>) -> Result<Self> {
        if bin_count == 0 || masses.len() != bin_count {
            bail!(Shape, "histogram of {bin_count} bins has {} masses", masses.len());
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            bail!(Validation, "epsilon must be finite and nonnegative");
        }
        if masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            bail!(Validation, "histogram masses must be positive and finite");
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            bail!(Validation, "histogram masses sum to {total}");
        }
        Ok(Self {
            bin_count,
            epsilon,
            masses,
        })
    }

    /// Bins scores in `[0, 1]` (last bin right-closed), normalizes, adds
    /// `epsilon` to every bin and renormalizes.
    pub fn from_scores(scores: &[f64], bin_count: usize, epsilon: f64) -> Result<Self> {
        if scores.is_empty() {
            bail!(Validation, "no scores to bin");
        }
        if bin_count == 0 {
            bail!(Config, "bin count must be positive");
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            bail!(Config, "smoothing epsilon must be positive");
        }
        let mut counts = vec![0.0; bin_count];
        for &s in scores {
            if !(0.0..=1.0).contains(&s) {
                bail!(Validation, "score {s} outside [0, 1]");
            }
            let b = (libm::floor(s * bin_count as f64) as usize).min(bin_count - 1);
            counts[b] += 1.0;
        }
        let n = scores.len() as f64;
        let mut masses: Vec<f64> = counts.iter().map(|c| c / n + epsilon).collect();
        let total: f64 = masses.iter().sum();
        masses.iter_mut().for_each(|m| *m /= total);
        Self::new(bin_count, epsilon, masses)
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

/// Reference distribution of consistency scores.
pub fn build_reference_distribution(scores: &[f64], bins: usize, epsilon: f64) -> Result<Histogram> {
    Histogram::from_scores(scores, bins, epsilon)
}

/// Jensen–Shannon distance `√JS(P‖Q)` with base-2 logarithms, in `[0, 1]`.
pub fn jsd(p: &Histogram, q: &Histogram) -> Result<f64> {
    if p.bin_count != q.bin_count {
        bail!(Shape, "histograms have {} and {} bins", p.bin_count, q.bin_count);
    }
    let kl_term = |a: f64, mix: f64| a * libm::log2(a / mix);
    let js: f64 = p
        .masses
        .iter()
        .zip(&q.masses)
        .map(|(&a, &b)| {
            let mix = 0.5 * (a + b);
            kl_term(a, mix) + kl_term(b, mix)
        })
        .sum::<f64>()
        * 0.5;
    Ok(libm::sqrt(js.clamp(0.0, 1.0)))
}

/// JSD between the histogram of `generated_scores` (binned like the
/// reference) and the reference.
pub fn consistency_gap(generated_scores: &[f64], reference: &Histogram) -> Result<f64> {
    let generated = Histogram::from_scores(generated_scores, reference.bin_count, reference.epsilon)?;
    jsd(&generated, reference)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub cumulative_mean: f64,
    pub ci95_width: f64,
}

/// Cumulative mean and normal-approximation 95% CI width
/// `2 · 1.96 · s_n / √n` for every prefix of length `step, 2·step, …`.
pub fn convergence_report(scores: &[f64], step: usize) -> Result<Vec<ConvergencePoint>> {
    if step == 0 {
        bail!(Config, "step must be positive");
    }
    if scores.len() < 2 * step {
        return Err(Error::TooShort {
            needed: 2 * step,
            got: scores.len(),
        });
    }
    let mut out = Vec::new();
    let mut n = step.max(2);
    while n <= scores.len() {
        let prefix = &scores[..n];
        let mean = prefix.iter().sum::<f64>() / n as f64;
        let var = prefix.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
        out.push(ConvergencePoint {
            n,
            cumulative_mean: mean,
            ci95_width: 2.0 * 1.96 * libm::sqrt(var) / libm::sqrt(n as f64),
        });
        n += step;
    }
    Ok(out)
}

/// Per-video scores. `None` marks a metric that cannot be computed, such
/// as inter-shot consistency of a single-shot video or a quality slot with
/// no scorer attached.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricReport {
    pub transition_control: f64,
    pub detected_shots: usize,
    pub specified_shots: usize,
    pub intra_subject: f64,
    pub intra_background: f64,
    pub inter_semantic: Option<f64>,
    pub inter_visual: Option<f64>,
    pub gap_semantic: Option<f64>,
    pub gap_visual: Option<f64>,
    pub aesthetic_quality: Option<f64>,
    pub prompt_consistency: Option<f64>,
}

/// Pluggable scorer for the overall-quality columns (aesthetics, prompt
/// adherence). None are bundled.
pub trait QualityScorer {
    fn score(&self, seq: &FrameSequence) -> Option<f64>;
}

/// Frame features used by the consistency metrics.
#[derive(Debug, Clone)]
pub struct EvalFeatures {
    pub semantic: FeatureSequence,
    pub subject: FeatureSequence,
    pub background: FeatureSequence,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ExtractorIds {
    pub semantic: String,
    pub subject: String,
    pub background: String,
}

impl Default for ExtractorIds {
    fn default() -> Self {
        Self {
            semantic: "builtin-v1".into(),
            subject: "builtin-center".into(),
            background: "builtin-border".into(),
        }
    }
}

impl EvalFeatures {
    pub fn extract(seq: &FrameSequence, ids: &ExtractorIds) -> Result<Self> {
        Ok(Self {
            semantic: extract_features(seq, &ids.semantic)?,
            subject: extract_features(seq, &ids.subject)?,
            background: extract_features(seq, &ids.background)?,
        })
    }
}

/// Reference histograms for the consistency gaps; a missing one leaves
/// its gap unset.
#[derive(Debug, Clone, Default)]
pub struct References {
    pub semantic: Option<Histogram>,
    pub visual: Option<Histogram>,
}

#[derive(Default)]
pub struct Scorers<'a> {
    pub aesthetic: Option<&'a dyn QualityScorer>,
    pub prompt: Option<&'a dyn QualityScorer>,
}

/// Assembles the report for one video from its detected shots.
pub fn eval_report(
    seq: &FrameSequence,
    detected: &ShotLabels,
    specified_shots: usize,
    features: &EvalFeatures,
    references: &References,
    scorers: &Scorers<'_>,
) -> Result<MetricReport> {
    if detected.n_frames() != seq.frame_count() {
        bail!(Validation, "labels cover {} frames, video has {}", detected.n_frames(), seq.frame_count());
    }
    let transition_control = transition_control_score(detected.shot_count(), specified_shots)?;
    let (intra_subject, intra_background) =
        intra_shot_consistency(&features.subject, &features.background, detected)?;
    let optional = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NotComputable(_)) => Ok(None),
        Err(e) => Err(e),
    };
    let inter_semantic = optional(inter_shot_semantic_consistency(&features.semantic, detected))?;
    let inter_visual = optional(
        inter_shot_visual_consistency(&features.subject, &features.background, detected).map(|v| v.score),
    )?;
    let gap = |score: Option<f64>, h: Option<&Histogram>| -> Result<Option<f64>> {
        match (score, h) {
            (Some(s), Some(h)) => consistency_gap(&[s], h).map(Some),
            _ => Ok(None),
        }
    };
    Ok(MetricReport {
        transition_control,
        detected_shots: detected.shot_count(),
        specified_shots,
        intra_subject,
        intra_background,
        inter_semantic,
        inter_visual,
        gap_semantic: gap(inter_semantic, references.semantic.as_ref())?,
        gap_visual: gap(inter_visual, references.visual.as_ref())?,
        aesthetic_quality: scorers.aesthetic.and_then(|s| s.score(seq)),
        prompt_consistency: scorers.prompt.and_then(|s| s.score(seq)),
    })
}
