//! Shot partitions, token layouts and the attention masks built from them.
//!
//! Frame indices are zero-based throughout: a partition with boundaries
//! `[0, 8, 16]` has shot 0 on frames `0..8` and shot 1 on frames `8..16`.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};

/// Half-open frame interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.start <= frame && frame < self.end
    }
}

/// Contiguous partition of `0..n_frames` into `M ≥ 1` shots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotPartition {
    boundaries: Vec<usize>,
}

impl ShotPartition {
    /// `boundaries` must start at 0, be strictly increasing and hold at
    /// least two entries; the last entry is the frame count.
    pub fn new(boundaries: Vec<usize>) -> Result<Self> {
        if boundaries.len() < 2 {
            bail!(Validation, "a partition needs at least two boundaries");
        }
        if boundaries[0] != 0 {
            bail!(Validation, "first boundary must be 0, got {}", boundaries[0]);
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            bail!(Validation, "boundaries must be strictly increasing: {boundaries:?}");
        }
        Ok(Self { boundaries })
    }

    pub fn single(n_frames: usize) -> Result<Self> {
        Self::new(vec![0, n_frames])
    }

    /// Builds a partition from the interior cut positions of an `n_frames` video.
    pub fn from_cuts(n_frames: usize, cuts: &[usize]) -> Result<Self> {
        let mut b = Vec::with_capacity(cuts.len() + 2);
        b.push(0);
        b.extend_from_slice(cuts);
        b.push(n_frames);
        Self::new(b)
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn n_frames(&self) -> usize {
        *self.boundaries.last().unwrap()
    }

    pub fn shot_count(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn shot(&self, m: usize) -> Span {
        Span::new(self.boundaries[m], self.boundaries[m + 1])
    }

    pub fn shots(&self) -> impl Iterator<Item = Span> + '_ {
        self.boundaries.windows(2).map(|w| Span::new(w[0], w[1]))
    }

    /// Shot containing `frame`.
    pub fn shot_of_frame(&self, frame: usize) -> Result<usize> {
        if frame >= self.n_frames() {
            return Err(Error::Index {
                index: frame,
                len: self.n_frames(),
            });
        }
        // last boundary <= frame
        Ok(self.boundaries.partition_point(|&b| b <= frame) - 1)
    }

    pub fn to_labels(&self) -> ShotLabels {
        ShotLabels {
            n_frames: self.n_frames(),
            shots: self.shots().collect(),
            gradual_frames: Vec::new(),
        }
    }
}

/// Shot labels as emitted by segmentation: ordered disjoint shots plus the
/// gradual-transition frames that belong to no shot. Shots and gradual
/// frames together cover `0..n_frames`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "LabelsRepr", into = "LabelsRepr")]
pub struct ShotLabels {
    n_frames: usize,
    shots: Vec<Span>,
    gradual_frames: Vec<usize>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct LabelsRepr {
    n_frames: usize,
    shots: Vec<Span>,
    #[serde(default)]
    gradual_frames: Vec<usize>,
}

impl TryFrom<LabelsRepr> for ShotLabels {
    type Error = Error;

    fn try_from(r: LabelsRepr) -> Result<Self> {
        ShotLabels::new(r.n_frames, r.shots, r.gradual_frames)
    }
}

impl From<ShotLabels> for LabelsRepr {
    fn from(l: ShotLabels) -> Self {
        LabelsRepr {
            n_frames: l.n_frames,
            shots: l.shots,
            gradual_frames: l.gradual_frames,
        }
    }
}

impl ShotLabels {
    pub fn new(n_frames: usize, shots: Vec<Span>, mut gradual_frames: Vec<usize>) -> Result<Self> {
        if shots.is_empty() {
            bail!(Validation, "labels need at least one shot");
        }
        gradual_frames.sort_unstable();
        if gradual_frames.windows(2).any(|w| w[0] == w[1]) {
            bail!(Validation, "duplicate gradual frame");
        }
        let mut covered = vec![false; n_frames];
        let mut prev_end = 0;
        for s in &shots {
            if s.is_empty() {
                bail!(Validation, "empty shot {}..{}", s.start, s.end);
            }
            if s.start < prev_end || s.end > n_frames {
                bail!(Validation, "shots must be ordered, disjoint and inside 0..{n_frames}");
            }
            prev_end = s.end;
            covered[s.start..s.end].iter_mut().for_each(|c| *c = true);
        }
        for &g in &gradual_frames {
            if g >= n_frames || covered[g] {
                bail!(Validation, "gradual frame {g} is out of range or inside a shot");
            }
            covered[g] = true;
        }
        if let Some(f) = covered.iter().position(|c| !c) {
            bail!(Validation, "frame {f} belongs to no shot and is not gradual");
        }
        Ok(Self {
            n_frames,
            shots,
            gradual_frames,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn shots(&self) -> &[Span] {
        &self.shots
    }

    pub fn shot_count(&self) -> usize {
        self.shots.len()
    }

    pub fn gradual_frames(&self) -> &[usize] {
        &self.gradual_frames
    }

    /// Contiguous partition for mask construction. Gradual frames between
    /// two shots are split at the midpoint of the gap; leading and trailing
    /// gradual frames join the first and last shot.
    pub fn to_partition(&self) -> ShotPartition {
        let mut b = Vec::with_capacity(self.shots.len() + 1);
        b.push(0);
        for w in self.shots.windows(2) {
            b.push((w[0].end + w[1].start) / 2);
        }
        b.push(self.n_frames);
        ShotPartition::new(b).expect("labels are validated at construction")
    }
}

/// Frame ↔ token correspondence. Latent slice `s` covers frames
/// `s·c .. min((s+1)·c, n_frames)` and owns tokens `s·p .. (s+1)·p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TokenLayout {
    pub n_frames: usize,
    /// Frames per latent slice (`c`).
    pub temporal_compression: usize,
    /// Tokens per latent slice (`p`).
    pub tokens_per_slice: usize,
}

impl TokenLayout {
    pub fn new(n_frames: usize, temporal_compression: usize, tokens_per_slice: usize) -> Result<Self> {
        if n_frames == 0 || temporal_compression == 0 || tokens_per_slice == 0 {
            bail!(Validation, "layout parameters must be positive");
        }
        Ok(Self {
            n_frames,
            temporal_compression,
            tokens_per_slice,
        })
    }

    /// One token per frame.
    pub fn per_frame(n_frames: usize) -> Result<Self> {
        Self::new(n_frames, 1, 1)
    }

    pub fn n_slices(&self) -> usize {
        self.n_frames.div_ceil(self.temporal_compression)
    }

    pub fn n_tokens(&self) -> usize {
        self.n_slices() * self.tokens_per_slice
    }

    pub fn slice_of_token(&self, token: usize) -> usize {
        token / self.tokens_per_slice
    }

    pub fn slice_frames(&self, slice: usize) -> Span {
        let start = slice * self.temporal_compression;
        Span::new(start, (start + self.temporal_compression).min(self.n_frames))
    }

    pub fn slice_of_frame(&self, frame: usize) -> usize {
        frame / self.temporal_compression
    }

    pub fn slice_tokens(&self, slice: usize) -> core::ops::Range<usize> {
        slice * self.tokens_per_slice..(slice + 1) * self.tokens_per_slice
    }

    /// First frame covered by the token's latent slice.
    pub fn frame_of_token(&self, token: usize) -> Result<usize> {
        if token >= self.n_tokens() {
            return Err(Error::Index {
                index: token,
                len: self.n_tokens(),
            });
        }
        Ok(self.slice_of_token(token) * self.temporal_compression)
    }

    /// Shot of the token; a slice straddling a boundary goes to the shot
    /// of its first frame.
    pub fn shot_of_token(&self, partition: &ShotPartition, token: usize) -> Result<usize> {
        self.check_partition(partition)?;
        partition.shot_of_frame(self.frame_of_token(token)?)
    }

    fn check_partition(&self, partition: &ShotPartition) -> Result<()> {
        if partition.n_frames() != self.n_frames {
            bail!(
                Validation,
                "partition covers {} frames but layout has {}",
                partition.n_frames(),
                self.n_frames
            );
        }
        Ok(())
    }

    /// Shot index of every token.
    pub fn token_shots(&self, partition: &ShotPartition) -> Result<Vec<usize>> {
        self.check_partition(partition)?;
        (0..self.n_slices())
            .map(|s| partition.shot_of_frame(s * self.temporal_compression))
            .collect::<Result<Vec<_>>>()
            .map(|slices| {
                slices
                    .into_iter()
                    .flat_map(|shot| core::iter::repeat_n(shot, self.tokens_per_slice))
                    .collect()
            })
    }
}

/// Boolean attention mask, `true` = the query may attend the key.
///
/// As an additive mask, `true` is the 0 term and `false` the −∞ term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttnMask {
    n: usize,
    allowed: Vec<bool>,
}

impl AttnMask {
    pub fn from_allowed(n: usize, allowed: Vec<bool>) -> Result<Self> {
        if n == 0 {
            bail!(Shape, "mask must have at least one token");
        }
        if allowed.len() != n * n {
            bail!(Shape, "mask of {n} tokens needs {} entries, got {}", n * n, allowed.len());
        }
        if let Some(i) = (0..n).find(|&i| !allowed[i * n + i]) {
            bail!(Validation, "diagonal entry {i} must be allowed");
        }
        Ok(Self { n, allowed })
    }

    /// The no-op mask: every pair allowed.
    pub fn full(n: usize) -> Result<Self> {
        Self::from_allowed(n, vec![true; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_allowed(&self, query: usize, key: usize) -> bool {
        self.allowed[query * self.n + key]
    }

    pub fn row(&self, query: usize) -> &[bool] {
        &self.allowed[query * self.n..(query + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.allowed
    }

    pub fn allowed_count(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.is_allowed(i, j) == self.is_allowed(j, i)))
    }

    /// Additive form: 0 where allowed, −∞ elsewhere.
    pub fn additive(&self) -> Vec<f64> {
        self.allowed
            .iter()
            .map(|&a| if a { 0.0 } else { f64::NEG_INFINITY })
            .collect()
    }

    fn set_column(&mut self, key: usize) {
        for q in 0..self.n {
            self.allowed[q * self.n + key] = true;
        }
    }
}

/// Block-diagonal mask: tokens attend only tokens of their own shot.
pub fn build_block_diagonal_mask(partition: &ShotPartition, layout: &TokenLayout) -> Result<AttnMask> {
    let shots = layout.token_shots(partition)?;
    let n = shots.len();
    let mut allowed = Vec::with_capacity(n * n);
    for &a in &shots {
        allowed.extend(shots.iter().map(|&b| a == b));
    }
    AttnMask::from_allowed(n, allowed)
}

/// Makes every token of the first latent slice visible as a key to every
/// query. `tokens_per_slice` is the size of that slice's token group.
pub fn apply_visible_first_frame(mask: &AttnMask, tokens_per_slice: usize) -> Result<AttnMask> {
    if tokens_per_slice == 0 || tokens_per_slice > mask.n {
        bail!(Shape, "first slice of {tokens_per_slice} tokens does not fit {} tokens", mask.n);
    }
    let mut out = mask.clone();
    for key in 0..tokens_per_slice {
        out.set_column(key);
    }
    Ok(out)
}

/// Cross-modal mask over `n_text` text tokens followed by the video tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextVideoMask {
    pub mask: AttnMask,
    pub n_text: usize,
    /// Shots whose text span is empty; their video tokens see no text.
    pub shots_without_text: Vec<usize>,
}

/// Video token τ may attend text token t (and t may attend τ) only when t
/// lies in the text span of τ's shot. Text–text and video–video pairs are
/// all allowed, since this mask governs only the cross-modal layers.
pub fn build_text_video_mask(
    partition: &ShotPartition,
    layout: &TokenLayout,
    n_text: usize,
    shot_text_spans: &[Span],
) -> Result<TextVideoMask> {
    if shot_text_spans.len() != partition.shot_count() {
        bail!(
            Validation,
            "{} text spans given for {} shots",
            shot_text_spans.len(),
            partition.shot_count()
        );
    }
    let mut owner: Vec<Option<usize>> = vec![None; n_text];
    for (m, span) in shot_text_spans.iter().enumerate() {
        if span.end > n_text || span.start > span.end {
            bail!(Validation, "text span {}..{} outside 0..{n_text}", span.start, span.end);
        }
        for (t, slot) in owner.iter_mut().enumerate().take(span.end).skip(span.start) {
            if let Some(other) = *slot {
                bail!(Validation, "text token {t} is claimed by shots {other} and {m}");
            }
            *slot = Some(m);
        }
    }
    let shots = layout.token_shots(partition)?;
    let n = n_text + shots.len();
    let token_shot = |i: usize| if i < n_text { None } else { Some(shots[i - n_text]) };
    let mut allowed = Vec::with_capacity(n * n);
    for q in 0..n {
        for k in 0..n {
            let ok = match (q < n_text, k < n_text) {
                (true, true) | (false, false) => true,
                (false, true) => owner[k] == token_shot(q),
                (true, false) => owner[q] == token_shot(k),
            };
            allowed.push(ok);
        }
    }
    let shots_without_text = shot_text_spans
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_empty())
        .map(|(m, _)| m)
        .collect();
    Ok(TextVideoMask {
        mask: AttnMask::from_allowed(n, allowed)?,
        n_text,
        shots_without_text,
    })
}

/// Which attention layers receive the shot mask.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LayerPolicy {
    pub total_layers: usize,
    pub masked_layers: BTreeSet<usize>,
}

impl LayerPolicy {
    pub fn new(total_layers: usize, masked_layers: impl IntoIterator<Item = usize>) -> Result<Self> {
        if total_layers == 0 {
            bail!(Config, "total_layers must be positive");
        }
        let masked_layers: BTreeSet<usize> = masked_layers.into_iter().collect();
        if let Some(&bad) = masked_layers.iter().find(|&&l| l >= total_layers) {
            bail!(Config, "layer {bad} outside 0..{total_layers}");
        }
        Ok(Self {
            total_layers,
            masked_layers,
        })
    }

    /// The last six layers (U-Net temporal attention).
    pub fn unet_last6(total_layers: usize) -> Result<Self> {
        if total_layers < 6 {
            bail!(Config, "unet-last6 needs at least 6 layers, got {total_layers}");
        }
        Self::new(total_layers, total_layers - 6..total_layers)
    }

    /// Contiguous middle range `first..=last` (DiT). Defaults to 7..=28.
    pub fn dit_mid(total_layers: usize, range: Option<(usize, usize)>) -> Result<Self> {
        let (first, last) = range.unwrap_or((7, 28));
        if first > last || last >= total_layers {
            bail!(Config, "dit-mid range {first}..={last} does not fit {total_layers} layers");
        }
        Self::new(total_layers, first..=last)
    }

    pub fn all(total_layers: usize) -> Result<Self> {
        Self::new(total_layers, 0..total_layers)
    }

    pub fn none(total_layers: usize) -> Result<Self> {
        Self::new(total_layers, core::iter::empty())
    }

    /// Resolves a preset name: `unet-last6`, `dit-mid`, `all`, `none`, or a
    /// comma-separated explicit index list such as `0,3,5`.
    pub fn preset(name: &str, total_layers: usize) -> Result<Self> {
        match name {
            "unet-last6" => Self::unet_last6(total_layers),
            "dit-mid" => Self::dit_mid(total_layers, None),
            "all" => Self::all(total_layers),
            "none" => Self::none(total_layers),
            list => {
                let idx = list
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<core::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Config(String::from("unknown layer preset ") + list))?;
                Self::new(total_layers, idx)
            }
        }
    }

    pub fn is_masked(&self, layer: usize) -> Result<bool> {
        if layer >= self.total_layers {
            return Err(Error::Index {
                index: layer,
                len: self.total_layers,
            });
        }
        Ok(self.masked_layers.contains(&layer))
    }
}
