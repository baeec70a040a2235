//! Statistics over captured attention maps: token→frame grouping, the
//! intra-/inter-shot probability ratio, and the correlation between
//! adjacent-frame attention and shot boundaries.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::shotmask::{LayerPolicy, ShotPartition, TokenLayout};

const ROW_TOL: f64 = 1e-6;

/// Raw `layers × heads × n × n` probability tensor, as stored in ATN files.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnMaps {
    layers: usize,
    heads: usize,
    n_tokens: usize,
    values: Vec<f32>,
}

impl AttnMaps {
    pub fn new(layers: usize, heads: usize, n_tokens: usize, values: Vec<f32>) -> Result<Self> {
        if layers == 0 || heads == 0 || n_tokens == 0 {
            bail!(Shape, "capture dimensions must be positive");
        }
        if values.len() != layers * heads * n_tokens * n_tokens {
            bail!(Shape, "capture holds {} values, expected {}", values.len(), layers * heads * n_tokens * n_tokens);
        }
        if values.iter().any(|v| !v.is_finite()) {
            bail!(Validation, "non-finite attention probability");
        }
        Ok(Self {
            layers,
            heads,
            n_tokens,
            values,
        })
    }

    /// Packs per-(layer, head) maps given in layer-major order.
    pub fn from_maps(layers: usize, heads: usize, maps: &[&[f64]]) -> Result<Self> {
        if maps.len() != layers * heads || maps.is_empty() {
            bail!(Shape, "{} maps given for {layers} layers x {heads} heads", maps.len());
        }
        let nn = maps[0].len();
        let n = libm::sqrt(nn as f64) as usize;
        if n * n != nn || maps.iter().any(|m| m.len() != nn) {
            bail!(Shape, "maps must all be square and equally sized");
        }
        let values = maps.iter().flat_map(|m| m.iter().map(|&v| v as f32)).collect();
        Self::new(layers, heads, n, values)
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn map(&self, layer: usize, head: usize) -> Result<&[f32]> {
        if layer >= self.layers {
            return Err(Error::Index {
                index: layer,
                len: self.layers,
            });
        }
        if head >= self.heads {
            return Err(Error::Index {
                index: head,
                len: self.heads,
            });
        }
        let nn = self.n_tokens * self.n_tokens;
        let start = (layer * self.heads + head) * nn;
        Ok(&self.values[start..start + nn])
    }
}

/// Attention maps paired with the layout that maps their tokens to frames.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnCapture {
    maps: AttnMaps,
    layout: TokenLayout,
}

impl AttnCapture {
    pub fn new(maps: AttnMaps, layout: TokenLayout) -> Result<Self> {
        if maps.n_tokens != layout.n_tokens() {
            bail!(Shape, "capture has {} tokens, layout expects {}", maps.n_tokens, layout.n_tokens());
        }
        let n = maps.n_tokens;
        for (r, row) in maps.values.chunks(n).enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                bail!(Validation, "probability outside [0, 1] in row {r}");
            }
            let s: f64 = row.iter().map(|&p| p as f64).sum();
            if (s - 1.0).abs() > ROW_TOL {
                bail!(Validation, "row {r} sums to {s}");
            }
        }
        Ok(Self { maps, layout })
    }

    pub fn maps(&self) -> &AttnMaps {
        &self.maps
    }

    pub fn layout(&self) -> &TokenLayout {
        &self.layout
    }
}

/// Frame × frame attention probabilities, rows summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAttentionMap {
    n_frames: usize,
    probs: Vec<f64>,
}

impl FrameAttentionMap {
    /// Validates a row-stochastic map.
    pub fn new(n_frames: usize, probs: Vec<f64>) -> Result<Self> {
        if n_frames == 0 || probs.len() != n_frames * n_frames {
            bail!(Shape, "frame map of {n_frames} frames needs {} values", n_frames * n_frames);
        }
        for (r, row) in probs.chunks(n_frames).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                bail!(Validation, "negative or non-finite entry in row {r}");
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                bail!(Validation, "row {r} sums to {s}");
            }
        }
        Ok(Self { n_frames, probs })
    }

    /// Renormalizes nonnegative weights row by row.
    pub fn from_weights(n_frames: usize, mut weights: Vec<f64>) -> Result<Self> {
        if n_frames == 0 || weights.len() != n_frames * n_frames {
            bail!(Shape, "frame map of {n_frames} frames needs {} values", n_frames * n_frames);
        }
        for (r, row) in weights.chunks_mut(n_frames).enumerate() {
            let s: f64 = row.iter().sum();
            if !(s > 0.0) || !s.is_finite() || row.iter().any(|&w| w < 0.0) {
                bail!(Validation, "row {r} cannot be normalized");
            }
            row.iter_mut().for_each(|w| *w /= s);
        }
        Ok(Self {
            n_frames,
            probs: weights,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn get(&self, f: usize, g: usize) -> f64 {
        self.probs[f * self.n_frames + g]
    }

    pub fn values(&self) -> &[f64] {
        &self.probs
    }
}

/// Averages token probabilities into frame cells, then renormalizes rows.
/// A frame's tokens are those of the latent slice covering it.
pub fn group_attention_by_frame(capture: &AttnCapture, layer: usize, head: usize) -> Result<FrameAttentionMap> {
    let map = capture.maps.map(layer, head)?;
    let layout = &capture.layout;
    let n = capture.maps.n_tokens;
    let slices = layout.n_slices();
    let p = layout.tokens_per_slice;
    let mut slice_mean = vec![0.0; slices * slices];
    for (sa, cell_row) in slice_mean.chunks_mut(slices).enumerate() {
        for tau in layout.slice_tokens(sa) {
            let row = &map[tau * n..(tau + 1) * n];
            for (sb, cell) in cell_row.iter_mut().enumerate() {
                *cell += layout.slice_tokens(sb).map(|s| row[s] as f64).sum::<f64>();
            }
        }
        cell_row.iter_mut().for_each(|c| *c /= (p * p) as f64);
    }
    let nf = layout.n_frames;
    let mut weights = Vec::with_capacity(nf * nf);
    for f in 0..nf {
        let sf = layout.slice_of_frame(f);
        weights.extend((0..nf).map(|g| slice_mean[sf * slices + layout.slice_of_frame(g)]));
    }
    FrameAttentionMap::from_weights(nf, weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntraInter {
    pub intra_mean: f64,
    pub inter_mean: f64,
    /// `intra_mean / inter_mean`; `f64::INFINITY` when no cross-shot mass remains.
    pub ratio: f64,
}

impl IntraInter {
    pub fn is_infinite(&self) -> bool {
        self.ratio.is_infinite()
    }
}

pub fn intra_inter_ratio(map: &FrameAttentionMap, partition: &ShotPartition) -> Result<IntraInter> {
    if partition.n_frames() != map.n_frames {
        bail!(Validation, "partition covers {} frames, map has {}", partition.n_frames(), map.n_frames);
    }
    if partition.shot_count() < 2 {
        return Err(Error::UndefinedRatio("a single shot has no inter-shot pairs".into()));
    }
    let shot: Vec<usize> = (0..map.n_frames).map(|f| partition.shot_of_frame(f).unwrap()).collect();
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0usize, 0.0, 0usize);
    for f in 0..map.n_frames {
        for g in 0..map.n_frames {
            let v = map.get(f, g);
            if shot[f] == shot[g] {
                intra += v;
                n_intra += 1;
            } else {
                inter += v;
                n_inter += 1;
            }
        }
    }
    let intra_mean = intra / n_intra as f64;
    let inter_mean = inter / n_inter as f64;
    let ratio = if inter_mean == 0.0 {
        f64::INFINITY
    } else {
        intra_mean / inter_mean
    };
    Ok(IntraInter {
        intra_mean,
        inter_mean,
        ratio,
    })
}

/// Sample Pearson correlation, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        bail!(Shape, "pearson inputs differ in length: {} vs {}", x.len(), y.len());
    }
    if x.len() < 2 {
        bail!(Shape, "pearson needs at least two samples");
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (libm::sqrt(sxx) * libm::sqrt(syy))).clamp(-1.0, 1.0))
}

/// Adjacent-frame attention `a(t) = map(t, t+1)` and the boundary
/// indicator `b(t)` (1 when a shot boundary lies between `t` and `t+1`).
pub fn boundary_signals(map: &FrameAttentionMap, partition: &ShotPartition) -> Result<(Vec<f64>, Vec<f64>)> {
    if partition.n_frames() != map.n_frames {
        bail!(Validation, "partition covers {} frames, map has {}", partition.n_frames(), map.n_frames);
    }
    let inner = &partition.boundaries()[1..partition.boundaries().len() - 1];
    let n = map.n_frames;
    let a = (0..n.saturating_sub(1)).map(|t| map.get(t, t + 1)).collect();
    let b = (0..n.saturating_sub(1))
        .map(|t| if inner.contains(&(t + 1)) { 1.0 } else { 0.0 })
        .collect();
    Ok((a, b))
}

/// `pearson(a, 1 − b)`: positive when adjacent attention drops at cuts.
pub fn boundary_correlation(map: &FrameAttentionMap, partition: &ShotPartition) -> Result<f64> {
    if map.n_frames < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: map.n_frames,
        });
    }
    let (a, b) = boundary_signals(map, partition)?;
    let not_b: Vec<f64> = b.iter().map(|v| 1.0 - v).collect();
    pearson(&a, &not_b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapStats {
    pub layer: usize,
    pub head: usize,
    pub ratio: IntraInter,
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureStats {
    pub maps: Vec<MapStats>,
    /// Mean ratio over every (layer, head); infinite if any map is.
    pub mean_ratio: f64,
    /// Mean over the maps whose correlation is defined.
    pub mean_correlation: Option<f64>,
}

/// Per-(layer, head) statistics plus grand means.
pub fn analyze_capture(capture: &AttnCapture, partition: &ShotPartition) -> Result<CaptureStats> {
    analyze_layers(capture, partition, &LayerPolicy::all(capture.maps.layers)?)
}

/// Like [`analyze_capture`], restricted to the layers a policy masks.
pub fn analyze_layers(capture: &AttnCapture, partition: &ShotPartition, policy: &LayerPolicy) -> Result<CaptureStats> {
    if policy.total_layers != capture.maps.layers {
        bail!(Config, "policy covers {} layers, capture has {}", policy.total_layers, capture.maps.layers);
    }
    if policy.masked_layers.is_empty() {
        bail!(Config, "layer policy selects no layers");
    }
    let mut maps = Vec::new();
    for &layer in &policy.masked_layers {
        for head in 0..capture.maps.heads {
            let fm = group_attention_by_frame(capture, layer, head)?;
            let ratio = intra_inter_ratio(&fm, partition)?;
            let correlation = match boundary_correlation(&fm, partition) {
                Ok(r) => Some(r),
                Err(Error::UndefinedCorrelation) | Err(Error::TooShort { .. }) => None,
                Err(e) => return Err(e),
            };
            maps.push(MapStats {
                layer,
                head,
                ratio,
                correlation,
            });
        }
    }
    let mean_ratio = maps.iter().map(|m| m.ratio.ratio).sum::<f64>() / maps.len() as f64;
    let rs: Vec<f64> = maps.iter().filter_map(|m| m.correlation).collect();
    let mean_correlation = (!rs.is_empty()).then(|| rs.iter().sum::<f64>() / rs.len() as f64);
    Ok(CaptureStats {
        maps,
        mean_ratio,
        mean_correlation,
    })
}
