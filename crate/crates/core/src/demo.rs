//! Masked self-attention smoothing as a stand-in for a generator.
//!
//! Tokens start near one random center per shot and are repeatedly
//! replaced by their attention-weighted average, `X ← softmax(XXᵀ/(τ√d) +
//! M)·X`. Under a block-diagonal mask every shot collapses to its own
//! consensus; under the full mask the whole video collapses to one.
//! Rendering the result gives a video whose shot structure comes only
//! from the mask.

use alloc::vec;
use alloc::vec::Vec;

use crate::attention::{attention_row, DenseMatrix};
use crate::error::{bail, Result};
use crate::frame::FrameSequence;
use crate::rng::SplitMix64;
use crate::shotmask::{build_block_diagonal_mask, AttnMask, ShotPartition, TokenLayout};

/// Minimum L∞ distance between shot centers.
pub const CENTER_SEPARATION: f64 = 1.0;
const CENTER_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    pub iterations: usize,
    pub temperature: f64,
    pub seed: u64,
    pub layout: TokenLayout,
    /// Token vector dimension.
    pub dim: usize,
    /// Amplitude of the uniform per-token perturbation around a center.
    pub init_noise: f64,
}

impl SmoothingConfig {
    pub fn new(layout: TokenLayout, iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            temperature: 1.0,
            seed,
            layout,
            dim: 3,
            init_noise: 0.15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            bail!(Config, "iterations must be at least 1");
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            bail!(Config, "temperature must be positive and finite");
        }
        if self.dim == 0 {
            bail!(Config, "token dimension must be positive");
        }
        if !(self.init_noise >= 0.0) || !self.init_noise.is_finite() {
            bail!(Config, "init noise must be finite and nonnegative");
        }
        Ok(())
    }
}

/// Runs `config.iterations` steps of masked self-attention averaging.
pub fn run_smoothing(features: &DenseMatrix, mask: &AttnMask, config: &SmoothingConfig) -> Result<DenseMatrix> {
    config.validate()?;
    let n = features.rows();
    if mask.n() != n {
        bail!(Shape, "mask covers {} tokens, features have {n}", mask.n());
    }
    let d = features.cols();
    let mut x = features.clone();
    let mut next = vec![0.0; n * d];
    let mut probs = vec![0.0; n];
    let mut query = vec![0.0; d];
    for _ in 0..config.iterations {
        for i in 0..n {
            // folding 1/τ into the query gives xᵢ·xⱼ / (τ√d)
            query.iter_mut().zip(x.row(i)).for_each(|(q, v)| *q = v / config.temperature);
            attention_row(&query, i, &x, &x, Some(mask.row(i)), &mut probs, &mut next[i * d..(i + 1) * d])?;
        }
        x = DenseMatrix::new(n, d, core::mem::take(&mut next))?;
        next = vec![0.0; n * d];
    }
    Ok(x)
}

/// Largest per-dimension max−min over the given rows.
pub fn spread(x: &DenseMatrix, rows: impl IntoIterator<Item = usize> + Clone) -> f64 {
    (0..x.cols())
        .map(|c| {
            let (lo, hi) = rows
                .clone()
                .into_iter()
                .map(|r| x.get(r, c))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if lo > hi {
                0.0
            } else {
                hi - lo
            }
        })
        .fold(0.0, f64::max)
}

/// One center per shot in `[-1, 1]^dim`, pairwise at least
/// [`CENTER_SEPARATION`] apart in L∞, plus uniform noise per token.
pub fn initial_features(partition: &ShotPartition, config: &SmoothingConfig) -> Result<DenseMatrix> {
    config.validate()?;
    let layout = &config.layout;
    let shots = layout.token_shots(partition)?;
    let mut rng = SplitMix64::new(config.seed);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(partition.shot_count());
    for m in 0..partition.shot_count() {
        let mut attempts = 0;
        let c = loop {
            let c: Vec<f64> = (0..config.dim).map(|_| rng.symmetric(1.0)).collect();
            let far = centers.iter().all(|o| {
                o.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) >= CENTER_SEPARATION
            });
            if far {
                break c;
            }
            attempts += 1;
            if attempts == CENTER_ATTEMPTS {
                bail!(Config, "could not place {} separated shot centers in dimension {}", m + 1, config.dim);
            }
        };
        centers.push(c);
    }
    let d = config.dim;
    let mut values = Vec::with_capacity(shots.len() * d);
    for &s in &shots {
        for &c in &centers[s] {
            values.push(c + rng.symmetric(config.init_noise));
        }
    }
    DenseMatrix::new(shots.len(), d, values)
}

/// Maps the first three token dimensions to byte channels via
/// `clamp(round(127.5 + 127.5·x), 0, 255)`; missing dimensions render as
/// mid-grey. The `p` tokens of a slice paint horizontal bands of equal
/// height (the last band takes the remainder) and every frame of a slice
/// is identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Render {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Default for Render {
    fn default() -> Self {
        Self {
            height: 32,
            width: 32,
            channels: 3,
        }
    }
}

fn to_byte(x: f64) -> u8 {
    libm::round(127.5 + 127.5 * x).clamp(0.0, 255.0) as u8
}

impl Render {
    pub fn render(&self, tokens: &DenseMatrix, layout: &TokenLayout) -> Result<FrameSequence> {
        if tokens.rows() != layout.n_tokens() {
            bail!(Shape, "{} token rows for a layout of {}", tokens.rows(), layout.n_tokens());
        }
        let p = layout.tokens_per_slice;
        if self.height < p || self.width == 0 || self.channels == 0 {
            bail!(Config, "frame {}x{}x{} cannot hold {p} bands", self.height, self.width, self.channels);
        }
        let band = self.height / p;
        let frame_len = self.height * self.width * self.channels;
        let mut data = Vec::with_capacity(layout.n_frames * frame_len);
        for f in 0..layout.n_frames {
            let tokens_of_slice = layout.slice_tokens(layout.slice_of_frame(f));
            for y in 0..self.height {
                let t = tokens_of_slice.start + (y / band).min(p - 1);
                let row = tokens.row(t);
                for _ in 0..self.width {
                    for c in 0..self.channels {
                        data.push(if c < 3 && c < row.len() { to_byte(row[c]) } else { 128 });
                    }
                }
            }
        }
        FrameSequence::from_bytes(layout.n_frames, self.height, self.width, self.channels, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoMask {
    /// Block-diagonal mask from the partition.
    Block,
    /// Every token attends to every token.
    Full,
}

/// Seeds per-shot noise, runs the smoothing under the chosen mask and
/// renders the tokens to frames.
pub fn demo_multishot_generation(
    partition: &ShotPartition,
    config: &SmoothingConfig,
    render: &Render,
    mask: DemoMask,
) -> Result<FrameSequence> {
    let init = initial_features(partition, config)?;
    let mask = match mask {
        DemoMask::Block => build_block_diagonal_mask(partition, &config.layout)?,
        DemoMask::Full => AttnMask::full(config.layout.n_tokens())?,
    };
    let x = run_smoothing(&init, &mask, config)?;
    render.render(&x, &config.layout)
}
