//! Built-in per-frame feature extractors.
//!
//! `builtin-v1` concatenates a 16-bin-per-channel color histogram (each
//! channel normalized to unit mass) with an 8×8 bilinear downsample of the
//! frame on the `[0, 1]` scale, then L2-normalizes. `builtin-center` applies
//! the same recipe to the central 50%×50% crop, a stand-in for subject
//! features. `builtin-border` uses the pixels outside that crop and the
//! 8×8 grid cells outside its central 4×4 block, a stand-in for background
//! features.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frame::{FeatureSequence, FrameSequence};

pub const HIST_BINS: usize = 16;
pub const GRID: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinExtractor {
    V1,
    Center,
    Border,
}

impl BuiltinExtractor {
    pub const IDS: [&'static str; 3] = ["builtin-v1", "builtin-center", "builtin-border"];

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "builtin-v1" => Ok(Self::V1),
            "builtin-center" => Ok(Self::Center),
            "builtin-border" => Ok(Self::Border),
            other => Err(Error::Config("unknown extractor ".to_string() + other)),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Self::V1 => "builtin-v1",
            Self::Center => "builtin-center",
            Self::Border => "builtin-border",
        }
    }

    pub fn extract(self, seq: &FrameSequence) -> Result<FeatureSequence> {
        let (h, w) = (seq.height(), seq.width());
        let center = center_rect(h, w);
        let border_empty = center.area() == h * w;
        let mut rows = Vec::new();
        let mut dim = 0;
        for f in 0..seq.frame_count() {
            let row = match self {
                Self::V1 => region_features(seq, f, Rect::full(h, w), |_, _| true, |_, _| true),
                Self::Center => region_features(seq, f, center, |_, _| true, |_, _| true),
                Self::Border if border_empty => {
                    region_features(seq, f, Rect::full(h, w), |_, _| true, |_, _| true)
                }
                Self::Border => region_features(
                    seq,
                    f,
                    Rect::full(h, w),
                    |y, x| !center.contains(y, x),
                    |i, j| !((2..6).contains(&i) && (2..6).contains(&j)),
                ),
            };
            dim = row.len();
            rows.extend(row);
        }
        FeatureSequence::from_rows_normalized(dim, rows)
    }
}

/// Runs a registered extractor by id.
pub fn extract_features(seq: &FrameSequence, extractor: &str) -> Result<FeatureSequence> {
    BuiltinExtractor::from_id(extractor)?.extract(seq)
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    y0: usize,
    x0: usize,
    h: usize,
    w: usize,
}

impl Rect {
    fn full(h: usize, w: usize) -> Self {
        Self { y0: 0, x0: 0, h, w }
    }

    fn area(&self) -> usize {
        self.h * self.w
    }

    fn contains(&self, y: usize, x: usize) -> bool {
        (self.y0..self.y0 + self.h).contains(&y) && (self.x0..self.x0 + self.w).contains(&x)
    }
}

fn center_rect(h: usize, w: usize) -> Rect {
    let ch = (h / 2).max(1);
    let cw = (w / 2).max(1);
    Rect {
        y0: (h - ch) / 2,
        x0: (w - cw) / 2,
        h: ch,
        w: cw,
    }
}

fn hist_bin(u: f64) -> usize {
    let b = libm::floor(u.clamp(0.0, 1.0) * HIST_BINS as f64) as usize;
    b.min(HIST_BINS - 1)
}

fn region_features(
    seq: &FrameSequence,
    frame: usize,
    rect: Rect,
    pixel_in: impl Fn(usize, usize) -> bool,
    cell_in: impl Fn(usize, usize) -> bool,
) -> Vec<f64> {
    let ch = seq.channels();
    let mut hist = vec![0.0; HIST_BINS * ch];
    let mut count = 0usize;
    for y in rect.y0..rect.y0 + rect.h {
        for x in rect.x0..rect.x0 + rect.w {
            if !pixel_in(y, x) {
                continue;
            }
            count += 1;
            for c in 0..ch {
                hist[c * HIST_BINS + hist_bin(seq.unit_value(frame, y, x, c))] += 1.0;
            }
        }
    }
    hist.iter_mut().for_each(|v| *v /= count as f64);

    let mut out = hist;
    for i in 0..GRID {
        for j in 0..GRID {
            if !cell_in(i, j) {
                continue;
            }
            let sy = sample_coord(i, rect.h);
            let sx = sample_coord(j, rect.w);
            for c in 0..ch {
                out.push(bilinear(seq, frame, rect, sy, sx, c));
            }
        }
    }
    out
}

/// Source coordinate of grid cell `i` (pixel-center convention), clamped.
fn sample_coord(i: usize, extent: usize) -> f64 {
    let s = (i as f64 + 0.5) * extent as f64 / GRID as f64 - 0.5;
    s.clamp(0.0, (extent - 1) as f64)
}

fn bilinear(seq: &FrameSequence, frame: usize, rect: Rect, sy: f64, sx: f64, c: usize) -> f64 {
    let y0 = libm::floor(sy) as usize;
    let x0 = libm::floor(sx) as usize;
    let y1 = (y0 + 1).min(rect.h - 1);
    let x1 = (x0 + 1).min(rect.w - 1);
    let fy = sy - y0 as f64;
    let fx = sx - x0 as f64;
    let px = |y: usize, x: usize| seq.unit_value(frame, rect.y0 + y, rect.x0 + x, c).clamp(0.0, 1.0);
    let top = px(y0, x0) * (1.0 - fx) + px(y0, x1) * fx;
    let bottom = px(y1, x0) * (1.0 - fx) + px(y1, x1) * fx;
    top * (1.0 - fy) + bottom * fy
}
