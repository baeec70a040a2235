//! Frame and feature containers.

use alloc::vec::Vec;

use crate::error::{bail, Error, Result};

/// Pixel storage type of a [`FrameSequence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Byte,
    Float32,
}

impl Dtype {
    pub fn tag(self) -> u32 {
        match self {
            Dtype::Byte => 0,
            Dtype::Float32 => 1,
        }
    }

    pub fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(Dtype::Byte),
            1 => Ok(Dtype::Float32),
            other => bail!(Format, "unknown dtype tag {other}"),
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::Byte => 1,
            Dtype::Float32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pixels {
    Byte(Vec<u8>),
    Float32(Vec<f32>),
}

impl Pixels {
    pub fn len(&self) -> usize {
        match self {
            Pixels::Byte(v) => v.len(),
            Pixels::Float32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            Pixels::Byte(_) => Dtype::Byte,
            Pixels::Float32(_) => Dtype::Float32,
        }
    }
}

/// A decoded video: `frame_count` frames of `height × width × channels`,
/// stored frame-major then row-major with interleaved channels.
///
/// Float frames use the nominal `[0, 1]` intensity scale; byte frames use
/// `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frame_count: usize,
    height: usize,
    width: usize,
    channels: usize,
    pixels: Pixels,
}

impl FrameSequence {
    pub fn new(
        frame_count: usize,
        height: usize,
        width: usize,
        channels: usize,
        pixels: Pixels,
    ) -> Result<Self> {
        if frame_count == 0 || height == 0 || width == 0 || channels == 0 {
            bail!(
                Validation,
                "dimensions must be positive, got {frame_count}x{height}x{width}x{channels}"
            );
        }
        let expected = frame_count
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Error::Validation("dimension product overflows".into()))?;
        if pixels.len() != expected {
            bail!(
                Validation,
                "pixel count {} does not match {expected}",
                pixels.len()
            );
        }
        if let Pixels::Float32(v) = &pixels {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                bail!(Validation, "non-finite float pixel at {i}");
            }
        }
        Ok(Self {
            frame_count,
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn from_bytes(
        frame_count: usize,
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self> {
        Self::new(frame_count, height, width, channels, Pixels::Byte(data))
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dtype(&self) -> Dtype {
        self.pixels.dtype()
    }

    pub fn pixels(&self) -> &Pixels {
        &self.pixels
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    /// Intensity of one sample on the `[0, 1]` scale (not clamped for floats).
    #[inline]
    pub fn unit_value(&self, frame: usize, y: usize, x: usize, c: usize) -> f64 {
        let idx = frame * self.frame_len() + (y * self.width + x) * self.channels + c;
        match &self.pixels {
            Pixels::Byte(v) => v[idx] as f64 / 255.0,
            Pixels::Float32(v) => v[idx] as f64,
        }
    }

    /// Raw samples of one frame on the `[0, 1]` scale.
    pub fn frame_unit_values(&self, frame: usize) -> Vec<f64> {
        let n = self.frame_len();
        let start = frame * n;
        match &self.pixels {
            Pixels::Byte(v) => v[start..start + n].iter().map(|&b| b as f64 / 255.0).collect(),
            Pixels::Float32(v) => v[start..start + n].iter().map(|&f| f as f64).collect(),
        }
    }

    /// Returns a new sequence holding the selected frames in the given order.
    pub fn select_frames(&self, frames: &[usize]) -> Result<Self> {
        let n = self.frame_len();
        for &f in frames {
            if f >= self.frame_count {
                return Err(Error::Index {
                    index: f,
                    len: self.frame_count,
                });
            }
        }
        let pixels = match &self.pixels {
            Pixels::Byte(v) => {
                Pixels::Byte(frames.iter().flat_map(|&f| v[f * n..(f + 1) * n].iter().copied()).collect())
            }
            Pixels::Float32(v) => Pixels::Float32(
                frames.iter().flat_map(|&f| v[f * n..(f + 1) * n].iter().copied()).collect(),
            ),
        };
        Self::new(frames.len(), self.height, self.width, self.channels, pixels)
    }
}

/// One L2-normalized feature vector per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    dim: usize,
    vectors: Vec<f64>,
}

impl FeatureSequence {
    /// Builds a sequence from raw rows, normalizing each row to unit length.
    pub fn from_rows_normalized(dim: usize, rows: Vec<f64>) -> Result<Self> {
        if dim == 0 || rows.is_empty() || !rows.len().is_multiple_of(dim) {
            bail!(Shape, "{} values do not form rows of dim {dim}", rows.len());
        }
        let mut vectors = rows;
        for (i, row) in vectors.chunks_mut(dim).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                bail!(Validation, "non-finite feature in row {i}");
            }
            let norm = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>());
            if norm == 0.0 {
                bail!(Validation, "zero feature vector in row {i}");
            }
            row.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Self { dim, vectors })
    }

    pub fn frame_count(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, frame: usize) -> &[f64] {
        &self.vectors[frame * self.dim..(frame + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.vectors
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Cosine similarity; zero vectors compare as 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_wrong_pixel_count() {
        assert!(FrameSequence::from_bytes(2, 2, 2, 3, vec![0; 23]).is_err());
        assert!(FrameSequence::from_bytes(2, 2, 2, 3, vec![0; 24]).is_ok());
    }

    #[test]
    fn rejects_non_finite_floats() {
        let px = Pixels::Float32(vec![0.0, f32::NAN]);
        assert!(FrameSequence::new(1, 1, 2, 1, px).is_err());
    }

    #[test]
    fn features_are_normalized() {
        let f = FeatureSequence::from_rows_normalized(2, vec![3.0, 4.0, 0.0, 2.0]).unwrap();
        assert_eq!(f.vector(0), &[0.6, 0.8]);
        assert_eq!(f.vector(1), &[0.0, 1.0]);
        assert!(FeatureSequence::from_rows_normalized(2, vec![0.0, 0.0]).is_err());
    }
}
