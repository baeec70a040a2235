//! Dense scaled dot-product attention with boolean shot masks.
//!
//! Disallowed pairs are materialized as `f64::MIN` at the score-addition
//! site. After max subtraction `exp` underflows them to exactly 0, so the
//! block structure survives softmax without any IEEE infinity arithmetic.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::shotmask::AttnMask;

/// Row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            bail!(Shape, "matrix dimensions must be positive, got {rows}x{cols}");
        }
        if values.len() != rows * cols {
            bail!(Shape, "{rows}x{cols} matrix needs {} values, got {}", rows * cols, values.len());
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            bail!(Shape, "cannot multiply {}x{} by {}x{}", self.rows, self.cols, rhs.rows, rhs.cols);
        }
        let mut out = vec![0.0; self.rows * rhs.cols];
        for r in 0..self.rows {
            let dst = &mut out[r * rhs.cols..(r + 1) * rhs.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(rhs.row(k)) {
                    *d += a * b;
                }
            }
        }
        DenseMatrix::new(self.rows, rhs.cols, out)
    }
}

/// Output rows and the attention probabilities that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub output: DenseMatrix,
    pub probs: DenseMatrix,
}

/// In-place stable softmax of one row. `-inf` entries become exactly 0.
pub fn softmax_row(row: &mut [f64], index: usize) -> Result<()> {
    let mut max = f64::NEG_INFINITY;
    for &x in row.iter() {
        if x.is_nan() {
            bail!(Validation, "NaN score in row {index}");
        }
        if x > max {
            max = x;
        }
    }
    if !max.is_finite() {
        return Err(Error::DegenerateRow(index));
    }
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = libm::exp(*x - max);
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
    Ok(())
}

pub fn softmax_rows(scores: &DenseMatrix) -> Result<DenseMatrix> {
    let mut out = scores.clone();
    for r in 0..out.rows {
        softmax_row(out.row_mut(r), r)?;
    }
    Ok(out)
}

fn check_shapes(q: &DenseMatrix, k: &DenseMatrix, v: &DenseMatrix, mask: Option<&AttnMask>) -> Result<()> {
    if q.cols != k.cols {
        bail!(Shape, "query dim {} differs from key dim {}", q.cols, k.cols);
    }
    if k.rows != v.rows {
        bail!(Shape, "{} keys but {} values", k.rows, v.rows);
    }
    if let Some(m) = mask {
        if m.n() != q.rows || m.n() != k.rows {
            bail!(Shape, "mask of {} tokens for {} queries and {} keys", m.n(), q.rows, k.rows);
        }
    }
    Ok(())
}

/// One query row of masked attention; the reference kernel shared by the
/// sequential path and any row-parallel driver.
pub fn attention_row(
    query: &[f64],
    index: usize,
    k: &DenseMatrix,
    v: &DenseMatrix,
    allowed: Option<&[bool]>,
    probs: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let scale = libm::sqrt(k.cols as f64);
    for (j, p) in probs.iter_mut().enumerate() {
        let s = query.iter().zip(k.row(j)).map(|(a, b)| a * b).sum::<f64>() / scale;
        *p = match allowed {
            Some(row) if !row[j] => f64::MIN,
            _ => s,
        };
    }
    softmax_row(probs, index)?;
    out.iter_mut().for_each(|o| *o = 0.0);
    for (j, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (o, &x) in out.iter_mut().zip(v.row(j)) {
            *o += p * x;
        }
    }
    Ok(())
}

/// `softmax(q kᵀ / √d_k + mask) v`.
pub fn scaled_dot_product_attention(
    q: &DenseMatrix,
    k: &DenseMatrix,
    v: &DenseMatrix,
    mask: Option<&AttnMask>,
) -> Result<AttentionOutput> {
    check_shapes(q, k, v, mask)?;
    let mut probs = vec![0.0; q.rows * k.rows];
    let mut output = vec![0.0; q.rows * v.cols];
    for (i, (p, o)) in probs
        .chunks_mut(k.rows)
        .zip(output.chunks_mut(v.cols))
        .enumerate()
    {
        attention_row(q.row(i), i, k, v, mask.map(|m| m.row(i)), p, o)?;
    }
    Ok(AttentionOutput {
        output: DenseMatrix::new(q.rows, v.cols, output)?,
        probs: DenseMatrix::new(q.rows, k.rows, probs)?,
    })
}

/// Validates shapes; exposed for alternative drivers of [`attention_row`].
pub fn validate_attention_shapes(
    q: &DenseMatrix,
    k: &DenseMatrix,
    v: &DenseMatrix,
    mask: Option<&AttnMask>,
) -> Result<()> {
    check_shapes(q, k, v, mask)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadProjection {
    pub wq: DenseMatrix,
    pub wk: DenseMatrix,
    pub wv: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadParams {
    pub heads: Vec<HeadProjection>,
    /// Maps the concatenated head outputs to the model output.
    pub wo: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadOutput {
    pub output: DenseMatrix,
    pub head_probs: Vec<DenseMatrix>,
}

/// Every head sees the same mask.
pub fn multi_head_attention(
    x: &DenseMatrix,
    params: &MultiHeadParams,
    mask: Option<&AttnMask>,
) -> Result<MultiHeadOutput> {
    if params.heads.is_empty() {
        bail!(Shape, "multi-head attention needs at least one head");
    }
    let dv_total: usize = params.heads.iter().map(|h| h.wv.cols).sum();
    if params.wo.rows != dv_total {
        bail!(Shape, "output projection has {} rows, heads produce {dv_total}", params.wo.rows);
    }
    let n = x.rows;
    let mut concat = vec![0.0; n * dv_total];
    let mut head_probs = Vec::with_capacity(params.heads.len());
    let mut offset = 0;
    for (h, head) in params.heads.iter().enumerate() {
        for w in [&head.wq, &head.wk, &head.wv] {
            if w.rows != x.cols {
                bail!(Shape, "head {h} projection expects input dim {}, got {}", w.rows, x.cols);
            }
        }
        let q = x.matmul(&head.wq)?;
        let k = x.matmul(&head.wk)?;
        let v = x.matmul(&head.wv)?;
        let att = scaled_dot_product_attention(&q, &k, &v, mask)?;
        let dv = v.cols;
        for r in 0..n {
            concat[r * dv_total + offset..r * dv_total + offset + dv].copy_from_slice(att.output.row(r));
        }
        offset += dv;
        head_probs.push(att.probs);
    }
    let output = DenseMatrix::new(n, dv_total, concat)?.matmul(&params.wo)?;
    Ok(MultiHeadOutput { output, head_probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::shotmask::{build_block_diagonal_mask, ShotPartition, TokenLayout};

    fn random(rows: usize, cols: usize, rng: &mut SplitMix64) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.symmetric(2.0)).unwrap()
    }

    #[test]
    fn softmax_symmetric_pair() {
        let m = DenseMatrix::new(1, 2, vec![0.0, 0.0]).unwrap();
        assert_eq!(softmax_rows(&m).unwrap().values(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_masked_entry() {
        let m = DenseMatrix::new(1, 2, vec![3.7, f64::NEG_INFINITY]).unwrap();
        assert_eq!(softmax_rows(&m).unwrap().values(), &[1.0, 0.0]);
    }

    #[test]
    fn softmax_matches_high_precision() {
        // 1/(1+e+e^2), e/(1+e+e^2), e^2/(1+e+e^2) at 30 digits
        let expected = [
            0.090_030_573_170_380_46,
            0.244_728_471_054_797_64,
            0.665_240_955_774_821_9,
        ];
        let m = DenseMatrix::new(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let s = softmax_rows(&m).unwrap();
        for (a, b) in s.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn softmax_degenerate_row() {
        let m = DenseMatrix::new(2, 2, vec![0.0, 1.0, f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap();
        assert_eq!(softmax_rows(&m), Err(Error::DegenerateRow(1)));
    }

    #[test]
    fn single_token_attention() {
        let one = DenseMatrix::identity(1).unwrap();
        let out = scaled_dot_product_attention(&one, &one, &one, None).unwrap();
        assert_eq!(out.output, one);
        assert_eq!(out.probs.values(), &[1.0]);
    }

    #[test]
    fn zero_mask_is_bitwise_identical() {
        let mut rng = SplitMix64::new(3);
        let (q, k, v) = (random(6, 4, &mut rng), random(6, 4, &mut rng), random(6, 3, &mut rng));
        let full = AttnMask::full(6).unwrap();
        let a = scaled_dot_product_attention(&q, &k, &v, None).unwrap();
        let b = scaled_dot_product_attention(&q, &k, &v, Some(&full)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn block_mask_zeroes_cross_shot_probs() {
        let mut rng = SplitMix64::new(5);
        let (q, k, v) = (random(4, 3, &mut rng), random(4, 3, &mut rng), random(4, 2, &mut rng));
        let p = ShotPartition::new(vec![0, 2, 4]).unwrap();
        let mask = build_block_diagonal_mask(&p, &TokenLayout::per_frame(4).unwrap()).unwrap();
        let out = scaled_dot_product_attention(&q, &k, &v, Some(&mask)).unwrap();
        assert_eq!(out.probs.get(0, 2), 0.0);
        assert_eq!(out.probs.get(0, 3), 0.0);
        assert_eq!(out.probs.get(3, 0), 0.0);
        for r in 0..4 {
            assert!((out.probs.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let a = DenseMatrix::zeros(2, 3).unwrap();
        let b = DenseMatrix::zeros(2, 4).unwrap();
        assert!(matches!(scaled_dot_product_attention(&a, &b, &b, None), Err(Error::Shape(_))));
        let mask = AttnMask::full(3).unwrap();
        assert!(matches!(scaled_dot_product_attention(&a, &a, &a, Some(&mask)), Err(Error::Shape(_))));
    }

    #[test]
    fn one_head_identity_projection_equals_sdpa() {
        let mut rng = SplitMix64::new(9);
        let x = random(5, 3, &mut rng);
        let id = DenseMatrix::identity(3).unwrap();
        let params = MultiHeadParams {
            heads: vec![HeadProjection {
                wq: id.clone(),
                wk: id.clone(),
                wv: id.clone(),
            }],
            wo: id,
        };
        let mh = multi_head_attention(&x, &params, None).unwrap();
        let single = scaled_dot_product_attention(&x, &x, &x, None).unwrap();
        assert_eq!(mh.output, single.output);
        assert_eq!(mh.head_probs[0], single.probs);
    }

    #[test]
    fn multi_head_masks_every_head() {
        let mut rng = SplitMix64::new(11);
        let x = random(6, 4, &mut rng);
        let heads = (0..3)
            .map(|_| HeadProjection {
                wq: random(4, 2, &mut rng),
                wk: random(4, 2, &mut rng),
                wv: random(4, 2, &mut rng),
            })
            .collect();
        let params = MultiHeadParams {
            heads,
            wo: random(6, 4, &mut rng),
        };
        let p = ShotPartition::new(vec![0, 1, 4, 6]).unwrap();
        let mask = build_block_diagonal_mask(&p, &TokenLayout::per_frame(6).unwrap()).unwrap();
        let out = multi_head_attention(&x, &params, Some(&mask)).unwrap();
        for probs in &out.head_probs {
            for q in 0..6 {
                for key in 0..6 {
                    if !mask.is_allowed(q, key) {
                        assert_eq!(probs.get(q, key), 0.0);
                    }
                }
            }
        }
        let plain = multi_head_attention(&x, &params, None).unwrap();
        let zero = multi_head_attention(&x, &params, Some(&AttnMask::full(6).unwrap())).unwrap();
        assert_eq!(plain, zero);

        let bad = MultiHeadParams {
            heads: params.heads.clone(),
            wo: random(5, 4, &mut rng),
        };
        assert!(multi_head_attention(&x, &bad, None).is_err());
    }
}
