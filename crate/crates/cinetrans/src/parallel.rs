//! Rayon drivers. Each reuses the sequential per-row or per-item kernel,
//! so results are bitwise identical to the single-threaded path.

use cinetrans_core::attention::{attention_row, validate_attention_shapes, AttentionOutput, DenseMatrix};
use cinetrans_core::shotdetect::{segment, SegmentConfig};
use cinetrans_core::{AttnMask, FrameSequence, Result, ShotLabels};
use rayon::prelude::*;

/// Row-parallel `softmax(q kᵀ / √d_k + mask) v`.
pub fn par_scaled_dot_product_attention(
    q: &DenseMatrix,
    k: &DenseMatrix,
    v: &DenseMatrix,
    mask: Option<&AttnMask>,
) -> Result<AttentionOutput> {
    validate_attention_shapes(q, k, v, mask)?;
    let mut probs = vec![0.0; q.rows() * k.rows()];
    let mut output = vec![0.0; q.rows() * v.cols()];
    probs
        .par_chunks_mut(k.rows())
        .zip(output.par_chunks_mut(v.cols()))
        .enumerate()
        .try_for_each(|(i, (p, o))| attention_row(q.row(i), i, k, v, mask.map(|m| m.row(i)), p, o))?;
    Ok(AttentionOutput {
        output: DenseMatrix::new(q.rows(), v.cols(), output)?,
        probs: DenseMatrix::new(q.rows(), k.rows(), probs)?,
    })
}

/// Segments many videos independently; one result per input, in order.
pub fn segment_batch(videos: &[FrameSequence], config: &SegmentConfig) -> Vec<Result<ShotLabels>> {
    videos.par_iter().map(|v| segment(v, config)).collect()
}
