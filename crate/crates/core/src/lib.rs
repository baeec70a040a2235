//! Shot-structured attention for multi-shot video.
//!
//! This crate holds the pure algorithmic pieces: block-diagonal and
//! first-slice-visible attention masks over token layouts, dense masked
//! attention, shot segmentation with gradual-transition removal, the
//! split/stitch curation rules, attention-map statistics, the multi-shot
//! evaluation metrics and a small masked-attention dynamics demo.
//!
//! Everything here is `no_std` with `alloc`. File IO, JSON and the command
//! line live in the `cinetrans` crate. Transcendental functions go through
//! `libm` so results are identical on every platform.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod attention;
pub mod codec;
pub mod curation;
pub mod demo;
mod error;
pub mod features;
pub mod frame;
pub mod metrics;
pub mod rng;
pub mod shotdetect;
pub mod shotmask;
pub mod synthetic;

pub use error::{Error, Result};
pub use frame::{Dtype, FeatureSequence, FrameSequence};
pub use shotmask::{AttnMask, ShotLabels, ShotPartition, Span, TokenLayout};
