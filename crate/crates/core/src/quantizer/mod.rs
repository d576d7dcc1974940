//! Codebooks, the multi-head octonary quantizer and its residual recursion.
//!
//! A [`MultiLevelCodebook`] holds `D` levels; each level is a
//! [`MultiHeadCodebook`] of `P` heads; each head is a [`Codebook`] of `N`
//! entries of dimension `n_q / P`. Head `i` owns the contiguous channel range
//! `[i * n_q / P, (i + 1) * n_q / P)` of every feature vector.

mod encode;
mod fit;
mod types;

pub use encode::{
    moc_quantize, quantize_head, requantize, rvq_decode, rvq_encode, rvq_encode_with_residual,
    MocOutput,
};
pub use fit::{
    fit, fit_with_report, kmeans, CodebookShape, EmptyClusterPolicy, FitConfig, FitReport,
};
pub(crate) use types::validate_permutation;
pub use types::{Codebook, FeatureGrid, IndexTensor, MultiHeadCodebook, MultiLevelCodebook};

/// Entries per head codebook used for transmission: one 64-QAM axis.
pub const OCTONARY: usize = 8;

/// Default head count.
pub const DEFAULT_HEADS: usize = 4;

/// Default quantization depth.
pub const DEFAULT_DEPTH: usize = 4;
