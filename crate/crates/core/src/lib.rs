//! Digital semantic transmission over 64-QAM with multi-head octonary
//! residual vector quantization.
//!
//! The chain, transmitter to receiver:
//!
//! ```text
//! image --codec--> features --rvq_encode--> octonary indices
//!       --modulate--> 64-QAM symbols --AWGN--> demodulate
//!       --rvq_decode--> retrieved features [--requantize] --codec--> image
//! ```
//!
//! Every codebook holds exactly eight entries so one index maps onto one
//! quadrature axis of a 64-QAM symbol without bit regrouping. Codebooks are
//! fit with greedy per-level k-means ([`quantizer::fit`]) and can be relabeled
//! with [`reorder`] so that Gray-adjacent indices carry nearby codewords.

pub mod channel;
pub mod codec;
mod error;
pub mod modem;
pub mod pipeline;
pub mod quantizer;
pub mod reorder;
pub mod store;

pub use error::{Error, Result};
