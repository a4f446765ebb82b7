//! Far-field multi-speaker speech processing.
//!
//! The crate covers the enhancement front-end (WPE dereverberation, guided
//! source separation with a CACGMM and mask-based MVDR), meeting simulation
//! with an image-source room model, scoring (cpCER, DER), ROVER fusion of
//! recognizer outputs, and a forward-only reference of Branchformer blocks
//! with cross-attention audio-visual fusion and CTC.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod formats;
pub mod fusion;
pub mod gss;
pub mod linalg;
pub mod metrics;
pub mod rover;
pub mod signal;
pub mod simulate;
pub mod wpe;

pub use error::{Error, Result};
pub use signal::{
    istft, speed_perturb, stft, ComplexSpectrogram, StftParams, WaveformBuffer, Window,
};
