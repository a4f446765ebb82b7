//! Time-frequency analysis and synthesis, resampling and WAV I/O.

mod resample;
mod stft;
pub mod wav;
mod waveform;

pub use resample::{speed_perturb, SPEED_FACTOR_RANGE};
pub use stft::{istft, stft, ComplexSpectrogram, StftParams, Window};
pub use waveform::WaveformBuffer;
