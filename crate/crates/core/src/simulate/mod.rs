//! Meeting simulation: image-source room responses, convolutional mixing
//! and noise at a target SNR.

mod meeting;
mod mix;
mod rir;
mod synth;

pub use meeting::{
    energy_segments, make_meeting, Meeting, MixturePlan, NoiseSource, PlannedSource,
    ACTIVITY_FRAME_S, ACTIVITY_HOP_S, ACTIVITY_MIN_GAP_S, ACTIVITY_RMS_THRESHOLD,
};
pub use mix::{add, add_noise_at_snr, convolve, convolve_samples, noise_gain, scale_noise};
pub use rir::{
    absorption_for_t60, image_source_rir, ImageSource, RoomSpec, DEFAULT_SPEED_OF_SOUND,
};
pub use synth::{gaussian_noise, synth_speech};
