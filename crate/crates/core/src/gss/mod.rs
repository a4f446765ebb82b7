//! Guided source separation: an activity-constrained complex angular
//! central Gaussian mixture gives time-frequency masks, which drive a
//! mask-based MVDR beamformer per target speaker.

mod activity;
mod cacgmm;
mod enhance;
mod mvdr;

pub use activity::{ActivityPattern, MaskSet};
pub use cacgmm::{cacgmm_posteriors, fit_cacgmm, CacgmmState};
pub use enhance::{
    gss_enhance, EnhanceConfig, EnhancedSegment, GssConfig, GssOutput, SkippedSegment,
};
pub use mvdr::{
    apply_beamformer, mvdr_beamform, mvdr_vector, mvdr_weights, select_reference_channel,
    spatial_covariances, BeamformerWeights, ReferencePolicy,
};
