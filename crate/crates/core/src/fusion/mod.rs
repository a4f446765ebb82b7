//! Forward-only reference of Branchformer / E-Branchformer encoder blocks,
//! cross-attention audio-visual fusion and CTC, with seeded parameters.

mod ctc;
mod io;
mod layers;
mod mat;
mod model;
mod params;

pub use ctc::{ctc_loss, log_softmax_rows, min_frames, BLANK};
pub use io::{
    export_parameters, import_parameters, read_bundle, read_tensor, write_bundle, write_tensor,
    Tensor, MAGIC, VERSION,
};
pub use layers::{
    branchformer_block, branchformer_forward, cgmlp, cgmlp_forward, cross_attention_pair,
    cross_modal_fuse, gelu, multi_head_attention, multi_head_attention_with_maps, nearest_index,
    softmax_rows, swish, AttentionOutput,
};
pub use mat::{FeatureSequence, Mat, Modality};
pub use model::{FusionModel, FusionModelConfig, FusionOutput};
pub use params::{
    AttentionParams, BlockConfig, BlockParams, BlockVariant, CgmlpParams, CrossAttentionLayer,
    DepthwiseConv, EBranchExtras, FusionParams, Init, LayerNorm, Linear, ParamRng, Parameters,
    Visitor, LAYER_NORM_EPS,
};
