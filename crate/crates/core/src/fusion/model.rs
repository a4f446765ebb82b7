use serde::{Deserialize, Serialize};

use super::ctc::{ctc_loss, log_softmax_rows};
use super::layers::{branchformer_forward, cross_modal_fuse};
use super::mat::{FeatureSequence, Mat, Modality};
use super::params::{
    BlockConfig, BlockParams, BlockVariant, FusionParams, Linear, ParamRng, Parameters, Visitor,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionModelConfig {
    pub dim: usize,
    pub heads: usize,
    pub cgmlp_hidden: usize,
    pub cgmlp_kernel: usize,
    pub variant: BlockVariant,
    pub merge_kernel: usize,
    pub audio_layers: usize,
    pub video_layers: usize,
    /// Output symbols including the blank at index 0.
    pub vocab: usize,
}

impl Default for FusionModelConfig {
    fn default() -> Self {
        Self {
            dim: 8,
            heads: 2,
            cgmlp_hidden: 16,
            cgmlp_kernel: 3,
            variant: BlockVariant::EBranchformer,
            merge_kernel: 3,
            audio_layers: 2,
            video_layers: 1,
            vocab: 6,
        }
    }
}

impl FusionModelConfig {
    pub fn block(&self) -> BlockConfig {
        BlockConfig {
            dim: self.dim,
            heads: self.heads,
            cgmlp_hidden: self.cgmlp_hidden,
            cgmlp_kernel: self.cgmlp_kernel,
            variant: self.variant,
            merge_kernel: self.merge_kernel,
        }
    }
}

/// Two modality encoders (stacks of blocks), cross-modal fusion and a
/// linear CTC head with log-softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub config: FusionModelConfig,
    pub audio_blocks: Vec<BlockParams>,
    pub video_blocks: Vec<BlockParams>,
    pub fusion: FusionParams,
    pub head: Linear,
}

#[derive(Debug, Clone)]
pub struct FusionOutput {
    pub fused: FeatureSequence,
    pub log_probs: Mat,
}

impl FusionModel {
    pub fn zeros(config: FusionModelConfig) -> Result<Self> {
        if config.vocab < 2 {
            return Err(Error::param(
                "vocabulary needs a blank plus at least one symbol",
            ));
        }
        let block = config.block();
        let stack = |n| {
            (0..n)
                .map(|_| BlockParams::zeros(&block))
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            config,
            audio_blocks: stack(config.audio_layers)?,
            video_blocks: stack(config.video_layers)?,
            fusion: FusionParams::zeros(config.dim, config.heads)?,
            head: Linear::zeros(2 * config.dim, config.vocab),
        })
    }

    pub fn seeded(config: FusionModelConfig, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        m.init_from_seed(&mut ParamRng::new(seed));
        Ok(m)
    }

    pub fn forward(
        &self,
        audio: &FeatureSequence,
        video: &FeatureSequence,
    ) -> Result<FusionOutput> {
        let d = self.config.dim;
        if audio.modality != Modality::Audio || video.modality != Modality::Video {
            return Err(Error::param("expected one audio and one video sequence"));
        }
        if audio.dim() != d || video.dim() != d {
            return Err(Error::param(format!(
                "model width {d}, features have {} (audio) and {} (video)",
                audio.dim(),
                video.dim()
            )));
        }
        let mut a = audio.values.clone();
        for b in &self.audio_blocks {
            a = branchformer_forward(&a, b)?;
        }
        let mut v = video.values.clone();
        for b in &self.video_blocks {
            v = branchformer_forward(&v, b)?;
        }
        let fused = cross_modal_fuse(
            &FeatureSequence::new(a, Modality::Audio)?,
            &FeatureSequence::new(v, Modality::Video)?,
            &self.fusion,
        )?;
        let log_probs = log_softmax_rows(&self.head.forward(&fused.values)?);
        if !log_probs.is_finite() {
            return Err(Error::Numerical("non-finite output probabilities".into()));
        }
        Ok(FusionOutput { fused, log_probs })
    }

    pub fn loss(&self, output: &FusionOutput, labels: &[usize]) -> Result<f64> {
        ctc_loss(&output.log_probs, labels)
    }
}

impl Parameters for FusionModel {
    fn visit(&mut self, f: &mut Visitor) {
        for b in self
            .audio_blocks
            .iter_mut()
            .chain(self.video_blocks.iter_mut())
        {
            b.visit(f);
        }
        self.fusion.visit(f);
        self.head.visit(f);
    }
}
