use serde::{Deserialize, Serialize};

use super::mat::Mat;
use crate::error::{Error, Result};

/// xorshift64* generator; its outputs map to uniform(-0.1, 0.1).
#[derive(Debug, Clone)]
pub struct ParamRng {
    state: u64,
}

impl ParamRng {
    /// A zero seed would stall the generator and is replaced by a fixed
    /// odd constant.
    pub fn new(seed: u64) -> Self {
        Self {
            state: if seed == 0 {
                0x9E37_79B9_7F4A_7C15
            } else {
                seed
            },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Top 53 bits as a fraction in [0, 1), scaled to [-0.1, 0.1).
    pub fn next_param(&mut self) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        -0.1 + 0.2 * u
    }
}

/// How a tensor is filled by seeded initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Uniform,
    Ones,
    Zeros,
}

/// Callback receiving (shape, init rule, values) of one tensor.
pub type Visitor<'a> = dyn FnMut(&[usize], Init, &mut [f64]) + 'a;

/// Canonical traversal of every parameter tensor (shape, init rule,
/// values). The order is the serialization and seeding order.
pub trait Parameters {
    fn visit(&mut self, f: &mut Visitor);

    fn init_from_seed(&mut self, rng: &mut ParamRng) {
        self.visit(&mut |_, init, values| {
            for v in values.iter_mut() {
                *v = match init {
                    Init::Uniform => rng.next_param(),
                    Init::Ones => 1.0,
                    Init::Zeros => 0.0,
                };
            }
        });
    }

    fn parameter_count(&self) -> usize
    where
        Self: Clone,
    {
        let mut n = 0;
        self.clone().visit(&mut |_, _, v| n += v.len());
        n
    }
}

/// `y = x W^T + b` with `W` of shape out x in.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Mat,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Mat::zeros(output, input),
            bias: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Mat) -> Result<Mat> {
        let mut y = x.matmul_t(&self.weight)?;
        for r in 0..y.rows() {
            for (v, b) in y.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(y)
    }
}

impl Parameters for Linear {
    fn visit(&mut self, f: &mut Visitor) {
        let shape = [self.weight.rows(), self.weight.cols()];
        f(&shape, Init::Uniform, self.weight.data_mut());
        f(&[self.bias.len()], Init::Uniform, &mut self.bias);
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-row normalization with gain and shift; starts at gain 1, shift 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Vec<f64>,
    pub shift: Vec<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gain: vec![1.0; dim],
            shift: vec![0.0; dim],
        }
    }

    pub fn forward(&self, x: &Mat) -> Result<Mat> {
        if x.cols() != self.gain.len() {
            return Err(Error::param(format!(
                "layer norm over {} features applied to {}",
                self.gain.len(),
                x.cols()
            )));
        }
        let mut y = x.clone();
        let n = x.cols() as f64;
        for r in 0..y.rows() {
            let row = y.row_mut(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (i, v) in row.iter_mut().enumerate() {
                *v = (*v - mean) * inv * self.gain[i] + self.shift[i];
            }
        }
        Ok(y)
    }
}

impl Parameters for LayerNorm {
    fn visit(&mut self, f: &mut Visitor) {
        f(&[self.gain.len()], Init::Ones, &mut self.gain);
        f(&[self.shift.len()], Init::Zeros, &mut self.shift);
    }
}

/// Per-channel convolution over time, odd width, zero-padded "same".
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseConv {
    /// channels x width
    pub kernel: Mat,
    pub bias: Vec<f64>,
}

impl DepthwiseConv {
    pub fn zeros(channels: usize, width: usize) -> Result<Self> {
        if width.is_multiple_of(2) {
            return Err(Error::param(format!(
                "convolution width must be odd, got {width}"
            )));
        }
        Ok(Self {
            kernel: Mat::zeros(channels, width),
            bias: vec![0.0; channels],
        })
    }

    pub fn width(&self) -> usize {
        self.kernel.cols()
    }

    /// `y[t][c] = b[c] + sum_j k[c][j] x[t + j - (width-1)/2][c]`.
    pub fn forward(&self, x: &Mat) -> Result<Mat> {
        if x.cols() != self.kernel.rows() {
            return Err(Error::param(format!(
                "depthwise convolution over {} channels applied to {}",
                self.kernel.rows(),
                x.cols()
            )));
        }
        let half = (self.width() / 2) as isize;
        let frames = x.rows() as isize;
        let mut y = Mat::zeros(x.rows(), x.cols());
        for t in 0..frames {
            for c in 0..x.cols() {
                let mut acc = self.bias[c];
                for j in 0..self.width() as isize {
                    let src = t + j - half;
                    if (0..frames).contains(&src) {
                        acc += self.kernel.get(c, j as usize) * x.get(src as usize, c);
                    }
                }
                y.set(t as usize, c, acc);
            }
        }
        Ok(y)
    }
}

impl Parameters for DepthwiseConv {
    fn visit(&mut self, f: &mut Visitor) {
        let shape = [self.kernel.rows(), self.kernel.cols()];
        f(&shape, Init::Uniform, self.kernel.data_mut());
        f(&[self.bias.len()], Init::Uniform, &mut self.bias);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub heads: usize,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

impl AttentionParams {
    pub fn zeros(dim: usize, heads: usize) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return Err(Error::param(format!(
                "{heads} heads do not divide dimension {dim}"
            )));
        }
        Ok(Self {
            heads,
            query: Linear::zeros(dim, dim),
            key: Linear::zeros(dim, dim),
            value: Linear::zeros(dim, dim),
            output: Linear::zeros(dim, dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.query.input_dim()
    }
}

impl Parameters for AttentionParams {
    fn visit(&mut self, f: &mut Visitor) {
        self.query.visit(f);
        self.key.visit(f);
        self.value.visit(f);
        self.output.visit(f);
    }
}

/// Convolutional gating MLP: `d -> 2e`, gate `e`, back to `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CgmlpParams {
    pub up: Linear,
    pub gate_norm: LayerNorm,
    pub gate_conv: DepthwiseConv,
    pub down: Linear,
}

impl CgmlpParams {
    pub fn zeros(dim: usize, hidden: usize, kernel: usize) -> Result<Self> {
        Ok(Self {
            up: Linear::zeros(dim, 2 * hidden),
            gate_norm: LayerNorm::new(hidden),
            gate_conv: DepthwiseConv::zeros(hidden, kernel)?,
            down: Linear::zeros(hidden, dim),
        })
    }

    pub fn hidden(&self) -> usize {
        self.down.input_dim()
    }
}

impl Parameters for CgmlpParams {
    fn visit(&mut self, f: &mut Visitor) {
        self.up.visit(f);
        self.gate_norm.visit(f);
        self.gate_conv.visit(f);
        self.down.visit(f);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockVariant {
    Branchformer,
    EBranchformer,
}

/// Extra modules of the E-Branchformer merge.
#[derive(Debug, Clone, PartialEq)]
pub struct EBranchExtras {
    /// Over the concatenated branch outputs (2d channels).
    pub merge_conv: DepthwiseConv,
    pub ffn_norm: LayerNorm,
    pub ffn_up: Linear,
    pub ffn_down: Linear,
}

impl Parameters for EBranchExtras {
    fn visit(&mut self, f: &mut Visitor) {
        self.merge_conv.visit(f);
        self.ffn_norm.visit(f);
        self.ffn_up.visit(f);
        self.ffn_down.visit(f);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub dim: usize,
    pub heads: usize,
    /// cgMLP gate width `e`.
    pub cgmlp_hidden: usize,
    pub cgmlp_kernel: usize,
    pub variant: BlockVariant,
    /// Width of the E-Branchformer merge convolution.
    pub merge_kernel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub variant: BlockVariant,
    pub attn_norm: LayerNorm,
    pub attention: AttentionParams,
    pub cgmlp_norm: LayerNorm,
    pub cgmlp: CgmlpParams,
    /// `2d -> d`
    pub merge: Linear,
    pub extras: Option<EBranchExtras>,
}

impl BlockParams {
    pub fn zeros(cfg: &BlockConfig) -> Result<Self> {
        let d = cfg.dim;
        let extras = match cfg.variant {
            BlockVariant::Branchformer => None,
            BlockVariant::EBranchformer => Some(EBranchExtras {
                merge_conv: DepthwiseConv::zeros(2 * d, cfg.merge_kernel)?,
                ffn_norm: LayerNorm::new(d),
                ffn_up: Linear::zeros(d, 4 * d),
                ffn_down: Linear::zeros(4 * d, d),
            }),
        };
        Ok(Self {
            variant: cfg.variant,
            attn_norm: LayerNorm::new(d),
            attention: AttentionParams::zeros(d, cfg.heads)?,
            cgmlp_norm: LayerNorm::new(d),
            cgmlp: CgmlpParams::zeros(d, cfg.cgmlp_hidden, cfg.cgmlp_kernel)?,
            merge: Linear::zeros(2 * d, d),
            extras,
        })
    }

    pub fn seeded(cfg: &BlockConfig, rng: &mut ParamRng) -> Result<Self> {
        let mut p = Self::zeros(cfg)?;
        p.init_from_seed(rng);
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.attention.dim()
    }

    pub fn validate(&self) -> Result<()> {
        match (self.variant, &self.extras) {
            (BlockVariant::Branchformer, None) | (BlockVariant::EBranchformer, Some(_)) => Ok(()),
            (v, _) => Err(Error::param(format!(
                "{v:?} block with{} E-Branchformer extras",
                if self.extras.is_some() { "" } else { "out" }
            ))),
        }
    }
}

impl Parameters for BlockParams {
    fn visit(&mut self, f: &mut Visitor) {
        self.attn_norm.visit(f);
        self.attention.visit(f);
        self.cgmlp_norm.visit(f);
        self.cgmlp.visit(f);
        self.merge.visit(f);
        if let Some(e) = &mut self.extras {
            e.visit(f);
        }
    }
}

/// One cross-attention layer: normalized queries from one modality attend
/// to normalized keys/values from the other.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossAttentionLayer {
    pub query_norm: LayerNorm,
    pub memory_norm: LayerNorm,
    pub attention: AttentionParams,
}

impl CrossAttentionLayer {
    pub fn zeros(dim: usize, heads: usize) -> Result<Self> {
        Ok(Self {
            query_norm: LayerNorm::new(dim),
            memory_norm: LayerNorm::new(dim),
            attention: AttentionParams::zeros(dim, heads)?,
        })
    }
}

impl Parameters for CrossAttentionLayer {
    fn visit(&mut self, f: &mut Visitor) {
        self.query_norm.visit(f);
        self.memory_norm.visit(f);
        self.attention.visit(f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    /// Audio queries, video keys/values.
    pub audio_to_video: CrossAttentionLayer,
    /// Video queries, audio keys/values.
    pub video_to_audio: CrossAttentionLayer,
}

impl FusionParams {
    pub fn zeros(dim: usize, heads: usize) -> Result<Self> {
        Ok(Self {
            audio_to_video: CrossAttentionLayer::zeros(dim, heads)?,
            video_to_audio: CrossAttentionLayer::zeros(dim, heads)?,
        })
    }

    pub fn seeded(dim: usize, heads: usize, rng: &mut ParamRng) -> Result<Self> {
        let mut p = Self::zeros(dim, heads)?;
        p.init_from_seed(rng);
        Ok(p)
    }
}

impl Parameters for FusionParams {
    fn visit(&mut self, f: &mut Visitor) {
        self.audio_to_video.visit(f);
        self.video_to_audio.visit(f);
    }
}
