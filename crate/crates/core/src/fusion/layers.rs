use super::mat::{FeatureSequence, Mat, Modality};
use super::params::{AttentionParams, BlockParams, CgmlpParams, FusionParams};
use crate::error::{Error, Result};

/// tanh approximation of GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x * x * x)).tanh())
}

pub fn swish(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Mat) -> Mat {
    let mut y = x.clone();
    for r in 0..y.rows() {
        let row = y.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    y
}

/// Attention output together with the per-head attention maps
/// (each `T_q x T_kv`).
#[derive(Debug, Clone)]
pub struct AttentionOutput {
    pub output: Mat,
    pub maps: Vec<Mat>,
}

pub fn multi_head_attention_with_maps(
    query: &Mat,
    memory: &Mat,
    p: &AttentionParams,
) -> Result<AttentionOutput> {
    let d = p.dim();
    if query.cols() != d || memory.cols() != d {
        return Err(Error::param(format!(
            "attention of width {d} applied to widths {} and {}",
            query.cols(),
            memory.cols()
        )));
    }
    if memory.rows() == 0 {
        return Err(Error::param("attention over an empty key/value sequence"));
    }
    let q = p.query.forward(query)?;
    let k = p.key.forward(memory)?;
    let v = p.value.forward(memory)?;
    let dh = d / p.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut concat = Mat::zeros(query.rows(), d);
    let mut maps = Vec::with_capacity(p.heads);
    for h in 0..p.heads {
        let (lo, hi) = (h * dh, (h + 1) * dh);
        let (qh, kh, vh) = (q.columns(lo, hi), k.columns(lo, hi), v.columns(lo, hi));
        let weights = softmax_rows(&qh.matmul_t(&kh)?.scale(scale));
        let ctx = weights.matmul(&vh)?;
        for r in 0..ctx.rows() {
            concat.row_mut(r)[lo..hi].copy_from_slice(ctx.row(r));
        }
        maps.push(weights);
    }
    Ok(AttentionOutput {
        output: p.output.forward(&concat)?,
        maps,
    })
}

/// Scaled dot-product attention with `heads` heads; no positional terms.
pub fn multi_head_attention(
    query: &FeatureSequence,
    memory: &FeatureSequence,
    p: &AttentionParams,
) -> Result<FeatureSequence> {
    let out = multi_head_attention_with_maps(&query.values, &memory.values, p)?;
    FeatureSequence::new(out.output, query.modality)
}

pub fn cgmlp_forward(x: &Mat, p: &CgmlpParams) -> Result<Mat> {
    let e = p.hidden();
    let up = p.up.forward(x)?.map(gelu);
    let a = up.columns(0, e);
    let b = p
        .gate_conv
        .forward(&p.gate_norm.forward(&up.columns(e, 2 * e))?)?;
    p.down.forward(&a.hadamard(&b)?)
}

/// Convolutional gating MLP: up-projection with GELU, split in halves
/// `(a, b)`, `b` normalized and convolved over time, gate `a * conv(b)`,
/// down-projection.
pub fn cgmlp(seq: &FeatureSequence, p: &CgmlpParams) -> Result<FeatureSequence> {
    FeatureSequence::new(cgmlp_forward(&seq.values, p)?, seq.modality)
}

pub fn branchformer_forward(x: &Mat, p: &BlockParams) -> Result<Mat> {
    p.validate()?;
    let xa = p.attn_norm.forward(x)?;
    let a = multi_head_attention_with_maps(&xa, &xa, &p.attention)?.output;
    let b = cgmlp_forward(&p.cgmlp_norm.forward(x)?, &p.cgmlp)?;
    let mut merged = a.hconcat(&b)?;
    if let Some(extra) = &p.extras {
        merged = merged.add(&extra.merge_conv.forward(&merged)?)?;
    }
    let mut y = x.add(&p.merge.forward(&merged)?)?;
    if let Some(extra) = &p.extras {
        let h = extra
            .ffn_up
            .forward(&extra.ffn_norm.forward(&y)?)?
            .map(swish);
        y = y.add(&extra.ffn_down.forward(&h)?.scale(0.5))?;
    }
    Ok(y)
}

/// One encoder block with a self-attention branch and a cgMLP branch over
/// layer-normalized input. Branchformer merges with a linear projection of
/// the concatenated branches plus the residual. E-Branchformer first adds a
/// depthwise convolution of the concatenation, and after the merge applies
/// a half-weighted residual feed-forward module (`d -> 4d -> d`, swish).
pub fn branchformer_block(seq: &FeatureSequence, p: &BlockParams) -> Result<FeatureSequence> {
    FeatureSequence::new(branchformer_forward(&seq.values, p)?, seq.modality)
}

/// Index of the video frame used for audio frame `i`:
/// `round(i * T_v / T_a)`, clamped to the last video frame.
pub fn nearest_index(i: usize, audio_frames: usize, video_frames: usize) -> usize {
    let j = (i as f64 * video_frames as f64 / audio_frames as f64).round() as usize;
    j.min(video_frames - 1)
}

/// The two cross-attention directions before resampling.
pub fn cross_attention_pair(audio: &Mat, video: &Mat, p: &FusionParams) -> Result<(Mat, Mat)> {
    let layer = &p.audio_to_video;
    let a = multi_head_attention_with_maps(
        &layer.query_norm.forward(audio)?,
        &layer.memory_norm.forward(video)?,
        &layer.attention,
    )?
    .output;
    let layer = &p.video_to_audio;
    let v = multi_head_attention_with_maps(
        &layer.query_norm.forward(video)?,
        &layer.memory_norm.forward(audio)?,
        &layer.attention,
    )?
    .output;
    Ok((a, v))
}

/// Audio-visual fusion: audio attends to video and video to audio, the
/// video-side result is mapped onto the audio frame rate by nearest index
/// and both are concatenated along features (`T_a x 2d`).
pub fn cross_modal_fuse(
    audio: &FeatureSequence,
    video: &FeatureSequence,
    p: &FusionParams,
) -> Result<FeatureSequence> {
    if audio.frames() == 0 || video.frames() == 0 {
        return Err(Error::param(
            "audio-visual fusion needs both modalities non-empty",
        ));
    }
    let (a, v) = cross_attention_pair(&audio.values, &video.values, p)?;
    let order: Vec<usize> = (0..audio.frames())
        .map(|i| nearest_index(i, audio.frames(), video.frames()))
        .collect();
    FeatureSequence::new(a.hconcat(&v.select_rows(&order))?, Modality::Audio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::params::{BlockConfig, BlockVariant, Linear, ParamRng, Parameters};

    fn seq(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = ParamRng::new(seed);
        Mat::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| 10.0 * rng.next_param()).collect(),
        )
        .unwrap()
    }

    fn seeded_attention(dim: usize, heads: usize, seed: u64) -> AttentionParams {
        let mut p = AttentionParams::zeros(dim, heads).unwrap();
        p.init_from_seed(&mut ParamRng::new(seed));
        p
    }

    fn lin(w: [[f64; 2]; 2], b: [f64; 2]) -> Linear {
        Linear {
            weight: Mat::from_rows(&[w[0].to_vec(), w[1].to_vec()]).unwrap(),
            bias: b.to_vec(),
        }
    }

    #[test]
    fn hand_computed_single_head() {
        let p = AttentionParams {
            heads: 1,
            query: lin([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]),
            key: lin([[1.0, 1.0], [0.0, 1.0]], [0.0, 0.0]),
            value: lin([[2.0, 0.0], [0.0, 1.0]], [0.0, 1.0]),
            output: lin([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.0]),
        };
        let q = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let kv = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        // K = [[1,0],[2,2]], V = [[2,1],[0,3]], scale 1/sqrt(2)
        // query 1: scores (1, 2)/sqrt2; query 2: (0, 2)/sqrt2
        let s = 1.0 / 2f64.sqrt();
        let w1 = 1.0 / (1.0 + (s * 1.0).exp()); // weight on key 1 for query 1
        let w2 = 1.0 / (1.0 + (s * 2.0).exp());
        let ctx = |w: f64| [2.0 * w, w + 3.0 * (1.0 - w)];
        let (c1, c2) = (ctx(w1), ctx(w2));
        let expected = [[c1[1] + 0.5, c1[0]], [c2[1] + 0.5, c2[0]]];
        let out = multi_head_attention_with_maps(&q, &kv, &p).unwrap().output;
        for (r, row) in expected.iter().enumerate() {
            for (c, want) in row.iter().enumerate() {
                assert!((out.get(r, c) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn singleton_memory_ignores_query() {
        let p = seeded_attention(4, 2, 3);
        let kv = seq(1, 4, 4);
        let out = multi_head_attention_with_maps(&seq(5, 4, 5), &kv, &p)
            .unwrap()
            .output;
        let expected = p.output.forward(&p.value.forward(&kv).unwrap()).unwrap();
        for r in 0..5 {
            for c in 0..4 {
                assert!((out.get(r, c) - expected.get(0, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn maps_are_stochastic_and_memory_order_is_irrelevant() {
        let p = seeded_attention(6, 3, 7);
        let (q, kv) = (seq(4, 6, 8), seq(5, 6, 9));
        let base = multi_head_attention_with_maps(&q, &kv, &p).unwrap();
        for m in &base.maps {
            for r in 0..m.rows() {
                assert!((m.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(m.row(r).iter().all(|&v| v >= 0.0));
            }
        }
        let shuffled =
            multi_head_attention_with_maps(&q, &kv.select_rows(&[3, 0, 4, 2, 1]), &p).unwrap();
        assert!(base.output.max_abs_diff(&shuffled.output) < 1e-9);
    }

    #[test]
    fn attention_shape_errors() {
        let p = seeded_attention(4, 2, 1);
        assert!(multi_head_attention_with_maps(&seq(2, 3, 0), &seq(2, 4, 0), &p).is_err());
        assert!(multi_head_attention_with_maps(&seq(2, 4, 0), &Mat::zeros(0, 4), &p).is_err());
    }

    fn seeded_cgmlp(kernel: usize, seed: u64) -> CgmlpParams {
        let mut p = CgmlpParams::zeros(4, 6, kernel).unwrap();
        p.init_from_seed(&mut ParamRng::new(seed));
        p
    }

    #[test]
    fn cgmlp_zero_in_zero_out() {
        let mut p = seeded_cgmlp(3, 1);
        p.up.bias.iter_mut().for_each(|b| *b = 0.0);
        p.gate_conv.bias.iter_mut().for_each(|b| *b = 0.0);
        p.down.bias.iter_mut().for_each(|b| *b = 0.0);
        assert!(cgmlp_forward(&Mat::zeros(5, 4), &p)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn cgmlp_receptive_field() {
        for kernel in [1, 3, 5] {
            let p = seeded_cgmlp(kernel, 2);
            let frames = 11;
            let base = cgmlp_forward(&Mat::zeros(frames, 4), &p).unwrap();
            let half = (kernel - 1) / 2;
            for t in 0..frames {
                let mut x = Mat::zeros(frames, 4);
                x.row_mut(t).copy_from_slice(&[1.0, -2.0, 0.5, 3.0]);
                let y = cgmlp_forward(&x, &p).unwrap();
                for s in 0..frames {
                    let changed = y.row(s).iter().zip(base.row(s)).any(|(a, b)| a != b);
                    let inside = s + half >= t && s <= t + half;
                    assert!(
                        !changed || inside,
                        "kernel {kernel}: impulse at {t} changed frame {s}"
                    );
                }
                assert!(y.row(t).iter().zip(base.row(t)).any(|(a, b)| a != b));
            }
        }
    }

    #[test]
    fn pointwise_cgmlp_commutes_with_frame_permutation() {
        let p = seeded_cgmlp(1, 3);
        let x = seq(6, 4, 4);
        let order = [5, 2, 0, 1, 4, 3];
        let a = cgmlp_forward(&x.select_rows(&order), &p).unwrap();
        let b = cgmlp_forward(&x, &p).unwrap().select_rows(&order);
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    fn block_cfg(variant: BlockVariant) -> BlockConfig {
        BlockConfig {
            dim: 8,
            heads: 2,
            cgmlp_hidden: 12,
            cgmlp_kernel: 3,
            variant,
            merge_kernel: 3,
        }
    }

    #[test]
    fn zero_merge_is_identity() {
        let mut p = BlockParams::seeded(
            &block_cfg(BlockVariant::Branchformer),
            &mut ParamRng::new(5),
        )
        .unwrap();
        p.merge = Linear::zeros(16, 8);
        let x = seq(4, 8, 6);
        assert_eq!(branchformer_forward(&x, &p).unwrap(), x);
    }

    #[test]
    fn zeroed_extras_degenerate_to_branchformer() {
        let mut e = BlockParams::seeded(
            &block_cfg(BlockVariant::EBranchformer),
            &mut ParamRng::new(8),
        )
        .unwrap();
        let extras = e.extras.as_mut().unwrap();
        extras
            .merge_conv
            .kernel
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = 0.0);
        extras.merge_conv.bias.iter_mut().for_each(|v| *v = 0.0);
        extras.ffn_down = Linear::zeros(32, 8);
        let mut b = e.clone();
        b.variant = BlockVariant::Branchformer;
        b.extras = None;
        let x = seq(5, 8, 9);
        assert_eq!(
            branchformer_forward(&x, &e).unwrap(),
            branchformer_forward(&x, &b).unwrap()
        );
    }

    #[test]
    fn fusion_shapes_and_symmetry() {
        let mut rng = ParamRng::new(10);
        let p = FusionParams::seeded(4, 2, &mut rng).unwrap();
        for tv in 1..5 {
            let a = FeatureSequence::new(seq(6, 4, 11), Modality::Audio).unwrap();
            let v = FeatureSequence::new(seq(tv, 4, 12), Modality::Video).unwrap();
            let out = cross_modal_fuse(&a, &v, &p).unwrap();
            assert_eq!((out.frames(), out.dim()), (6, 8));
            if tv == 1 {
                for r in 1..6 {
                    assert!(out
                        .values
                        .row(r)
                        .iter()
                        .zip(out.values.row(0))
                        .all(|(x, y)| (x - y).abs() < 1e-12));
                }
            }
        }
        let shared = FusionParams {
            audio_to_video: p.audio_to_video.clone(),
            video_to_audio: p.audio_to_video.clone(),
        };
        let x = seq(5, 4, 13);
        let (a, v) = cross_attention_pair(&x, &x, &shared).unwrap();
        assert_eq!(a, v);
        let empty = FeatureSequence::new(Mat::zeros(0, 4), Modality::Video).unwrap();
        let a = FeatureSequence::new(x, Modality::Audio).unwrap();
        assert!(cross_modal_fuse(&a, &empty, &p).is_err());
    }

    #[test]
    fn nearest_index_mapping() {
        let got: Vec<usize> = (0..6).map(|i| nearest_index(i, 6, 3)).collect();
        assert_eq!(got, vec![0, 1, 1, 2, 2, 2]);
        assert_eq!(nearest_index(5, 6, 1), 0);
    }
}
