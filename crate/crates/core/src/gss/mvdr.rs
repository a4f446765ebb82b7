use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::activity::MaskSet;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::signal::ComplexSpectrogram;

const EPS: f64 = 1e-10;
/// Loading applied to a singular noise covariance, relative to its mean
/// diagonal.
const RETRY_LOADING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReferencePolicy {
    /// Channel with the highest summed target-to-noise power ratio.
    #[default]
    Auto,
    Fixed(usize),
}

/// Per-frequency beamforming filters, `w[f]` of length `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerWeights {
    pub w: Vec<Vec<Complex64>>,
    pub reference_channel: usize,
}

/// Target and noise spatial covariances of every frequency bin.
///
/// The target covariance weights frames by `gamma(target)`, the noise
/// covariance by `1 - gamma(target)`, each normalized by its total weight
/// (zero when the weight is zero).
pub fn spatial_covariances(
    spec: &ComplexSpectrogram,
    masks: &MaskSet,
    target: usize,
) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    if masks.frames() != spec.frames() || masks.bins() != spec.bins() {
        return Err(Error::param("masks do not match the spectrogram"));
    }
    if target >= masks.classes() {
        return Err(Error::param(format!(
            "target class {target} out of {} classes",
            masks.classes()
        )));
    }
    let c = spec.channels();
    let pairs: Vec<(CMatrix, CMatrix)> = (0..spec.bins())
        .into_par_iter()
        .map(|f| {
            let x = spec.bin(f);
            let (mut ss, mut nn) = (linalg::zeros(c, c), linalg::zeros(c, c));
            let (mut ws, mut wn) = (0.0, 0.0);
            for t in 0..spec.frames() {
                let g = masks.get(target, t, f);
                let xt = &x[t * c..(t + 1) * c];
                for i in 0..c {
                    for j in 0..c {
                        let outer = xt[i] * xt[j].conj();
                        ss[(i, j)] += outer * g;
                        nn[(i, j)] += outer * (1.0 - g);
                    }
                }
                ws += g;
                wn += 1.0 - g;
            }
            let norm = |m: CMatrix, w: f64| if w > 0.0 { m.unscale(w) } else { m };
            (norm(ss, ws), norm(nn, wn))
        })
        .collect();
    Ok(pairs.into_iter().unzip())
}

/// Channel maximizing `sum_f phi_ss[c,c] / (phi_nn[c,c] + eps)`; the
/// lowest index wins ties.
pub fn select_reference_channel(phi_ss: &[CMatrix], phi_nn: &[CMatrix]) -> Result<usize> {
    let c = phi_ss.first().map_or(0, |m| m.nrows());
    if c == 0 || phi_ss.len() != phi_nn.len() {
        return Err(Error::param(
            "covariance lists are empty or differ in length",
        ));
    }
    if phi_ss
        .iter()
        .chain(phi_nn)
        .any(|m| m.nrows() != c || m.ncols() != c)
    {
        return Err(Error::param("covariance matrices differ in size"));
    }
    let score = |ch: usize| -> f64 {
        phi_ss
            .iter()
            .zip(phi_nn)
            .map(|(s, n)| s[(ch, ch)].re / (n[(ch, ch)].re + EPS))
            .sum()
    };
    let mut best = 0;
    let mut best_score = score(0);
    for ch in 1..c {
        let s = score(ch);
        if s > best_score {
            best = ch;
            best_score = s;
        }
    }
    Ok(best)
}

/// Souden MVDR filter `Phi_nn^-1 Phi_ss u / max(tr(Phi_nn^-1 Phi_ss), eps)`
/// for one bin, with its norm capped at `weight_cap`.
pub fn mvdr_vector(
    phi_ss: &CMatrix,
    phi_nn: &CMatrix,
    reference: usize,
    weight_cap: f64,
    bin: usize,
) -> Result<Vec<Complex64>> {
    let c = phi_ss.nrows();
    if linalg::trace_re(phi_ss) <= 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); c]);
    }
    let ratio = match linalg::hermitian_solve(phi_nn, phi_ss) {
        Some(r) => r,
        None => {
            let mut loaded = phi_nn.clone();
            let scale = linalg::trace_re(phi_nn).max(linalg::trace_re(phi_ss)) / c as f64;
            linalg::add_diagonal(&mut loaded, RETRY_LOADING * scale);
            linalg::hermitian_solve(&loaded, phi_ss).ok_or_else(|| {
                Error::Numerical(format!("noise covariance singular at frequency bin {bin}"))
            })?
        }
    };
    let denom = ratio.trace().re.max(EPS);
    let mut w: Vec<Complex64> = (0..c).map(|i| ratio[(i, reference)] / denom).collect();
    if w.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite beamformer at frequency bin {bin}"
        )));
    }
    let norm = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if norm > weight_cap {
        w.iter_mut().for_each(|v| *v *= weight_cap / norm);
    }
    Ok(w)
}

/// `y(t, f) = w_f^H x(t, f)` as a single-channel spectrogram.
pub fn apply_beamformer(
    spec: &ComplexSpectrogram,
    weights: &BeamformerWeights,
) -> Result<ComplexSpectrogram> {
    let c = spec.channels();
    if weights.w.len() != spec.bins() || weights.w.iter().any(|w| w.len() != c) {
        return Err(Error::param("beamformer does not match the spectrogram"));
    }
    let mut out = ComplexSpectrogram::zeros(
        spec.frames(),
        spec.bins(),
        1,
        *spec.params(),
        spec.sample_rate_hz(),
    );
    for f in 0..spec.bins() {
        let x = spec.bin(f);
        let w = &weights.w[f];
        for (t, y) in out.bin_mut(f).iter_mut().enumerate() {
            *y = (0..c).map(|i| w[i].conj() * x[t * c + i]).sum();
        }
    }
    Ok(out)
}

pub fn mvdr_weights(
    phi_ss: &[CMatrix],
    phi_nn: &[CMatrix],
    reference: ReferencePolicy,
    weight_cap: f64,
) -> Result<BeamformerWeights> {
    let reference_channel = match reference {
        ReferencePolicy::Auto => select_reference_channel(phi_ss, phi_nn)?,
        ReferencePolicy::Fixed(r) => {
            let c = phi_ss.first().map_or(0, |m| m.nrows());
            if r >= c {
                return Err(Error::param(format!("reference channel {r} out of {c}")));
            }
            r
        }
    };
    let w = phi_ss
        .par_iter()
        .zip(phi_nn)
        .enumerate()
        .map(|(f, (s, n))| mvdr_vector(s, n, reference_channel, weight_cap, f))
        .collect::<Result<_>>()?;
    Ok(BeamformerWeights {
        w,
        reference_channel,
    })
}

/// Mask-based MVDR for class `target`.
pub fn mvdr_beamform(
    spec: &ComplexSpectrogram,
    masks: &MaskSet,
    target: usize,
    reference: ReferencePolicy,
    weight_cap: f64,
) -> Result<(ComplexSpectrogram, BeamformerWeights)> {
    if !(weight_cap > 0.0) {
        return Err(Error::param("weight cap must be positive"));
    }
    let (ss, nn) = spatial_covariances(spec, masks, target)?;
    let weights = mvdr_weights(&ss, &nn, reference, weight_cap)?;
    Ok((apply_beamformer(spec, &weights)?, weights))
}
