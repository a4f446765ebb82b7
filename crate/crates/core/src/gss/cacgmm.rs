use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::activity::{ActivityPattern, MaskSet};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::signal::ComplexSpectrogram;

/// Size of the seeded rank-one perturbation added to the identity start of
/// every speaker class.
const INIT_PERTURBATION: f64 = 0.05;

/// Mixture parameters: one Hermitian positive definite `C x C` matrix per
/// (frequency, class), trace-normalized to `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct CacgmmState {
    classes: usize,
    channels: usize,
    /// `[f * classes + k]`
    b: Vec<CMatrix>,
    /// Average log-likelihood after each EM iteration.
    pub log_likelihood_trace: Vec<f64>,
}

impl CacgmmState {
    /// Every class set to the identity.
    pub fn identity(bins: usize, classes: usize, channels: usize) -> Self {
        Self {
            classes,
            channels,
            b: vec![linalg::identity(channels); bins * classes],
            log_likelihood_trace: Vec::new(),
        }
    }

    pub fn from_matrices(
        bins: usize,
        classes: usize,
        channels: usize,
        b: Vec<CMatrix>,
    ) -> Result<Self> {
        if b.len() != bins * classes
            || b.iter()
                .any(|m| m.nrows() != channels || m.ncols() != channels)
        {
            return Err(Error::param(
                "mixture matrices do not match bins x classes x channels",
            ));
        }
        Ok(Self {
            classes,
            channels,
            b,
            log_likelihood_trace: Vec::new(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> usize {
        self.b.len() / self.classes.max(1)
    }

    pub fn matrix(&self, f: usize, k: usize) -> &CMatrix {
        &self.b[f * self.classes + k]
    }

    fn bin_matrices(&self, f: usize) -> &[CMatrix] {
        &self.b[f * self.classes..(f + 1) * self.classes]
    }
}

/// `ln((C-1)! / (2 pi^C))`, the normalizer of the complex angular central
/// Gaussian on the unit sphere of `C^C`.
fn log_normalizer(channels: usize) -> f64 {
    let log_fact: f64 = (1..channels).map(|i| (i as f64).ln()).sum();
    log_fact - std::f64::consts::LN_2 - channels as f64 * std::f64::consts::PI.ln()
}

struct BinPosterior {
    /// `[t][k]`
    gamma: Vec<f64>,
    log_likelihood: f64,
    points: usize,
}

fn unit_direction(x: &[Complex64]) -> Option<Vec<Complex64>> {
    let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| x.iter().map(|v| v / norm).collect())
}

fn bin_posteriors(
    x_bin: &[Complex64],
    channels: usize,
    activity: &ActivityPattern,
    b: &[CMatrix],
    bin: usize,
) -> Result<BinPosterior> {
    let classes = b.len();
    let frames = activity.frames();
    let mut factors = Vec::with_capacity(classes);
    for (k, m) in b.iter().enumerate() {
        let (logdet, inv) = linalg::hpd_logdet_inverse(m).ok_or_else(|| {
            Error::Numerical(format!(
                "mixture matrix of class {k} at frequency bin {bin} is not positive definite"
            ))
        })?;
        factors.push((logdet, inv));
    }
    let c = channels as f64;
    let norm_const = log_normalizer(channels);
    let mut gamma = vec![0.0; frames * classes];
    let mut log_likelihood = 0.0;
    let mut points = 0;
    let mut logp = vec![f64::NEG_INFINITY; classes];
    for t in 0..frames {
        let g = &mut gamma[t * classes..(t + 1) * classes];
        let active: Vec<usize> = (0..classes).filter(|&k| activity.is_active(k, t)).collect();
        let Some(z) = unit_direction(&x_bin[t * channels..(t + 1) * channels]) else {
            let share = 1.0 / active.len() as f64;
            active.iter().for_each(|&k| g[k] = share);
            continue;
        };
        let mut max = f64::NEG_INFINITY;
        for &k in &active {
            let q = linalg::quadratic_form(&factors[k].1, &z).max(f64::MIN_POSITIVE);
            logp[k] = -factors[k].0 - c * q.ln();
            max = max.max(logp[k]);
        }
        let sum: f64 = active.iter().map(|&k| (logp[k] - max).exp()).sum();
        for &k in &active {
            g[k] = (logp[k] - max).exp() / sum;
        }
        log_likelihood += max + sum.ln() + norm_const - (active.len() as f64).ln();
        points += 1;
    }
    Ok(BinPosterior {
        gamma,
        log_likelihood,
        points,
    })
}

fn check_shapes(
    spec: &ComplexSpectrogram,
    activity: &ActivityPattern,
    state: &CacgmmState,
) -> Result<()> {
    if activity.frames() != spec.frames() {
        return Err(Error::param(format!(
            "activity covers {} frames, spectrogram has {}",
            activity.frames(),
            spec.frames()
        )));
    }
    if state.classes() != activity.classes()
        || state.channels() != spec.channels()
        || state.bins() != spec.bins()
    {
        return Err(Error::param(
            "mixture state does not match spectrogram and activity",
        ));
    }
    Ok(())
}

fn e_step(
    spec: &ComplexSpectrogram,
    activity: &ActivityPattern,
    state: &CacgmmState,
) -> Result<(MaskSet, f64)> {
    let per_bin: Vec<BinPosterior> = (0..spec.bins())
        .into_par_iter()
        .map(|f| {
            bin_posteriors(
                spec.bin(f),
                spec.channels(),
                activity,
                state.bin_matrices(f),
                f,
            )
        })
        .collect::<Result<_>>()?;
    let (mut ll, mut points) = (0.0, 0usize);
    for p in &per_bin {
        ll += p.log_likelihood;
        points += p.points;
    }
    let average = if points > 0 { ll / points as f64 } else { 0.0 };
    let masks = MaskSet::from_bins(
        activity.classes(),
        activity.frames(),
        per_bin.into_iter().map(|p| p.gamma).collect(),
    );
    Ok((masks, average))
}

/// Class posteriors given the mixture parameters. The prior is uniform
/// over the classes active in a frame, so inactive classes get exactly
/// zero. Frames with an all-zero observation get a uniform posterior.
pub fn cacgmm_posteriors(
    spec: &ComplexSpectrogram,
    activity: &ActivityPattern,
    state: &CacgmmState,
) -> Result<MaskSet> {
    check_shapes(spec, activity, state)?;
    Ok(e_step(spec, activity, state)?.0)
}

fn m_step_bin(
    x_bin: &[Complex64],
    channels: usize,
    gamma: &[f64],
    b: &mut [CMatrix],
    bin: usize,
) -> Result<()> {
    let classes = b.len();
    let frames = gamma.len() / classes;
    let c = channels as f64;
    for k in 0..classes {
        let weight: f64 = (0..frames).map(|t| gamma[t * classes + k]).sum();
        if weight <= 0.0 {
            continue;
        }
        let inv = linalg::hermitian_solve(&b[k], &linalg::identity(channels)).ok_or_else(|| {
            Error::Numerical(format!(
                "singular mixture matrix of class {k} at frequency bin {bin}"
            ))
        })?;
        let mut acc = linalg::zeros(channels, channels);
        for t in 0..frames {
            let g = gamma[t * classes + k];
            if g == 0.0 {
                continue;
            }
            let Some(z) = unit_direction(&x_bin[t * channels..(t + 1) * channels]) else {
                continue;
            };
            let q = linalg::quadratic_form(&inv, &z).max(f64::MIN_POSITIVE);
            let s = g / q;
            for i in 0..channels {
                for j in 0..channels {
                    acc[(i, j)] += z[i] * z[j].conj() * s;
                }
            }
        }
        let mut next = linalg::hermitian_part(&acc.scale(c / weight));
        let tr = linalg::trace_re(&next);
        if !(tr > 0.0 && tr.is_finite()) {
            continue;
        }
        next = next.scale(c / tr);
        linalg::add_diagonal(&mut next, 1e-10 * c);
        b[k] = next;
    }
    Ok(())
}

fn initial_state(
    bins: usize,
    activity: &ActivityPattern,
    channels: usize,
    seed: u64,
) -> CacgmmState {
    let classes = activity.classes();
    let c = channels as f64;
    let mut b = Vec::with_capacity(bins * classes);
    for f in 0..bins {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (f as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for k in 0..classes {
            let mut m = linalg::identity(channels);
            if k != activity.noise_class() && channels > 1 {
                let v: Vec<Complex64> = (0..channels)
                    .map(|_| {
                        Complex64::new(
                            StandardNormal.sample(&mut rng),
                            StandardNormal.sample(&mut rng),
                        )
                    })
                    .collect();
                let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>();
                for i in 0..channels {
                    for j in 0..channels {
                        m[(i, j)] += v[i] * v[j].conj() * (INIT_PERTURBATION / norm);
                    }
                }
                m = m.scale(c / linalg::trace_re(&m));
            }
            b.push(m);
        }
    }
    CacgmmState {
        classes,
        channels,
        b,
        log_likelihood_trace: Vec::new(),
    }
}

/// Fits the activity-guided mixture by EM.
///
/// Each speaker class starts at the identity plus a small seeded rank-one
/// term (the noise class at the identity), trace-normalized. Every
/// iteration runs the M-step on the current posteriors, then the E-step;
/// the average log-likelihood of that E-step is appended to the trace and
/// its posteriors are returned after the last iteration. Frequencies are
/// independent and processed in parallel; the activity prior is what ties
/// them to the same speaker labels.
pub fn fit_cacgmm(
    spec: &ComplexSpectrogram,
    activity: &ActivityPattern,
    iterations: usize,
    seed: u64,
) -> Result<(CacgmmState, MaskSet)> {
    if iterations == 0 {
        return Err(Error::param("CACGMM needs at least one iteration"));
    }
    if spec.frames() == 0 || spec.bins() == 0 || spec.channels() == 0 {
        return Err(Error::param("empty spectrogram"));
    }
    let mut state = initial_state(spec.bins(), activity, spec.channels(), seed);
    check_shapes(spec, activity, &state)?;
    let (mut masks, _) = e_step(spec, activity, &state)?;
    let classes = state.classes;
    for _ in 0..iterations {
        state
            .b
            .par_chunks_mut(classes)
            .enumerate()
            .try_for_each(|(f, b)| m_step_bin(spec.bin(f), spec.channels(), masks.bin(f), b, f))?;
        let (next, ll) = e_step(spec, activity, &state)?;
        masks = next;
        state.log_likelihood_trace.push(ll);
    }
    Ok((state, masks))
}
