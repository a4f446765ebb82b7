//! Weighted prediction error (WPE) dereverberation.
//!
//! Offline, per-frequency variance-normalized delayed linear prediction:
//! late reverberation in frame `t` is predicted from frames
//! `t - D, ..., t - D - K + 1` of all channels and subtracted. The
//! prediction filter and the time-varying source power are re-estimated
//! alternately.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::signal::ComplexSpectrogram;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WpeConfig {
    /// Prediction filter length per channel, in frames.
    pub taps: usize,
    /// Prediction delay in frames.
    pub delay: usize,
    pub iterations: usize,
    /// Lower bound for the power estimate.
    pub psd_floor: f64,
    /// Diagonal loading relative to the mean diagonal of the correlation matrix.
    pub diagonal_loading: f64,
}

impl Default for WpeConfig {
    fn default() -> Self {
        Self {
            taps: 10,
            delay: 3,
            iterations: 3,
            psd_floor: 1e-10,
            diagonal_loading: 1e-6,
        }
    }
}

impl WpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 || self.delay == 0 || self.iterations == 0 {
            return Err(Error::param("WPE taps, delay and iterations must be >= 1"));
        }
        if !(self.psd_floor > 0.0) {
            return Err(Error::param("WPE psd_floor must be > 0"));
        }
        if !(self.diagonal_loading >= 0.0) {
            return Err(Error::param("WPE diagonal_loading must be >= 0"));
        }
        Ok(())
    }

    fn check_frames(&self, frames: usize, channels: usize) -> Result<()> {
        if frames <= self.delay + self.taps || self.taps * channels > frames - self.delay {
            return Err(Error::Precondition(format!(
                "WPE with {} taps, delay {} on {channels} channels needs more than {} frames, got {frames}",
                self.taps,
                self.delay,
                (self.delay + self.taps).max(self.taps * channels + self.delay - 1)
            )));
        }
        Ok(())
    }
}

/// Result of WPE with the objective recorded before the first and after
/// every iteration.
#[derive(Debug, Clone)]
pub struct WpeOutput {
    pub output: ComplexSpectrogram,
    pub objective: Vec<f64>,
}

/// Writes the stacked delayed observation `[x(t-D), ..., x(t-D-K+1)]` into
/// `out` (tap-major). Frames before the start are zero.
fn stacked_history(
    x_bin: &[Complex64],
    channels: usize,
    t: usize,
    taps: usize,
    delay: usize,
    out: &mut [Complex64],
) {
    for k in 0..taps {
        let lag = delay + k;
        let dst = &mut out[k * channels..(k + 1) * channels];
        if t >= lag {
            let src = (t - lag) * channels;
            dst.copy_from_slice(&x_bin[src..src + channels]);
        } else {
            dst.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        }
    }
}

/// One filter estimate for a single frequency bin given the power weights.
///
/// `x_bin` is laid out `[t][c]`. Returns the `(C*K) x C` filter `G` and the
/// prediction residual `y(t) = x(t) - G^H x~(t)`. `loading` is relative to
/// `trace(R) / (C*K)`.
#[allow(clippy::too_many_arguments)]
pub fn wpe_filter_step(
    x_bin: &[Complex64],
    frames: usize,
    channels: usize,
    power: &[f64],
    taps: usize,
    delay: usize,
    loading: f64,
    bin: usize,
) -> Result<(CMatrix, Vec<Complex64>)> {
    let dim = channels * taps;
    let mut r = vec![Complex64::new(0.0, 0.0); dim * dim];
    let mut p = vec![Complex64::new(0.0, 0.0); dim * channels];
    let mut hist = vec![Complex64::new(0.0, 0.0); dim];
    for t in 0..frames {
        stacked_history(x_bin, channels, t, taps, delay, &mut hist);
        let w = 1.0 / power[t];
        let xt = &x_bin[t * channels..(t + 1) * channels];
        for i in 0..dim {
            let hi = hist[i] * w;
            if hi == Complex64::new(0.0, 0.0) {
                continue;
            }
            let row = &mut r[i * dim..(i + 1) * dim];
            for (j, rv) in row.iter_mut().enumerate() {
                *rv += hi * hist[j].conj();
            }
            let prow = &mut p[i * channels..(i + 1) * channels];
            for (c, pv) in prow.iter_mut().enumerate() {
                *pv += hi * xt[c].conj();
            }
        }
    }
    let mut r = DMatrix::from_row_slice(dim, dim, &r);
    let p = DMatrix::from_row_slice(dim, channels, &p);
    let tr = linalg::trace_re(&r);
    if tr <= 0.0 {
        // no history energy: nothing to predict
        return Ok((linalg::zeros(dim, channels), x_bin.to_vec()));
    }
    linalg::add_diagonal(&mut r, loading * tr / dim as f64);
    let g = linalg::hermitian_solve(&r, &p).ok_or_else(|| {
        Error::Numerical(format!(
            "WPE correlation matrix is singular at frequency bin {bin}"
        ))
    })?;

    let mut y = x_bin.to_vec();
    for t in 0..frames {
        stacked_history(x_bin, channels, t, taps, delay, &mut hist);
        for c in 0..channels {
            let mut pred = Complex64::new(0.0, 0.0);
            for i in 0..dim {
                pred += g[(i, c)].conj() * hist[i];
            }
            y[t * channels + c] -= pred;
        }
    }
    Ok((g, y))
}

/// `max(floor, mean_c |y_c(t)|^2)` for every frame of one bin.
pub fn bin_power(y_bin: &[Complex64], channels: usize, floor: f64) -> Vec<f64> {
    y_bin
        .chunks_exact(channels)
        .map(|frame| {
            let mean = frame.iter().map(|v| v.norm_sqr()).sum::<f64>() / channels as f64;
            mean.max(floor)
        })
        .collect()
}

fn bin_objective(y_bin: &[Complex64], channels: usize, power: &[f64]) -> f64 {
    y_bin
        .chunks_exact(channels)
        .zip(power)
        .map(|(frame, &lambda)| {
            let mean = frame.iter().map(|v| v.norm_sqr()).sum::<f64>() / channels as f64;
            mean / lambda + lambda.ln()
        })
        .sum()
}

/// Power estimate of a whole spectrogram, stored bin-major (`[f][t]`).
pub fn power_estimate(y: &ComplexSpectrogram, floor: f64) -> Vec<f64> {
    (0..y.bins())
        .flat_map(|f| bin_power(y.bin(f), y.channels(), floor))
        .collect()
}

/// Negative log-likelihood surrogate minimized by WPE:
/// `sum_{t,f} mean_c |y|^2 / lambda + ln lambda`. `power` is bin-major.
pub fn wpe_objective(
    x: &ComplexSpectrogram,
    y: &ComplexSpectrogram,
    power: &[f64],
    floor: f64,
) -> Result<f64> {
    if !x.same_shape(y) {
        return Err(Error::param("observation and output shapes differ"));
    }
    if power.len() != y.frames() * y.bins() {
        return Err(Error::param(format!(
            "power has {} entries, expected {}",
            power.len(),
            y.frames() * y.bins()
        )));
    }
    if let Some(bad) = power.iter().find(|&&l| !(l >= floor)) {
        return Err(Error::param(format!("power {bad} below floor {floor}")));
    }
    let frames = y.frames();
    Ok((0..y.bins())
        .map(|f| bin_objective(y.bin(f), y.channels(), &power[f * frames..(f + 1) * frames]))
        .sum())
}

fn wpe_bin(
    x_bin: &[Complex64],
    frames: usize,
    channels: usize,
    cfg: &WpeConfig,
    bin: usize,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let mut y = x_bin.to_vec();
    let mut power = bin_power(&y, channels, cfg.psd_floor);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    trace.push(bin_objective(&y, channels, &power));
    for _ in 0..cfg.iterations {
        let (_, next) = wpe_filter_step(
            x_bin,
            frames,
            channels,
            &power,
            cfg.taps,
            cfg.delay,
            cfg.diagonal_loading,
            bin,
        )?;
        y = next;
        power = bin_power(&y, channels, cfg.psd_floor);
        trace.push(bin_objective(&y, channels, &power));
    }
    Ok((y, trace))
}

/// WPE dereverberation; returns the output and the objective trace.
pub fn wpe_with_trace(spec: &ComplexSpectrogram, cfg: &WpeConfig) -> Result<WpeOutput> {
    cfg.validate()?;
    let (frames, channels) = (spec.frames(), spec.channels());
    if channels == 0 {
        return Err(Error::Precondition("WPE needs at least one channel".into()));
    }
    cfg.check_frames(frames, channels)?;

    let per_bin: Vec<(Vec<Complex64>, Vec<f64>)> = (0..spec.bins())
        .into_par_iter()
        .map(|f| wpe_bin(spec.bin(f), frames, channels, cfg, f))
        .collect::<Result<_>>()?;

    let mut output = spec.clone();
    let mut objective = vec![0.0; cfg.iterations + 1];
    for (f, (y, trace)) in per_bin.into_iter().enumerate() {
        output.bin_mut(f).copy_from_slice(&y);
        for (acc, v) in objective.iter_mut().zip(trace) {
            *acc += v;
        }
    }
    Ok(WpeOutput { output, objective })
}

pub fn wpe(spec: &ComplexSpectrogram, cfg: &WpeConfig) -> Result<ComplexSpectrogram> {
    wpe_with_trace(spec, cfg).map(|o| o.output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::StftParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_spec(frames: usize, bins: usize, channels: usize, seed: u64) -> ComplexSpectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..frames * bins * channels)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        ComplexSpectrogram::from_bin_major(
            frames,
            bins,
            channels,
            values,
            StftParams::default(),
            16000,
        )
        .unwrap()
    }

    #[test]
    fn zero_input_zero_output() {
        let params = StftParams::default();
        let x = ComplexSpectrogram::zeros(100, 5, 2, params, 16000);
        let y = wpe(&x, &WpeConfig::default()).unwrap();
        assert!(y.values().iter().all(|v| v.norm() == 0.0));
        let power = vec![1e-10; 100];
        let (g, y) = wpe_filter_step(x.bin(0), 100, 2, &power, 4, 3, 1e-6, 0).unwrap();
        assert!(g.iter().all(|v| v.norm() == 0.0));
        assert!(y.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn too_few_frames() {
        let x = random_spec(12, 3, 2, 1);
        let cfg = WpeConfig::default();
        assert!(matches!(wpe(&x, &cfg), Err(Error::Precondition(_))));
        // T > D + K but K*C > T - D
        let x = random_spec(20, 3, 2, 1);
        assert!(matches!(wpe(&x, &cfg), Err(Error::Precondition(_))));
        assert!(wpe(&random_spec(24, 3, 2, 1), &cfg).is_ok());
    }

    #[test]
    fn rejects_bad_config() {
        let x = random_spec(200, 2, 1, 1);
        for cfg in [
            WpeConfig {
                taps: 0,
                ..Default::default()
            },
            WpeConfig {
                iterations: 0,
                ..Default::default()
            },
            WpeConfig {
                psd_floor: 0.0,
                ..Default::default()
            },
            WpeConfig {
                diagonal_loading: -1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(wpe(&x, &cfg), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn white_noise_is_not_predictable() {
        let cfg = WpeConfig {
            taps: 4,
            delay: 3,
            iterations: 1,
            ..Default::default()
        };
        let (frames, channels) = (400, 2);
        for seed in 0..10 {
            let x = random_spec(frames, 1, channels, seed);
            let power = bin_power(x.bin(0), channels, cfg.psd_floor);
            let (g, y) =
                wpe_filter_step(x.bin(0), frames, channels, &power, 4, 3, 1e-6, 0).unwrap();
            let bound = 0.1 * ((channels * 4 * channels) as f64).sqrt();
            assert!(g.norm() <= bound, "seed {seed}: |G| = {}", g.norm());
            let ein: f64 = x.bin(0).iter().map(|v| v.norm_sqr()).sum();
            let eout: f64 = y.iter().map(|v| v.norm_sqr()).sum();
            assert!((eout / ein - 1.0).abs() <= 0.1);
        }
    }

    #[test]
    fn objective_closed_forms() {
        let params = StftParams::default();
        let (t, f) = (7, 3);
        let x = ComplexSpectrogram::zeros(t, f, 2, params, 16000);
        let eps = 1e-10;
        let j = wpe_objective(&x, &x, &vec![eps; t * f], eps).unwrap();
        let expected = (t * f) as f64 * eps.ln();
        assert!((j - expected).abs() <= 1e-12 * expected.abs());

        // one bin with mean power lambda: 1 + ln(lambda) becomes 0.5 + ln(2 lambda) when doubled;
        // lambda = mean power is the minimizer, so doubling raises the term
        let mut y = ComplexSpectrogram::zeros(1, 1, 1, params, 16000);
        y.set(0, 0, 0, Complex64::new(0.6, 0.8)); // |y|^2 = 1
        let lambda = 1.0;
        let a = wpe_objective(&y, &y, &[lambda], eps).unwrap();
        let b = wpe_objective(&y, &y, &[2.0 * lambda], eps).unwrap();
        assert!((a - 1.0).abs() < 1e-15);
        assert!((b - (0.5 + 2.0_f64.ln())).abs() < 1e-15);
        assert!(b > a);

        assert!(matches!(
            wpe_objective(&y, &y, &[1e-12], eps),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn objective_trace_is_non_increasing_on_random_input() {
        let x = random_spec(150, 4, 2, 9);
        let out = wpe_with_trace(
            &x,
            &WpeConfig {
                iterations: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.objective.len(), 6);
        for w in out.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{:?}", out.objective);
        }
    }

    #[test]
    fn frequency_permutation_commutes() {
        let x = random_spec(120, 4, 2, 5);
        let cfg = WpeConfig {
            taps: 3,
            ..Default::default()
        };
        let y = wpe(&x, &cfg).unwrap();
        let perm = [2, 0, 3, 1];
        let mut xp = x.clone();
        for (dst, &src) in perm.iter().enumerate() {
            xp.bin_mut(dst).copy_from_slice(x.bin(src));
        }
        let yp = wpe(&xp, &cfg).unwrap();
        for (dst, &src) in perm.iter().enumerate() {
            assert_eq!(yp.bin(dst), y.bin(src));
        }
    }
}
