use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::WaveformBuffer;
use crate::error::{Error, Result};

/// Analysis/synthesis window. Both are periodic (DFT-even).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Hann,
    SqrtHann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| {
                let hann = 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos();
                match self {
                    Window::Hann => hann,
                    Window::SqrtHann => hann.sqrt(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftParams {
    pub frame_length: usize,
    pub frame_shift: usize,
    pub fft_size: usize,
    pub window: Window,
}

impl Default for StftParams {
    fn default() -> Self {
        Self {
            frame_length: 512,
            frame_shift: 128,
            fft_size: 512,
            window: Window::Hann,
        }
    }
}

const COLA_TOLERANCE: f64 = 1e-10;

impl StftParams {
    pub fn new(
        frame_length: usize,
        frame_shift: usize,
        fft_size: usize,
        window: Window,
    ) -> Result<Self> {
        let p = Self {
            frame_length,
            frame_shift,
            fft_size,
            window,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Samples of reflection padding applied at each end before framing.
    pub fn edge_padding(&self) -> usize {
        self.frame_length - self.frame_shift
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_shift == 0 {
            return Err(Error::param("frame_shift must be positive"));
        }
        if !(self.frame_shift <= self.frame_length && self.frame_length <= self.fft_size) {
            return Err(Error::param(format!(
                "need frame_shift <= frame_length <= fft_size, got {} / {} / {}",
                self.frame_shift, self.frame_length, self.fft_size
            )));
        }
        if !self.fft_size.is_multiple_of(2) {
            return Err(Error::param("fft_size must be even"));
        }
        let deviation = self.cola_deviation();
        if deviation > COLA_TOLERANCE {
            return Err(Error::param(format!(
                "{:?} window with frame_length {} and shift {} violates constant overlap-add (relative deviation {deviation:.3e})",
                self.window, self.frame_length, self.frame_shift
            )));
        }
        Ok(())
    }

    /// Relative spread of the overlap-added synthesis weight `sum_m w(n - mR)^2`
    /// over one hop. Zero means exact COLA for the analysis-synthesis pair.
    ///
    /// For `Hann` the condition is checked on the window itself, for
    /// `SqrtHann` on its square (which is the Hann window).
    pub fn cola_deviation(&self) -> f64 {
        let w = self.window.coefficients(self.frame_length);
        let weight = |v: f64| match self.window {
            Window::Hann => v,
            Window::SqrtHann => v * v,
        };
        let sums: Vec<f64> = (0..self.frame_shift)
            .map(|n| {
                (n..self.frame_length)
                    .step_by(self.frame_shift)
                    .map(|i| weight(w[i]))
                    .sum()
            })
            .collect();
        let max = sums.iter().cloned().fold(f64::MIN, f64::max);
        let min = sums.iter().cloned().fold(f64::MAX, f64::min);
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        if mean <= 0.0 {
            return f64::INFINITY;
        }
        (max - min) / mean
    }

    /// Frame count for a signal of `len` samples: reflect padding on both
    /// sides, then zero padding at the end until the last frame is full.
    pub fn frame_count(&self, len: usize) -> usize {
        let padded = len + 2 * self.edge_padding();
        if padded <= self.frame_length {
            return 1;
        }
        (padded - self.frame_length).div_ceil(self.frame_shift) + 1
    }
}

/// Complex STFT tensor of shape T x F x C.
///
/// Storage is frequency-major (`[f][t][c]`) so the per-bin kernels of WPE
/// and GSS get contiguous slices.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    frames: usize,
    bins: usize,
    channels: usize,
    values: Vec<Complex64>,
    params: StftParams,
    sample_rate_hz: u32,
}

impl ComplexSpectrogram {
    pub fn zeros(
        frames: usize,
        bins: usize,
        channels: usize,
        params: StftParams,
        sample_rate_hz: u32,
    ) -> Self {
        Self {
            frames,
            bins,
            channels,
            values: vec![Complex64::new(0.0, 0.0); frames * bins * channels],
            params,
            sample_rate_hz,
        }
    }

    /// Builds a spectrogram from frequency-major values (`[f][t][c]`).
    pub fn from_bin_major(
        frames: usize,
        bins: usize,
        channels: usize,
        values: Vec<Complex64>,
        params: StftParams,
        sample_rate_hz: u32,
    ) -> Result<Self> {
        if values.len() != frames * bins * channels {
            return Err(Error::param(format!(
                "{} values do not fill {frames} x {bins} x {channels}",
                values.len()
            )));
        }
        Ok(Self {
            frames,
            bins,
            channels,
            values,
            params,
            sample_rate_hz,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn params(&self) -> &StftParams {
        &self.params
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    #[inline]
    fn index(&self, t: usize, f: usize, c: usize) -> usize {
        (f * self.frames + t) * self.channels + c
    }

    pub fn get(&self, t: usize, f: usize, c: usize) -> Complex64 {
        self.values[self.index(t, f, c)]
    }

    pub fn set(&mut self, t: usize, f: usize, c: usize, v: Complex64) {
        let i = self.index(t, f, c);
        self.values[i] = v;
    }

    /// All frames of bin `f`, laid out `[t][c]`.
    pub fn bin(&self, f: usize) -> &[Complex64] {
        let n = self.frames * self.channels;
        &self.values[f * n..(f + 1) * n]
    }

    pub fn bin_mut(&mut self, f: usize) -> &mut [Complex64] {
        let n = self.frames * self.channels;
        &mut self.values[f * n..(f + 1) * n]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.frames == other.frames && self.bins == other.bins && self.channels == other.channels
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut k = i.rem_euclid(period);
    if k >= len as isize {
        k = period - k;
    }
    k as usize
}

fn padded_channel(x: &[f64], p: &StftParams, frames: usize) -> Vec<f64> {
    let pad = p.edge_padding();
    let total = (frames - 1) * p.frame_shift + p.frame_length;
    let reflected_end = x.len() + 2 * pad;
    (0..total)
        .map(|i| {
            if i >= reflected_end {
                0.0
            } else {
                x[reflect_index(i as isize - pad as isize, x.len())]
            }
        })
        .collect()
}

fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

/// Short-time Fourier transform of every channel.
pub fn stft(wav: &WaveformBuffer, p: &StftParams) -> Result<ComplexSpectrogram> {
    p.validate()?;
    if wav.is_empty() {
        return Err(Error::param("cannot transform an empty waveform"));
    }
    let frames = p.frame_count(wav.len());
    let bins = p.bins();
    let channels = wav.channels();
    let window = p.window.coefficients(p.frame_length);
    let fft = forward_plan(p.fft_size);

    // [c][t][f] per channel, transposed into bin-major storage afterwards.
    let per_channel: Vec<Vec<Complex64>> = (0..channels)
        .into_par_iter()
        .map(|c| {
            let padded = padded_channel(wav.channel(c), p, frames);
            let mut out = Vec::with_capacity(frames * bins);
            let mut buf = vec![Complex64::new(0.0, 0.0); p.fft_size];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for t in 0..frames {
                let start = t * p.frame_shift;
                buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for (n, b) in buf.iter_mut().take(p.frame_length).enumerate() {
                    *b = Complex64::new(window[n] * padded[start + n], 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                out.extend_from_slice(&buf[..bins]);
            }
            out
        })
        .collect();

    let mut spec = ComplexSpectrogram::zeros(frames, bins, channels, *p, wav.sample_rate_hz());
    for (c, data) in per_channel.iter().enumerate() {
        for t in 0..frames {
            for f in 0..bins {
                spec.set(t, f, c, data[t * bins + f]);
            }
        }
    }
    Ok(spec)
}

/// Weighted overlap-add synthesis. The output is normalized by the summed
/// squared window, which reconstructs the input exactly for any frame
/// layout produced by [`stft`].
pub fn istft(
    spec: &ComplexSpectrogram,
    p: &StftParams,
    target_length: usize,
) -> Result<WaveformBuffer> {
    p.validate()?;
    if spec.params() != p {
        return Err(Error::param(format!(
            "synthesis parameters {p:?} differ from analysis parameters {:?}",
            spec.params()
        )));
    }
    if spec.bins() != p.bins() {
        return Err(Error::param("bin count does not match fft_size"));
    }
    let frames = spec.frames();
    let bins = spec.bins();
    let n_fft = p.fft_size;
    let window = p.window.coefficients(p.frame_length);
    let inverse = FftPlanner::new().plan_fft_inverse(n_fft);
    let total = (frames - 1) * p.frame_shift + p.frame_length;

    let mut norm = vec![0.0; total];
    for t in 0..frames {
        for n in 0..p.frame_length {
            norm[t * p.frame_shift + n] += window[n] * window[n];
        }
    }
    let norm_floor = norm.iter().cloned().fold(0.0, f64::max) * 1e-12;
    let pad = p.edge_padding();

    let channels: Vec<Vec<f64>> = (0..spec.channels())
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; total];
            let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
            let mut scratch = vec![Complex64::new(0.0, 0.0); inverse.get_inplace_scratch_len()];
            for t in 0..frames {
                for (f, b) in buf.iter_mut().take(bins).enumerate() {
                    *b = spec.get(t, f, c);
                }
                buf[0].im = 0.0;
                buf[bins - 1].im = 0.0;
                for f in 1..bins - 1 {
                    buf[n_fft - f] = buf[f].conj();
                }
                inverse.process_with_scratch(&mut buf, &mut scratch);
                let start = t * p.frame_shift;
                for n in 0..p.frame_length {
                    acc[start + n] += window[n] * buf[n].re / n_fft as f64;
                }
            }
            (0..target_length)
                .map(|i| {
                    let j = i + pad;
                    if j < total && norm[j] > norm_floor {
                        acc[j] / norm[j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    WaveformBuffer::new(spec.sample_rate_hz(), channels)
}
