use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::WaveformBuffer;

/// Full linear convolution of two real sequences (length `a + b - 1`),
/// computed with one zero-padded FFT.
pub fn convolve_samples(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex64> = x.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        v.resize(n, Complex64::new(0.0, 0.0));
        v
    };
    let (mut fa, mut fb) = (pad(a), pad(b));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|v| v.re * scale).collect()
}

/// Convolves a single-channel signal with an impulse response.
pub fn convolve(dry: &WaveformBuffer, rir: &[f64]) -> Result<WaveformBuffer> {
    if dry.channels() != 1 {
        return Err(Error::param(format!(
            "convolve expects a mono signal, got {} channels",
            dry.channels()
        )));
    }
    if rir.is_empty() {
        return Err(Error::param("empty impulse response"));
    }
    WaveformBuffer::mono(dry.sample_rate_hz(), convolve_samples(dry.channel(0), rir))
}

/// Gain that brings `noise` to `snr_db` below `clean`, both measured as
/// average power over their full extent.
pub fn noise_gain(clean: &WaveformBuffer, noise: &WaveformBuffer, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::param(format!("snr_db must be finite, got {snr_db}")));
    }
    let (pc, pn) = (clean.power(), noise.power());
    if !(pc > 0.0) {
        return Err(Error::param("clean signal has zero power"));
    }
    if !(pn > 0.0) {
        return Err(Error::param("noise has zero power"));
    }
    Ok((pc / (pn * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// Crops `noise` to `clean`'s length at a seeded random offset, matches the
/// channel count (a mono noise is copied to every channel) and scales it to
/// the requested SNR. Returns the scaled noise alone.
pub fn scale_noise(
    clean: &WaveformBuffer,
    noise: &WaveformBuffer,
    snr_db: f64,
    seed: u64,
) -> Result<WaveformBuffer> {
    if noise.sample_rate_hz() != clean.sample_rate_hz() {
        return Err(Error::param(format!(
            "noise rate {} Hz differs from signal rate {} Hz",
            noise.sample_rate_hz(),
            clean.sample_rate_hz()
        )));
    }
    if noise.len() < clean.len() {
        return Err(Error::param(format!(
            "noise has {} samples, need at least {}",
            noise.len(),
            clean.len()
        )));
    }
    if noise.channels() != 1 && noise.channels() != clean.channels() {
        return Err(Error::param(format!(
            "noise has {} channels, signal has {}",
            noise.channels(),
            clean.channels()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = rng.random_range(0..=noise.len() - clean.len());
    let samples = (0..clean.channels())
        .map(|c| {
            let src = noise.channel(if noise.channels() == 1 { 0 } else { c });
            src[offset..offset + clean.len()].to_vec()
        })
        .collect();
    let cropped = WaveformBuffer::new(clean.sample_rate_hz(), samples)?;
    let gain = noise_gain(clean, &cropped, snr_db)?;
    Ok(cropped.scaled(gain))
}

pub fn add_noise_at_snr(
    clean: &WaveformBuffer,
    noise: &WaveformBuffer,
    snr_db: f64,
    seed: u64,
) -> Result<WaveformBuffer> {
    let scaled = scale_noise(clean, noise, snr_db, seed)?;
    add(clean, &scaled)
}

/// Sample-wise sum of two buffers of equal shape.
pub fn add(a: &WaveformBuffer, b: &WaveformBuffer) -> Result<WaveformBuffer> {
    if a.channels() != b.channels() || a.len() != b.len() {
        return Err(Error::param("cannot add buffers of different shape"));
    }
    let samples = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect();
    WaveformBuffer::new(a.sample_rate_hz(), samples)
}
