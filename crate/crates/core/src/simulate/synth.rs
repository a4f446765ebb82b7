use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::signal::WaveformBuffer;

/// Seeded speech-like test signal: harmonic bursts ("syllables") with a
/// drifting pitch, per-speaker formant colouring and short pauses. Peak
/// amplitude is about 0.3.
pub fn synth_speech(sample_rate_hz: u32, duration_s: f64, seed: u64) -> Result<WaveformBuffer> {
    if !(duration_s > 0.0) || sample_rate_hz == 0 {
        return Err(Error::param(
            "synthetic speech needs a positive duration and rate",
        ));
    }
    let fs = sample_rate_hz as f64;
    let n = (duration_s * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0 = rng.random_range(95.0..240.0);
    let formants: [f64; 3] = [
        rng.random_range(400.0..900.0),
        rng.random_range(1000.0..2200.0),
        rng.random_range(2300.0..3200.0),
    ];
    let max_harmonic = ((0.45 * fs).min(4000.0) / f0) as usize;
    let weights: Vec<f64> = (1..=max_harmonic)
        .map(|h| {
            let f = h as f64 * f0;
            let resonance: f64 = formants
                .iter()
                .map(|&fc| 1.0 / (1.0 + ((f - fc) / 150.0).powi(2)))
                .sum();
            (0.2 + resonance) / h as f64
        })
        .collect();
    let norm: f64 = weights.iter().sum();

    // burst envelope: raised-cosine syllables separated by pauses
    let mut envelope = vec![0.0; n];
    let mut pos = 0usize;
    while pos < n {
        let len = (rng.random_range(0.15..0.35) * fs) as usize;
        let gap = (rng.random_range(0.04..0.12) * fs) as usize;
        let gain = rng.random_range(0.6..1.0);
        for i in 0..len.min(n - pos) {
            envelope[pos + i] = gain * (PI * i as f64 / len as f64).sin().powf(0.5);
        }
        pos += len + gap;
    }

    let drift_rate = rng.random_range(0.3..0.8);
    let drift_phase = rng.random_range(0.0..2.0 * PI);
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(n);
    for (i, env) in envelope.iter().enumerate() {
        let t = i as f64 / fs;
        let f = f0 * (1.0 + 0.08 * (2.0 * PI * drift_rate * t + drift_phase).sin());
        phase += 2.0 * PI * f / fs;
        let voiced: f64 = weights
            .iter()
            .enumerate()
            .map(|(h, w)| w * ((h + 1) as f64 * phase).sin())
            .sum::<f64>()
            / norm;
        let breath: f64 = StandardNormal.sample(&mut rng);
        out.push(0.3 * env * (voiced + 0.02 * breath));
    }
    WaveformBuffer::mono(sample_rate_hz, out)
}

/// Independent seeded white Gaussian noise on every channel.
pub fn gaussian_noise(
    sample_rate_hz: u32,
    channels: usize,
    len: usize,
    seed: u64,
) -> Result<WaveformBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..channels)
        .map(|_| (0..len).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    WaveformBuffer::new(sample_rate_hz, samples)
}
