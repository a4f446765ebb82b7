use std::f64::consts::PI;
use std::ops::RangeInclusive;

use super::WaveformBuffer;
use crate::error::{Error, Result};

pub const SPEED_FACTOR_RANGE: RangeInclusive<f64> = 0.8..=1.2;

const TAPS: usize = 64;
const KAISER_BETA: f64 = 8.6;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Speed perturbation by resampling: a tone at `f0` plays back at
/// `f0 * factor` and the duration becomes `round(N / factor)`.
///
/// Uses a 64-tap Kaiser-windowed sinc interpolator. For `factor > 1` the
/// cutoff drops to `1 / factor` of the input Nyquist rate to avoid aliasing.
pub fn speed_perturb(wav: &WaveformBuffer, factor: f64) -> Result<WaveformBuffer> {
    if !factor.is_finite() || !SPEED_FACTOR_RANGE.contains(&factor) {
        return Err(Error::param(format!(
            "speed factor {factor} outside supported range {SPEED_FACTOR_RANGE:?}"
        )));
    }
    if factor == 1.0 {
        return Ok(wav.clone());
    }
    let n_in = wav.len();
    let n_out = (n_in as f64 / factor).round() as usize;
    let cutoff = (1.0 / factor).min(1.0);
    let half = (TAPS / 2) as f64;
    let i0_beta = bessel_i0(KAISER_BETA);
    let kernel = |x: f64| {
        let r = x / half;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        cutoff * sinc(cutoff * x) * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
    };

    let channels = wav
        .samples()
        .iter()
        .map(|x| {
            (0..n_out)
                .map(|j| {
                    let pos = j as f64 * factor;
                    let base = pos.floor() as isize;
                    let lo = base - (TAPS as isize / 2 - 1);
                    let hi = base + TAPS as isize / 2;
                    (lo..=hi)
                        .filter(|&i| i >= 0 && (i as usize) < n_in)
                        .map(|i| x[i as usize] * kernel(pos - i as f64))
                        .sum()
                })
                .collect()
        })
        .collect();
    WaveformBuffer::new(wav.sample_rate_hz(), channels)
}
