use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Half-width of the fractional-delay interpolator (81 taps in total).
const SINC_HALF_TAPS: isize = 40;

/// Shoebox room with uniform wall absorption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    /// `[Lx, Ly, Lz]` in metres.
    pub dimensions: [f64; 3],
    /// Fraction of amplitude absorbed per reflection, in (0, 1].
    pub absorption: f64,
    pub max_order: u32,
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
    pub sample_rate_hz: u32,
    pub source_positions: Vec<[f64; 3]>,
    pub mic_positions: Vec<[f64; 3]>,
}

fn default_speed_of_sound() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

/// One image source: position, reflection count and resulting arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: [f64; 3],
    pub reflections: u32,
    pub distance_m: f64,
    pub amplitude: f64,
    /// Arrival time in samples (fractional).
    pub delay_samples: f64,
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl RoomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::param("room.dimensions must be positive"));
        }
        if !(self.absorption > 0.0 && self.absorption <= 1.0) {
            return Err(Error::param(format!(
                "room.absorption must lie in (0, 1], got {}",
                self.absorption
            )));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::param("room.speed_of_sound must be positive"));
        }
        if self.sample_rate_hz == 0 {
            return Err(Error::param("room.sample_rate_hz must be positive"));
        }
        for (field, list) in [
            ("source_positions", &self.source_positions),
            ("mic_positions", &self.mic_positions),
        ] {
            for (i, p) in list.iter().enumerate() {
                let inside = p
                    .iter()
                    .zip(&self.dimensions)
                    .all(|(&x, &l)| x > 0.0 && x < l);
                if !inside {
                    return Err(Error::param(format!(
                        "room.{field}[{i}] = {p:?} is not strictly inside the room"
                    )));
                }
            }
        }
        Ok(())
    }

    /// All image sources of `src` seen from `mic` with at most
    /// `max_order` reflections.
    pub fn image_sources(&self, src: usize, mic: usize) -> Result<Vec<ImageSource>> {
        self.validate()?;
        let s = *self
            .source_positions
            .get(src)
            .ok_or_else(|| Error::param(format!("no source {src}")))?;
        let m = *self
            .mic_positions
            .get(mic)
            .ok_or_else(|| Error::param(format!("no microphone {mic}")))?;
        if distance(&s, &m) < 1e-9 {
            return Err(Error::param(format!(
                "source {src} and microphone {mic} coincide"
            )));
        }
        let order = self.max_order as i64;
        let reflection_gain = 1.0 - self.absorption;
        let fs = self.sample_rate_hz as f64;

        // per axis: (coordinate, reflections) for every (n, q) with few enough reflections
        let axis_images = |axis: usize| -> Vec<(f64, u32)> {
            let mut v = Vec::new();
            for n in -order..=order {
                for q in 0..=1_i64 {
                    let refl = ((n - q).abs() + n.abs()) as u32;
                    if refl as i64 <= order {
                        let coord =
                            (1 - 2 * q) as f64 * s[axis] + 2.0 * n as f64 * self.dimensions[axis];
                        v.push((coord, refl));
                    }
                }
            }
            v
        };
        let (xs, ys, zs) = (axis_images(0), axis_images(1), axis_images(2));
        let mut images = Vec::new();
        for &(x, rx) in &xs {
            for &(y, ry) in &ys {
                if rx + ry > self.max_order {
                    continue;
                }
                for &(z, rz) in &zs {
                    let reflections = rx + ry + rz;
                    if reflections > self.max_order {
                        continue;
                    }
                    if reflections > 0 && reflection_gain == 0.0 {
                        continue;
                    }
                    let position = [x, y, z];
                    let d = distance(&position, &m);
                    images.push(ImageSource {
                        position,
                        reflections,
                        distance_m: d,
                        amplitude: reflection_gain.powi(reflections as i32) / (4.0 * PI * d),
                        delay_samples: d / self.speed_of_sound * fs,
                    });
                }
            }
        }
        Ok(images)
    }
}

fn fractional_delay_tap(x: f64) -> f64 {
    let half = SINC_HALF_TAPS as f64 + 1.0;
    if x.abs() >= half {
        return 0.0;
    }
    let sinc = if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    };
    sinc * 0.5 * (1.0 + (PI * x / half).cos())
}

/// Image-source room impulse response from source `src` to microphone `mic`.
///
/// Every image contributes `(1 - absorption)^reflections / (4 pi d)` at a
/// delay of `d / c * fs` samples, rendered with an 81-tap Hann-windowed
/// sinc so fractional delays keep their phase. Taps before time zero are
/// dropped.
pub fn image_source_rir(room: &RoomSpec, src: usize, mic: usize) -> Result<Vec<f64>> {
    let images = room.image_sources(src, mic)?;
    let max_delay = images.iter().map(|i| i.delay_samples).fold(0.0, f64::max);
    let len = max_delay.ceil() as usize + SINC_HALF_TAPS as usize + 1;
    let mut h = vec![0.0; len];
    for img in &images {
        let center = img.delay_samples.round() as isize;
        for n in (center - SINC_HALF_TAPS)..=(center + SINC_HALF_TAPS) {
            if n < 0 || n as usize >= len {
                continue;
            }
            h[n as usize] += img.amplitude * fractional_delay_tap(n as f64 - img.delay_samples);
        }
    }
    Ok(h)
}

/// Uniform absorption giving reverberation time `t60_s` by Sabine's
/// formula, with `(1 - absorption)^2` the energy reflection coefficient.
pub fn absorption_for_t60(dimensions: [f64; 3], t60_s: f64) -> Result<f64> {
    let [lx, ly, lz] = dimensions;
    let volume = lx * ly * lz;
    let surface = 2.0 * (lx * ly + lx * lz + ly * lz);
    let sabine = 0.161 * volume / (surface * t60_s);
    if !(sabine > 0.0 && sabine < 1.0) {
        return Err(Error::param(format!(
            "T60 of {t60_s} s is not reachable in a {dimensions:?} room"
        )));
    }
    Ok(1.0 - (1.0 - sabine).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room(order: u32, src: [f64; 3], mic: [f64; 3]) -> RoomSpec {
        RoomSpec {
            dimensions: [6.0, 5.0, 3.0],
            absorption: 0.4,
            max_order: order,
            speed_of_sound: 343.0,
            sample_rate_hz: 16000,
            source_positions: vec![src],
            mic_positions: vec![mic],
        }
    }

    fn argmax(h: &[f64]) -> usize {
        (0..h.len())
            .max_by(|&a, &b| h[a].abs().total_cmp(&h[b].abs()))
            .unwrap()
    }

    #[test]
    fn direct_path_peak_index() {
        let r = room(0, [1.0, 1.3, 1.1], [3.7, 2.2, 1.6]);
        let h = image_source_rir(&r, 0, 0).unwrap();
        let d = distance(&[1.0, 1.3, 1.1], &[3.7, 2.2, 1.6]);
        assert_eq!(argmax(&h), (d / 343.0 * 16000.0).round() as usize);
    }

    #[test]
    fn inverse_distance_law() {
        // distances chosen so both delays land on integer samples
        let step = 343.0 / 16000.0;
        let near = room(0, [1.0, 2.0, 1.5], [1.0 + 50.0 * step, 2.0, 1.5]);
        let far = room(0, [1.0, 2.0, 1.5], [1.0 + 100.0 * step, 2.0, 1.5]);
        let a = image_source_rir(&near, 0, 0).unwrap();
        let b = image_source_rir(&far, 0, 0).unwrap();
        let ratio = b[argmax(&b)] / a[argmax(&a)];
        assert!((ratio - 0.5).abs() < 0.005);
    }

    #[test]
    fn first_order_images_follow_mirror_geometry() {
        let (s, m) = ([1.5, 2.0, 1.2], [4.0, 3.0, 1.7]);
        let r = room(1, s, m);
        let images = r.image_sources(0, 0).unwrap();
        assert_eq!(images.len(), 7);
        let l = r.dimensions;
        let mut expected = vec![s];
        for axis in 0..3 {
            let mut lo = s;
            lo[axis] = -s[axis];
            let mut hi = s;
            hi[axis] = 2.0 * l[axis] - s[axis];
            expected.push(lo);
            expected.push(hi);
        }
        let mut got: Vec<f64> = images.iter().map(|i| i.delay_samples).collect();
        let mut want: Vec<f64> = expected
            .iter()
            .map(|p| distance(p, &m) / 343.0 * 16000.0)
            .collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9);
        }
    }

    #[test]
    fn coincident_source_and_mic_rejected() {
        let r = room(1, [1.0, 1.0, 1.0], [1.0, 1.0, 1.0]);
        assert!(matches!(
            image_source_rir(&r, 0, 0),
            Err(Error::Parameter(_))
        ));
        let outside = room(1, [7.0, 1.0, 1.0], [1.0, 1.0, 1.0]);
        assert!(outside.validate().is_err());
    }

    #[test]
    fn full_absorption_leaves_direct_path() {
        let mut r = room(3, [1.0, 1.0, 1.0], [2.0, 2.0, 2.0]);
        r.absorption = 1.0;
        assert_eq!(r.image_sources(0, 0).unwrap().len(), 1);
    }

    #[test]
    fn image_energy_falls_with_order() {
        let mut r = room(6, [1.5, 2.0, 1.2], [4.0, 3.0, 1.7]);
        r.absorption = 0.6;
        let images = r.image_sources(0, 0).unwrap();
        let mut energy = vec![0.0; 7];
        for img in &images {
            energy[img.reflections as usize] += img.amplitude * img.amplitude;
        }
        for k in 1..energy.len() {
            assert!(energy[k] < energy[k - 1], "order {k}: {energy:?}");
        }
    }

    #[test]
    fn sabine_absorption() {
        let a = absorption_for_t60([6.0, 5.0, 3.0], 0.5).unwrap();
        let alpha = 1.0 - (1.0 - a).powi(2);
        let t60 = 0.161 * 90.0 / (2.0 * (30.0 + 18.0 + 15.0) * alpha);
        assert!((t60 - 0.5).abs() < 1e-12);
        assert!(absorption_for_t60([6.0, 5.0, 3.0], 0.01).is_err());
    }
}
