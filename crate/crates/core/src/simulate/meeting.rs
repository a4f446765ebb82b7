use rayon::prelude::*;

use super::mix::{add, convolve_samples, scale_noise};
use super::rir::{image_source_rir, RoomSpec};
use super::synth::gaussian_noise;
use crate::error::{Error, Result};
use crate::metrics::{DiarizationSet, SpeakerSegment};
use crate::signal::WaveformBuffer;

/// Frame RMS above which a dry-source frame counts as speech (-40 dBFS).
pub const ACTIVITY_RMS_THRESHOLD: f64 = 0.01;
pub const ACTIVITY_FRAME_S: f64 = 0.025;
pub const ACTIVITY_HOP_S: f64 = 0.010;
/// Pauses shorter than this are bridged.
pub const ACTIVITY_MIN_GAP_S: f64 = 0.3;

/// One talker of a simulated meeting, placed at `source_positions[index]`
/// of the room.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedSource {
    pub speaker: String,
    pub dry: WaveformBuffer,
    pub onset_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource {
    None,
    /// Built-in white Gaussian noise, independent per microphone.
    Gaussian,
    /// A recording, randomly cropped; mono recordings feed every microphone.
    Recording(WaveformBuffer),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixturePlan {
    pub session: String,
    pub sources: Vec<PlannedSource>,
    pub noise: NoiseSource,
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Meeting {
    pub mixture: WaveformBuffer,
    pub segments: DiarizationSet,
    /// Reverberant image of every source at every microphone, aligned with
    /// the mixture.
    pub images: Vec<WaveformBuffer>,
    /// The scaled noise that was added, if any.
    pub noise: Option<WaveformBuffer>,
}

/// Speech intervals of a dry mono signal from frame RMS, in seconds
/// relative to its start.
pub fn energy_segments(dry: &[f64], sample_rate_hz: u32) -> Vec<(f64, f64)> {
    let fs = sample_rate_hz as f64;
    let frame = ((ACTIVITY_FRAME_S * fs).round() as usize).max(1);
    let hop = ((ACTIVITY_HOP_S * fs).round() as usize).max(1);
    let mut raw: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    while start < dry.len() {
        let end = (start + frame).min(dry.len());
        let rms =
            (dry[start..end].iter().map(|v| v * v).sum::<f64>() / (end - start) as f64).sqrt();
        if rms > ACTIVITY_RMS_THRESHOLD {
            match raw.last_mut() {
                Some(last) if start <= last.1 => last.1 = end,
                _ => raw.push((start, end)),
            }
        }
        if end == dry.len() {
            break;
        }
        start += hop;
    }
    let min_gap = (ACTIVITY_MIN_GAP_S * fs).round() as usize;
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (a, b) in raw {
        match merged.last_mut() {
            Some(last) if a - last.1 < min_gap => last.1 = b,
            _ => merged.push((a, b)),
        }
    }
    merged
        .into_iter()
        .map(|(a, b)| (a as f64 / fs, b as f64 / fs))
        .collect()
}

fn validate_plan(plan: &MixturePlan, room: &RoomSpec) -> Result<()> {
    room.validate()?;
    if plan.sources.is_empty() {
        return Err(Error::param("mixture plan needs at least one source"));
    }
    if plan.sources.len() > room.source_positions.len() {
        return Err(Error::param(format!(
            "{} sources planned but the room places {}",
            plan.sources.len(),
            room.source_positions.len()
        )));
    }
    if room.mic_positions.is_empty() {
        return Err(Error::param("room has no microphones"));
    }
    for s in &plan.sources {
        if !(s.onset_s >= 0.0) {
            return Err(Error::param(format!("onset of {} must be >= 0", s.speaker)));
        }
        if s.dry.channels() != 1 {
            return Err(Error::param(format!(
                "dry signal of {} must be mono",
                s.speaker
            )));
        }
        if s.dry.sample_rate_hz() != room.sample_rate_hz {
            return Err(Error::param(format!(
                "dry signal of {} is {} Hz, room is {} Hz",
                s.speaker,
                s.dry.sample_rate_hz(),
                room.sample_rate_hz
            )));
        }
    }
    Ok(())
}

/// Renders a multi-microphone meeting: every dry source is convolved with
/// its room response to each microphone and placed at its onset; the sum
/// gets noise at `snr_db` relative to the reverberant speech. Ground-truth
/// segments come from dry-source energy.
pub fn make_meeting(plan: &MixturePlan, room: &RoomSpec) -> Result<Meeting> {
    validate_plan(plan, room)?;
    let fs = room.sample_rate_hz;
    let mics = room.mic_positions.len();

    let pairs: Vec<(usize, usize)> = (0..plan.sources.len())
        .flat_map(|s| (0..mics).map(move |m| (s, m)))
        .collect();
    let rendered: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(s, m)| {
            let rir = image_source_rir(room, s, m)?;
            Ok(convolve_samples(plan.sources[s].dry.channel(0), &rir))
        })
        .collect::<Result<_>>()?;

    let onsets: Vec<usize> = plan
        .sources
        .iter()
        .map(|s| (s.onset_s * fs as f64).round() as usize)
        .collect();
    let total = pairs
        .iter()
        .zip(&rendered)
        .map(|(&(s, _), r)| onsets[s] + r.len())
        .max()
        .unwrap_or(0);

    let mut images = Vec::with_capacity(plan.sources.len());
    for (s, onset) in onsets.iter().enumerate() {
        let channels = (0..mics)
            .map(|m| {
                let mut ch = vec![0.0; total];
                let r = &rendered[s * mics + m];
                ch[*onset..onset + r.len()].copy_from_slice(r);
                ch
            })
            .collect();
        images.push(WaveformBuffer::new(fs, channels)?);
    }
    let mut speech = images[0].clone();
    for img in &images[1..] {
        speech = add(&speech, img)?;
    }

    let noise = match &plan.noise {
        NoiseSource::None => None,
        NoiseSource::Gaussian => {
            let raw = gaussian_noise(fs, mics, total, plan.seed)?;
            Some(scale_noise(&speech, &raw, plan.snr_db, plan.seed)?)
        }
        NoiseSource::Recording(rec) => Some(scale_noise(&speech, rec, plan.snr_db, plan.seed)?),
    };
    let mixture = match &noise {
        Some(n) => add(&speech, n)?,
        None => speech,
    };

    let mut segments = Vec::new();
    for (src, onset) in plan.sources.iter().zip(&onsets) {
        let offset = *onset as f64 / fs as f64;
        for (a, b) in energy_segments(src.dry.channel(0), fs) {
            segments.push(SpeakerSegment::new(
                plan.session.clone(),
                src.speaker.clone(),
                offset + a,
                offset + b,
            )?);
        }
    }
    Ok(Meeting {
        mixture,
        segments: DiarizationSet::new(segments)?,
        images,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::synth::synth_speech;

    fn room(order: u32, sources: usize) -> RoomSpec {
        RoomSpec {
            dimensions: [6.0, 5.0, 3.0],
            absorption: 0.5,
            max_order: order,
            speed_of_sound: 343.0,
            sample_rate_hz: 16000,
            source_positions: [[1.5, 1.5, 1.5], [4.5, 3.5, 1.5]][..sources].to_vec(),
            mic_positions: vec![[3.0, 2.5, 1.0], [3.1, 2.5, 1.0]],
        }
    }

    fn tone_burst(len: usize, on: std::ops::Range<usize>) -> WaveformBuffer {
        let samples = (0..len)
            .map(|i| {
                if on.contains(&i) {
                    0.5 * (i as f64 * 0.3).sin()
                } else {
                    0.0
                }
            })
            .collect();
        WaveformBuffer::mono(16000, samples).unwrap()
    }

    #[test]
    fn single_source_order_zero_is_delayed_and_attenuated() {
        let dry = tone_burst(1600, 0..1600);
        let plan = MixturePlan {
            session: "s".into(),
            sources: vec![PlannedSource {
                speaker: "A".into(),
                dry: dry.clone(),
                onset_s: 0.0,
            }],
            noise: NoiseSource::None,
            snr_db: 0.0,
            seed: 0,
        };
        let r = room(0, 1);
        let m = make_meeting(&plan, &r).unwrap();
        for mic in 0..2 {
            let img = &r.image_sources(0, mic).unwrap()[0];
            let rir = image_source_rir(&r, 0, mic).unwrap();
            let expected = convolve_samples(dry.channel(0), &rir);
            assert_eq!(
                &m.mixture.channel(mic)[..expected.len()],
                expected.as_slice()
            );
            // interior samples follow the delayed dry signal scaled by 1/(4 pi d)
            let k = img.delay_samples.round() as usize;
            if (img.delay_samples - k as f64).abs() < 1e-9 {
                let i = 800;
                assert!(
                    (m.mixture.channel(mic)[i + k] - img.amplitude * dry.channel(0)[i]).abs()
                        < 1e-9
                );
            }
        }
    }

    #[test]
    fn disjoint_sources_give_disjoint_segments() {
        let a = tone_burst(16000, 0..16000);
        let b = tone_burst(16000, 0..16000);
        let plan = MixturePlan {
            session: "s".into(),
            sources: vec![
                PlannedSource {
                    speaker: "A".into(),
                    dry: a,
                    onset_s: 0.0,
                },
                PlannedSource {
                    speaker: "B".into(),
                    dry: b,
                    onset_s: 2.0,
                },
            ],
            noise: NoiseSource::Gaussian,
            snr_db: 20.0,
            seed: 1,
        };
        let m = make_meeting(&plan, &room(2, 2)).unwrap();
        let segs = m.segments.segments();
        assert_eq!(segs.len(), 2);
        assert!(segs[0].end_s <= segs[1].start_s);
        assert!((segs[0].start_s - 0.0).abs() <= ACTIVITY_HOP_S);
        assert!((segs[1].start_s - 2.0).abs() <= ACTIVITY_HOP_S);
        assert!((segs[0].end_s - 1.0).abs() <= ACTIVITY_FRAME_S);
    }

    #[test]
    fn mixture_is_sum_of_images_and_noise() {
        let plan = MixturePlan {
            session: "s".into(),
            sources: vec![
                PlannedSource {
                    speaker: "A".into(),
                    dry: synth_speech(16000, 1.0, 1).unwrap(),
                    onset_s: 0.0,
                },
                PlannedSource {
                    speaker: "B".into(),
                    dry: synth_speech(16000, 1.0, 2).unwrap(),
                    onset_s: 0.5,
                },
            ],
            noise: NoiseSource::Gaussian,
            snr_db: 10.0,
            seed: 9,
        };
        let r = room(3, 2);
        let m = make_meeting(&plan, &r).unwrap();
        assert_eq!(m, make_meeting(&plan, &r).unwrap());
        let noise = m.noise.as_ref().unwrap();
        for c in 0..2 {
            for t in (0..m.mixture.len()).step_by(97) {
                let sum =
                    m.images[0].channel(c)[t] + m.images[1].channel(c)[t] + noise.channel(c)[t];
                assert!((m.mixture.channel(c)[t] - sum).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn short_pauses_are_bridged() {
        let mut x = tone_burst(16000, 0..6000).into_samples().remove(0);
        for (i, v) in x.iter_mut().enumerate().skip(8000).take(4000) {
            *v = 0.5 * (i as f64 * 0.3).sin();
        }
        // 2000-sample (0.125 s) pause is bridged
        assert_eq!(energy_segments(&x, 16000).len(), 1);
        let long = tone_burst(32000, 0..4000).into_samples().remove(0);
        let mut y = long.clone();
        for (i, v) in y.iter_mut().enumerate().skip(12000).take(4000) {
            *v = 0.5 * (i as f64 * 0.3).sin();
        }
        assert_eq!(energy_segments(&y, 16000).len(), 2);
    }

    #[test]
    fn plan_errors() {
        let plan = MixturePlan {
            session: "s".into(),
            sources: vec![],
            noise: NoiseSource::None,
            snr_db: 0.0,
            seed: 0,
        };
        assert!(make_meeting(&plan, &room(0, 1)).is_err());
    }
}
