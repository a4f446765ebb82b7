use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::activity::ActivityPattern;
use super::cacgmm::fit_cacgmm;
use super::mvdr::{mvdr_beamform, ReferencePolicy};
use crate::error::{Error, Result};
use crate::metrics::{DiarizationSet, SpeakerSegment};
use crate::signal::{istft, stft, StftParams, WaveformBuffer};
use crate::wpe::{wpe, WpeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GssConfig {
    pub iterations: usize,
    /// Extra signal analysed on each side of a segment, in seconds.
    pub context_s: f64,
    /// Multiply the beamformer output by the target mask (floored).
    pub masking_postfilter: bool,
    pub postfilter_floor: f64,
    pub reference: ReferencePolicy,
    /// Upper bound on the per-frequency beamformer norm.
    pub weight_cap: f64,
}

impl Default for GssConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            context_s: 15.0,
            masking_postfilter: false,
            postfilter_floor: 0.1,
            reference: ReferencePolicy::Auto,
            weight_cap: 1e3,
        }
    }
}

impl GssConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::param("gss.iterations must be >= 1"));
        }
        if !(self.context_s >= 0.0 && self.context_s.is_finite()) {
            return Err(Error::param("gss.context_s must be a finite value >= 0"));
        }
        if !(0.0..=1.0).contains(&self.postfilter_floor) {
            return Err(Error::param("gss.postfilter_floor must lie in [0, 1]"));
        }
        if !(self.weight_cap > 0.0) {
            return Err(Error::param("gss.weight_cap must be positive"));
        }
        Ok(())
    }
}

/// Everything the segment enhancer needs. `wpe == None` skips
/// dereverberation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhanceConfig {
    pub stft: StftParams,
    pub wpe: Option<WpeConfig>,
    pub gss: GssConfig,
    pub seed: u64,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            stft: StftParams::default(),
            wpe: Some(WpeConfig::default()),
            gss: GssConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedSegment {
    pub segment: SpeakerSegment,
    pub audio: WaveformBuffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedSegment {
    pub segment: SpeakerSegment,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GssOutput {
    /// Enhanced segments per speaker, in time order.
    pub by_speaker: BTreeMap<String, Vec<EnhancedSegment>>,
    pub skipped: Vec<SkippedSegment>,
    pub warnings: Vec<String>,
}

impl GssOutput {
    pub fn segment_count(&self) -> usize {
        self.by_speaker.values().map(Vec::len).sum()
    }
}

enum Outcome {
    Done(EnhancedSegment, Vec<String>),
    Skipped(SkippedSegment),
}

fn segment_seed(base: u64, index: usize) -> u64 {
    base ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn enhance_one(
    wav: &WaveformBuffer,
    all: &[SpeakerSegment],
    target: &SpeakerSegment,
    cfg: &EnhanceConfig,
    seed: u64,
) -> Result<Outcome> {
    let fs = wav.sample_rate_hz() as f64;
    let start = (target.start_s * fs).round() as usize;
    let end = (target.end_s * fs).round() as usize;
    if end > wav.len() {
        return Err(Error::Range(format!(
            "segment {}-{:.3}-{:.3} ends after the recording ({:.3} s)",
            target.speaker,
            target.start_s,
            target.end_s,
            wav.duration_s()
        )));
    }
    if end <= start || end - start < cfg.stft.frame_length {
        return Ok(Outcome::Skipped(SkippedSegment {
            segment: target.clone(),
            reason: format!("shorter than one frame ({} samples)", cfg.stft.frame_length),
        }));
    }
    let context = (cfg.gss.context_s * fs).round() as usize;
    let w0 = start.saturating_sub(context);
    let w1 = (end + context).min(wav.len());
    let window = wav.slice(w0, w1)?;
    let mut spec = stft(&window, &cfg.stft)?;
    let mut warnings = Vec::new();
    if let Some(wpe_cfg) = &cfg.wpe {
        match wpe(&spec, wpe_cfg) {
            Ok(y) => spec = y,
            Err(Error::Precondition(msg)) => {
                log::warn!("WPE skipped for {}: {msg}", target.speaker);
                warnings.push(format!(
                    "dereverberation skipped for {} at {:.3} s: {msg}",
                    target.speaker, target.start_s
                ));
            }
            Err(e) => return Err(e),
        }
    }

    let (ws, we) = (w0 as f64 / fs, w1 as f64 / fs);
    let speakers: BTreeSet<&str> = all
        .iter()
        .filter(|s| s.overlaps(ws, we))
        .map(|s| s.speaker.as_str())
        .collect();
    let names: Vec<String> = speakers.iter().map(|s| s.to_string()).collect();
    let intervals: Vec<Vec<(f64, f64)>> = names
        .iter()
        .map(|n| {
            all.iter()
                .filter(|s| &s.speaker == n && s.overlaps(ws, we))
                .map(|s| (s.start_s - ws, s.end_s - ws))
                .collect()
        })
        .collect();
    let activity = ActivityPattern::from_intervals(
        names,
        &intervals,
        spec.frames(),
        &cfg.stft,
        wav.sample_rate_hz(),
    )?;
    let class = activity.class_of(&target.speaker).ok_or_else(|| {
        Error::Precondition(format!("speaker {} missing from activity", target.speaker))
    })?;

    let (_, masks) = fit_cacgmm(&spec, &activity, cfg.gss.iterations, seed)?;
    let (mut out, _) = mvdr_beamform(&spec, &masks, class, cfg.gss.reference, cfg.gss.weight_cap)?;
    if cfg.gss.masking_postfilter {
        for f in 0..out.bins() {
            for t in 0..out.frames() {
                let g = masks.get(class, t, f).max(cfg.gss.postfilter_floor);
                let v = out.get(t, f, 0);
                out.set(t, f, 0, v * Complex64::new(g, 0.0));
            }
        }
    }
    let audio = istft(&out, &cfg.stft, w1 - w0)?.slice(start - w0, end - w0)?;
    Ok(Outcome::Done(
        EnhancedSegment {
            segment: target.clone(),
            audio,
        },
        warnings,
    ))
}

/// Enhances every diarized segment of one recording.
///
/// Each segment is analysed together with `context_s` of surrounding
/// signal: dereverberated (when configured), separated by the
/// activity-guided mixture model using all segments that touch the window,
/// beamformed toward the segment's speaker and trimmed back to the segment.
/// Segments are processed in parallel; each gets its own seed derived from
/// `cfg.seed` and its rank in (start, end, speaker) order, so results do
/// not depend on scheduling.
pub fn gss_enhance(
    wav: &WaveformBuffer,
    segments: &DiarizationSet,
    cfg: &EnhanceConfig,
) -> Result<GssOutput> {
    cfg.stft.validate()?;
    cfg.gss.validate()?;
    if let Some(w) = &cfg.wpe {
        w.validate()?;
    }
    let mut ordered: Vec<&SpeakerSegment> = segments.segments().iter().collect();
    ordered.sort_by(|a, b| {
        a.start_s
            .total_cmp(&b.start_s)
            .then(a.end_s.total_cmp(&b.end_s))
            .then(a.speaker.cmp(&b.speaker))
    });
    let outcomes: Vec<Outcome> = ordered
        .par_iter()
        .enumerate()
        .map(|(i, seg)| {
            enhance_one(
                wav,
                segments.segments(),
                seg,
                cfg,
                segment_seed(cfg.seed, i),
            )
        })
        .collect::<Result<_>>()?;

    let mut out = GssOutput::default();
    for o in outcomes {
        match o {
            Outcome::Done(seg, warnings) => {
                out.warnings.extend(warnings);
                out.by_speaker
                    .entry(seg.segment.speaker.clone())
                    .or_default()
                    .push(seg);
            }
            Outcome::Skipped(s) => {
                log::warn!(
                    "segment of {} at {:.3} s skipped: {}",
                    s.segment.speaker,
                    s.segment.start_s,
                    s.reason
                );
                out.skipped.push(s);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::si_sdr;
    use crate::simulate::{
        make_meeting, synth_speech, MixturePlan, NoiseSource, PlannedSource, RoomSpec,
    };

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    fn anechoic_room(sources: usize) -> RoomSpec {
        RoomSpec {
            dimensions: [6.0, 5.0, 3.0],
            absorption: 1.0,
            max_order: 0,
            speed_of_sound: 343.0,
            sample_rate_hz: 16000,
            source_positions: [[1.5, 1.0, 1.5], [4.5, 4.0, 1.5]][..sources].to_vec(),
            mic_positions: vec![[3.0, 2.5, 1.2], [3.2, 2.5, 1.2]],
        }
    }

    #[test]
    fn empty_segment_list() {
        let wav = WaveformBuffer::zeros(16000, 2, 16000).unwrap();
        let out = gss_enhance(&wav, &DiarizationSet::default(), &EnhanceConfig::default()).unwrap();
        assert!(out.by_speaker.is_empty() && out.skipped.is_empty());
    }

    #[test]
    fn range_and_short_segments() {
        let wav = WaveformBuffer::zeros(16000, 2, 16000).unwrap();
        let outside =
            DiarizationSet::new(vec![SpeakerSegment::new("s", "A", 0.5, 1.5).unwrap()]).unwrap();
        assert!(matches!(
            gss_enhance(&wav, &outside, &EnhanceConfig::default()),
            Err(Error::Range(_))
        ));
        let short =
            DiarizationSet::new(vec![SpeakerSegment::new("s", "A", 0.5, 0.52).unwrap()]).unwrap();
        let out = gss_enhance(&wav, &short, &EnhanceConfig::default()).unwrap();
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.segment_count(), 0);
    }

    #[test]
    fn single_speaker_without_interference_is_preserved() {
        let plan = MixturePlan {
            session: "s".into(),
            sources: vec![PlannedSource {
                speaker: "A".into(),
                dry: synth_speech(16000, 3.0, 21).unwrap(),
                onset_s: 0.2,
            }],
            noise: NoiseSource::Gaussian,
            snr_db: 30.0,
            seed: 0,
        };
        let m = make_meeting(&plan, &anechoic_room(1)).unwrap();
        let seg = SpeakerSegment::new("s", "A", 0.2, 3.2).unwrap();
        let cfg = EnhanceConfig {
            wpe: None,
            ..EnhanceConfig::default()
        };
        let out = gss_enhance(&m.mixture, &DiarizationSet::new(vec![seg]).unwrap(), &cfg).unwrap();
        let audio = &out.by_speaker["A"][0].audio;
        let (a, b) = (3200, 3200 + audio.len());
        let best = (0..2)
            .map(|c| pearson(audio.channel(0), &m.images[0].channel(c)[a..b]))
            .fold(f64::MIN, f64::max);
        assert!(best >= 0.99, "correlation {best}");
    }

    #[test]
    fn two_speakers_are_separated() {
        let plan = MixturePlan {
            session: "s".into(),
            sources: vec![
                PlannedSource {
                    speaker: "A".into(),
                    dry: synth_speech(16000, 6.0, 31).unwrap(),
                    onset_s: 0.0,
                },
                PlannedSource {
                    speaker: "B".into(),
                    dry: synth_speech(16000, 3.0, 32).unwrap(),
                    onset_s: 1.5,
                },
            ],
            noise: NoiseSource::Gaussian,
            snr_db: 30.0,
            seed: 3,
        };
        let m = make_meeting(&plan, &anechoic_room(2)).unwrap();
        let segs = DiarizationSet::new(vec![
            SpeakerSegment::new("s", "A", 0.0, 6.0).unwrap(),
            SpeakerSegment::new("s", "B", 1.5, 4.5).unwrap(),
        ])
        .unwrap();
        let cfg = EnhanceConfig {
            wpe: None,
            seed: 5,
            ..EnhanceConfig::default()
        };
        let out = gss_enhance(&m.mixture, &segs, &cfg).unwrap();
        for (k, spk) in ["A", "B"].iter().enumerate() {
            let e = &out.by_speaker[*spk][0];
            let a = (e.segment.start_s * 16000.0).round() as usize;
            let b = a + e.audio.len();
            let input = (0..2)
                .map(|c| {
                    si_sdr(&m.mixture.channel(c)[a..b], &m.images[k].channel(c)[a..b]).unwrap()
                })
                .fold(f64::MIN, f64::max);
            let output = (0..2)
                .map(|c| si_sdr(e.audio.channel(0), &m.images[k].channel(c)[a..b]).unwrap())
                .fold(f64::MIN, f64::max);
            assert!(
                output - input >= 5.0,
                "{spk}: input {input:.2} dB, output {output:.2} dB"
            );
        }
    }
}
