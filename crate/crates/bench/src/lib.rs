//! Fixtures shared by the criterion benchmarks.

use farfield_core::gss::ActivityPattern;
use farfield_core::metrics::{TranscriptEntry, TranscriptSet};
use farfield_core::simulate::{
    absorption_for_t60, make_meeting, synth_speech, MixturePlan, NoiseSource, PlannedSource,
    RoomSpec,
};
use farfield_core::{stft, ComplexSpectrogram, StftParams, WaveformBuffer};

/// Two-speaker, two-microphone reverberant meeting of the given length.
pub fn meeting(seconds: f64) -> WaveformBuffer {
    let dims = [6.0, 5.0, 3.0];
    let room = RoomSpec {
        dimensions: dims,
        absorption: absorption_for_t60(dims, 0.4).expect("valid T60"),
        max_order: 8,
        speed_of_sound: 343.0,
        sample_rate_hz: 16000,
        source_positions: vec![[1.5, 1.0, 1.5], [4.5, 4.0, 1.5]],
        mic_positions: vec![[3.0, 2.5, 1.2], [3.1, 2.5, 1.2]],
    };
    let plan = MixturePlan {
        session: "bench".into(),
        sources: vec![
            PlannedSource {
                speaker: "A".into(),
                dry: synth_speech(16000, seconds, 1).expect("speech"),
                onset_s: 0.0,
            },
            PlannedSource {
                speaker: "B".into(),
                dry: synth_speech(16000, seconds / 2.0, 2).expect("speech"),
                onset_s: seconds / 4.0,
            },
        ],
        noise: NoiseSource::Gaussian,
        snr_db: 20.0,
        seed: 0,
    };
    make_meeting(&plan, &room).expect("meeting").mixture
}

pub fn spectrogram(seconds: f64) -> ComplexSpectrogram {
    stft(&meeting(seconds), &StftParams::default()).expect("stft")
}

/// Activity for the meeting above: A throughout, B in the middle half.
pub fn activity(frames: usize) -> ActivityPattern {
    let a = vec![true; frames];
    let b = (0..frames)
        .map(|t| t >= frames / 4 && t < 3 * frames / 4)
        .collect();
    ActivityPattern::new(vec!["A".into(), "B".into()], vec![a, b]).expect("activity")
}

/// Reference and hypothesis transcripts with `streams` speakers each.
pub fn transcripts(streams: usize, chars: usize) -> (TranscriptSet, TranscriptSet) {
    let text = |k: usize, shift: usize| -> String {
        (0..chars)
            .map(|i| char::from(b'a' + ((i * (k + 3) + shift) % 26) as u8))
            .collect()
    };
    let set = |shift: usize| {
        TranscriptSet::new(
            (0..streams)
                .map(|k| {
                    TranscriptEntry::new(
                        "s",
                        format!("spk{k}"),
                        0.0,
                        1.0,
                        &text(k, shift * (k % 2)),
                    )
                    .expect("entry")
                })
                .collect(),
        )
    };
    (set(0), set(1))
}
