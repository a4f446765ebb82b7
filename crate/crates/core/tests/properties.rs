use farfield_core::fusion::{
    cross_modal_fuse, ctc_loss, log_softmax_rows, min_frames, FeatureSequence, FusionParams, Mat,
    Modality, ParamRng,
};
use farfield_core::gss::{fit_cacgmm, ActivityPattern};
use farfield_core::metrics::{
    cpcer, der, si_sdr, DiarizationSet, SpeakerSegment, TranscriptEntry, TranscriptSet,
};
use farfield_core::rover::{rover, Hypothesis, WordTransitionNetwork};
use farfield_core::simulate::{
    absorption_for_t60, make_meeting, synth_speech, MixturePlan, NoiseSource, PlannedSource,
    RoomSpec,
};
use farfield_core::wpe::{wpe, WpeConfig};
use farfield_core::Error;
use farfield_core::{
    istft, speed_perturb, stft, ComplexSpectrogram, StftParams, WaveformBuffer, Window,
};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::sample::select;

fn stft_params() -> impl Strategy<Value = StftParams> {
    (
        4usize..=64,
        select(vec![2usize, 4, 8]),
        0usize..3,
        any::<bool>(),
    )
        .prop_filter_map("not COLA", |(eighths, div, fft, sqrt)| {
            let l = 8 * eighths;
            let n = [l, l.next_power_of_two(), 2 * l][fft];
            let w = if sqrt { Window::SqrtHann } else { Window::Hann };
            StftParams::new(l, l / div, n, w).ok()
        })
}

fn signal(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, len)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = a.iter().map(|x| x * x).sum();
    (num / den.max(1e-300)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stft_round_trip(p in stft_params(), x in signal(1..3000)) {
        let wav = WaveformBuffer::mono(16000, x.clone()).unwrap();
        let y = istft(&stft(&wav, &p).unwrap(), &p, x.len()).unwrap();
        prop_assert!(rel_err(&x, y.channel(0)) <= 1e-6);
    }

    #[test]
    fn stft_is_linear(p in stft_params(), x in signal(600..601), y in signal(600..601), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mix: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let sx = stft(&WaveformBuffer::mono(16000, x).unwrap(), &p).unwrap();
        let sy = stft(&WaveformBuffer::mono(16000, y).unwrap(), &p).unwrap();
        let sm = stft(&WaveformBuffer::mono(16000, mix).unwrap(), &p).unwrap();
        for ((m, u), v) in sm.values().iter().zip(sx.values()).zip(sy.values()) {
            prop_assert!((m - (u * a + v * b)).norm() <= 1e-9);
        }
    }

    #[test]
    fn stft_energy_matches_time_domain(
        (l, div, sqrt) in (8usize..=64, select(vec![4usize, 8]), any::<bool>()),
        body in signal(2000..4000),
    ) {
        // windows whose squares overlap-add to a constant; zero guards keep
        // the reflected edge padding silent
        let l = 8 * l;
        let w = if sqrt { Window::SqrtHann } else { Window::Hann };
        let p = StftParams::new(l, l / div, l, w).unwrap();
        let mut x = vec![0.0; l];
        x.extend(&body);
        x.extend(vec![0.0; l]);
        let spec = stft(&WaveformBuffer::mono(16000, x.clone()).unwrap(), &p).unwrap();
        let last = p.bins() - 1;
        let mut freq = 0.0;
        for f in 0..p.bins() {
            let weight = if f == 0 || f == last { 1.0 } else { 2.0 };
            freq += weight * spec.bin(f).iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
        let window_energy: f64 = w.coefficients(l).iter().map(|v| v * v).sum();
        let scaled = freq / p.fft_size as f64 / (window_energy / p.frame_shift as f64);
        let time: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((scaled / time - 1.0).abs() <= 0.01, "{scaled} vs {time}");
    }

    #[test]
    fn speed_perturb_and_back_keeps_length(x in signal(100..4000), factor in (1.0 / 1.2f64)..1.2) {
        let wav = WaveformBuffer::mono(16000, x).unwrap();
        let there = speed_perturb(&wav, factor).unwrap();
        let back = speed_perturb(&there, 1.0 / factor).unwrap();
        prop_assert!(back.len().abs_diff(wav.len()) <= 1);
    }
}

fn random_spec(seed: u64, frames: usize, bins: usize, channels: usize) -> ComplexSpectrogram {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![Complex64::new(0.0, 0.0); frames * bins * channels];
    // leaky recursion gives the frames something to predict
    for f in 0..bins {
        for t in 0..frames {
            for c in 0..channels {
                let i = (f * frames + t) * channels + c;
                let mut v =
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                if t >= 3 {
                    v += values[i - 3 * channels] * 0.7;
                }
                values[i] = v;
            }
        }
    }
    ComplexSpectrogram::from_bin_major(frames, bins, channels, values, StftParams::default(), 16000)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wpe_is_scale_equivariant(seed in any::<u64>(), mag in 0.01f64..100.0, phase in 0.0f64..std::f64::consts::TAU) {
        let x = random_spec(seed, 80, 3, 2);
        let a = Complex64::from_polar(mag, phase);
        let cfg = WpeConfig { taps: 4, delay: 2, iterations: 3, psd_floor: 1e-12, ..WpeConfig::default() };
        let scaled_cfg = WpeConfig { psd_floor: cfg.psd_floor * mag * mag, ..cfg };
        let y = wpe(&x, &cfg).unwrap();
        let ya = wpe(&x.scaled(a), &scaled_cfg).unwrap();
        for (u, v) in y.scaled(a).values().iter().zip(ya.values()) {
            prop_assert!((u - v).norm() <= 1e-9 * mag.max(1.0) * (1.0 + u.norm()));
        }
    }

    #[test]
    fn inactive_classes_get_zero_posterior(seed in any::<u64>(), pattern in proptest::collection::vec(any::<bool>(), 2 * 40)) {
        let spec = random_spec(seed, 40, 3, 2);
        let rows = vec![pattern[..40].to_vec(), pattern[40..].to_vec()];
        let act = ActivityPattern::new(vec!["A".into(), "B".into()], rows.clone()).unwrap();
        let (_, masks) = fit_cacgmm(&spec, &act, 4, seed).unwrap();
        for (k, row) in rows.iter().enumerate() {
            for (t, &active) in row.iter().enumerate() {
                if !active {
                    for f in 0..3 {
                        prop_assert_eq!(masks.get(k, t, f), 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn wpe_raises_direct_to_reverberant_ratio() {
    let dims = [6.0, 5.0, 3.0];
    let room = |order| RoomSpec {
        dimensions: dims,
        absorption: absorption_for_t60(dims, 0.5).unwrap(),
        max_order: order,
        speed_of_sound: 343.0,
        sample_rate_hz: 16000,
        source_positions: vec![[1.5, 1.0, 1.5]],
        mic_positions: vec![[4.0, 3.5, 1.2], [4.1, 3.5, 1.2]],
    };
    for seed in 0..3 {
        let plan = MixturePlan {
            session: "d".into(),
            sources: vec![PlannedSource {
                speaker: "A".into(),
                dry: synth_speech(16000, 3.0, 60 + seed).unwrap(),
                onset_s: 0.0,
            }],
            noise: NoiseSource::None,
            snr_db: 0.0,
            seed,
        };
        let reverberant = make_meeting(&plan, &room(15)).unwrap().mixture;
        let direct = make_meeting(&plan, &room(0)).unwrap().mixture;
        let n = direct.len().min(reverberant.len());
        let p = StftParams::default();
        let spec = stft(&reverberant, &p).unwrap();
        let out = istft(
            &wpe(&spec, &WpeConfig::default()).unwrap(),
            &p,
            reverberant.len(),
        )
        .unwrap();
        let before = si_sdr(&reverberant.channel(0)[..n], &direct.channel(0)[..n]).unwrap();
        let after = si_sdr(&out.channel(0)[..n], &direct.channel(0)[..n]).unwrap();
        assert!(
            after > before,
            "seed {seed}: {before:.2} dB -> {after:.2} dB"
        );
    }
}

fn transcripts(words: &[String], prefix: &str) -> TranscriptSet {
    TranscriptSet::new(
        words
            .iter()
            .enumerate()
            .map(|(i, w)| TranscriptEntry::new("s", format!("{prefix}{i}"), 0.0, 1.0, w).unwrap())
            .collect(),
    )
}

fn words(max: usize) -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec("[abc]{0,8}", 1..=max)
}

fn segments(speakers: &'static [&'static str]) -> impl Strategy<Value = DiarizationSet> {
    proptest::collection::vec((select(speakers), 0u32..800, 10u32..300), 1..6).prop_map(|v| {
        DiarizationSet::new(
            v.into_iter()
                .map(|(s, start, len)| {
                    let a = start as f64 / 100.0;
                    SpeakerSegment::new("s", s, a, a + len as f64 / 100.0).unwrap()
                })
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #[test]
    fn cpcer_self_score_is_zero(r in words(5)) {
        prop_assume!(r.iter().any(|w| !w.is_empty()));
        prop_assert_eq!(cpcer(&transcripts(&r, "r"), &transcripts(&r, "h")).unwrap().errors, 0);
    }

    #[test]
    fn cpcer_ignores_stream_order(r in words(4), h in words(4), shift in 0usize..4) {
        prop_assume!(r.iter().any(|w| !w.is_empty()));
        let mut rotated = h.clone();
        rotated.rotate_left(shift % h.len());
        let mut r2 = r.clone();
        r2.reverse();
        let base = cpcer(&transcripts(&r, "r"), &transcripts(&h, "h")).unwrap();
        let moved = cpcer(&transcripts(&r2, "x"), &transcripts(&rotated, "y")).unwrap();
        prop_assert_eq!(base.errors, moved.errors);
    }

    #[test]
    fn cpcer_beats_the_identity_pairing(r in words(4), h in words(4)) {
        prop_assume!(r.iter().any(|w| !w.is_empty()));
        let best = cpcer(&transcripts(&r, "r"), &transcripts(&h, "h")).unwrap().errors;
        let n = r.len().max(h.len());
        let chars = |v: &[String], i: usize| v.get(i).map_or(vec![], |w| w.chars().collect::<Vec<_>>());
        let identity: usize = (0..n)
            .map(|i| farfield_core::metrics::edit_distance(&chars(&r, i), &chars(&h, i)).total())
            .sum();
        prop_assert!(best <= identity);
    }

    #[test]
    fn der_error_time_never_grows_with_collar(r in segments(&["A", "B"]), h in segments(&["x", "y", "z"]), c in 0u32..50) {
        let error_time = |collar: f64| match der(&r, &h, collar, true) {
            Ok(report) => Some(report.error_s()),
            // the collar swallowed all scored reference time
            Err(Error::UndefinedRate(_)) => None,
            Err(e) => panic!("{e}"),
        };
        let collar = c as f64 / 100.0;
        let (Some(narrow), Some(wide)) = (error_time(collar), error_time(collar + 0.25)) else {
            return Ok(());
        };
        prop_assert!(wide <= narrow + 1e-9, "{narrow} s -> {wide} s");
    }

    #[test]
    fn rover_slots_count_every_system(hyps in proptest::collection::vec(proptest::collection::vec(select(vec!["a", "b", "c"]), 0..6), 1..5)) {
        let hyps: Vec<Hypothesis> = hyps.into_iter().map(Hypothesis::new).collect();
        let mut network = WordTransitionNetwork::from_hypothesis(&hyps[0]);
        for (i, h) in hyps.iter().enumerate().skip(1) {
            network.align(h);
            prop_assert_eq!(network.n_systems(), i + 1);
            for slot in network.slots() {
                prop_assert_eq!(slot.total(), i + 1);
            }
        }
        prop_assert!(rover(&hyps, 0.5).is_ok());
    }

    #[test]
    fn ctc_loss_is_non_negative(seed in any::<u64>(), t in 1usize..8, v in 2usize..5, labels in proptest::collection::vec(1usize..4, 0..4)) {
        let labels: Vec<usize> = labels.into_iter().map(|l| 1 + (l - 1) % (v - 1)).collect();
        prop_assume!(min_frames(&labels) <= t);
        let mut rng = ParamRng::new(seed);
        let logits = Mat::from_vec(t, v, (0..t * v).map(|_| 40.0 * rng.next_param()).collect()).unwrap();
        prop_assert!(ctc_loss(&log_softmax_rows(&logits), &labels).unwrap() >= 0.0);
    }

    #[test]
    fn fused_shape_follows_audio(ta in 1usize..12, tv in 1usize..12, seed in any::<u64>()) {
        let d = 4;
        let mut rng = ParamRng::new(seed);
        let params = FusionParams::seeded(d, 2, &mut rng).unwrap();
        let mut feats = |rows| Mat::from_vec(rows, d, (0..rows * d).map(|_| rng.next_param()).collect()).unwrap();
        let a = FeatureSequence::new(feats(ta), Modality::Audio).unwrap();
        let vseq = FeatureSequence::new(feats(tv), Modality::Video).unwrap();
        let fused = cross_modal_fuse(&a, &vseq, &params).unwrap();
        prop_assert_eq!((fused.frames(), fused.dim()), (ta, 2 * d));
    }
}
