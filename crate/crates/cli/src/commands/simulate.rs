use std::path::Path;

use farfield_core::formats::write_rttm;
use farfield_core::signal::wav::{read_wav_from, to_wav_bytes, WavEncoding};
use farfield_core::simulate::{
    make_meeting, synth_speech, MixturePlan, NoiseSource, PlannedSource, RoomSpec,
};
use serde::Serialize;

use crate::config::{parse_toml, NoiseKind, PipelineConfig, SimulationPlan};
use crate::error::{CliError, CliResult};
use crate::output::{read_bytes, OutputDir, Provenance};

#[derive(Serialize)]
struct SimulationRecord<'a> {
    pipeline: &'a PipelineConfig,
    plan: &'a SimulationPlan,
    room: &'a RoomSpec,
}

pub fn run(plan_path: &Path, room_path: &Path, cfg: &PipelineConfig, out: &Path) -> CliResult<()> {
    let plan = SimulationPlan::load(plan_path)?;
    let room: RoomSpec = parse_toml(room_path)?;
    room.validate()?;
    let mut inputs = vec![
        (plan_path.to_path_buf(), read_bytes(plan_path)?),
        (room_path.to_path_buf(), read_bytes(room_path)?),
    ];
    let fs = room.sample_rate_hz;

    let mut sources = Vec::with_capacity(plan.sources.len());
    for s in &plan.sources {
        let dry = match (&s.wav, &s.synth) {
            (Some(path), _) => {
                let bytes = read_bytes(path)?;
                let wav = read_wav_from(bytes.as_slice())
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                inputs.push((path.clone(), bytes));
                wav
            }
            (None, Some(spec)) => synth_speech(fs, spec.duration_s, spec.seed)?,
            (None, None) => unreachable!("checked when loading the plan"),
        };
        sources.push(PlannedSource {
            speaker: s.speaker.clone(),
            dry,
            onset_s: s.onset_s,
        });
    }
    let noise = match (&plan.noise_wav, plan.noise) {
        (Some(path), _) => {
            let bytes = read_bytes(path)?;
            let wav = read_wav_from(bytes.as_slice())
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            inputs.push((path.clone(), bytes));
            NoiseSource::Recording(wav)
        }
        (None, NoiseKind::Gaussian) => NoiseSource::Gaussian,
        (None, NoiseKind::None) => NoiseSource::None,
    };
    let meeting = make_meeting(
        &MixturePlan {
            session: plan.session.clone(),
            sources,
            noise,
            snr_db: plan.snr_db,
            seed: cfg.seed,
        },
        &room,
    )?;

    let session_dir = out.join(&plan.session);
    let mut dir = OutputDir::new(&session_dir)?;
    dir.write(
        "mixture.wav",
        &to_wav_bytes(&meeting.mixture, WavEncoding::Float32)?,
    )?;
    for (s, image) in plan.sources.iter().zip(&meeting.images) {
        dir.write(
            &format!("images/{}.wav", s.speaker),
            &to_wav_bytes(image, WavEncoding::Float32)?,
        )?;
    }
    if let Some(noise) = &meeting.noise {
        dir.write("noise.wav", &to_wav_bytes(noise, WavEncoding::Float32)?)?;
    }
    dir.write("reference.rttm", write_rttm(&meeting.segments).as_bytes())?;

    let record = SimulationRecord {
        pipeline: cfg,
        plan: &plan,
        room: &room,
    };
    let mut provenance = Provenance::new("simulate", cfg.seed, &record);
    for (path, bytes) in &inputs {
        provenance.add_input(path, bytes);
    }
    provenance.outputs = dir.into_hashes();
    provenance.write(&session_dir)?;
    println!(
        "simulated session {} with {} sources, {} channels, {:.2} s",
        plan.session,
        plan.sources.len(),
        meeting.mixture.channels(),
        meeting.mixture.duration_s()
    );
    Ok(())
}
