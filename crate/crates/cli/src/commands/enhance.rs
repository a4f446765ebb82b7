use std::path::{Path, PathBuf};

use farfield_core::formats::parse_rttm;
use farfield_core::gss::gss_enhance;
use farfield_core::signal::wav::{read_wav_from, to_wav_bytes, WavEncoding};
use farfield_core::WaveformBuffer;
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ArraySelection, Manifest, PipelineConfig, SessionEntry};
use crate::error::{CliError, CliResult};
use crate::output::{read_bytes, read_text, sha256_hex, to_json, OutputDir, Provenance};

#[derive(Debug, Serialize)]
struct IndexEntry {
    session: String,
    speaker: String,
    start_ms: u64,
    end_ms: u64,
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct IndexProblem {
    session: String,
    message: String,
}

#[derive(Debug, Serialize)]
struct Index {
    config_sha256: String,
    seed: u64,
    files: Vec<IndexEntry>,
    skipped: Vec<IndexProblem>,
    errors: Vec<IndexProblem>,
    warnings: Vec<IndexProblem>,
}

struct SessionResult {
    inputs: Vec<(PathBuf, String)>,
    files: Vec<(IndexEntry, Vec<u8>)>,
    skipped: Vec<String>,
    warnings: Vec<String>,
}

fn load_wav(path: &Path) -> CliResult<(WaveformBuffer, String)> {
    let bytes = read_bytes(path)?;
    let wav = read_wav_from(bytes.as_slice())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((wav, sha256_hex(&bytes)))
}

fn stack_channels(
    parts: Vec<WaveformBuffer>,
    truncate: bool,
    what: &str,
) -> CliResult<WaveformBuffer> {
    let fs = parts[0].sample_rate_hz();
    if parts.iter().any(|w| w.sample_rate_hz() != fs) {
        return Err(CliError::Data(format!("{what}: sample rates differ")));
    }
    let len = parts.iter().map(WaveformBuffer::len).min().unwrap_or(0);
    if !truncate && parts.iter().any(|w| w.len() != len) {
        return Err(CliError::Data(format!("{what}: channel lengths differ")));
    }
    let channels = parts
        .into_iter()
        .flat_map(|w| w.into_samples())
        .map(|mut c| {
            c.truncate(len);
            c
        })
        .collect();
    Ok(WaveformBuffer::new(fs, channels)?)
}

fn run_session(session: &SessionEntry, cfg: &PipelineConfig) -> CliResult<SessionResult> {
    let mut inputs = Vec::new();
    let rttm_text = read_text(&session.rttm)?;
    inputs.push((session.rttm.clone(), sha256_hex(rttm_text.as_bytes())));
    let segments =
        parse_rttm(&rttm_text, &session.rttm.display().to_string())?.for_session(&session.id);

    let chosen: Vec<usize> = match cfg.gss_array {
        ArraySelection::Index(i) if i < session.arrays.len() => vec![i],
        ArraySelection::Index(i) => {
            return Err(CliError::Data(format!(
                "session {}: array {i} requested, {} available",
                session.id,
                session.arrays.len()
            )))
        }
        ArraySelection::All(_) => (0..session.arrays.len()).collect(),
    };
    let mut arrays = Vec::new();
    for &a in &chosen {
        let mut parts = Vec::new();
        for path in &session.arrays[a] {
            let (wav, hash) = load_wav(path)?;
            inputs.push((path.clone(), hash));
            parts.push(wav);
        }
        arrays.push(stack_channels(
            parts,
            false,
            &format!("session {} array {a}", session.id),
        )?);
    }
    let wav = stack_channels(arrays, true, &format!("session {}", session.id))?;

    let mut warnings = Vec::new();
    if segments.is_empty() {
        warnings.push("no diarized segments".to_owned());
    }
    let out = gss_enhance(&wav, &segments, &cfg.enhance())?;
    warnings.extend(out.warnings);
    let skipped = out
        .skipped
        .iter()
        .map(|s| {
            format!(
                "{} [{:.3}, {:.3}]: {}",
                s.segment.speaker, s.segment.start_s, s.segment.end_s, s.reason
            )
        })
        .collect();
    let mut files = Vec::new();
    for (speaker, segs) in &out.by_speaker {
        for e in segs {
            let start_ms = (e.segment.start_s * 1000.0).round() as u64;
            let end_ms = (e.segment.end_s * 1000.0).round() as u64;
            let bytes = to_wav_bytes(&e.audio, WavEncoding::Float32)?;
            files.push((
                IndexEntry {
                    session: session.id.clone(),
                    speaker: speaker.clone(),
                    start_ms,
                    end_ms,
                    path: format!("{}/{speaker}/{start_ms}-{end_ms}.wav", session.id),
                    sha256: sha256_hex(&bytes),
                },
                bytes,
            ));
        }
    }
    Ok(SessionResult {
        inputs,
        files,
        skipped,
        warnings,
    })
}

/// Returns the exit status: 0, or the most severe code among failed
/// sessions.
pub fn run(manifest_path: &Path, cfg: &PipelineConfig, out: &Path) -> CliResult<u8> {
    let manifest_bytes = read_bytes(manifest_path)?;
    let manifest = Manifest::load(manifest_path)?;
    let results: Vec<(String, CliResult<SessionResult>)> = manifest
        .sessions
        .par_iter()
        .map(|s| {
            info!("enhancing session {}", s.id);
            (s.id.clone(), run_session(s, cfg))
        })
        .collect();

    let mut dir = OutputDir::new(out)?;
    let mut provenance = Provenance::new("enhance", cfg.seed, cfg);
    provenance.add_input(manifest_path, &manifest_bytes);
    let mut index = Index {
        config_sha256: provenance.config_sha256.clone(),
        seed: cfg.seed,
        files: Vec::new(),
        skipped: Vec::new(),
        errors: Vec::new(),
        warnings: Vec::new(),
    };
    let problem = |session: &str, message: String| IndexProblem {
        session: session.to_owned(),
        message,
    };
    let mut status = 0;
    for (id, result) in results {
        match result {
            Ok(r) => {
                for (path, hash) in r.inputs {
                    provenance.inputs.insert(path.display().to_string(), hash);
                }
                for (entry, bytes) in r.files {
                    dir.write(&entry.path, &bytes)?;
                    index.files.push(entry);
                }
                for w in r.warnings {
                    warn!("session {id}: {w}");
                    index.warnings.push(problem(&id, w));
                }
                for s in r.skipped {
                    warn!("session {id}: skipped {s}");
                    index.skipped.push(problem(&id, s));
                }
            }
            Err(e) => {
                log::error!("session {id}: {e}");
                status = status.max(e.exit_code());
                index.errors.push(problem(&id, e.to_string()));
            }
        }
    }
    if manifest.sessions.is_empty() {
        warn!("manifest lists no sessions");
    }
    dir.write("index.json", &to_json(&index))?;
    provenance.outputs = dir.into_hashes();
    provenance.write(out)?;
    println!(
        "enhanced {} segments, {} skipped, {} failed sessions",
        index.files.len(),
        index.skipped.len(),
        index.errors.len()
    );
    Ok(status)
}
