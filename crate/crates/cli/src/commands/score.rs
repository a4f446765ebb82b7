use std::collections::BTreeSet;
use std::path::Path;

use clap::ValueEnum;
use farfield_core::formats::{parse_rttm, parse_transcripts};
use farfield_core::metrics::{cpcer, der, DiarizationSet, TranscriptSet};
use log::warn;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::output::read_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreMode {
    Cpcer,
    Der,
}

/// Sessions present on both sides; the rest are reported and dropped.
fn shared_sessions(
    reference: BTreeSet<&str>,
    hypothesis: BTreeSet<&str>,
) -> CliResult<BTreeSet<String>> {
    let shared: BTreeSet<String> = reference
        .intersection(&hypothesis)
        .map(|s| s.to_string())
        .collect();
    let only: Vec<&str> = reference
        .symmetric_difference(&hypothesis)
        .copied()
        .collect();
    if !only.is_empty() {
        warn!(
            "sessions present on one side only, not scored: {}",
            only.join(", ")
        );
    }
    if shared.is_empty() {
        return Err(CliError::Data(
            "reference and hypothesis share no session".into(),
        ));
    }
    Ok(shared)
}

fn print_rate(metric: &str, session: &str, value: f64) {
    println!("{metric} {session} {value:.4}");
}

fn print_machine(metric: &str, session: &str, value: f64) {
    println!("metric={metric} session={session} value={value:.6}");
}

pub fn run(
    mode: ScoreMode,
    ref_path: &Path,
    hyp_path: &Path,
    cfg: &PipelineConfig,
) -> CliResult<()> {
    let ref_text = read_text(ref_path)?;
    let hyp_text = read_text(hyp_path)?;
    let (ref_name, hyp_name) = (
        ref_path.display().to_string(),
        hyp_path.display().to_string(),
    );
    let mut lines = Vec::new();
    match mode {
        ScoreMode::Cpcer => {
            let refs = parse_transcripts(&ref_text, &ref_name)?;
            let hyps = parse_transcripts(&hyp_text, &hyp_name)?;
            let shared = shared_sessions(refs.sessions(), hyps.sessions())?;
            let keep = |set: &TranscriptSet| {
                TranscriptSet::new(
                    set.entries()
                        .iter()
                        .filter(|e| shared.contains(&e.session))
                        .cloned()
                        .collect(),
                )
            };
            let report = cpcer(&keep(&refs), &keep(&hyps))?;
            for w in &report.warnings {
                warn!("{w}");
            }
            for s in &report.sessions {
                print_rate("cpcer", &s.session, s.rate);
                println!(
                    "  errors {} / {} reference characters",
                    s.errors, s.reference_chars
                );
                for p in &s.assignment {
                    println!(
                        "  {} <- {} ({} errors)",
                        p.reference.as_deref().unwrap_or("-"),
                        p.hypothesis.as_deref().unwrap_or("-"),
                        p.errors.total()
                    );
                }
                lines.push(("cpcer", s.session.clone(), s.rate));
            }
            print_rate("cpcer", "overall", report.rate);
            lines.push(("cpcer", "overall".into(), report.rate));
        }
        ScoreMode::Der => {
            let refs = parse_rttm(&ref_text, &ref_name)?;
            let hyps = parse_rttm(&hyp_text, &hyp_name)?;
            let shared = shared_sessions(refs.sessions(), hyps.sessions())?;
            let keep = |set: &DiarizationSet| -> CliResult<DiarizationSet> {
                Ok(DiarizationSet::new(
                    set.segments()
                        .iter()
                        .filter(|s| shared.contains(&s.session))
                        .cloned()
                        .collect(),
                )?)
            };
            let (refs, hyps) = (keep(&refs)?, keep(&hyps)?);
            let (collar, overlap) = (cfg.scoring.collar_s, cfg.scoring.score_overlap);
            for session in &shared {
                let r = der(
                    &refs.for_session(session),
                    &hyps.for_session(session),
                    collar,
                    overlap,
                )?;
                print_rate("der", session, r.rate);
                println!(
                    "  miss {:.2} s, false alarm {:.2} s, confusion {:.2} s of {:.2} s",
                    r.miss_s, r.false_alarm_s, r.confusion_s, r.reference_s
                );
                lines.push(("der", session.clone(), r.rate));
            }
            let total = der(&refs, &hyps, collar, overlap)?;
            print_rate("der", "overall", total.rate);
            lines.push(("der", "overall".into(), total.rate));
        }
    }
    for (metric, session, value) in lines {
        print_machine(metric, &session, value);
    }
    Ok(())
}
