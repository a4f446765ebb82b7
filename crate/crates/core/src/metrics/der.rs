use std::collections::BTreeSet;

use super::hungarian::min_cost_assignment;
use super::types::DiarizationSet;
use crate::error::{Error, Result};

/// Scoring resolution of the discretized timeline.
pub const DER_FRAME_S: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct DerReport {
    pub rate: f64,
    pub miss_s: f64,
    pub false_alarm_s: f64,
    pub confusion_s: f64,
    /// Scored reference speech time (speaker-weighted in overlap).
    pub reference_s: f64,
    /// (session, reference speaker, mapped hypothesis speaker)
    pub mapping: Vec<(String, String, Option<String>)>,
}

impl DerReport {
    pub fn error_s(&self) -> f64 {
        self.miss_s + self.false_alarm_s + self.confusion_s
    }
}

fn to_frame(t: f64) -> usize {
    (t / DER_FRAME_S).round().max(0.0) as usize
}

fn activity(set: &DiarizationSet, speakers: &[&str], frames: usize) -> Vec<Vec<bool>> {
    let mut rows = vec![vec![false; frames]; speakers.len()];
    for s in set.segments() {
        let k = speakers.iter().position(|&n| n == s.speaker).unwrap();
        let (a, b) = (to_frame(s.start_s), to_frame(s.end_s).min(frames));
        rows[k][a..b.max(a)].iter_mut().for_each(|v| *v = true);
    }
    rows
}

#[derive(Default)]
struct Totals {
    miss: usize,
    false_alarm: usize,
    confusion: usize,
    reference: usize,
}

fn score_session(
    session: &str,
    reference: &DiarizationSet,
    hypothesis: &DiarizationSet,
    collar_s: f64,
    score_overlap: bool,
    totals: &mut Totals,
    mapping_out: &mut Vec<(String, String, Option<String>)>,
) {
    let ref_spk: Vec<&str> = reference.speakers().into_iter().collect();
    let hyp_spk: Vec<&str> = hypothesis.speakers().into_iter().collect();
    let end = reference
        .segments()
        .iter()
        .chain(hypothesis.segments())
        .map(|s| s.end_s)
        .fold(0.0, f64::max);
    let frames = to_frame(end) + 1;
    let r = activity(reference, &ref_spk, frames);
    let h = activity(hypothesis, &hyp_spk, frames);

    let mut scored = vec![true; frames];
    if collar_s > 0.0 {
        for s in reference.segments() {
            for b in [s.start_s, s.end_s] {
                let lo = to_frame((b - collar_s).max(0.0));
                let hi = to_frame(b + collar_s).min(frames);
                scored[lo..hi.max(lo)].iter_mut().for_each(|v| *v = false);
            }
        }
    }
    let n_ref: Vec<usize> = (0..frames)
        .map(|t| r.iter().filter(|row| row[t]).count())
        .collect();
    if !score_overlap {
        for t in 0..frames {
            if n_ref[t] > 1 {
                scored[t] = false;
            }
        }
    }

    let n = ref_spk.len().max(hyp_spk.len());
    let mut cost = vec![vec![0.0; n]; n];
    for (i, ri) in r.iter().enumerate() {
        for (j, hj) in h.iter().enumerate() {
            let overlap = (0..frames).filter(|&t| scored[t] && ri[t] && hj[t]).count();
            cost[i][j] = -(overlap as f64);
        }
    }
    let assign = min_cost_assignment(&cost);
    let mapped: Vec<Option<usize>> = (0..ref_spk.len())
        .map(|i| (assign[i] < hyp_spk.len()).then_some(assign[i]))
        .collect();
    for (i, m) in mapped.iter().enumerate() {
        mapping_out.push((
            session.to_owned(),
            ref_spk[i].to_owned(),
            m.map(|j| hyp_spk[j].to_owned()),
        ));
    }

    for t in (0..frames).filter(|&t| scored[t]) {
        let nr = n_ref[t];
        let nh = h.iter().filter(|row| row[t]).count();
        let correct = mapped
            .iter()
            .enumerate()
            .filter(|(i, m)| r[*i][t] && m.is_some_and(|j| h[j][t]))
            .count();
        totals.reference += nr;
        totals.miss += nr.saturating_sub(nh);
        totals.false_alarm += nh.saturating_sub(nr);
        totals.confusion += nr.min(nh) - correct;
    }
}

/// Diarization error rate with an optimal one-to-one speaker mapping per
/// session.
///
/// The timeline is discretized at [`DER_FRAME_S`]. Frames within
/// `collar_s` of any reference boundary are not scored; with
/// `score_overlap == false`, frames where several reference speakers talk
/// are excluded as well. The mapping maximizes total co-active time.
pub fn der(
    reference: &DiarizationSet,
    hypothesis: &DiarizationSet,
    collar_s: f64,
    score_overlap: bool,
) -> Result<DerReport> {
    if !(collar_s >= 0.0) {
        return Err(Error::param(format!("collar must be >= 0, got {collar_s}")));
    }
    let sessions: BTreeSet<&str> = reference
        .sessions()
        .union(&hypothesis.sessions())
        .copied()
        .collect();
    let mut totals = Totals::default();
    let mut mapping = Vec::new();
    for session in sessions {
        score_session(
            session,
            &reference.for_session(session),
            &hypothesis.for_session(session),
            collar_s,
            score_overlap,
            &mut totals,
            &mut mapping,
        );
    }
    if totals.reference == 0 {
        return Err(Error::UndefinedRate("no scored reference speech".into()));
    }
    let errors = totals.miss + totals.false_alarm + totals.confusion;
    Ok(DerReport {
        rate: errors as f64 / totals.reference as f64,
        miss_s: totals.miss as f64 * DER_FRAME_S,
        false_alarm_s: totals.false_alarm as f64 * DER_FRAME_S,
        confusion_s: totals.confusion as f64 * DER_FRAME_S,
        reference_s: totals.reference as f64 * DER_FRAME_S,
        mapping,
    })
}
