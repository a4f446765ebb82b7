use std::collections::BTreeSet;

use super::edit::{edit_distance, EditCounts};
use super::hungarian::min_cost_assignment;
use super::types::TranscriptSet;
use crate::error::{Error, Result};

/// One matched (reference speaker, hypothesis stream) pair. `None` marks
/// the empty padding stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamPair {
    pub reference: Option<String>,
    pub hypothesis: Option<String>,
    pub errors: EditCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionCpcer {
    pub session: String,
    pub errors: usize,
    pub reference_chars: usize,
    pub rate: f64,
    pub assignment: Vec<StreamPair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpcerReport {
    /// Pooled rate: total errors over total reference characters.
    pub rate: f64,
    pub errors: usize,
    pub reference_chars: usize,
    pub sessions: Vec<SessionCpcer>,
    pub warnings: Vec<String>,
}

fn score_session(
    session: &str,
    refs: Vec<(String, Vec<char>)>,
    hyps: Vec<(String, Vec<char>)>,
) -> SessionCpcer {
    let n = refs.len().max(hyps.len());
    fn tokens(side: &[(String, Vec<char>)], i: usize) -> (Option<String>, &[char]) {
        match side.get(i) {
            Some((name, t)) => (Some(name.clone()), t.as_slice()),
            None => (None, &[]),
        }
    }
    let counts: Vec<Vec<EditCounts>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| edit_distance(tokens(&refs, i).1, tokens(&hyps, j).1))
                .collect()
        })
        .collect();
    let cost: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|c| c.total() as f64).collect())
        .collect();
    let assignment = min_cost_assignment(&cost);

    let pairs: Vec<StreamPair> = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| StreamPair {
            reference: tokens(&refs, i).0,
            hypothesis: tokens(&hyps, j).0,
            errors: counts[i][j],
        })
        .filter(|p| p.reference.is_some() || p.hypothesis.is_some())
        .collect();
    let errors = pairs.iter().map(|p| p.errors.total()).sum();
    let reference_chars = refs.iter().map(|(_, t)| t.len()).sum();
    SessionCpcer {
        session: session.to_owned(),
        errors,
        reference_chars,
        rate: if reference_chars > 0 {
            errors as f64 / reference_chars as f64
        } else {
            f64::NAN
        },
        assignment: pairs,
    }
}

/// Concatenated minimum-permutation character error rate.
///
/// Per session, each speaker's (or stream's) utterances are concatenated in
/// time order and reference speakers are matched one-to-one with hypothesis
/// streams so that the summed edit distance is minimal. The smaller side is
/// padded with empty streams. Sessions without reference characters are
/// skipped with a warning.
pub fn cpcer(refs: &TranscriptSet, hyps: &TranscriptSet) -> Result<CpcerReport> {
    let sessions: BTreeSet<&str> = refs.sessions().union(&hyps.sessions()).copied().collect();
    let mut warnings = Vec::new();
    let mut scored = Vec::new();
    for session in sessions {
        let s = score_session(
            session,
            refs.concatenated_streams(session),
            hyps.concatenated_streams(session),
        );
        if s.reference_chars == 0 {
            warnings.push(format!(
                "session {session} has no reference characters; excluded"
            ));
            continue;
        }
        scored.push(s);
    }
    let errors: usize = scored.iter().map(|s| s.errors).sum();
    let reference_chars: usize = scored.iter().map(|s| s.reference_chars).sum();
    if reference_chars == 0 {
        return Err(Error::UndefinedRate(
            "no reference characters in any session".into(),
        ));
    }
    Ok(CpcerReport {
        rate: errors as f64 / reference_chars as f64,
        errors,
        reference_chars,
        sessions: scored,
        warnings,
    })
}
