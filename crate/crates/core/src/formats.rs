//! Text formats: RTTM speaker segments and `<utt_id> <tokens...>`
//! transcript/hypothesis files.
//!
//! RTTM lines are
//! `SPEAKER <session> 1 <tbeg> <tdur> <NA> <NA> <speaker> <NA> <NA>` with
//! times in seconds (three decimals on output). Utterance ids follow
//! `<speaker>-<session>-<start_ms>-<end_ms>`; the speaker field may not
//! contain `-`, the session may.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::metrics::{DiarizationSet, SpeakerSegment, TranscriptEntry, TranscriptSet};

fn format_error(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        source_name: source.to_owned(),
        line,
        message: message.into(),
    }
}

pub fn parse_rttm(text: &str, source: &str) -> Result<DiarizationSet> {
    let mut segments = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 8 {
            return Err(format_error(
                source,
                lineno,
                "RTTM line needs at least 8 fields",
            ));
        }
        if fields[0] != "SPEAKER" {
            continue;
        }
        let num = |s: &str, what: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format_error(source, lineno, format!("bad {what} '{s}'")))
        };
        let start = num(fields[3], "onset")?;
        let dur = num(fields[4], "duration")?;
        if start < 0.0 || dur <= 0.0 {
            return Err(format_error(
                source,
                lineno,
                "onset must be >= 0 and duration > 0",
            ));
        }
        segments.push(
            SpeakerSegment::new(fields[1], fields[7], start, start + dur)
                .map_err(|e| format_error(source, lineno, e.to_string()))?,
        );
    }
    DiarizationSet::new(segments)
}

pub fn write_rttm(set: &DiarizationSet) -> String {
    let mut segs: Vec<&SpeakerSegment> = set.segments().iter().collect();
    segs.sort_by(|a, b| {
        a.session
            .cmp(&b.session)
            .then(a.start_s.total_cmp(&b.start_s))
            .then(a.speaker.cmp(&b.speaker))
    });
    let mut out = String::new();
    for s in segs {
        writeln!(
            out,
            "SPEAKER {} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
            s.session,
            s.start_s,
            s.end_s - s.start_s,
            s.speaker
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UtteranceId {
    pub speaker: String,
    pub session: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl UtteranceId {
    pub fn parse(id: &str) -> Option<Self> {
        let mut parts = id.rsplitn(3, '-');
        let end_ms = parts.next()?.parse().ok()?;
        let start_ms = parts.next()?.parse().ok()?;
        let (speaker, session) = parts.next()?.split_once('-')?;
        if speaker.is_empty() || session.is_empty() || start_ms >= end_ms {
            return None;
        }
        Some(Self {
            speaker: speaker.to_owned(),
            session: session.to_owned(),
            start_ms,
            end_ms,
        })
    }
}

impl std::fmt::Display for UtteranceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}-{}-{}-{}",
            self.speaker, self.session, self.start_ms, self.end_ms
        )
    }
}

/// Lines of an utterance file, keyed by id. Duplicate ids are an error.
pub fn parse_utterances(text: &str, source: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(id) = fields.next() else { continue };
        let tokens: Vec<String> = fields.map(str::to_owned).collect();
        if out.insert(id.to_owned(), tokens).is_some() {
            return Err(format_error(
                source,
                idx + 1,
                format!("duplicate utterance id '{id}'"),
            ));
        }
    }
    Ok(out)
}

pub fn write_utterances(utts: &BTreeMap<String, Vec<String>>) -> String {
    let mut out = String::new();
    for (id, tokens) in utts {
        out.push_str(id);
        for t in tokens {
            out.push(' ');
            out.push_str(t);
        }
        out.push('\n');
    }
    out
}

/// Reads an utterance file into a transcript set; the speaker field of the
/// id names the stream.
pub fn parse_transcripts(text: &str, source: &str) -> Result<TranscriptSet> {
    let mut set = TranscriptSet::default();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (id, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let utt = UtteranceId::parse(id).ok_or_else(|| {
            format_error(
                source,
                idx + 1,
                format!("utterance id '{id}' is not <speaker>-<session>-<start_ms>-<end_ms>"),
            )
        })?;
        set.push(
            TranscriptEntry::new(
                utt.session,
                utt.speaker,
                utt.start_ms as f64 / 1000.0,
                utt.end_ms as f64 / 1000.0,
                rest,
            )
            .map_err(|e| format_error(source, idx + 1, e.to_string()))?,
        );
    }
    Ok(set)
}
