use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::text::normalize_characters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerSegment {
    pub session: String,
    pub speaker: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl SpeakerSegment {
    pub fn new(
        session: impl Into<String>,
        speaker: impl Into<String>,
        start_s: f64,
        end_s: f64,
    ) -> Result<Self> {
        if !(start_s.is_finite() && end_s.is_finite() && start_s >= 0.0 && start_s < end_s) {
            return Err(Error::param(format!(
                "segment needs 0 <= start < end, got [{start_s}, {end_s}]"
            )));
        }
        Ok(Self {
            session: session.into(),
            speaker: speaker.into(),
            start_s,
            end_s,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn overlaps(&self, start_s: f64, end_s: f64) -> bool {
        self.start_s < end_s && start_s < self.end_s
    }
}

/// Speaker-attributed speech segments, possibly spanning several sessions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiarizationSet {
    segments: Vec<SpeakerSegment>,
}

impl DiarizationSet {
    pub fn new(segments: Vec<SpeakerSegment>) -> Result<Self> {
        for s in &segments {
            if !(s.start_s < s.end_s) {
                return Err(Error::param(format!(
                    "segment of {} in {} has start {} >= end {}",
                    s.speaker, s.session, s.start_s, s.end_s
                )));
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[SpeakerSegment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn sessions(&self) -> BTreeSet<&str> {
        self.segments.iter().map(|s| s.session.as_str()).collect()
    }

    pub fn speakers(&self) -> BTreeSet<&str> {
        self.segments.iter().map(|s| s.speaker.as_str()).collect()
    }

    pub fn for_session(&self, session: &str) -> DiarizationSet {
        DiarizationSet {
            segments: self
                .segments
                .iter()
                .filter(|s| s.session == session)
                .cloned()
                .collect(),
        }
    }
}

/// One timed utterance of a speaker (reference) or of a hypothesis stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub session: String,
    pub stream: String,
    pub start_s: f64,
    pub end_s: f64,
    /// Normalized characters.
    pub tokens: Vec<char>,
    /// Text before normalization; used only as a final ordering tie-breaker.
    pub text: String,
}

impl TranscriptEntry {
    pub fn new(
        session: impl Into<String>,
        stream: impl Into<String>,
        start_s: f64,
        end_s: f64,
        text: &str,
    ) -> Result<Self> {
        if !(start_s < end_s) {
            return Err(Error::param(format!(
                "transcript entry needs start < end, got [{start_s}, {end_s}]"
            )));
        }
        Ok(Self {
            session: session.into(),
            stream: stream.into(),
            start_s,
            end_s,
            tokens: normalize_characters(text),
            text: text.to_owned(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TranscriptSet {
    entries: Vec<TranscriptEntry>,
}

impl TranscriptSet {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn push(&mut self, e: TranscriptEntry) {
        self.entries.push(e);
    }

    pub fn sessions(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.session.as_str()).collect()
    }

    /// Streams of one session, each concatenated in start-time order
    /// (ties: end time, then raw text). Streams are sorted by name.
    pub fn concatenated_streams(&self, session: &str) -> Vec<(String, Vec<char>)> {
        let mut entries: Vec<&TranscriptEntry> = self
            .entries
            .iter()
            .filter(|e| e.session == session)
            .collect();
        entries.sort_by(|a, b| {
            a.stream
                .cmp(&b.stream)
                .then(a.start_s.total_cmp(&b.start_s))
                .then(a.end_s.total_cmp(&b.end_s))
                .then(a.text.cmp(&b.text))
        });
        let mut out: Vec<(String, Vec<char>)> = Vec::new();
        for e in entries {
            match out.last_mut() {
                Some((name, tokens)) if *name == e.stream => tokens.extend(&e.tokens),
                _ => out.push((e.stream.clone(), e.tokens.clone())),
            }
        }
        out
    }
}
