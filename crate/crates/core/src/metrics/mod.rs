//! Scoring: character edit distance, cpCER, DER and SI-SDR.

mod cpcer;
mod der;
mod edit;
pub mod hungarian;
mod sisdr;
mod text;
mod types;

pub use cpcer::{cpcer, CpcerReport, SessionCpcer, StreamPair};
pub use der::{der, DerReport, DER_FRAME_S};
pub use edit::{edit_distance, EditCounts};
pub use sisdr::si_sdr;
pub use text::normalize_characters;
pub use types::{DiarizationSet, SpeakerSegment, TranscriptEntry, TranscriptSet};
