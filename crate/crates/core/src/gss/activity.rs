use crate::error::{Error, Result};
use crate::signal::StftParams;

/// Which mixture classes may be active in each frame. Speaker rows come
/// first; the last row is the noise class and is always active.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityPattern {
    speakers: Vec<String>,
    frames: usize,
    /// `[k][t]`, noise row included.
    active: Vec<bool>,
}

impl ActivityPattern {
    /// Builds the pattern from one row per speaker; the noise row is added.
    pub fn new(speakers: Vec<String>, rows: Vec<Vec<bool>>) -> Result<Self> {
        if speakers.len() != rows.len() {
            return Err(Error::param(format!(
                "{} speaker names for {} activity rows",
                speakers.len(),
                rows.len()
            )));
        }
        let frames = match rows.first() {
            Some(r) => r.len(),
            None => {
                return Err(Error::param(
                    "use ActivityPattern::noise_only for a pattern without speakers",
                ))
            }
        };
        if rows.iter().any(|r| r.len() != frames) {
            return Err(Error::param("activity rows differ in length"));
        }
        let mut active: Vec<bool> = rows.into_iter().flatten().collect();
        active.extend(std::iter::repeat_n(true, frames));
        Ok(Self {
            speakers,
            frames,
            active,
        })
    }

    pub fn noise_only(frames: usize) -> Self {
        Self {
            speakers: Vec::new(),
            frames,
            active: vec![true; frames],
        }
    }

    /// Frame `t` of speaker `s` is active when the frame centre falls inside
    /// one of the speaker's intervals. Interval times are in seconds from the
    /// start of the analysed signal.
    pub fn from_intervals(
        speakers: Vec<String>,
        intervals: &[Vec<(f64, f64)>],
        frames: usize,
        params: &StftParams,
        sample_rate_hz: u32,
    ) -> Result<Self> {
        if speakers.len() != intervals.len() {
            return Err(Error::param("one interval list per speaker expected"));
        }
        let fs = sample_rate_hz as f64;
        let centre = |t: usize| {
            (t as f64 * params.frame_shift as f64 - params.edge_padding() as f64
                + params.frame_length as f64 / 2.0)
                / fs
        };
        let rows = intervals
            .iter()
            .map(|iv| {
                (0..frames)
                    .map(|t| {
                        let c = centre(t);
                        iv.iter().any(|&(a, b)| c >= a && c < b)
                    })
                    .collect()
            })
            .collect();
        if speakers.is_empty() {
            return Ok(Self::noise_only(frames));
        }
        Self::new(speakers, rows)
    }

    pub fn speakers(&self) -> &[String] {
        &self.speakers
    }

    /// Speakers plus the noise class.
    pub fn classes(&self) -> usize {
        self.speakers.len() + 1
    }

    pub fn noise_class(&self) -> usize {
        self.speakers.len()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn is_active(&self, k: usize, t: usize) -> bool {
        self.active[k * self.frames + t]
    }

    pub fn class_of(&self, speaker: &str) -> Option<usize> {
        self.speakers.iter().position(|s| s == speaker)
    }
}

/// Posterior class probabilities `gamma(k, t, f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    classes: usize,
    frames: usize,
    bins: usize,
    /// `[f][t][k]`
    gamma: Vec<f64>,
}

impl MaskSet {
    pub(crate) fn from_bins(classes: usize, frames: usize, bins: Vec<Vec<f64>>) -> Self {
        let n = bins.len();
        Self {
            classes,
            frames,
            bins: n,
            gamma: bins.into_iter().flatten().collect(),
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, k: usize, t: usize, f: usize) -> f64 {
        self.gamma[(f * self.frames + t) * self.classes + k]
    }

    /// All posteriors of bin `f`, laid out `[t][k]`.
    pub fn bin(&self, f: usize) -> &[f64] {
        let n = self.frames * self.classes;
        &self.gamma[f * n..(f + 1) * n]
    }

    /// Largest deviation of `sum_k gamma` from one over all (t, f).
    pub fn simplex_deviation(&self) -> f64 {
        self.gamma
            .chunks(self.classes)
            .map(|g| (g.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}
