use crate::error::{Error, Result};

/// Multi-channel time-domain audio. Samples are stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformBuffer {
    sample_rate_hz: u32,
    samples: Vec<Vec<f64>>,
}

impl WaveformBuffer {
    pub fn new(sample_rate_hz: u32, samples: Vec<Vec<f64>>) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::param("sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::param("waveform needs at least one channel"));
        }
        let n = samples[0].len();
        if samples.iter().any(|ch| ch.len() != n) {
            return Err(Error::param("all channels must have the same length"));
        }
        Ok(Self {
            sample_rate_hz,
            samples,
        })
    }

    pub fn mono(sample_rate_hz: u32, samples: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate_hz, vec![samples])
    }

    pub fn zeros(sample_rate_hz: u32, channels: usize, len: usize) -> Result<Self> {
        Self::new(sample_rate_hz, vec![vec![0.0; len]; channels.max(1)])
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> usize {
        self.samples.len()
    }

    /// Number of samples per channel.
    pub fn len(&self) -> usize {
        self.samples[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.samples[c]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.samples[c]
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Vec<f64>> {
        self.samples
    }

    /// Copies samples `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(Error::Range(format!(
                "sample range {start}..{end} outside 0..{}",
                self.len()
            )));
        }
        Self::new(
            self.sample_rate_hz,
            self.samples
                .iter()
                .map(|ch| ch[start..end].to_vec())
                .collect(),
        )
    }

    /// Keeps only the listed channels, in the given order.
    pub fn select_channels(&self, channels: &[usize]) -> Result<Self> {
        if let Some(&bad) = channels.iter().find(|&&c| c >= self.channels()) {
            return Err(Error::param(format!(
                "channel {bad} requested from a {}-channel buffer",
                self.channels()
            )));
        }
        Self::new(
            self.sample_rate_hz,
            channels.iter().map(|&c| self.samples[c].clone()).collect(),
        )
    }

    /// Mean power over all channels and samples.
    pub fn power(&self) -> f64 {
        let n = (self.len() * self.channels()) as f64;
        if n == 0.0 {
            return 0.0;
        }
        self.samples.iter().flatten().map(|v| v * v).sum::<f64>() / n
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            sample_rate_hz: self.sample_rate_hz,
            samples: self
                .samples
                .iter()
                .map(|ch| ch.iter().map(|v| v * gain).collect())
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
