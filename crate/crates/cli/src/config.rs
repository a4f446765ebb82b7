use std::path::{Path, PathBuf};

use farfield_core::fusion::FusionModelConfig;
use farfield_core::gss::{EnhanceConfig, GssConfig};
use farfield_core::wpe::WpeConfig;
use farfield_core::StftParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::read_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrayKeyword {
    Concatenate,
}

/// Which microphone array of a session feeds the enhancer: one array by
/// index, or the channels of all arrays joined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArraySelection {
    Index(usize),
    All(ArrayKeyword),
}

impl Default for ArraySelection {
    fn default() -> Self {
        ArraySelection::Index(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoringConfig {
    pub collar_s: f64,
    pub score_overlap: bool,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            collar_s: 0.0,
            score_overlap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoverConfig {
    pub alpha: f64,
    pub null_confidence: f64,
}

impl Default for RoverConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            null_confidence: farfield_core::rover::DEFAULT_NULL_CONFIDENCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub stft: StftParams,
    /// Run WPE before separation.
    pub dereverberation: bool,
    pub wpe: WpeConfig,
    pub gss: GssConfig,
    pub gss_array: ArraySelection,
    pub scoring: ScoringConfig,
    pub rover: RoverConfig,
    pub fusion: FusionModelConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            stft: StftParams::default(),
            dereverberation: true,
            wpe: WpeConfig::default(),
            gss: GssConfig::default(),
            gss_array: ArraySelection::default(),
            scoring: ScoringConfig::default(),
            rover: RoverConfig::default(),
            fusion: FusionModelConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>, seed_override: Option<u64>) -> CliResult<Self> {
        let mut cfg: Self = match path {
            Some(p) => parse_toml(p)?,
            None => Self::default(),
        };
        if let Some(seed) = seed_override {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |e: farfield_core::Error| CliError::Usage(format!("config: {e}"));
        self.stft.validate().map_err(usage)?;
        self.wpe.validate().map_err(usage)?;
        self.gss.validate().map_err(usage)?;
        if self.scoring.collar_s.is_nan() || self.scoring.collar_s < 0.0 {
            return Err(CliError::Usage(
                "config: scoring.collar_s must be >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.rover.alpha)
            || !(0.0..=1.0).contains(&self.rover.null_confidence)
        {
            return Err(CliError::Usage(
                "config: rover.alpha and rover.null_confidence must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn enhance(&self) -> EnhanceConfig {
        EnhanceConfig {
            stft: self.stft,
            wpe: self.dereverberation.then_some(self.wpe),
            gss: self.gss,
            seed: self.seed,
        }
    }
}

pub fn parse_toml<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Resolves `p` against the directory holding the file that named it.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new("")).join(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEntry {
    pub id: String,
    pub rttm: PathBuf,
    /// Each array is a list of WAV files whose channels are stacked.
    pub arrays: Vec<Vec<PathBuf>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(rename = "session", default)]
    pub sessions: Vec<SessionEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let mut m: Self = parse_toml(path)?;
        for s in &mut m.sessions {
            if s.id.is_empty() || s.id.chars().any(|c| c.is_whitespace() || c == '/') {
                return Err(CliError::Usage(format!(
                    "manifest: bad session id '{}'",
                    s.id
                )));
            }
            if s.arrays.is_empty() || s.arrays.iter().any(Vec::is_empty) {
                return Err(CliError::Usage(format!(
                    "manifest: session {} has an empty array list",
                    s.id
                )));
            }
            s.rttm = resolve(path, &s.rttm);
            for a in &mut s.arrays {
                for w in a.iter_mut() {
                    *w = resolve(path, w);
                }
            }
        }
        let mut ids: Vec<&str> = m.sessions.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Usage(format!(
                "manifest: duplicate session id '{}'",
                w[0]
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub speaker: String,
    pub onset_s: f64,
    /// Dry mono recording; exclusive with `synth`.
    pub wav: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    Gaussian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationPlan {
    pub session: String,
    pub snr_db: f64,
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    /// Recorded noise; overrides `noise`.
    pub noise_wav: Option<PathBuf>,
    #[serde(rename = "source")]
    pub sources: Vec<SourceEntry>,
}

fn default_noise() -> NoiseKind {
    NoiseKind::Gaussian
}

impl SimulationPlan {
    pub fn load(path: &Path) -> CliResult<Self> {
        let mut plan: Self = parse_toml(path)?;
        if plan.session.is_empty() || plan.session.contains(['/', ' ']) {
            return Err(CliError::Usage(format!(
                "plan: bad session id '{}'",
                plan.session
            )));
        }
        for (i, s) in plan.sources.iter_mut().enumerate() {
            if s.wav.is_some() == s.synth.is_some() {
                return Err(CliError::Usage(format!(
                    "plan: source[{i}] needs exactly one of `wav` or `synth`"
                )));
            }
            if s.speaker.is_empty() || s.speaker.contains(['/', '-', ' ']) {
                return Err(CliError::Usage(format!(
                    "plan: source[{i}] has bad speaker '{}'",
                    s.speaker
                )));
            }
            if let Some(w) = &mut s.wav {
                *w = resolve(path, w);
            }
        }
        let mut speakers: Vec<&str> = plan.sources.iter().map(|s| s.speaker.as_str()).collect();
        speakers.sort_unstable();
        if let Some(w) = speakers.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Usage(format!(
                "plan: speaker '{}' listed twice",
                w[0]
            )));
        }
        if let Some(w) = &mut plan.noise_wav {
            *w = resolve(path, w);
        }
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("seed = 1\nsede = 2\n").is_err());
        assert!(toml::from_str::<PipelineConfig>("[gss]\niteration = 3\n").is_err());
        let cfg: PipelineConfig =
            toml::from_str("gss_array = \"concatenate\"\n[gss]\niterations = 3\n").unwrap();
        assert_eq!(cfg.gss.iterations, 3);
        assert_eq!(
            cfg.gss_array,
            ArraySelection::All(ArrayKeyword::Concatenate)
        );
        let cfg: PipelineConfig = toml::from_str("gss_array = 1\n").unwrap();
        assert_eq!(cfg.gss_array, ArraySelection::Index(1));
    }
}
