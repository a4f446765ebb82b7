use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use farfield_core::formats::{parse_utterances, write_utterances};
use farfield_core::rover::{rover_with_null_confidence, Hypothesis};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::output::{read_bytes, OutputDir, Provenance};

/// Input paths with the bytes read from them.
type Inputs = Vec<(PathBuf, Vec<u8>)>;

/// Fuses hypothesis files utterance by utterance. Files are read in sorted
/// path order; an utterance missing from a file counts as an empty
/// hypothesis of that system.
pub fn fuse_files(files: &[PathBuf], cfg: &PipelineConfig) -> CliResult<(String, Inputs)> {
    if files.is_empty() {
        return Err(CliError::Usage(
            "rover needs at least one hypothesis file".into(),
        ));
    }
    let mut sorted = files.to_vec();
    sorted.sort();
    let mut inputs = Vec::new();
    let mut systems = Vec::new();
    for path in &sorted {
        let bytes = read_bytes(path)?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::Data(format!("{}: not UTF-8", path.display())))?;
        systems.push(parse_utterances(&text, &path.display().to_string())?);
        inputs.push((path.clone(), bytes));
    }
    let ids: BTreeSet<&String> = systems.iter().flat_map(|s| s.keys()).collect();
    let mut fused = BTreeMap::new();
    for id in ids {
        let hyps: Vec<Hypothesis> = systems
            .iter()
            .map(|s| Hypothesis::new(s.get(id).cloned().unwrap_or_default()))
            .collect();
        let tokens = rover_with_null_confidence(&hyps, cfg.rover.alpha, cfg.rover.null_confidence)?;
        fused.insert(id.clone(), tokens);
    }
    Ok((write_utterances(&fused), inputs))
}

pub fn run(files: &[PathBuf], cfg: &PipelineConfig, out: Option<&Path>) -> CliResult<()> {
    let (text, inputs) = fuse_files(files, cfg)?;
    match out {
        None => print!("{text}"),
        Some(out) => {
            let mut dir = OutputDir::new(out)?;
            dir.write("rover.txt", text.as_bytes())?;
            let mut provenance = Provenance::new("rover", cfg.seed, &cfg.rover);
            for (path, bytes) in &inputs {
                provenance.add_input(path, bytes);
            }
            provenance.outputs = dir.into_hashes();
            provenance.write(out)?;
        }
    }
    Ok(())
}
