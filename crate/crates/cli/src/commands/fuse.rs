use std::path::Path;

use farfield_core::fusion::{
    export_parameters, import_parameters, read_bundle, write_bundle, write_tensor, FeatureSequence,
    FusionModel, Modality, Tensor,
};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::output::{read_bytes, OutputDir, Provenance};

fn read_features(path: &Path, modality: Modality) -> CliResult<(FeatureSequence, Vec<u8>)> {
    let bytes = read_bytes(path)?;
    let mut tensors = read_bundle(&mut bytes.as_slice())?;
    if tensors.len() != 1 {
        return Err(CliError::Data(format!(
            "{}: expected one tensor, found {}",
            path.display(),
            tensors.len()
        )));
    }
    let values = tensors.remove(0).into_mat()?;
    Ok((FeatureSequence::new(values, modality)?, bytes))
}

pub struct FuseArgs<'a> {
    pub audio: &'a Path,
    pub video: &'a Path,
    pub params: Option<&'a Path>,
    pub labels: Option<&'a [usize]>,
}

/// Runs encoders, fusion and the CTC head on serialized features. Without
/// a parameter bundle the weights are drawn from the seed.
pub fn run(args: &FuseArgs, cfg: &PipelineConfig, out: Option<&Path>) -> CliResult<()> {
    let (audio, audio_bytes) = read_features(args.audio, Modality::Audio)?;
    let (video, video_bytes) = read_features(args.video, Modality::Video)?;
    let mut inputs = vec![(args.audio, audio_bytes), (args.video, video_bytes)];
    let model = match args.params {
        Some(path) => {
            let bytes = read_bytes(path)?;
            let mut model = FusionModel::zeros(cfg.fusion)
                .map_err(|e| CliError::Usage(format!("config: {e}")))?;
            import_parameters(&mut model, &read_bundle(&mut bytes.as_slice())?)?;
            inputs.push((path, bytes));
            model
        }
        None => FusionModel::seeded(cfg.fusion, cfg.seed)
            .map_err(|e| CliError::Usage(format!("config: {e}")))?,
    };
    let output = model.forward(&audio, &video)?;
    println!(
        "fused {} audio frames with {} video frames into {} x {}",
        audio.frames(),
        video.frames(),
        output.fused.frames(),
        output.fused.dim()
    );
    if let Some(labels) = args.labels {
        let loss = model.loss(&output, labels)?;
        println!("metric=ctc_loss session=demo value={loss:.6}");
    }
    if let Some(out) = out {
        let mut dir = OutputDir::new(out)?;
        let mut buf = Vec::new();
        write_tensor(&mut buf, &Tensor::from_mat(&output.fused.values))?;
        dir.write("fused.ftoy", &buf)?;
        buf.clear();
        write_tensor(&mut buf, &Tensor::from_mat(&output.log_probs))?;
        dir.write("log_probs.ftoy", &buf)?;
        buf.clear();
        write_bundle(&mut buf, &export_parameters(&model))?;
        dir.write("params.ftoy", &buf)?;
        let mut provenance = Provenance::new("fuse-demo", cfg.seed, &cfg.fusion);
        for (path, bytes) in &inputs {
            provenance.add_input(path, bytes);
        }
        provenance.outputs = dir.into_hashes();
        provenance.write(out)?;
    }
    Ok(())
}
