//! RIFF/WAVE reading and writing for 16-bit PCM and 32-bit float audio.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::WaveformBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

fn map_read_error(e: hound::Error) -> Error {
    match e {
        hound::Error::Unsupported => {
            Error::UnsupportedWavFormat("only PCM and IEEE float WAV data can be read".into())
        }
        other => Error::Wav(other),
    }
}

/// Format tag of the `fmt ` chunk, resolving WAVE_FORMAT_EXTENSIBLE to its
/// sub-format. `None` when the header is too damaged to tell.
fn format_tag(bytes: &[u8]) -> Option<u16> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return None;
    }
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().ok()?) as usize;
        let body = pos + 8;
        if id == b"fmt " {
            let tag = u16::from_le_bytes(bytes.get(body..body + 2)?.try_into().ok()?);
            if tag == 0xFFFE && len >= 26 {
                return Some(u16::from_le_bytes(
                    bytes.get(body + 24..body + 26)?.try_into().ok()?,
                ));
            }
            return Some(tag);
        }
        pos = body + len + (len & 1);
    }
    None
}

pub fn read_wav_from<R: Read>(mut reader: R) -> Result<WaveformBuffer> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Wav(hound::Error::IoError(e)))?;
    match format_tag(&bytes) {
        Some(1) | Some(3) | None => {}
        Some(tag) => {
            return Err(Error::UnsupportedWavFormat(format!(
                "format tag {tag:#06x} is compressed or unknown; only PCM and IEEE float are read"
            )))
        }
    }
    let mut reader = WavReader::new(std::io::Cursor::new(bytes)).map_err(map_read_error)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedWavFormat("zero channels".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Int, bits @ 8..=32) => {
            let scale = (1_i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedWavFormat(format!(
                "{bits}-bit {fmt:?} samples"
            )))
        }
    };
    let frames = interleaved.len() / channels;
    let mut samples = vec![Vec::with_capacity(frames); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (c, &v) in frame.iter().enumerate() {
            samples[c].push(v);
        }
    }
    WaveformBuffer::new(spec.sample_rate, samples)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WaveformBuffer> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_wav_from(BufReader::new(file))
}

pub fn write_wav_to<W: Write + Seek>(
    writer: W,
    wav: &WaveformBuffer,
    encoding: WavEncoding,
) -> Result<()> {
    let channels = u16::try_from(wav.channels())
        .map_err(|_| Error::param("too many channels for a WAV file"))?;
    let spec = match encoding {
        WavEncoding::Pcm16 => WavSpec {
            channels,
            sample_rate: wav.sample_rate_hz(),
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        },
        WavEncoding::Float32 => WavSpec {
            channels,
            sample_rate: wav.sample_rate_hz(),
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        },
    };
    let mut out = WavWriter::new(writer, spec)?;
    for n in 0..wav.len() {
        for c in 0..wav.channels() {
            let v = wav.channel(c)[n];
            match encoding {
                WavEncoding::Pcm16 => {
                    let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    out.write_sample(q)?;
                }
                WavEncoding::Float32 => out.write_sample(v as f32)?,
            }
        }
    }
    out.finalize()?;
    Ok(())
}

pub fn write_wav(
    path: impl AsRef<Path>,
    wav: &WaveformBuffer,
    encoding: WavEncoding,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_wav_to(BufWriter::new(file), wav, encoding)
}

/// Encodes to an in-memory WAV image.
pub fn to_wav_bytes(wav: &WaveformBuffer, encoding: WavEncoding) -> Result<Vec<u8>> {
    let mut cursor = std::io::Cursor::new(Vec::new());
    write_wav_to(&mut cursor, wav, encoding)?;
    Ok(cursor.into_inner())
}
