use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioBuffer;
use crate::error::{contract_err, Error, Result};

fn map_read_error(err: hound::Error) -> Error {
    match err {
        hound::Error::Unsupported => Error::UnsupportedCodec("unsupported WAV encoding".into()),
        hound::Error::UnfinishedSample => Error::Format("truncated sample data".into()),
        hound::Error::FormatError(msg) => Error::Format(msg.to_string()),
        hound::Error::InvalidSampleFormat => {
            Error::UnsupportedCodec("invalid sample format".into())
        }
        // the file is already open; short reads mean a truncated stream
        hound::Error::IoError(e) => Error::Format(format!("truncated WAV data: {e}")),
        other => Error::Format(other.to_string()),
    }
}

/// Reads a PCM16 or float32 WAV file, downmixing to mono by channel average.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let reader = WavReader::new(std::io::BufReader::new(file)).map_err(map_read_error)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(Error::UnsupportedCodec(format!("{channels} channels")));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_read_error)?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(map_read_error)?,
        (fmt, bits) => {
            return Err(Error::UnsupportedCodec(format!("{fmt:?} with {bits} bits per sample")))
        }
    };
    let mono: Vec<f32> = interleaved
        .chunks_exact(channels)
        .map(|frame| (frame.iter().sum::<f32>() / channels as f32).clamp(-1.0, 1.0))
        .collect();
    AudioBuffer::new(mono, spec.sample_rate)
}

/// Writes a 16-bit PCM mono file.
pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<()> {
    if buffer.is_empty() {
        return contract_err("cannot write an empty audio buffer");
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let file = BufWriter::new(File::create(path.as_ref())?);
    let mut writer = WavWriter::new(file, spec).map_err(map_write_error)?;
    for &s in buffer.samples() {
        let q = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(map_write_error)?;
    }
    writer.finalize().map_err(map_write_error)
}

fn map_write_error(err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::Io(e),
        other => Error::Format(other.to_string()),
    }
}
