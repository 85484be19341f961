//! Binary feature files: `FEAT`, version byte, kind byte, `u32 N`, `u32 T`,
//! `f64` frame hop seconds, then `N * T` little-endian `f32` values, frame-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"FEAT";
const VERSION: u8 = 1;

pub fn save_features<S: Scalar>(features: &FeatureMatrix<S>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, features.kind.code()])?;
    w.write_all(&(features.dim() as u32).to_le_bytes())?;
    w.write_all(&(features.frames() as u32).to_le_bytes())?;
    w.write_all(&features.frame_hop_seconds.to_le_bytes())?;
    for v in features.values() {
        w.write_all(&v.to_f32_lossy().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a feature file, keeping the kind recorded in its header.
pub fn load_features<S: Scalar>(path: impl AsRef<Path>) -> Result<FeatureMatrix<S>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse(&bytes, source_id)
}

/// Loads externally produced latent features; the result is tagged `latent`
/// whatever kind the header records.
pub fn load_latent_features<S: Scalar>(path: impl AsRef<Path>) -> Result<FeatureMatrix<S>> {
    Ok(load_features(path)?.with_kind(FeatureKind::Latent))
}

fn parse<S: Scalar>(bytes: &[u8], source_id: String) -> Result<FeatureMatrix<S>> {
    const HEADER: usize = 4 + 1 + 1 + 4 + 4 + 8;
    if bytes.len() < HEADER {
        return Err(Error::Format("feature file shorter than its header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad feature file magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported feature file version {}", bytes[4])));
    }
    let kind = FeatureKind::from_code(bytes[5])
        .ok_or_else(|| Error::Format(format!("unknown feature kind code {}", bytes[5])))?;
    let dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let frames = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let hop = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
    let payload = &bytes[HEADER..];
    let expected = dim
        .checked_mul(frames)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("feature dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "header declares {dim}x{frames} values but payload holds {} bytes",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| S::of_f32(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    FeatureMatrix::from_frames(dim, frames, values, kind, hop, source_id)
        .map_err(|e| Error::Format(e.to_string()))
}
