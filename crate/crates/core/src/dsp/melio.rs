//! Binary mel files.
//!
//! Layout, all little-endian: `n_mels: u64`, `frames: u64`, then
//! `n_mels × frames` `f32` values row by row (all frames of mel bin 0 first).
//! A JSON sidecar with the same stem and a `.json` extension carries the
//! [`MelConfig`].

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::mel::{MelConfig, MelSpectrogram};
use crate::error::{Error, Result};

pub const HEADER_BYTES: usize = 16;

pub fn encode_mel(m: &MelSpectrogram) -> Vec<u8> {
    let (rows, cols) = (m.n_mels(), m.n_frames());
    let mut out = Vec::with_capacity(HEADER_BYTES + 4 * rows * cols);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for r in 0..rows {
        for c in 0..cols {
            out.extend_from_slice(&(m.values[(r, c)] as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_mel(bytes: &[u8], config: MelConfig) -> Result<MelSpectrogram> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::MalformedMel("shorter than header".into()));
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_BYTES));
    if expected != Some(bytes.len()) {
        return Err(Error::MalformedMel(format!(
            "header says {rows}×{cols}, payload is {} bytes",
            bytes.len() - HEADER_BYTES
        )));
    }
    if rows != config.n_mels {
        return Err(Error::MalformedMel(format!(
            "{rows} rows but config has {} mel bins",
            config.n_mels
        )));
    }
    let body = &bytes[HEADER_BYTES..];
    let values = DMatrix::from_fn(rows, cols, |r, c| {
        let i = 4 * (r * cols + c);
        f32::from_le_bytes(body[i..i + 4].try_into().unwrap()) as f64
    });
    Ok(MelSpectrogram { values, config })
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_mel(path: impl AsRef<Path>, m: &MelSpectrogram) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_mel(m))?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&m.config)?)?;
    Ok(())
}

pub fn read_mel(path: impl AsRef<Path>) -> Result<MelSpectrogram> {
    let path = path.as_ref();
    let config: MelConfig = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    decode_mel(&std::fs::read(path)?, config)
}
