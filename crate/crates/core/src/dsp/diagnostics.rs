//! Spectral health measures for a mel spectrogram: frame energy outside a
//! band, frame-to-frame total variation, and the share of energy in the top
//! 30% of mel bins. All work in compressed units; "energy" of a frame is the
//! mean of its mel values.

use serde::{Deserialize, Serialize};

use super::mel::MelSpectrogram;
use crate::error::{Error, Result};

pub const DEFAULT_ENERGY_BAND: (f64, f64) = (0.1, 3.0);
/// Bins at or above `floor(HIGHBAND_START · n_mels)` count as high band.
pub const HIGHBAND_START: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiagnostics {
    pub energy_violation: f64,
    pub total_variation: f64,
    pub highband_fraction: f64,
}

pub fn spectral_diagnostics(m: &MelSpectrogram, lo: f64, hi: f64) -> Result<SpectralDiagnostics> {
    if !(lo < hi) {
        return Err(Error::InvalidConfig(format!("energy band [{lo}, {hi}] is empty")));
    }
    let v = &m.values;
    let (n_mels, frames) = (v.nrows(), v.ncols());
    if n_mels == 0 || frames == 0 {
        return Ok(SpectralDiagnostics {
            energy_violation: 0.0,
            total_variation: 0.0,
            highband_fraction: 0.0,
        });
    }

    let energy_violation = (0..frames)
        .map(|t| {
            let e = v.column(t).mean();
            (lo - e).max(0.0) + (e - hi).max(0.0)
        })
        .sum::<f64>()
        / frames as f64;

    let total_variation = if frames < 2 {
        0.0
    } else {
        (1..frames)
            .map(|t| (v.column(t) - v.column(t - 1)).abs().sum())
            .sum::<f64>()
            / (frames - 1) as f64
    };

    let split = (HIGHBAND_START * n_mels as f64).floor() as usize;
    let total: f64 = v.iter().sum();
    let high: f64 = v.rows(split, n_mels - split).iter().sum();
    let highband_fraction = if total > 0.0 { high / total } else { 0.0 };

    Ok(SpectralDiagnostics {
        energy_violation,
        total_variation,
        highband_fraction,
    })
}
