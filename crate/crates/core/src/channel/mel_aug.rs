//! Mel-domain augmentation: additive Gaussian noise, one frequency mask, one
//! time mask, moving-average blur and a circular time shift.

use serde::{Deserialize, Serialize};

use crate::dsp::MelSpectrogram;
use crate::rng::RngState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelAugConfig {
    /// Target SNR in the compressed domain; `None` adds no noise.
    pub snr_db: Option<f64>,
    /// Maximum frequency-mask width in bins (0 disables).
    pub freq_mask: usize,
    /// Maximum time-mask width in frames (0 disables).
    pub time_mask: usize,
    /// Moving-average width in frames (0 or 1 disables).
    pub blur_width: usize,
    /// Shift drawn uniformly from `[-max_shift, max_shift]` frames.
    pub max_shift: usize,
}

impl Default for MelAugConfig {
    fn default() -> Self {
        Self {
            snr_db: None,
            freq_mask: 0,
            time_mask: 0,
            blur_width: 0,
            max_shift: 0,
        }
    }
}

/// Rotates frames so frame `t` moves to `t + shift` (mod T).
pub fn circular_shift(m: &MelSpectrogram, shift: i64) -> MelSpectrogram {
    let t = m.n_frames();
    if t == 0 {
        return m.clone();
    }
    let k = shift.rem_euclid(t as i64) as usize;
    let values = nalgebra::DMatrix::from_fn(m.n_mels(), t, |r, c| m.values[(r, (c + t - k) % t)]);
    MelSpectrogram {
        values,
        config: m.config.clone(),
    }
}

pub fn mel_augment(m: &MelSpectrogram, cfg: &MelAugConfig, rng: &mut RngState) -> MelSpectrogram {
    let mut v = m.values.clone();
    let (rows, cols) = (v.nrows(), v.ncols());

    if let Some(snr) = cfg.snr_db.filter(|s| s.is_finite()) {
        let power = v.iter().map(|x| x * x).sum::<f64>() / (rows * cols).max(1) as f64;
        if power > 0.0 {
            let sigma = (power / 10f64.powf(snr / 10.0)).sqrt();
            v.iter_mut().for_each(|x| *x = (*x + sigma * rng.gaussian()).max(0.0));
        }
    }

    if cfg.freq_mask > 0 && rows > 0 {
        let width = rng.range_inclusive(1, cfg.freq_mask.min(rows) as i64) as usize;
        let start = rng.below(rows - width + 1);
        v.rows_mut(start, width).fill(0.0);
    }
    if cfg.time_mask > 0 && cols > 0 {
        let width = rng.range_inclusive(1, cfg.time_mask.min(cols) as i64) as usize;
        let start = rng.below(cols - width + 1);
        v.columns_mut(start, width).fill(0.0);
    }

    if cfg.blur_width > 1 && cols > 0 {
        let before = (cfg.blur_width - 1) / 2;
        let after = cfg.blur_width / 2;
        let src = v.clone();
        for c in 0..cols {
            let lo = c.saturating_sub(before);
            let hi = (c + after).min(cols - 1);
            let n = (hi - lo + 1) as f64;
            for r in 0..rows {
                v[(r, c)] = (lo..=hi).map(|j| src[(r, j)]).sum::<f64>() / n;
            }
        }
    }

    let mut out = MelSpectrogram {
        values: v,
        config: m.config.clone(),
    };
    if cfg.max_shift > 0 {
        let s = cfg.max_shift as i64;
        out = circular_shift(&out, rng.range_inclusive(-s, s));
    }
    out
}
