//! Mel filterbank and log-compressed mel spectrograms.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::stft::StftPlan;
use crate::audio::{check_rate, Waveform};
use crate::error::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Analysis parameters. Compression is always `ln(1 + x)` on magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            n_fft: 512,
            hop: 160,
            n_mels: 40,
            fmin: 0.0,
            fmax: 8000.0,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_fft < 2 || self.hop == 0 || self.hop > self.n_fft {
            return bad("need 0 < hop <= n_fft and n_fft >= 2");
        }
        if self.n_mels == 0 {
            return bad("n_mels must be at least 1");
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax)
            || self.fmax > self.sample_rate as f64 / 2.0
        {
            return bad("need 0 <= fmin < fmax <= sample_rate / 2");
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Filter corner frequencies: `n_mels + 2` points equally spaced in mel.
    pub fn mel_points_hz(&self) -> Vec<f64> {
        let lo = hz_to_mel(self.fmin);
        let hi = hz_to_mel(self.fmax);
        let step = (hi - lo) / (self.n_mels + 1) as f64;
        (0..self.n_mels + 2)
            .map(|i| mel_to_hz(lo + step * i as f64))
            .collect()
    }

    /// Center frequency of each filter, ascending.
    pub fn center_frequencies(&self) -> Vec<f64> {
        let pts = self.mel_points_hz();
        pts[1..=self.n_mels].to_vec()
    }
}

/// Triangular filters with unit peak, `n_mels × (n_fft/2 + 1)`.
pub fn mel_filterbank(cfg: &MelConfig) -> DMatrix<f64> {
    let pts = cfg.mel_points_hz();
    let bin_hz = cfg.sample_rate as f64 / cfg.n_fft as f64;
    DMatrix::from_fn(cfg.n_mels, cfg.n_bins(), |m, k| {
        let f = k as f64 * bin_hz;
        let (lo, c, hi) = (pts[m], pts[m + 1], pts[m + 2]);
        let rise = (f - lo) / (c - lo);
        let fall = (hi - f) / (hi - c);
        rise.min(fall).max(0.0)
    })
}

/// Moore-Penrose pseudo-inverse by SVD; singular values below
/// `1e-8 · σ_max` are treated as zero.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.pseudo_inverse(1e-8 * smax)
        .expect("both factors were requested")
}

/// Log-compressed mel magnitudes, `n_mels × T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: DMatrix<f64>,
    pub config: MelConfig,
}

impl MelSpectrogram {
    pub fn n_mels(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }
}

/// Precomputed filterbank, its pseudo-inverse and the STFT plan for one
/// configuration.
pub struct MelAnalyzer {
    pub config: MelConfig,
    pub filterbank: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    pub(crate) plan: StftPlan,
}

impl MelAnalyzer {
    pub fn new(config: MelConfig) -> Result<Self> {
        config.validate()?;
        let filterbank = mel_filterbank(&config);
        let inverse = pseudo_inverse(&filterbank);
        let plan = StftPlan::new(config.n_fft, config.hop);
        Ok(Self {
            config,
            filterbank,
            inverse,
            plan,
        })
    }

    /// `ln(1 + F · |STFT(w)|)` with centered, reflect-padded framing:
    /// `floor(len / hop) + 1` frames.
    pub fn mel_spectrogram(&self, w: &Waveform) -> Result<MelSpectrogram> {
        check_rate(w, self.config.sample_rate)?;
        let spec = self.plan.stft_centered(&w.samples);
        Ok(self.compress(&spec.map(|c| c.norm())))
    }

    /// Projects a linear magnitude spectrogram onto the mel bands and compresses.
    pub fn compress(&self, magnitude: &DMatrix<f64>) -> MelSpectrogram {
        let values = (&self.filterbank * magnitude).map(|v| v.max(0.0).ln_1p());
        MelSpectrogram {
            values,
            config: self.config.clone(),
        }
    }

    /// Undoes compression and lifts mel magnitudes back to linear-frequency
    /// magnitudes through the pseudo-inverse, clamping negatives to zero.
    pub fn linear_magnitude(&self, m: &MelSpectrogram) -> DMatrix<f64> {
        let mel_mag = m.values.map(|v| v.exp_m1().max(0.0));
        (&self.inverse * mel_mag).map(|v| v.max(0.0))
    }
}

pub fn mel_spectrogram(w: &Waveform, cfg: &MelConfig) -> Result<MelSpectrogram> {
    MelAnalyzer::new(cfg.clone())?.mel_spectrogram(w)
}
