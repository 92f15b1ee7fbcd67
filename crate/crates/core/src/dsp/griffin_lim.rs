//! Griffin-Lim vocoder: mel → linear magnitude → phase recovery.
//!
//! Phase starts at zero everywhere, so the output is a pure function of the
//! input mel. Iterations run on the padded signal the centered STFT frames,
//! which keeps the inverse STFT an exact least-squares projection; that is
//! what makes the spectral-convergence residual non-increasing.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use super::mel::{MelAnalyzer, MelSpectrogram};
use crate::audio::Waveform;
use crate::error::Result;

pub const DEFAULT_ITERATIONS: usize = 32;
pub const OUTPUT_PEAK: f64 = 0.95;

/// Waveform plus the spectral-convergence residual after each iteration.
#[derive(Debug, Clone)]
pub struct GriffinLimOutput {
    pub waveform: Waveform,
    pub residuals: Vec<f64>,
}

/// Spectral convergence `‖|Y| − S‖ / ‖S‖` over the full two-sided spectrum.
fn spectral_convergence(y: &DMatrix<Complex64>, target: &DMatrix<f64>) -> f64 {
    let n_bins = target.nrows();
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 0..target.ncols() {
        for k in 0..n_bins {
            // Interior bins stand for two conjugate bins of the full spectrum.
            let w = if k == 0 || k == n_bins - 1 { 1.0 } else { 2.0 };
            let s = target[(k, t)];
            num += w * (y[(k, t)].norm() - s).powi(2);
            den += w * s * s;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

impl MelAnalyzer {
    pub fn griffin_lim(&self, m: &MelSpectrogram, iters: usize) -> Result<GriffinLimOutput> {
        let iters = iters.max(1);
        let target = self.linear_magnitude(m);
        let plan = &self.plan;
        let pad = plan.n_fft / 2;
        let frames = target.ncols();
        let out_len = frames.saturating_sub(1) * plan.hop;

        let mut estimate: DMatrix<Complex64> = target.map(|s| Complex64::new(s, 0.0));
        let mut residuals = Vec::with_capacity(iters);
        for _ in 0..iters {
            let signal = plan.istft_raw(&estimate);
            let rebuilt = plan.stft_raw(&signal);
            residuals.push(spectral_convergence(&rebuilt, &target));
            estimate = DMatrix::from_fn(target.nrows(), frames, |k, t| {
                let y = rebuilt[(k, t)];
                let r = y.norm();
                if r > 0.0 {
                    y * (target[(k, t)] / r)
                } else {
                    Complex64::new(target[(k, t)], 0.0)
                }
            });
        }
        let signal = plan.istft_raw(&estimate);

        let mut samples: Vec<f64> = if signal.len() >= pad + out_len {
            signal[pad..pad + out_len].to_vec()
        } else {
            vec![0.0; out_len]
        };
        let peak = samples.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if peak > OUTPUT_PEAK {
            let g = OUTPUT_PEAK / peak;
            samples.iter_mut().for_each(|x| *x *= g);
        }
        Ok(GriffinLimOutput {
            waveform: Waveform::new(samples, self.config.sample_rate),
            residuals,
        })
    }

    /// Mean absolute difference between `m` and the mel of its Griffin-Lim
    /// reconstruction; the shorter time axis is zero-padded.
    pub fn roundtrip_consistency(&self, m: &MelSpectrogram) -> Result<f64> {
        let w = self.griffin_lim(m, DEFAULT_ITERATIONS)?.waveform;
        let back = self.mel_spectrogram(&w)?;
        Ok(mean_abs_diff(&m.values, &back.values))
    }
}

fn mean_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let rows = a.nrows().max(b.nrows());
    let cols = a.ncols().max(b.ncols());
    if rows * cols == 0 {
        return 0.0;
    }
    let get = |m: &DMatrix<f64>, r: usize, c: usize| {
        if r < m.nrows() && c < m.ncols() {
            m[(r, c)]
        } else {
            0.0
        }
    };
    let mut total = 0.0;
    for c in 0..cols {
        for r in 0..rows {
            total += (get(a, r, c) - get(b, r, c)).abs();
        }
    }
    total / (rows * cols) as f64
}

pub fn griffin_lim(m: &MelSpectrogram, iters: usize) -> Result<Waveform> {
    Ok(MelAnalyzer::new(m.config.clone())?
        .griffin_lim(m, iters)?
        .waveform)
}

pub fn roundtrip_consistency(m: &MelSpectrogram) -> Result<f64> {
    MelAnalyzer::new(m.config.clone())?.roundtrip_consistency(m)
}
