//! Short-time Fourier transform with a periodic Hann window.

use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
        .collect()
}

/// Index into a signal of length `len` with mirror reflection at both ends
/// (edge sample not repeated).
fn reflect_index(mut i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    i = i.rem_euclid(period);
    if i >= len as isize {
        i = period - i;
    }
    i as usize
}

/// Pads `n_fft / 2` reflected samples on both sides.
pub fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    if x.is_empty() {
        return vec![0.0; 2 * pad];
    }
    (-(pad as isize)..(x.len() + pad) as isize)
        .map(|i| x[reflect_index(i, x.len())])
        .collect()
}

/// Forward/inverse transforms of one size, planned once.
pub struct StftPlan {
    pub n_fft: usize,
    pub hop: usize,
    pub window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub fn new(n_fft: usize, hop: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_fft,
            hop,
            window: hann(n_fft),
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frames that fit entirely inside `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.n_fft {
            0
        } else {
            (len - self.n_fft) / self.hop + 1
        }
    }

    /// One-sided STFT of `y` without padding: `n_bins × n_frames`.
    pub fn stft_raw(&self, y: &[f64]) -> DMatrix<Complex64> {
        let frames = self.n_frames(y.len());
        let mut out = DMatrix::zeros(self.n_bins(), frames);
        let mut buf = vec![Complex64::default(); self.n_fft];
        for t in 0..frames {
            let start = t * self.hop;
            for (m, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(y[start + m] * self.window[m], 0.0);
            }
            self.forward.process(&mut buf);
            for k in 0..self.n_bins() {
                out[(k, t)] = buf[k];
            }
        }
        out
    }

    /// Centered STFT: reflect-pads `n_fft / 2` on each side, giving
    /// `floor(len / hop) + 1` frames.
    pub fn stft_centered(&self, x: &[f64]) -> DMatrix<Complex64> {
        self.stft_raw(&reflect_pad(x, self.n_fft / 2))
    }

    /// Least-squares inverse of [`StftPlan::stft_raw`] (weighted overlap-add).
    /// Returns `(frames - 1) * hop + n_fft` samples.
    pub fn istft_raw(&self, spec: &DMatrix<Complex64>) -> Vec<f64> {
        let frames = spec.ncols();
        if frames == 0 {
            return Vec::new();
        }
        let len = (frames - 1) * self.hop + self.n_fft;
        let mut acc = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut buf = vec![Complex64::default(); self.n_fft];
        let scale = 1.0 / self.n_fft as f64;
        for t in 0..frames {
            hermitian_fill(&mut buf, spec.column(t).iter().copied());
            self.inverse.process(&mut buf);
            let start = t * self.hop;
            for m in 0..self.n_fft {
                let w = self.window[m];
                acc[start + m] += w * buf[m].re * scale;
                norm[start + m] += w * w;
            }
        }
        for (a, n) in acc.iter_mut().zip(&norm) {
            *a = if *n > 1e-12 { *a / n } else { 0.0 };
        }
        acc
    }
}

/// Expands a one-sided spectrum into a full Hermitian buffer.
fn hermitian_fill(buf: &mut [Complex64], half: impl Iterator<Item = Complex64>) {
    let n = buf.len();
    for (k, v) in half.enumerate() {
        buf[k] = v;
        if k > 0 && k < n - k {
            buf[n - k] = v.conj();
        }
    }
    buf[0].im = 0.0;
    if n % 2 == 0 {
        buf[n / 2].im = 0.0;
    }
}
