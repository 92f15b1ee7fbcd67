//! Deterministic waveform effects: gain, peaking EQ, reverb, clipping and
//! clock drift.

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Stop adding echoes once `tau^k` falls below this.
pub const REVERB_FLOOR: f64 = 0.01;

pub fn gain(w: &Waveform, db: f64) -> Waveform {
    let g = 10f64.powf(db / 20.0);
    Waveform::new(w.samples.iter().map(|x| x * g).collect(), w.sample_rate)
}

/// Single peaking biquad (RBJ audio-EQ cookbook).
pub fn parametric_eq(w: &Waveform, center_hz: f64, gain_db: f64, q: f64) -> Result<Waveform> {
    let nyquist = w.sample_rate as f64 / 2.0;
    if !(center_hz > 0.0 && center_hz < nyquist) || !(q > 0.0) || !gain_db.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "peaking EQ needs 0 < center < {nyquist} Hz and q > 0 (got {center_hz} Hz, q {q})"
        )));
    }
    let a = 10f64.powf(gain_db / 40.0);
    let w0 = std::f64::consts::TAU * center_hz / w.sample_rate as f64;
    let alpha = w0.sin() / (2.0 * q);
    let cos = w0.cos();
    let a0 = 1.0 + alpha / a;
    let b = [(1.0 + alpha * a) / a0, -2.0 * cos / a0, (1.0 - alpha * a) / a0];
    let fb = [-2.0 * cos / a0, (1.0 - alpha / a) / a0];

    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    let samples = w
        .samples
        .iter()
        .map(|&x| {
            let y = b[0] * x + b[1] * x1 + b[2] * x2 - fb[0] * y1 - fb[1] * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            y
        })
        .collect();
    Ok(Waveform::new(samples, w.sample_rate))
}

/// Echo count `K` for decay `tau`: the largest `k` with `tau^k >= 0.01`.
pub fn reverb_taps(tau: f64) -> usize {
    let mut k = 0;
    let mut amp = 1.0;
    while amp * tau >= REVERB_FLOOR && k < 10_000 {
        amp *= tau;
        k += 1;
    }
    k
}

/// Convolution with `h[k·D] = tau^k`, `k = 0..=K`, `D = round(delay_ms · sr / 1000)`.
/// The output is `K·D` samples longer than the input.
pub fn reverb(w: &Waveform, tau: f64, delay_ms: f64) -> Waveform {
    let taps = if tau > 0.0 && tau < 1.0 { reverb_taps(tau) } else { 0 };
    let delay = (delay_ms * w.sample_rate as f64 / 1000.0).round() as usize;
    let mut out = vec![0.0; w.len() + taps * delay];
    let mut amp = 1.0;
    for k in 0..=taps {
        let shift = k * delay;
        for (o, &x) in out[shift..shift + w.len()].iter_mut().zip(&w.samples) {
            *o += amp * x;
        }
        amp *= tau;
    }
    Waveform::new(out, w.sample_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipMode {
    Hard,
    Soft,
    None,
}

impl std::str::FromStr for ClipMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" => Ok(ClipMode::Hard),
            "soft" => Ok(ClipMode::Soft),
            "none" => Ok(ClipMode::None),
            other => Err(Error::InvalidConfig(format!("unknown clip mode {other:?}"))),
        }
    }
}

/// Hard: `clamp(x, -th, th)`. Soft: `th · tanh(x / th)`.
pub fn clip(w: &Waveform, mode: ClipMode, threshold: f64) -> Waveform {
    let f = |x: f64| match mode {
        ClipMode::Hard => x.clamp(-threshold, threshold),
        ClipMode::Soft => threshold * (x / threshold).tanh(),
        ClipMode::None => x,
    };
    Waveform::new(w.samples.iter().map(|&x| f(x)).collect(), w.sample_rate)
}

/// Linear-interpolation resampling that models a transmitter clock running
/// `factor` times fast: output sample `n` is the input at position
/// `n · factor`, so a tone at `f` Hz reads as `f · factor` Hz. Output length is
/// `round(len / factor)`.
pub fn resample_drift(w: &Waveform, factor: f64) -> Waveform {
    let len = w.len();
    let out_len = (len as f64 / factor).round() as usize;
    let at = |i: usize| if i < len { w.samples[i] } else { 0.0 };
    let samples = (0..out_len)
        .map(|n| {
            let pos = n as f64 * factor;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if frac == 0.0 {
                at(i)
            } else {
                at(i) + frac * (at(i + 1) - at(i))
            }
        })
        .collect();
    Waveform::new(samples, w.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rustfft::{num_complex::Complex64, FftPlanner};

    fn tone(freq: f64, len: usize) -> Waveform {
        Waveform::new(
            (0..len)
                .map(|n| 0.5 * (std::f64::consts::TAU * freq * n as f64 / 16_000.0).sin())
                .collect(),
            16_000,
        )
    }

    fn peak_hz(w: &Waveform, nfft: usize) -> f64 {
        let fft = FftPlanner::new().plan_fft_forward(nfft);
        let mut buf: Vec<Complex64> = (0..nfft)
            .map(|i| Complex64::new(*w.samples.get(i).unwrap_or(&0.0), 0.0))
            .collect();
        fft.process(&mut buf);
        let k = (1..nfft / 2)
            .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
            .unwrap();
        k as f64 * 16_000.0 / nfft as f64
    }

    #[test]
    fn gain_scales_rms() {
        let w = tone(440.0, 1000);
        assert!((gain(&w, 6.0).rms() / w.rms() - 1.995).abs() < 1e-3);
        assert_eq!(gain(&w, 0.0), w);
    }

    #[test]
    fn flat_eq_is_identity() {
        let w = tone(1000.0, 2000);
        let y = parametric_eq(&w, 1500.0, 0.0, 0.7).unwrap();
        for (a, b) in w.samples.iter().zip(&y.samples) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(parametric_eq(&w, 9000.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn eq_boosts_at_center() {
        let w = tone(1000.0, 16_000);
        let y = parametric_eq(&w, 1000.0, 6.0, 1.0).unwrap();
        let ratio = Waveform::new(y.samples[4000..].to_vec(), 16_000).rms()
            / Waveform::new(w.samples[4000..].to_vec(), 16_000).rms();
        assert!((ratio - 10f64.powf(6.0 / 20.0)).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn reverb_impulse_response() {
        assert_eq!(reverb_taps(0.4), 5);
        let mut x = vec![0.0; 10];
        x[0] = 1.0;
        let y = reverb(&Waveform::new(x, 16_000), 0.4, 20.0);
        assert_eq!(y.len(), 10 + 5 * 320);
        let expected = [1.0, 0.4, 0.16, 0.064, 0.0256, 0.01024];
        for (k, e) in expected.iter().enumerate() {
            assert!((y.samples[k * 320] - e).abs() < 1e-12);
        }
        let nonzero = y.samples.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 6);
    }

    #[test]
    fn reverb_small_tau_and_energy() {
        let w = tone(700.0, 960);
        assert_eq!(reverb(&w, 0.005, 20.0), w);
        assert!(reverb(&w, 0.4, 20.0).energy() >= w.energy());
    }

    #[test]
    fn clip_examples() {
        let w = Waveform::new(vec![0.8, 0.0, -0.8, 0.3], 16_000);
        assert_eq!(clip(&w, ClipMode::Hard, 0.5).samples, vec![0.5, 0.0, -0.5, 0.3]);
        let soft = clip(&w, ClipMode::Soft, 0.5);
        assert_eq!(soft.samples[1], 0.0);
        assert!(soft.samples.iter().all(|x| x.abs() < 0.5));
        assert!(clip(&Waveform::new(vec![1e6], 16_000), ClipMode::Soft, 0.5).samples[0] <= 0.5);
        assert_eq!(clip(&w, ClipMode::None, 0.5), w);
    }

    #[test]
    fn drift_lengths_and_identity() {
        let w = tone(440.0, 960);
        assert_eq!(resample_drift(&w, 1.0), w);
        assert_eq!(resample_drift(&w, 1.01).len(), 950);
        assert_eq!(resample_drift(&w, 0.99).len(), 970);
    }

    #[test]
    fn drift_shifts_frequency() {
        let w = tone(3000.0, 16_000);
        let d = resample_drift(&w, 1.01);
        let f = peak_hz(&d, 16_384);
        assert!((f - 3030.0).abs() < 2.0, "{f}");
    }

    #[test]
    fn drift_is_approximately_invertible() {
        let w = tone(1200.0, 4800);
        for r in [0.99, 0.995, 1.005, 1.01] {
            let back = resample_drift(&resample_drift(&w, r), 1.0 / r);
            let n = back.len().min(w.len());
            let dot: f64 = (0..n).map(|i| back.samples[i] * w.samples[i]).sum();
            let na: f64 = (0..n).map(|i| back.samples[i].powi(2)).sum::<f64>().sqrt();
            let nb: f64 = (0..n).map(|i| w.samples[i].powi(2)).sum::<f64>().sqrt();
            assert!(dot / (na * nb) > 0.99, "r={r}");
        }
    }

    proptest! {
        #[test]
        fn hard_clip_is_idempotent(xs in prop::collection::vec(-3.0f64..3.0, 1..64), th in 0.05f64..2.0) {
            let w = Waveform::new(xs, 16_000);
            let once = clip(&w, ClipMode::Hard, th);
            prop_assert_eq!(clip(&once, ClipMode::Hard, th), once);
        }
    }
}
