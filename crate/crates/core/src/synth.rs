//! Procedural chip synthesizer.
//!
//! Each token owns a fixed 60 ms chip made of three harmonics under a short
//! raised-cosine fade:
//!
//! ```text
//! s(t) = g · Σ_{k=1..3} a_k · sin(2π f_k t + φ_k) · w(t)
//! ```
//!
//! The fundamental follows a golden-ratio walk through a 3.5 kHz band,
//! `f1 = 300 + (i · φ · 83) mod 3500` Hz, which keeps every pair of the 128
//! fundamentals at least 8 Hz apart. The upper harmonics sit at `2·f1` and
//! `3·f1`, reflected below [`FOLD_CEILING_HZ`] so all energy stays under the
//! 8 kHz mel ceiling. `g` peak-normalizes the chip to [`CHIP_PEAK`].
//!
//! Messages are chips laid end to end with no guard interval. Because the fade
//! takes every chip to exactly zero at both ends, the concatenation has no
//! discontinuities.

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::vocab::TokenId;

pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;
pub const BASE_FREQ_HZ: f64 = 300.0;
pub const FREQ_STEP_HZ: f64 = 83.0;
pub const FREQ_SPAN_HZ: f64 = 3500.0;
/// Harmonics above this are reflected back below it.
pub const FOLD_CEILING_HZ: f64 = 7600.0;
pub const CHIP_SECONDS: f64 = 0.060;
pub const FADE_SECONDS: f64 = 0.005;
pub const HARMONIC_AMPLITUDES: [f64; 3] = [1.0, 0.5, 0.25];
pub const CHIP_PEAK: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub freq_hz: f64,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipSpec {
    pub token: TokenId,
    pub harmonics: [Harmonic; 3],
    pub chip_seconds: f64,
    pub fade_seconds: f64,
    /// Peak absolute amplitude after normalization.
    pub peak: f64,
}

/// Fundamental frequency assigned to token id `i`.
pub fn fundamental_hz(i: usize) -> f64 {
    BASE_FREQ_HZ + (i as f64 * GOLDEN_RATIO * FREQ_STEP_HZ).rem_euclid(FREQ_SPAN_HZ)
}

fn fold(f: f64) -> f64 {
    if f > FOLD_CEILING_HZ {
        2.0 * FOLD_CEILING_HZ - f
    } else {
        f
    }
}

pub fn chip_spec(token: TokenId) -> ChipSpec {
    let f1 = fundamental_hz(token.index());
    let harmonics = [1.0, 2.0, 3.0].map(|k| f1 * k).map(fold);
    ChipSpec {
        token,
        harmonics: [0, 1, 2].map(|k| Harmonic {
            freq_hz: harmonics[k],
            amplitude: HARMONIC_AMPLITUDES[k],
            phase: 0.0,
        }),
        chip_seconds: CHIP_SECONDS,
        fade_seconds: FADE_SECONDS,
        peak: CHIP_PEAK,
    }
}

/// Samples per chip at `sample_rate` (960 at 16 kHz).
pub fn chip_len(sample_rate: u32) -> usize {
    (CHIP_SECONDS * sample_rate as f64).round() as usize
}

/// Raised-cosine fade envelope: zero at both ends, unity in the middle.
pub fn fade_envelope(len: usize, fade: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let edge = n.min(len - 1 - n);
            if edge >= fade {
                1.0
            } else {
                0.5 * (1.0 - (std::f64::consts::PI * edge as f64 / fade as f64).cos())
            }
        })
        .collect()
}

pub fn synth_chip(spec: &ChipSpec, sample_rate: u32) -> Result<Waveform> {
    let nyquist = sample_rate as f64 / 2.0;
    for h in &spec.harmonics {
        if h.freq_hz >= nyquist {
            return Err(Error::HarmonicAboveNyquist {
                freq: h.freq_hz,
                sample_rate,
            });
        }
        if !(h.freq_hz > 0.0) || !h.amplitude.is_finite() || !h.phase.is_finite() {
            return Err(Error::InvalidConfig(format!("bad harmonic {h:?}")));
        }
    }
    let len = (spec.chip_seconds * sample_rate as f64).round() as usize;
    let fade = (spec.fade_seconds * sample_rate as f64).round() as usize;
    if len == 0 || 2 * fade > len {
        return Err(Error::InvalidConfig(format!(
            "chip of {len} samples cannot hold two {fade}-sample fades"
        )));
    }
    let envelope = fade_envelope(len, fade);
    let sr = sample_rate as f64;
    let mut samples: Vec<f64> = envelope
        .iter()
        .enumerate()
        .map(|(n, w)| {
            let t = n as f64 / sr;
            let tone: f64 = spec
                .harmonics
                .iter()
                .map(|h| h.amplitude * (std::f64::consts::TAU * h.freq_hz * t + h.phase).sin())
                .sum();
            tone * w
        })
        .collect();
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        let g = spec.peak / peak;
        samples.iter_mut().for_each(|x| *x *= g);
    }
    Ok(Waveform::new(samples, sample_rate))
}

/// Concatenates the chips of `ids` with no gaps.
pub fn synth_message(ids: &[TokenId], sample_rate: u32) -> Result<Waveform> {
    if ids.is_empty() {
        return Err(Error::EmptyMessage);
    }
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; crate::vocab::VOCAB_SIZE];
    let mut samples = Vec::with_capacity(ids.len() * chip_len(sample_rate));
    for &id in ids {
        let slot = &mut cache[id.index()];
        if slot.is_none() {
            *slot = Some(synth_chip(&chip_spec(id), sample_rate)?.samples);
        }
        samples.extend_from_slice(slot.as_ref().unwrap());
    }
    Ok(Waveform::new(samples, sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};

    fn tok(i: usize) -> TokenId {
        TokenId::new(i).unwrap()
    }

    #[test]
    fn fundamental_examples() {
        assert_eq!(chip_spec(tok(0)).harmonics[0].freq_hz, 300.0);
        // Oracle: the same formula with φ computed from its closed form.
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        for i in [1usize, 100] {
            let expected = 300.0 + (i as f64 * phi * 83.0) % 3500.0;
            assert!((fundamental_hz(i) - expected).abs() < 1e-9);
        }
        assert!((fundamental_hz(1) - 434.297).abs() < 1e-3);
        assert!((fundamental_hz(100) - 3229.68).abs() < 1e-2);
    }

    #[test]
    fn fundamentals_are_pairwise_separated() {
        let f: Vec<f64> = (0..128).map(fundamental_hz).collect();
        let mut min_gap = f64::INFINITY;
        for i in 0..128 {
            for j in i + 1..128 {
                min_gap = min_gap.min((f[i] - f[j]).abs());
            }
        }
        assert!(min_gap >= 1.0, "{min_gap}");
        assert!(min_gap > 8.0 && min_gap < 8.5, "{min_gap}");
    }

    #[test]
    fn harmonics_stay_below_fold_ceiling() {
        for t in TokenId::all() {
            let s = chip_spec(t);
            for h in s.harmonics {
                assert!(h.freq_hz > 0.0 && h.freq_hz <= FOLD_CEILING_HZ);
            }
            assert_eq!(s.harmonics[1].freq_hz, 2.0 * s.harmonics[0].freq_hz);
        }
        // f1 = 3791.7 → 3·f1 = 11375 Hz folds to 3825 Hz.
        let s = chip_spec(tok(127));
        let f1 = s.harmonics[0].freq_hz;
        assert!((s.harmonics[2].freq_hz - (15200.0 - 3.0 * f1)).abs() < 1e-9);
    }

    #[test]
    fn chip_length_and_edges() {
        for t in TokenId::all() {
            let w = synth_chip(&chip_spec(t), 16_000).unwrap();
            assert_eq!(w.len(), 960);
            assert_eq!(w.samples[0], 0.0);
            assert_eq!(w.samples[959], 0.0);
            assert!(w.rms() > 0.0);
            assert!((w.peak() - CHIP_PEAK).abs() < 1e-12);
            assert!(w.is_finite());
        }
    }

    #[test]
    fn single_harmonic_onset_is_zero() {
        let mut spec = chip_spec(tok(10));
        spec.harmonics[1].amplitude = 0.0;
        spec.harmonics[2].amplitude = 0.0;
        let w = synth_chip(&spec, 16_000).unwrap();
        assert_eq!(w.samples[0], 0.0);
        // Fade follows the raised cosine over the first 80 samples.
        let env = fade_envelope(960, 80);
        assert_eq!(env[0], 0.0);
        assert!((env[40] - 0.5).abs() < 1e-12);
        assert_eq!(env[80], 1.0);
        assert_eq!(env[879], 1.0);
        assert!(env[880] < 1.0);
    }

    #[test]
    fn spectral_peak_near_fundamental() {
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(960);
        for i in [0usize, 1, 37, 100, 127] {
            let w = synth_chip(&chip_spec(tok(i)), 16_000).unwrap();
            let mut buf: Vec<Complex<f64>> =
                w.samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
            fft.process(&mut buf);
            let (k, _) = buf[..481]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap();
            let peak_hz = k as f64 * 16_000.0 / 960.0;
            assert!((peak_hz - fundamental_hz(i)).abs() <= 17.0, "{i}: {peak_hz}");
        }
    }

    #[test]
    fn nyquist_is_enforced() {
        let spec = chip_spec(tok(127));
        assert!(matches!(
            synth_chip(&spec, 8_000),
            Err(Error::HarmonicAboveNyquist { .. })
        ));
    }

    #[test]
    fn message_is_concatenation() {
        let ids = [tok(6), tok(7), tok(58)];
        let m = synth_message(&ids, 16_000).unwrap();
        assert_eq!(m.len(), 2880);
        let single = synth_message(&ids[..1], 16_000).unwrap();
        assert_eq!(single, synth_chip(&chip_spec(ids[0]), 16_000).unwrap());
        assert_eq!(m, synth_message(&ids, 16_000).unwrap());
        for k in 1..3 {
            assert_eq!(m.samples[k * 960 - 1], 0.0);
            assert_eq!(m.samples[k * 960], 0.0);
        }
        assert!(matches!(synth_message(&[], 16_000), Err(Error::EmptyMessage)));
    }
}
