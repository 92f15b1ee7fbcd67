//! Colored noise and SNR-calibrated mixing.

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    /// 1/f, from a three-pole IIR approximation.
    Pink,
    /// 1/f², cumulative sum of white noise with the mean removed.
    Brown,
    /// Equal-power thirds of white, pink and brown.
    Mixed,
}

impl NoiseKind {
    pub const COLORS: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Brown];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::Brown => "brown",
            NoiseKind::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "white" | "gaussian" => Ok(NoiseKind::White),
            "pink" => Ok(NoiseKind::Pink),
            "brown" => Ok(NoiseKind::Brown),
            "mixed" => Ok(NoiseKind::Mixed),
            other => Err(Error::InvalidConfig(format!("unknown noise kind {other:?}"))),
        }
    }
}

/// Pole/gain pairs of the pink filter (Paul Kellet's economy design):
/// `b_i ← p_i · b_i + g_i · white`, output `Σ b_i + PINK_DIRECT · white`.
pub const PINK_POLES: [(f64, f64); 3] = [
    (0.997_65, 0.099_046_0),
    (0.963_00, 0.296_516_4),
    (0.570_00, 1.052_691_3),
];
pub const PINK_DIRECT: f64 = 0.1848;
/// Samples run through the pink filter before output starts, so the slowest
/// pole has settled.
const PINK_WARMUP: usize = 4096;

fn white(len: usize, rng: &mut RngState) -> Vec<f64> {
    (0..len).map(|_| rng.gaussian()).collect()
}

fn pink(len: usize, rng: &mut RngState) -> Vec<f64> {
    let mut state = [0.0f64; 3];
    let mut out = Vec::with_capacity(len);
    for n in 0..len + PINK_WARMUP {
        let w = rng.gaussian();
        let mut y = PINK_DIRECT * w;
        for (s, &(p, g)) in state.iter_mut().zip(&PINK_POLES) {
            *s = p * *s + g * w;
            y += *s;
        }
        if n >= PINK_WARMUP {
            out.push(y);
        }
    }
    out
}

fn brown(len: usize, rng: &mut RngState) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = (0..len)
        .map(|_| {
            acc += rng.gaussian();
            acc
        })
        .collect();
    let mean = out.iter().sum::<f64>() / len.max(1) as f64;
    out.iter_mut().for_each(|x| *x -= mean);
    out
}

fn normalize_power(mut x: Vec<f64>, target: f64) -> Vec<f64> {
    let p = x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64;
    if p > 0.0 {
        let g = (target / p).sqrt();
        x.iter_mut().for_each(|v| *v *= g);
    }
    x
}

/// `len` samples of unit-power noise of the given color.
pub fn colored_noise(kind: NoiseKind, len: usize, rng: &mut RngState) -> Vec<f64> {
    let raw = match kind {
        NoiseKind::White => white(len, rng),
        NoiseKind::Pink => pink(len, rng),
        NoiseKind::Brown => brown(len, rng),
        NoiseKind::Mixed => {
            let parts = [
                normalize_power(white(len, rng), 1.0 / 3.0),
                normalize_power(pink(len, rng), 1.0 / 3.0),
                normalize_power(brown(len, rng), 1.0 / 3.0),
            ];
            (0..len).map(|i| parts.iter().map(|p| p[i]).sum()).collect()
        }
    };
    normalize_power(raw, 1.0)
}

/// Adds noise scaled so that `10·log10(P_signal / P_noise) == snr_db` over the
/// whole waveform. The sum is not re-normalized.
pub fn add_noise(w: &Waveform, kind: NoiseKind, snr_db: f64, rng: &mut RngState) -> Result<Waveform> {
    let ps = w.power();
    if !(ps > 0.0) {
        return Err(Error::SilentSignal);
    }
    let target = ps / 10f64.powf(snr_db / 10.0);
    let noise = normalize_power(colored_noise(kind, w.len(), rng), target);
    Ok(Waveform::new(
        w.samples.iter().zip(&noise).map(|(s, n)| s + n).collect(),
        w.sample_rate,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::psd::{slope_db_per_decade, welch_psd};

    fn tone(len: usize) -> Waveform {
        Waveform::new(
            (0..len).map(|n| 0.6 * (n as f64 * 0.3).sin()).collect(),
            16_000,
        )
    }

    #[test]
    fn snr_is_exact_for_each_kind() {
        let w = tone(4800);
        for kind in [NoiseKind::White, NoiseKind::Pink, NoiseKind::Brown, NoiseKind::Mixed] {
            for snr in [-5.0, 0.0, 12.5] {
                let mut rng = RngState::new(9);
                let noisy = add_noise(&w, kind, snr, &mut rng).unwrap();
                let noise: Vec<f64> = noisy.samples.iter().zip(&w.samples).map(|(a, b)| a - b).collect();
                let pn = noise.iter().map(|x| x * x).sum::<f64>() / noise.len() as f64;
                let measured = 10.0 * (w.power() / pn).log10();
                assert!((measured - snr).abs() < 0.5, "{kind:?} {snr}: {measured}");
            }
        }
    }

    #[test]
    fn silence_is_rejected() {
        let mut rng = RngState::new(1);
        assert!(matches!(
            add_noise(&Waveform::silence(100, 16_000), NoiseKind::White, 0.0, &mut rng),
            Err(Error::SilentSignal)
        ));
    }

    #[test]
    fn spectral_slopes() {
        for (kind, expected) in [(NoiseKind::White, 0.0), (NoiseKind::Pink, -10.0), (NoiseKind::Brown, -20.0)] {
            let mut rng = RngState::new(21);
            let x = colored_noise(kind, 160_000, &mut rng);
            let (f, p) = welch_psd(&x, 16_000, 2048);
            let slope = slope_db_per_decade(&f, &p, 100.0, 4000.0);
            assert!((slope - expected).abs() <= 2.0, "{kind:?}: {slope}");
        }
    }

    #[test]
    fn unit_power_and_determinism() {
        for kind in NoiseKind::COLORS {
            let a = colored_noise(kind, 1000, &mut RngState::new(4));
            let b = colored_noise(kind, 1000, &mut RngState::new(4));
            assert_eq!(a, b);
            let p = a.iter().map(|x| x * x).sum::<f64>() / 1000.0;
            assert!((p - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("Pink".parse::<NoiseKind>().unwrap(), NoiseKind::Pink);
        assert_eq!("gaussian".parse::<NoiseKind>().unwrap(), NoiseKind::White);
        assert!("blue".parse::<NoiseKind>().is_err());
    }
}
