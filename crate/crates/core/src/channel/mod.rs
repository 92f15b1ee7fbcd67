//! Seeded acoustic channel simulator.
//!
//! [`apply_channel`] runs the enabled waveform stages in a fixed order:
//! gain → EQ → reverb → clip → drift → noise. Random parameters are drawn up
//! front from the configured ranges, in that same order, then the noise
//! samples; the output is a pure function of `(waveform, config, seed)`.
//! [`mel_augment`] covers the mel-domain counterpart.

mod effects;
mod mel_aug;
mod noise;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use effects::{clip, gain, parametric_eq, resample_drift, reverb, reverb_taps, ClipMode, REVERB_FLOOR};
pub use mel_aug::{circular_shift, mel_augment, MelAugConfig};
pub use noise::{add_noise, colored_noise, NoiseKind, PINK_DIRECT, PINK_POLES};

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::rng::RngState;

/// Closed interval `[min, max]`, written as a two-element JSON array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span(pub f64, pub f64);

impl Span {
    pub fn fixed(v: f64) -> Self {
        Span(v, v)
    }

    pub fn draw(self, rng: &mut RngState) -> f64 {
        rng.uniform(self.0, self.1)
    }

    fn check(self, name: &str, lo: f64, hi: f64) -> Result<()> {
        if !(self.0 <= self.1) || self.0 < lo || self.1 > hi {
            return Err(Error::InvalidConfig(format!(
                "{name} range [{}, {}] must be ordered and within [{lo}, {hi}]",
                self.0, self.1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GainStage {
    pub enabled: bool,
    pub db: Span,
}

impl Default for GainStage {
    fn default() -> Self {
        Self {
            enabled: false,
            db: Span(-12.0, 6.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EqStage {
    pub enabled: bool,
    pub center_hz: Span,
    pub gain_db: Span,
    pub q: Span,
}

impl Default for EqStage {
    fn default() -> Self {
        Self {
            enabled: false,
            center_hz: Span(300.0, 6000.0),
            gain_db: Span(-6.0, 6.0),
            q: Span(0.5, 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReverbStage {
    pub enabled: bool,
    pub tau: f64,
    pub delay_ms: f64,
}

impl Default for ReverbStage {
    fn default() -> Self {
        Self {
            enabled: false,
            tau: 0.4,
            delay_ms: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClipStage {
    pub enabled: bool,
    pub mode: ClipMode,
    pub threshold: f64,
}

impl Default for ClipStage {
    fn default() -> Self {
        Self {
            enabled: false,
            mode: ClipMode::Hard,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftStage {
    pub enabled: bool,
    pub factor: Span,
}

impl Default for DriftStage {
    fn default() -> Self {
        Self {
            enabled: false,
            factor: Span(0.98, 1.02),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseStage {
    pub enabled: bool,
    /// One kind is picked uniformly per call.
    pub kinds: Vec<NoiseKind>,
    pub snr_db: Span,
}

impl Default for NoiseStage {
    fn default() -> Self {
        Self {
            enabled: false,
            kinds: NoiseKind::COLORS.to_vec(),
            snr_db: Span(-5.0, 30.0),
        }
    }
}

/// Distortion recipe. Every stage carries its own `enabled` flag; the
/// default config has them all off (a clean channel).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub gain: GainStage,
    pub eq: EqStage,
    pub reverb: ReverbStage,
    pub clip: ClipStage,
    pub drift: DriftStage,
    pub noise: NoiseStage,
}

impl ChannelConfig {
    pub fn clean() -> Self {
        Self::default()
    }

    /// Training-time ranges: gain −12..+6 dB, white/pink/brown noise at
    /// −5..+30 dB SNR, random peaking EQ, τ = 0.4 / 20 ms reverb, hard clip
    /// at 0.5 and ±2% drift.
    pub fn training() -> Self {
        let mut c = Self::default();
        c.gain.enabled = true;
        c.eq.enabled = true;
        c.reverb.enabled = true;
        c.clip.enabled = true;
        c.drift.enabled = true;
        c.noise.enabled = true;
        c
    }

    /// Every effect at once with randomized parameters and the ±1%
    /// evaluation drift range.
    pub fn combined() -> Self {
        let mut c = Self::training();
        c.drift.factor = Span(0.99, 1.01);
        c
    }

    pub fn with_noise(kind: NoiseKind, snr_db: f64) -> Self {
        let mut c = Self::default();
        c.noise = NoiseStage {
            enabled: true,
            kinds: vec![kind],
            snr_db: Span::fixed(snr_db),
        };
        c
    }

    pub fn with_reverb(tau: f64, delay_ms: f64) -> Self {
        let mut c = Self::default();
        c.reverb = ReverbStage {
            enabled: true,
            tau,
            delay_ms,
        };
        c
    }

    pub fn with_clip(mode: ClipMode, threshold: f64) -> Self {
        let mut c = Self::default();
        c.clip = ClipStage {
            enabled: true,
            mode,
            threshold,
        };
        c
    }

    pub fn with_drift(min: f64, max: f64) -> Self {
        let mut c = Self::default();
        c.drift = DriftStage {
            enabled: true,
            factor: Span(min, max),
        };
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.gain.db.check("gain_db", -120.0, 60.0)?;
        self.eq.center_hz.check("eq center_hz", f64::MIN_POSITIVE, f64::MAX)?;
        self.eq.gain_db.check("eq gain_db", -60.0, 60.0)?;
        self.eq.q.check("eq q", f64::MIN_POSITIVE, 100.0)?;
        if !(self.reverb.tau > 0.0 && self.reverb.tau < 1.0) {
            return Err(Error::InvalidConfig(format!("reverb tau {} not in (0, 1)", self.reverb.tau)));
        }
        if !(self.reverb.delay_ms >= 0.0) {
            return Err(Error::InvalidConfig("reverb delay must be non-negative".into()));
        }
        if !(self.clip.threshold > 0.0) {
            return Err(Error::InvalidConfig("clip threshold must be positive".into()));
        }
        self.drift.factor.check("drift factor", 0.9, 1.1)?;
        self.noise.snr_db.check("snr_db", -100.0, 200.0)?;
        if self.noise.enabled && self.noise.kinds.is_empty() {
            return Err(Error::InvalidConfig("noise enabled with no kinds".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parameters actually used by one [`apply_channel`] call; `None` means the
/// stage was disabled.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelDraw {
    pub seed: u64,
    pub gain_db: Option<f64>,
    pub eq: Option<EqDraw>,
    pub reverb: Option<(f64, f64)>,
    pub clip: Option<(ClipMode, f64)>,
    pub drift: Option<f64>,
    pub noise: Option<NoiseDraw>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqDraw {
    pub center_hz: f64,
    pub gain_db: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraw {
    pub kind: NoiseKind,
    pub snr_db: f64,
}

impl ChannelDraw {
    pub fn sample(cfg: &ChannelConfig, rng: &mut RngState) -> Self {
        let gain_db = cfg.gain.enabled.then(|| cfg.gain.db.draw(rng));
        let eq = cfg.eq.enabled.then(|| EqDraw {
            center_hz: cfg.eq.center_hz.draw(rng),
            gain_db: cfg.eq.gain_db.draw(rng),
            q: cfg.eq.q.draw(rng),
        });
        let reverb = cfg.reverb.enabled.then_some((cfg.reverb.tau, cfg.reverb.delay_ms));
        let clip = cfg.clip.enabled.then_some((cfg.clip.mode, cfg.clip.threshold));
        let drift = cfg.drift.enabled.then(|| cfg.drift.factor.draw(rng));
        let noise = (cfg.noise.enabled && !cfg.noise.kinds.is_empty()).then(|| NoiseDraw {
            kind: *rng.choose(&cfg.noise.kinds),
            snr_db: cfg.noise.snr_db.draw(rng),
        });
        Self {
            seed: rng.seed,
            gain_db,
            eq,
            reverb,
            clip,
            drift,
            noise,
        }
    }

    /// Runs the recorded stages on `w`; `rng` supplies the noise samples.
    pub fn apply(&self, w: &Waveform, rng: &mut RngState) -> Result<Waveform> {
        let mut out = w.clone();
        if let Some(db) = self.gain_db {
            out = gain(&out, db);
        }
        if let Some(eq) = self.eq {
            let nyquist = out.sample_rate as f64 / 2.0;
            out = parametric_eq(&out, eq.center_hz.min(0.99 * nyquist), eq.gain_db, eq.q)?;
        }
        if let Some((tau, delay)) = self.reverb {
            out = reverb(&out, tau, delay);
        }
        if let Some((mode, th)) = self.clip {
            out = clip(&out, mode, th);
        }
        if let Some(f) = self.drift {
            out = resample_drift(&out, f);
        }
        if let Some(n) = self.noise {
            out = add_noise(&out, n.kind, n.snr_db, rng)?;
        }
        Ok(out)
    }
}

/// Applies the enabled stages of `cfg`, returning the distorted waveform
/// and the parameters drawn.
pub fn apply_channel_traced(
    w: &Waveform,
    cfg: &ChannelConfig,
    rng: &mut RngState,
) -> Result<(Waveform, ChannelDraw)> {
    cfg.validate()?;
    let draw = ChannelDraw::sample(cfg, rng);
    let out = draw.apply(w, rng)?;
    Ok((out, draw))
}

pub fn apply_channel(w: &Waveform, cfg: &ChannelConfig, rng: &mut RngState) -> Result<Waveform> {
    apply_channel_traced(w, cfg, rng).map(|(w, _)| w)
}
