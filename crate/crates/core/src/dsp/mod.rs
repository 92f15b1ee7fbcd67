//! Feature pipeline: STFT, mel filterbank, Griffin-Lim and spectral measures.
//!
//! Default analysis is 16 kHz audio, 512-point FFT, 160-sample hop, 40 HTK mel
//! bands over 0-8 kHz and `ln(1 + x)` compression of mel magnitudes.

pub mod diagnostics;
pub mod griffin_lim;
pub mod mel;
pub mod melio;
pub mod psd;
pub mod stft;

pub use diagnostics::{spectral_diagnostics, SpectralDiagnostics, DEFAULT_ENERGY_BAND};
pub use griffin_lim::{griffin_lim, roundtrip_consistency, GriffinLimOutput, DEFAULT_ITERATIONS};
pub use mel::{mel_filterbank, mel_spectrogram, MelAnalyzer, MelConfig, MelSpectrogram};
