//! Matched-filter receiver.
//!
//! The bank holds one unit-energy reference chip per token. Decoding assumes
//! the chip grid of the transmitter and a single global start offset:
//!
//! 1. for each candidate drift factor, undo the drift by resampling;
//! 2. pick the start offset in `[0, offset_search]` that maximizes the summed
//!    best-template correlation over the first `sync_chips` windows (more if
//!    the power-of-two FFT has room);
//! 3. cut the signal into chip-length windows from that offset and label each
//!    window with the template of highest normalized correlation;
//! 4. keep the drift hypothesis with the highest mean window score.
//!
//! A hypothesis whose mean score reaches `accept_score` ends the search
//! early. Coherent matching needs the drift to within about 0.05%: an error
//! of 0.25% moves a 3 kHz chip by 7.5 Hz, close to the 8 Hz gap between
//! neighbouring fundamentals, so drift that falls between grid points
//! garbles the later windows of long messages.
//!
//! Windows scoring below `score_floor` decode to UNK. Scores are cosine
//! similarities, so decoding is insensitive to overall gain.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::{check_rate, Waveform};
use crate::channel::resample_drift;
use crate::error::{Error, Result};
use crate::synth::{chip_len, chip_spec, synth_chip};
use crate::vocab::{TokenId, Vocab, VOCAB_SIZE};

pub const DEFAULT_DRIFT_GRID: [f64; 5] = [0.99, 0.995, 1.0, 1.005, 1.01];
pub const DEFAULT_SCORE_FLOOR: f64 = 0.05;
pub const DEFAULT_SYNC_CHIPS: usize = 3;
pub const DEFAULT_ACCEPT_SCORE: f64 = 0.98;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeOptions {
    /// Candidate transmitter/receiver clock ratios; must contain 1.0.
    pub drift_search: Vec<f64>,
    /// Largest start offset tried, in samples (capped at one chip minus one).
    pub offset_search: usize,
    /// Minimum cosine similarity for a window to decode to a real token.
    pub score_floor: f64,
    /// Minimum number of leading windows whose correlation drives offset
    /// estimation.
    pub sync_chips: usize,
    /// Mean score at which a hypothesis is accepted without further search.
    /// Values above 1 force the full search.
    pub accept_score: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            drift_search: DEFAULT_DRIFT_GRID.to_vec(),
            offset_search: usize::MAX,
            score_floor: DEFAULT_SCORE_FLOOR,
            sync_chips: DEFAULT_SYNC_CHIPS,
            accept_score: DEFAULT_ACCEPT_SCORE,
        }
    }
}

impl DecodeOptions {
    pub fn validate(&self) -> Result<()> {
        if !self.drift_search.iter().any(|&d| d == 1.0) {
            return Err(Error::InvalidConfig("drift_search must include 1.0".into()));
        }
        if self.drift_search.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidConfig("drift factors must be positive".into()));
        }
        if !(self.score_floor >= 0.0 && self.score_floor < 1.0) {
            return Err(Error::InvalidConfig("score_floor must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Template spectra for FFT correlation at one transform size. Templates are
/// packed two per complex vector: `conj(T_a) + i·conj(T_b)`, so one inverse
/// FFT yields both correlations (real and imaginary parts).
struct CorrelationPlan {
    size: usize,
    packed: Vec<Vec<Complex64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

pub struct TemplateBank {
    sample_rate: u32,
    chip_len: usize,
    /// Row-major `128 × chip_len`, each row unit L2 norm.
    templates: Vec<f64>,
    plans: Mutex<HashMap<usize, Arc<CorrelationPlan>>>,
}

impl std::fmt::Debug for TemplateBank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TemplateBank")
            .field("sample_rate", &self.sample_rate)
            .field("chip_len", &self.chip_len)
            .finish_non_exhaustive()
    }
}

/// Builds the bank for every id of `v`.
pub fn build_template_bank(v: &Vocab, sample_rate: u32) -> Result<TemplateBank> {
    let ids: Vec<TokenId> = v.entries().iter().map(|e| e.id).collect();
    TemplateBank::from_ids(&ids, sample_rate)
}

impl TemplateBank {
    /// Bank over the full alphabet. Panics only if `sample_rate` is too low
    /// to carry the chips (below 15.2 kHz).
    pub fn build(sample_rate: u32) -> Self {
        Self::from_ids(&TokenId::all().collect::<Vec<_>>(), sample_rate)
            .expect("sample rate must exceed twice the highest harmonic")
    }

    fn from_ids(ids: &[TokenId], sample_rate: u32) -> Result<Self> {
        debug_assert_eq!(ids.len(), VOCAB_SIZE);
        let len = chip_len(sample_rate);
        let mut templates = Vec::with_capacity(ids.len() * len);
        for &id in ids {
            let chip = synth_chip(&chip_spec(id), sample_rate)?;
            let norm = chip.energy().sqrt();
            templates.extend(chip.samples.iter().map(|x| x / norm));
        }
        Ok(Self {
            sample_rate,
            chip_len: len,
            templates,
            plans: Mutex::new(HashMap::new()),
        })
    }

    pub fn len(&self) -> usize {
        self.templates.len() / self.chip_len
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn chip_len(&self) -> usize {
        self.chip_len
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn template(&self, id: TokenId) -> &[f64] {
        let i = id.index() * self.chip_len;
        &self.templates[i..i + self.chip_len]
    }

    /// Best template for one chip-length window: `(token, cosine score)`.
    /// All-zero windows score 0 against token 0.
    pub fn classify(&self, window: &[f64]) -> (TokenId, f64) {
        debug_assert_eq!(window.len(), self.chip_len);
        let norm = dot(window, window).sqrt();
        if norm == 0.0 {
            return (TokenId::BLANK, 0.0);
        }
        let mut best = (0usize, f64::NEG_INFINITY);
        for (j, t) in self.templates.chunks_exact(self.chip_len).enumerate() {
            let c = dot(window, t);
            if c > best.1 {
                best = (j, c);
            }
        }
        (TokenId::new(best.0).expect("bank has 128 rows"), best.1 / norm)
    }

    fn correlation_plan(&self, size: usize) -> Arc<CorrelationPlan> {
        let mut plans = self.plans.lock().expect("plan cache poisoned");
        plans
            .entry(size)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                let forward = planner.plan_fft_forward(size);
                let inverse = planner.plan_fft_inverse(size);
                let spectrum = |t: &[f64]| {
                    let mut buf = vec![Complex64::default(); size];
                    for (b, &x) in buf.iter_mut().zip(t) {
                        b.re = x;
                    }
                    forward.process(&mut buf);
                    buf
                };
                let rows: Vec<&[f64]> = self.templates.chunks_exact(self.chip_len).collect();
                let packed = rows
                    .chunks(2)
                    .map(|pair| {
                        let a = spectrum(pair[0]);
                        let b = pair.get(1).map(|t| spectrum(t));
                        (0..size)
                            .map(|k| {
                                let bk = b.as_ref().map_or(Complex64::default(), |b| b[k]);
                                a[k].conj() + Complex64::i() * bk.conj()
                            })
                            .collect()
                    })
                    .collect();
                Arc::new(CorrelationPlan {
                    size,
                    packed,
                    forward,
                    inverse,
                })
            })
            .clone()
    }

    /// Best normalized template correlation at every start position
    /// `s ≤ min(len, size) − chip_len` of `y`.
    fn best_scores(&self, y: &[f64], size: usize) -> Vec<f64> {
        let plan = self.correlation_plan(size);
        let usable = y.len().min(plan.size);
        if usable < self.chip_len {
            return Vec::new();
        }
        let positions = usable - self.chip_len + 1;

        let mut spectrum = vec![Complex64::default(); plan.size];
        for (b, &x) in spectrum.iter_mut().zip(&y[..usable]) {
            b.re = x;
        }
        plan.forward.process(&mut spectrum);

        let mut best = vec![f64::NEG_INFINITY; positions];
        let mut buf = vec![Complex64::default(); plan.size];
        for q in &plan.packed {
            for ((b, x), t) in buf.iter_mut().zip(&spectrum).zip(q) {
                *b = x * t;
            }
            plan.inverse.process(&mut buf);
            for (s, c) in best.iter_mut().zip(&buf) {
                *s = s.max(c.re).max(c.im);
            }
        }

        let mut prefix = Vec::with_capacity(usable + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &x in &y[..usable] {
            acc += x * x;
            prefix.push(acc);
        }
        let scale = 1.0 / plan.size as f64;
        best.iter()
            .enumerate()
            .map(|(s, &c)| {
                let energy = prefix[s + self.chip_len] - prefix[s];
                if energy > 1e-18 {
                    c * scale / energy.sqrt()
                } else {
                    0.0
                }
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Decoder output for one waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub tokens: Vec<TokenId>,
    /// Cosine score of the winning template per window.
    pub scores: Vec<f64>,
    /// Drift hypothesis that won.
    pub drift: f64,
    /// Start offset in samples, on the drift-corrected signal.
    pub offset: usize,
}

impl Decoded {
    pub fn mean_score(&self) -> f64 {
        if self.scores.is_empty() {
            return 0.0;
        }
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }
}

fn decode_hypothesis(y: &[f64], bank: &TemplateBank, opts: &DecodeOptions, drift: f64) -> Option<Decoded> {
    let len = bank.chip_len;
    if y.len() < len {
        return None;
    }
    let max_offset = opts.offset_search.min(len - 1);
    let size = (max_offset + opts.sync_chips.max(1) * len).next_power_of_two();
    let sync = (size - max_offset) / len;
    let best = bank.best_scores(y, size);

    let mut offset = 0;
    let mut top = f64::NEG_INFINITY;
    for o in 0..=max_offset.min(best.len().saturating_sub(1)) {
        let total: f64 = (0..sync)
            .map(|k| o + k * len)
            .take_while(|&s| s < best.len())
            .map(|s| best[s])
            .sum();
        if total > top {
            top = total;
            offset = o;
        }
    }

    // A trailing partial window counts when at least half of it is present.
    let windows = ((y.len() - offset + len / 2) / len).max(1);
    let mut tokens = Vec::with_capacity(windows);
    let mut scores = Vec::with_capacity(windows);
    let mut buf = vec![0.0; len];
    for k in 0..windows {
        let start = offset + k * len;
        let end = (start + len).min(y.len());
        buf.fill(0.0);
        buf[..end - start].copy_from_slice(&y[start..end]);
        let (id, score) = bank.classify(&buf);
        tokens.push(if score < opts.score_floor { TokenId::UNK } else { id });
        scores.push(score);
    }
    Some(Decoded {
        tokens,
        scores,
        drift,
        offset,
    })
}

/// Decodes a chip stream back to tokens; see the module docs for the steps.
pub fn decode(w: &Waveform, bank: &TemplateBank, opts: &DecodeOptions) -> Result<Decoded> {
    check_rate(w, bank.sample_rate)?;
    opts.validate()?;
    if w.len() < bank.chip_len {
        return Err(Error::MessageTooShort {
            len: w.len(),
            chip_len: bank.chip_len,
        });
    }
    let mut grid = opts.drift_search.clone();
    grid.sort_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()).then(a.total_cmp(b)));
    grid.dedup();

    let mut best: Option<Decoded> = None;
    for d in grid {
        let h = if d == 1.0 {
            decode_hypothesis(&w.samples, bank, opts, d)
        } else {
            decode_hypothesis(&resample_drift(w, 1.0 / d).samples, bank, opts, d)
        };
        let Some(h) = h else { continue };
        if best.as_ref().map_or(true, |b| h.mean_score() > b.mean_score()) {
            best = Some(h);
        }
        if best.as_ref().is_some_and(|b| b.mean_score() >= opts.accept_score) {
            break;
        }
    }
    best.ok_or(Error::MessageTooShort {
        len: w.len(),
        chip_len: bank.chip_len,
    })
}

/// Greedy CTC collapse: merge consecutive repeats, then drop blanks.
pub fn ctc_collapse(ids: &[TokenId], blank: TokenId) -> Vec<TokenId> {
    let mut out = Vec::with_capacity(ids.len());
    let mut prev = None;
    for &id in ids {
        if Some(id) != prev && id != blank {
            out.push(id);
        }
        prev = Some(id);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::gain;
    use crate::rng::RngState;
    use crate::synth::synth_message;
    use crate::vocab::build_vocab;
    use proptest::prelude::*;

    fn ids(raw: &[usize]) -> Vec<TokenId> {
        raw.iter().map(|&i| TokenId::new(i).unwrap()).collect()
    }

    fn random_ids(rng: &mut RngState, len: usize) -> Vec<TokenId> {
        (0..len).map(|_| TokenId::new(rng.below(128)).unwrap()).collect()
    }

    #[test]
    fn bank_shape_and_norms() {
        let bank = build_template_bank(&build_vocab(), 16_000).unwrap();
        assert_eq!(bank.len(), 128);
        assert_eq!(bank.chip_len(), 960);
        for id in TokenId::all() {
            let t = bank.template(id);
            assert!((dot(t, t).sqrt() - 1.0).abs() < 1e-6);
        }
        for a in TokenId::all() {
            for b in TokenId::all().filter(|&b| b > a) {
                assert_ne!(bank.template(a), bank.template(b));
            }
        }
    }

    #[test]
    fn each_chip_matches_itself() {
        let bank = TemplateBank::build(16_000);
        for id in TokenId::all() {
            let (best, score) = bank.classify(bank.template(id));
            assert_eq!(best, id);
            assert!((score - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fft_correlation_matches_direct() {
        let bank = TemplateBank::build(16_000);
        let mut rng = RngState::new(12);
        let y: Vec<f64> = (0..3000).map(|_| rng.gaussian()).collect();
        let fast = bank.best_scores(&y, 3000);
        assert_eq!(fast.len(), 3000 - 960 + 1);
        for s in [0usize, 1, 17, 500, 2040] {
            let (_, direct) = bank.classify(&y[s..s + 960]);
            assert!((fast[s] - direct).abs() < 1e-9, "s={s}");
        }
    }

    #[test]
    fn clean_round_trip() {
        let bank = TemplateBank::build(16_000);
        let opts = DecodeOptions::default();
        let mut rng = RngState::new(5);
        for _ in 0..40 {
            let len = 3 + rng.below(38);
            let msg = random_ids(&mut rng, len);
            let w = synth_message(&msg, 16_000).unwrap();
            let d = decode(&w, &bank, &opts).unwrap();
            assert_eq!(d.tokens, msg);
            assert_eq!(d.drift, 1.0);
            assert_eq!(d.offset, 0);
        }
    }

    #[test]
    fn early_acceptance_matches_full_search() {
        let bank = TemplateBank::build(16_000);
        let full = DecodeOptions {
            accept_score: 2.0,
            ..Default::default()
        };
        let mut rng = RngState::new(6);
        for _ in 0..5 {
            let msg = random_ids(&mut rng, 12);
            let w = synth_message(&msg, 16_000).unwrap();
            let quick = decode(&w, &bank, &DecodeOptions::default()).unwrap();
            assert_eq!(quick, decode(&w, &bank, &full).unwrap());
        }
    }

    #[test]
    fn silence_decodes_to_unk() {
        let bank = TemplateBank::build(16_000);
        let d = decode(&Waveform::silence(960, 16_000), &bank, &DecodeOptions::default()).unwrap();
        assert_eq!(d.tokens, vec![TokenId::UNK]);
    }

    #[test]
    fn too_short_and_rate_errors() {
        let bank = TemplateBank::build(16_000);
        let opts = DecodeOptions::default();
        assert!(matches!(
            decode(&Waveform::silence(959, 16_000), &bank, &opts),
            Err(Error::MessageTooShort { .. })
        ));
        assert!(matches!(
            decode(&Waveform::silence(2000, 22_050), &bank, &opts),
            Err(Error::SampleRateMismatch { .. })
        ));
        let bad = DecodeOptions {
            drift_search: vec![0.99],
            ..Default::default()
        };
        assert!(decode(&Waveform::silence(2000, 16_000), &bank, &bad).is_err());
    }

    #[test]
    fn recovers_leading_offset() {
        let bank = TemplateBank::build(16_000);
        let msg = ids(&[6, 7, 8, 60, 33, 90]);
        let w = synth_message(&msg, 16_000).unwrap();
        let mut shifted = vec![0.0; 137];
        shifted.extend_from_slice(&w.samples);
        let d = decode(&Waveform::new(shifted, 16_000), &bank, &DecodeOptions::default()).unwrap();
        assert_eq!(d.offset, 137);
        assert_eq!(d.tokens, msg);
    }

    #[test]
    fn drift_in_grid_is_recovered() {
        let bank = TemplateBank::build(16_000);
        let mut rng = RngState::new(77);
        for &factor in &DEFAULT_DRIFT_GRID {
            let msg = random_ids(&mut rng, 25);
            let w = resample_drift(&synth_message(&msg, 16_000).unwrap(), factor);
            let d = decode(&w, &bank, &DecodeOptions::default()).unwrap();
            assert_eq!(d.tokens, msg, "factor {factor}");
            assert!((d.drift - factor).abs() < 5e-4, "{} vs {factor}", d.drift);
        }
    }

    #[test]
    fn off_grid_drift_degrades() {
        let bank = TemplateBank::build(16_000);
        let mut rng = RngState::new(78);
        let msg = random_ids(&mut rng, 40);
        let w = resample_drift(&synth_message(&msg, 16_000).unwrap(), 1.0025);
        let d = decode(&w, &bank, &DecodeOptions::default()).unwrap();
        assert_ne!(d.tokens, msg);
    }

    #[test]
    fn ctc_examples() {
        let (a, b) = (TokenId::new(6).unwrap(), TokenId::new(7).unwrap());
        let blank = TokenId::BLANK;
        assert_eq!(ctc_collapse(&[a, a, blank, b], blank), vec![a, b]);
        assert_eq!(ctc_collapse(&[blank, blank], blank), vec![]);
        assert_eq!(ctc_collapse(&[a, blank, a], blank), vec![a, a]);
        assert_eq!(ctc_collapse(&[], blank), vec![]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gain_does_not_change_decoding(seed in 0u64..10_000, db in -12.0f64..6.0) {
            let bank = TemplateBank::build(16_000);
            let mut rng = RngState::new(seed);
            let len = 3 + rng.below(20);
            let msg = random_ids(&mut rng, len);
            let w = synth_message(&msg, 16_000).unwrap();
            let opts = DecodeOptions::default();
            let plain = decode(&w, &bank, &opts).unwrap();
            let scaled = decode(&gain(&w, db), &bank, &opts).unwrap();
            prop_assert_eq!(plain.tokens, scaled.tokens);
        }

        #[test]
        fn collapse_is_idempotent_on_clean_output(raw in prop::collection::vec(0usize..6, 0..30)) {
            let seq = ids(&raw);
            let once = ctc_collapse(&seq, TokenId::BLANK);
            let no_runs = once.windows(2).all(|w| w[0] != w[1]);
            if no_runs {
                prop_assert_eq!(ctc_collapse(&once, TokenId::BLANK), once.clone());
            }
            prop_assert!(!once.contains(&TokenId::BLANK));
        }
    }
}
