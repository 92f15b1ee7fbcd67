//! Experiment grid: runs message batches through encode → channel → decode
//! under a list of conditions and scores each condition.
//!
//! Every condition of one experiment sees the same messages and the same
//! per-message seeds (`derive_seed(seed, message index)`), so conditions
//! differ only in the channel. Timings cover synthesis (`encode_ms`) and
//! decoding (`decode_ms`); channel simulation and file I/O are excluded.

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::DEFAULT_SAMPLE_RATE;
use crate::channel::{apply_channel, ChannelConfig, ClipMode, NoiseKind};
use crate::corpus::generate_corpus;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, render_table, DropConvention, EvalRecord, EvalReport};
use crate::receiver::{decode, DecodeOptions, TemplateBank};
use crate::rng::{derive_seed, RngState};
use crate::synth::synth_message;
use crate::vocab::{build_vocab, TokenId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SnrSweep,
    NoiseTypes,
    LengthScaling,
    ChannelAblation,
    E2e,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidConfig(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub message_count: usize,
    pub snr_list: Vec<f64>,
    /// Adds a noise-free condition after the SNR conditions.
    pub include_clean: bool,
    /// Noise color for `snr_sweep`.
    pub noise: NoiseKind,
    pub length_list: Vec<usize>,
    /// White-noise SNR used by `length_scaling`.
    pub length_snr_db: f64,
    /// Channel for `e2e`.
    pub channel: ChannelConfig,
    pub decode: DecodeOptions,
    pub drop_convention: DropConvention,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::SnrSweep,
            message_count: 200,
            snr_list: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            include_clean: true,
            noise: NoiseKind::White,
            length_list: vec![5, 10, 20, 40, 100],
            length_snr_db: 5.0,
            channel: ChannelConfig::combined(),
            decode: DecodeOptions::default(),
            drop_convention: DropConvention::DropAs100,
            seed: 7,
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.message_count == 0 {
            return Err(Error::InvalidConfig("message_count must be positive".into()));
        }
        let needs_snrs = matches!(self.experiment, ExperimentKind::SnrSweep | ExperimentKind::NoiseTypes);
        if needs_snrs && self.snr_list.is_empty() {
            return Err(Error::InvalidConfig("snr_list must not be empty".into()));
        }
        if self.experiment == ExperimentKind::LengthScaling
            && (self.length_list.is_empty() || self.length_list.contains(&0))
        {
            return Err(Error::InvalidConfig("length_list must hold positive lengths".into()));
        }
        self.channel.validate()?;
        self.decode.validate()
    }
}

/// One row of an experiment: a named channel applied to a message batch.
#[derive(Debug, Clone)]
pub struct Condition {
    pub name: String,
    pub channel: ChannelConfig,
    pub messages: Vec<Vec<TokenId>>,
}

/// `n` seeded corpus messages (3-40 tokens, the corpus category mix).
pub fn corpus_messages(n: usize, seed: u64) -> Result<Vec<Vec<TokenId>>> {
    let vocab = build_vocab();
    let m = generate_corpus(n.max(10), seed)?;
    Ok(m.messages.iter().take(n).map(|msg| vocab.tokenize(&msg.text)).collect())
}

/// `n` messages of exactly `len` tokens drawn uniformly from the printable
/// alphabet, never starting or ending with a space.
pub fn random_messages(n: usize, len: usize, seed: u64) -> Vec<Vec<TokenId>> {
    let vocab = build_vocab();
    let solid: Vec<TokenId> = vocab.printable_ids().into_iter().filter(|&t| t != TokenId::SPACE).collect();
    let mut all = solid.clone();
    all.push(TokenId::SPACE);
    let mut rng = RngState::new(seed);
    (0..n)
        .map(|_| {
            (0..len)
                .map(|i| {
                    let pool = if i == 0 || i + 1 == len { &solid } else { &all };
                    *rng.choose(pool)
                })
                .collect()
        })
        .collect()
}

fn snr_label(db: f64) -> String {
    format!("{db}dB")
}

/// Expands a config into its conditions.
pub fn conditions(cfg: &ExperimentConfig) -> Result<Vec<Condition>> {
    cfg.validate()?;
    let n = cfg.message_count;
    let cond = |name: String, channel: ChannelConfig, messages: &Vec<Vec<TokenId>>| Condition {
        name,
        channel,
        messages: messages.clone(),
    };
    let mut out = Vec::new();
    match cfg.experiment {
        ExperimentKind::SnrSweep => {
            let msgs = corpus_messages(n, cfg.seed)?;
            let kind = cfg.noise.name();
            for &snr in &cfg.snr_list {
                out.push(cond(
                    format!("{kind} {}", snr_label(snr)),
                    ChannelConfig::with_noise(cfg.noise, snr),
                    &msgs,
                ));
            }
            if cfg.include_clean {
                out.push(cond("clean".into(), ChannelConfig::clean(), &msgs));
            }
        }
        ExperimentKind::NoiseTypes => {
            let msgs = corpus_messages(n, cfg.seed)?;
            for kind in NoiseKind::COLORS.iter().copied().chain([NoiseKind::Mixed]) {
                for &snr in &cfg.snr_list {
                    out.push(cond(
                        format!("{} {}", kind.name(), snr_label(snr)),
                        ChannelConfig::with_noise(kind, snr),
                        &msgs,
                    ));
                }
            }
            if cfg.include_clean {
                out.push(cond("clean".into(), ChannelConfig::clean(), &msgs));
            }
        }
        ExperimentKind::LengthScaling => {
            for &len in &cfg.length_list {
                let msgs = random_messages(n, len, derive_seed(cfg.seed, len as u64));
                out.push(cond(
                    format!("len {len}"),
                    ChannelConfig::with_noise(NoiseKind::White, cfg.length_snr_db),
                    &msgs,
                ));
            }
        }
        ExperimentKind::ChannelAblation => {
            let msgs = corpus_messages(n, cfg.seed)?;
            let rows = [
                ("clean", ChannelConfig::clean()),
                ("noise 5dB", ChannelConfig::with_noise(NoiseKind::White, 5.0)),
                ("noise 0dB", ChannelConfig::with_noise(NoiseKind::White, 0.0)),
                ("reverb", ChannelConfig::with_reverb(0.4, 20.0)),
                ("clipping", ChannelConfig::with_clip(ClipMode::Hard, 0.5)),
                ("drift", ChannelConfig::with_drift(0.99, 1.01)),
                ("combined", ChannelConfig::combined()),
            ];
            for (name, ch) in rows {
                out.push(cond(name.into(), ch, &msgs));
            }
        }
        ExperimentKind::E2e => {
            let msgs = corpus_messages(n, cfg.seed)?;
            out.push(cond("e2e".into(), cfg.channel.clone(), &msgs));
        }
    }
    Ok(out)
}

/// Encode, distort, decode and score one message.
pub fn run_message(
    ids: &[TokenId],
    channel: &ChannelConfig,
    seed: u64,
    vocab: &Vocab,
    bank: &TemplateBank,
    opts: &DecodeOptions,
) -> Result<EvalRecord> {
    let reference = vocab.detokenize(ids);
    let t0 = Instant::now();
    let clean = synth_message(ids, DEFAULT_SAMPLE_RATE)?;
    let encode_ms = t0.elapsed().as_secs_f64() * 1e3;

    let mut rng = RngState::new(seed);
    let received = apply_channel(&clean, channel, &mut rng)?;

    let t1 = Instant::now();
    let decoded = decode(&received, bank, opts);
    let decode_ms = t1.elapsed().as_secs_f64() * 1e3;
    match decoded {
        Ok(d) => EvalRecord::new(&reference, &vocab.detokenize(&d.tokens), encode_ms, decode_ms),
        Err(Error::MessageTooShort { .. }) => Ok(EvalRecord::dropped(&reference, encode_ms, decode_ms)),
        Err(e) => Err(e),
    }
}

pub fn run_condition(
    c: &Condition,
    seed: u64,
    bank: &TemplateBank,
    opts: &DecodeOptions,
    convention: DropConvention,
) -> Result<EvalReport> {
    let vocab = build_vocab();
    let records = c
        .messages
        .par_iter()
        .enumerate()
        .map(|(i, ids)| run_message(ids, &c.channel, derive_seed(seed, i as u64), &vocab, bank, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&c.name, records, convention))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<EvalReport>> {
    let bank = TemplateBank::build(DEFAULT_SAMPLE_RATE);
    conditions(cfg)?
        .iter()
        .map(|c| run_condition(c, cfg.seed, &bank, &cfg.decode, cfg.drop_convention))
        .collect()
}

/// File stem for a condition name: lowercase, non-alphanumerics to `_`.
pub fn report_stem(condition: &str) -> String {
    condition
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// Writes `<stem>.json` per report plus `table.txt`, one after another.
pub fn write_reports(reports: &[EvalReport], out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (i, r) in reports.iter().enumerate() {
        let path = dir.join(format!("{:02}_{}.json", i, report_stem(&r.condition)));
        std::fs::write(path, serde_json::to_string_pretty(r)?)?;
    }
    std::fs::write(dir.join("table.txt"), render_table(reports))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            message_count: 6,
            ..ExperimentConfig::new(kind)
        }
    }

    #[test]
    fn condition_counts() {
        let n = |k| conditions(&small(k)).unwrap().len();
        assert_eq!(n(ExperimentKind::SnrSweep), 6);
        assert_eq!(n(ExperimentKind::NoiseTypes), 21);
        assert_eq!(n(ExperimentKind::LengthScaling), 5);
        assert_eq!(n(ExperimentKind::ChannelAblation), 7);
        assert_eq!(n(ExperimentKind::E2e), 1);
    }

    #[test]
    fn random_messages_have_exact_length() {
        let vocab = build_vocab();
        for m in random_messages(20, 7, 1) {
            assert_eq!(m.len(), 7);
            assert_ne!(m[0], TokenId::SPACE);
            assert_ne!(m[6], TokenId::SPACE);
            assert_eq!(vocab.tokenize(&vocab.detokenize(&m)), m);
        }
    }

    #[test]
    fn clean_condition_is_exact() {
        let mut cfg = small(ExperimentKind::SnrSweep);
        cfg.snr_list = vec![10.0];
        let reports = run_experiment(&cfg).unwrap();
        let clean = reports.last().unwrap();
        assert_eq!(clean.condition, "clean");
        assert_eq!(clean.aggregates.mean_cer, 0.0);
        assert_eq!(clean.aggregates.em_rate, 1.0);
    }

    #[test]
    fn bad_configs_rejected() {
        let mut cfg = small(ExperimentKind::SnrSweep);
        cfg.snr_list.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = small(ExperimentKind::LengthScaling);
        cfg.length_list = vec![0];
        assert!(cfg.validate().is_err());
        assert!("bogus".parse::<ExperimentKind>().is_err());
        assert_eq!("e2e".parse::<ExperimentKind>().unwrap(), ExperimentKind::E2e);
    }

    #[test]
    fn reports_written() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(ExperimentKind::E2e);
        let reports = run_experiment(&cfg).unwrap();
        write_reports(&reports, dir.path()).unwrap();
        assert!(dir.path().join("00_e2e.json").exists());
        assert!(dir.path().join("table.txt").exists());
    }
}
