use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use acoustok::audio::{Waveform, DEFAULT_SAMPLE_RATE};
use acoustok::channel::{apply_channel_traced, ChannelConfig, ClipMode, NoiseKind, Span};
use acoustok::corpus::{generate_corpus, render_corpus, Manifest};
use acoustok::dsp::{melio, MelAnalyzer, MelConfig, DEFAULT_ITERATIONS};
use acoustok::experiment::{run_experiment, write_reports, ExperimentConfig, ExperimentKind};
use acoustok::metrics::{render_table, DropConvention};
use acoustok::receiver::{decode, DecodeOptions, TemplateBank};
use acoustok::rng::RngState;
use acoustok::synth::synth_message;
use acoustok::vocab::{build_vocab, Vocab};

#[derive(Parser)]
#[command(name = "acoustok", version, about = "Procedural acoustic token transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Text to a chip-stream WAV.
    Encode {
        #[arg(long)]
        text: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// WAV to decoded text (JSON on stdout, or to --out).
    Decode {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Decoder options as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Pushes a WAV through the channel simulator.
    Simulate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        channel: ChannelArgs,
    },
    /// Writes a seeded message manifest (JSONL).
    GenCorpus {
        #[arg(long, default_value_t = 15_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Manifest path; defaults to <out-dir>/manifest.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Renders a manifest to WAV files plus an index.
    Render {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        channel: ChannelArgs,
    },
    /// Runs an experiment grid and writes one report per condition.
    Evaluate {
        #[arg(long, value_parser = parse_kind)]
        experiment: ExperimentKind,
        /// Experiment config JSON; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snrs: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<usize>>,
        #[arg(long)]
        noise: Option<NoiseKind>,
        #[arg(long)]
        drop_convention: Option<DropConvention>,
        /// Skip the noise-free reference condition.
        #[arg(long)]
        no_clean: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Channel config JSON for the e2e experiment.
        #[arg(long)]
        channel_config: Option<PathBuf>,
    },
    /// Vocabulary table import/export.
    Vocab {
        #[command(subcommand)]
        action: VocabAction,
    },
    /// WAV to a binary mel file with a JSON sidecar.
    Mel {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Binary mel file back to a WAV with Griffin-Lim.
    Invert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iters: usize,
    },
}

#[derive(Subcommand)]
enum VocabAction {
    Export {
        #[arg(long)]
        out: PathBuf,
    },
    /// Loads a table and reports whether it matches the built-in one.
    Check { input: PathBuf },
}

/// Channel overrides. Setting any field of a stage enables that stage.
#[derive(Args, Default)]
struct ChannelArgs {
    /// Channel config JSON (defaults to a clean channel).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stages to switch off after loading: gain, eq, reverb, clip, drift, noise.
    #[arg(long, value_delimiter = ',')]
    disable: Vec<String>,
    #[arg(long, value_parser = parse_span, allow_hyphen_values = true)]
    gain_db: Option<Span>,
    #[arg(long, value_parser = parse_span)]
    eq_center_hz: Option<Span>,
    #[arg(long, value_parser = parse_span, allow_hyphen_values = true)]
    eq_gain_db: Option<Span>,
    #[arg(long, value_parser = parse_span)]
    eq_q: Option<Span>,
    #[arg(long)]
    reverb_tau: Option<f64>,
    #[arg(long)]
    reverb_delay_ms: Option<f64>,
    #[arg(long)]
    clip_mode: Option<ClipMode>,
    #[arg(long)]
    clip_threshold: Option<f64>,
    #[arg(long, value_parser = parse_span)]
    drift: Option<Span>,
    #[arg(long, value_delimiter = ',')]
    noise: Option<Vec<NoiseKind>>,
    #[arg(long, value_parser = parse_span, allow_hyphen_values = true)]
    snr: Option<Span>,
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: acoustok::Error| e.to_string())
}

/// `"x"` for a fixed value or `"lo:hi"` for a range.
fn parse_span(s: &str) -> Result<Span, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match s.split_once(':') {
        Some((a, b)) => Ok(Span(num(a)?, num(b)?)),
        None => num(s).map(Span::fixed),
    }
}

impl ChannelArgs {
    fn resolve(&self) -> anyhow::Result<ChannelConfig> {
        let mut c = match &self.config {
            Some(p) => ChannelConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => ChannelConfig::clean(),
        };
        if let Some(v) = self.gain_db {
            c.gain.enabled = true;
            c.gain.db = v;
        }
        for (field, v) in [
            (&mut c.eq.center_hz, self.eq_center_hz),
            (&mut c.eq.gain_db, self.eq_gain_db),
            (&mut c.eq.q, self.eq_q),
        ] {
            if let Some(v) = v {
                *field = v;
                c.eq.enabled = true;
            }
        }
        if let Some(v) = self.reverb_tau {
            c.reverb.enabled = true;
            c.reverb.tau = v;
        }
        if let Some(v) = self.reverb_delay_ms {
            c.reverb.enabled = true;
            c.reverb.delay_ms = v;
        }
        if let Some(v) = self.clip_mode {
            c.clip.enabled = true;
            c.clip.mode = v;
        }
        if let Some(v) = self.clip_threshold {
            c.clip.enabled = true;
            c.clip.threshold = v;
        }
        if let Some(v) = self.drift {
            c.drift.enabled = true;
            c.drift.factor = v;
        }
        if let Some(v) = &self.noise {
            c.noise.enabled = true;
            c.noise.kinds = v.clone();
        }
        if let Some(v) = self.snr {
            c.noise.enabled = true;
            c.noise.snr_db = v;
        }
        for stage in &self.disable {
            match stage.as_str() {
                "gain" => c.gain.enabled = false,
                "eq" => c.eq.enabled = false,
                "reverb" => c.reverb.enabled = false,
                "clip" => c.clip.enabled = false,
                "drift" => c.drift.enabled = false,
                "noise" => c.noise.enabled = false,
                other => bail!("unknown stage {other:?}"),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Serialize)]
struct DecodeOutput {
    text: String,
    tokens: Vec<u8>,
    surfaces: Vec<String>,
    scores: Vec<f64>,
    drift: f64,
    offset: usize,
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> anyhow::Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, s + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{s}"),
    }
    Ok(())
}

fn encode_text(vocab: &Vocab, text: &str) -> anyhow::Result<Waveform> {
    let ids = vocab.tokenize(text);
    Ok(synth_message(&ids, DEFAULT_SAMPLE_RATE)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let vocab = build_vocab();
    match cli.command {
        Command::Encode { text, out } => {
            encode_text(&vocab, &text)?.write_wav(&out)?;
        }
        Command::Decode { input, out, config } => {
            let opts: DecodeOptions = match config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => DecodeOptions::default(),
            };
            let w = Waveform::read_wav(&input).with_context(|| format!("reading {}", input.display()))?;
            let bank = TemplateBank::build(DEFAULT_SAMPLE_RATE);
            let d = decode(&w, &bank, &opts)?;
            let result = DecodeOutput {
                text: vocab.detokenize(&d.tokens),
                tokens: d.tokens.iter().map(|t| t.index() as u8).collect(),
                surfaces: d.tokens.iter().map(|&t| vocab.entry(t).surface.clone()).collect(),
                scores: d.scores,
                drift: d.drift,
                offset: d.offset,
            };
            write_json(out.as_deref(), &result)?;
        }
        Command::Simulate {
            input,
            out,
            seed,
            channel,
        } => {
            let cfg = channel.resolve()?;
            let w = Waveform::read_wav(&input).with_context(|| format!("reading {}", input.display()))?;
            let (y, draw) = apply_channel_traced(&w, &cfg, &mut RngState::new(seed))?;
            y.write_wav(&out)?;
            println!("{}", serde_json::to_string(&draw)?);
        }
        Command::GenCorpus { n, seed, out, out_dir } => {
            let m = generate_corpus(n, seed)?;
            let path = out.unwrap_or_else(|| out_dir.join("manifest.jsonl"));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            m.save(&path)?;
            eprintln!("wrote {} messages to {}", m.messages.len(), path.display());
        }
        Command::Render {
            manifest,
            out_dir,
            channel,
        } => {
            let cfg = channel.resolve()?;
            let m = Manifest::load(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
            let summary = render_corpus(&m, &cfg, &out_dir)?;
            for (id, err) in &summary.failures {
                eprintln!("message {id}: {err}");
            }
            eprintln!("rendered {} of {} messages", summary.written, m.messages.len());
            if !summary.failures.is_empty() {
                bail!("{} messages failed to render", summary.failures.len());
            }
        }
        Command::Evaluate {
            experiment,
            config,
            seed,
            n,
            snrs,
            lengths,
            noise,
            drop_convention,
            no_clean,
            out_dir,
            channel_config,
        } => {
            let mut cfg = match config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => ExperimentConfig::default(),
            };
            cfg.experiment = experiment;
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = n {
                cfg.message_count = v;
            }
            if let Some(v) = snrs {
                cfg.snr_list = v;
            }
            if let Some(v) = lengths {
                cfg.length_list = v;
            }
            if let Some(v) = noise {
                cfg.noise = v;
            }
            if let Some(v) = drop_convention {
                cfg.drop_convention = v;
            }
            if no_clean {
                cfg.include_clean = false;
            }
            if let Some(p) = channel_config {
                cfg.channel = ChannelConfig::load(p)?;
            }
            cfg.validate()?;
            let reports = run_experiment(&cfg)?;
            print!("{}", render_table(&reports));
            if let Some(dir) = out_dir {
                write_reports(&reports, dir)?;
            }
        }
        Command::Vocab { action } => match action {
            VocabAction::Export { out } => vocab.save(out)?,
            VocabAction::Check { input } => {
                let loaded = Vocab::load(&input)?;
                if loaded != vocab {
                    bail!("{} differs from the built-in table", input.display());
                }
                println!("ok: {} entries", loaded.entries().len());
            }
        },
        Command::Mel { input, out } => {
            let w = Waveform::read_wav(&input)?;
            let cfg = MelConfig {
                sample_rate: w.sample_rate,
                ..MelConfig::default()
            };
            let m = MelAnalyzer::new(cfg)?.mel_spectrogram(&w)?;
            melio::write_mel(&out, &m)?;
        }
        Command::Invert { input, out, iters } => {
            let m = melio::read_mel(&input)?;
            let g = MelAnalyzer::new(m.config.clone())?.griffin_lim(&m, iters)?;
            g.waveform.write_wav(&out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
