//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use acoustok::audio::Waveform;
use acoustok::channel::{add_noise, colored_noise, ChannelConfig, NoiseKind};
use acoustok::dsp::psd::{slope_db_per_decade, welch_psd};
use acoustok::dsp::{MelAnalyzer, MelConfig, MelSpectrogram, DEFAULT_ITERATIONS};
use acoustok::experiment::{run_condition, run_experiment, Condition, ExperimentConfig, ExperimentKind};
use acoustok::metrics::{cer, edit_distance, wer, DropConvention, EvalRecord, EvalReport};
use acoustok::receiver::{decode, DecodeOptions, TemplateBank};
use acoustok::rng::RngState;
use acoustok::synth::synth_message;
use acoustok::vocab::{build_vocab, TokenId};
use nalgebra::DMatrix;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cer_of(r: &EvalReport) -> f64 {
    r.aggregates.mean_cer
}

fn clean_exactness(bank: &TemplateBank) -> Outcome {
    let vocab = build_vocab();
    let printable = vocab.printable_ids();
    let mut rng = RngState::new(1);
    let messages: Vec<Vec<TokenId>> = (0..1000)
        .map(|_| {
            let len = rng.range_inclusive(3, 40) as usize;
            (0..len).map(|_| *rng.choose(&printable)).collect()
        })
        .collect();
    let start = Instant::now();
    let cond = Condition {
        name: "clean".into(),
        channel: ChannelConfig::clean(),
        messages,
    };
    let report = run_condition(&cond, 1, bank, &DecodeOptions::default(), DropConvention::DropAs100).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        cer_of(&report) == 0.0 && secs < 60.0,
        format!("1000 messages, mean CER {:.3}, {:.1} s", cer_of(&report), secs),
    )
}

fn snr_monotonicity() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for noise in NoiseKind::COLORS {
        let cfg = ExperimentConfig {
            noise,
            message_count: 200,
            seed: 7,
            ..ExperimentConfig::new(ExperimentKind::SnrSweep)
        };
        let reports = run_experiment(&cfg).unwrap();
        let cers: Vec<f64> = reports.iter().map(cer_of).collect();
        let monotone = cers.windows(2).all(|w| w[1] <= w[0]);
        let clean_zero = reports.last().map(cer_of) == Some(0.0);
        pass &= monotone && clean_zero;
        let shown: Vec<String> = cers.iter().map(|c| format!("{:.1}", 100.0 * c)).collect();
        parts.push(format!("{} [{}]", noise.name(), shown.join(" ")));
    }
    outcome(pass, format!("CER % at -10,-5,0,5,10,clean dB: {}", parts.join("; ")))
}

fn ablation_direction() -> Outcome {
    let cfg = ExperimentConfig {
        message_count: 200,
        seed: 7,
        ..ExperimentConfig::new(ExperimentKind::ChannelAblation)
    };
    let reports = run_experiment(&cfg).unwrap();
    let get = |name: &str| cer_of(reports.iter().find(|r| r.condition == name).unwrap());
    let singles = ["reverb", "clipping", "drift", "noise 5dB"].map(|n| get(n));
    let worst_single = singles.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (combined, clean) = (get("combined"), get("clean"));
    let detail: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {:.1}", r.condition, 100.0 * cer_of(r)))
        .collect();
    outcome(
        combined > worst_single && worst_single > clean,
        format!("CER %: {}", detail.join(", ")),
    )
}

fn noise_calibration() -> Outcome {
    let vocab = build_vocab();
    let signal = synth_message(&vocab.tokenize("<GO> to the dock 42"), 16_000).unwrap();
    let mut worst_snr = 0.0f64;
    for kind in NoiseKind::COLORS {
        for (i, target) in [-10.0, -5.0, 0.0, 5.0, 10.0, 20.0].into_iter().enumerate() {
            let noisy = add_noise(&signal, kind, target, &mut RngState::new(i as u64)).unwrap();
            let pn = noisy
                .samples
                .iter()
                .zip(&signal.samples)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / signal.len() as f64;
            let measured = 10.0 * (signal.power() / pn).log10();
            worst_snr = worst_snr.max((measured - target).abs());
        }
    }
    let mut slopes = Vec::new();
    let mut slopes_ok = true;
    for (kind, expected) in NoiseKind::COLORS.into_iter().zip([0.0, -10.0, -20.0]) {
        let x = colored_noise(kind, 320_000, &mut RngState::new(3));
        let (f, p) = welch_psd(&x, 16_000, 2048);
        let slope = slope_db_per_decade(&f, &p, 100.0, 4000.0);
        slopes_ok &= (slope - expected).abs() <= 2.0;
        slopes.push(format!("{} {slope:.2}", kind.name()));
    }
    outcome(
        worst_snr <= 0.5 && slopes_ok,
        format!(
            "worst SNR error {worst_snr:.4} dB; slopes dB/decade: {}",
            slopes.join(", ")
        ),
    )
}

fn griffin_lim_behaviour() -> Outcome {
    let an = MelAnalyzer::new(MelConfig::default()).unwrap();
    let vocab = build_vocab();
    let printable = vocab.printable_ids();
    let mut rng = RngState::new(5);

    let probe = synth_message(&vocab.tokenize("<SCAN> b7"), 16_000).unwrap();
    let residuals = an
        .griffin_lim(&an.mel_spectrogram(&probe).unwrap(), DEFAULT_ITERATIONS)
        .unwrap()
        .residuals;
    let monotone = residuals.len() == 32 && residuals.windows(2).all(|w| w[1] <= w[0]);

    let mut wins = 0;
    for _ in 0..50 {
        let len = rng.range_inclusive(1, 4) as usize;
        let ids: Vec<TokenId> = (0..len).map(|_| *rng.choose(&printable)).collect();
        let m = an.mel_spectrogram(&synth_message(&ids, 16_000).unwrap()).unwrap();
        let top = m.values.max();
        let random = MelSpectrogram {
            values: DMatrix::from_fn(m.n_mels(), m.n_frames(), |_, _| rng.uniform(0.0, top)),
            config: m.config.clone(),
        };
        if an.roundtrip_consistency(&m).unwrap() < an.roundtrip_consistency(&random).unwrap() {
            wins += 1;
        }
    }
    outcome(
        monotone && wins == 50,
        format!(
            "residual {:.4} -> {:.4} over {} iterations, monotone {monotone}; chip mel more consistent in {wins}/50",
            residuals[0],
            residuals[residuals.len() - 1],
            residuals.len()
        ),
    )
}

/// Levenshtein distance straight from the recursive definition, memoized on
/// suffix positions.
fn recursive_distance(a: &[u8], b: &[u8]) -> usize {
    fn go(a: &[u8], b: &[u8], i: usize, j: usize, memo: &mut [[Option<usize>; 8]; 8]) -> usize {
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if i == a.len() {
            b.len() - j
        } else if j == b.len() {
            a.len() - i
        } else {
            let sub = go(a, b, i + 1, j + 1, memo) + usize::from(a[i] != b[j]);
            sub.min(go(a, b, i + 1, j, memo) + 1).min(go(a, b, i, j + 1, memo) + 1)
        };
        memo[i][j] = Some(v);
        v
    }
    go(a, b, 0, 0, &mut [[None; 8]; 8])
}

fn metric_oracle() -> Outcome {
    let mut strings: Vec<Vec<u8>> = vec![Vec::new()];
    let mut frontier = strings.clone();
    for _ in 0..6 {
        frontier = frontier
            .iter()
            .flat_map(|s| b"abc".iter().map(move |&c| [s.as_slice(), &[c]].concat()))
            .collect();
        strings.extend(frontier.iter().cloned());
    }
    let mut pairs = 0usize;
    let mut mismatches = 0usize;
    for a in &strings {
        for b in &strings {
            pairs += 1;
            if edit_distance(a, b) != recursive_distance(a, b) {
                mismatches += 1;
            }
        }
    }
    let spots = (cer("abc", "abd").unwrap() - 1.0 / 3.0).abs() < 1e-12
        && (wer("go to base", "go to dock").unwrap() - 1.0 / 3.0).abs() < 1e-12
        && EvalRecord::new("<GO> dock", "<GO> dock", 0.0, 0.0).unwrap().exact
        && !EvalRecord::new("<GO> dock", "<GO> duck", 0.0, 0.0).unwrap().exact;
    outcome(
        mismatches == 0 && spots,
        format!("{pairs} pairs over {{a,b,c}}^<=6, {mismatches} mismatches; spot values ok: {spots}"),
    )
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_acoustok");
    let root = tempfile::tempdir().unwrap();
    let channel = root.path().join("channel.json");
    std::fs::write(&channel, serde_json::to_string(&ChannelConfig::combined()).unwrap()).unwrap();
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let dir = root.path().join(run);
        let status = Command::new(bin)
            .args(["gen-corpus", "--n", "300", "--seed", "7", "--out-dir"])
            .arg(&dir)
            .status()
            .unwrap();
        assert!(status.success());
        let status = Command::new(bin)
            .arg("render")
            .arg("--manifest")
            .arg(dir.join("manifest.jsonl"))
            .arg("--out-dir")
            .arg(&dir)
            .arg("--config")
            .arg(&channel)
            .status()
            .unwrap();
        assert!(status.success());
        runs.push(files_under(&dir));
    }
    let wavs = runs[0].iter().filter(|(p, _)| p.ends_with(".wav")).count();
    let bytes: usize = runs[0].iter().map(|(_, b)| b.len()).sum();
    outcome(
        runs[0] == runs[1] && wavs == 300,
        format!("{} files ({wavs} WAV, {bytes} bytes) identical across two runs: {}", runs[0].len(), runs[0] == runs[1]),
    )
}

fn length_scaling() -> Outcome {
    let cfg = ExperimentConfig {
        message_count: 200,
        seed: 7,
        ..ExperimentConfig::new(ExperimentKind::LengthScaling)
    };
    let reports = run_experiment(&cfg).unwrap();
    let cers: Vec<f64> = reports.iter().map(cer_of).collect();
    let lo = cers.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cers.iter().copied().fold(0.0, f64::max);
    // Identical CERs (including all zero) mean no length dependence at all.
    let ratio = if hi == lo { 1.0 } else if lo == 0.0 { f64::INFINITY } else { hi / lo };
    let shown: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {:.2}", r.condition, 100.0 * cer_of(r)))
        .collect();
    outcome(
        ratio < 2.0,
        format!("CER % at 5 dB white: {}; max/min {ratio:.2}", shown.join(", ")),
    )
}

fn throughput(bank: &TemplateBank) -> Outcome {
    let vocab = build_vocab();
    let printable = vocab.printable_ids();
    let mut rng = RngState::new(9);
    let ids: Vec<TokenId> = (0..20).map(|_| *rng.choose(&printable)).collect();
    let opts = DecodeOptions::default();
    let round_trip = || {
        let start = Instant::now();
        let w: Waveform = synth_message(&ids, 16_000).unwrap();
        let d = decode(&w, bank, &opts).unwrap();
        (start.elapsed().as_secs_f64() * 1e3, d.tokens == ids)
    };
    round_trip();
    let mut times = Vec::new();
    let mut correct = true;
    for _ in 0..11 {
        let (ms, ok) = round_trip();
        times.push(ms);
        correct &= ok;
    }
    times.sort_by(f64::total_cmp);
    let median = times[times.len() / 2];
    outcome(
        median < 100.0 && correct,
        format!("20-token encode+decode median {median:.2} ms, max {:.2} ms", times[times.len() - 1]),
    )
}

#[test]
fn acceptance() {
    let bank = TemplateBank::build(16_000);
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 clean-channel exactness", Box::new(|| clean_exactness(&bank))),
        ("2 SNR monotonicity", Box::new(snr_monotonicity)),
        ("3 channel-ablation direction", Box::new(ablation_direction)),
        ("4 noise-color calibration", Box::new(noise_calibration)),
        ("5 Griffin-Lim behaviour", Box::new(griffin_lim_behaviour)),
        ("6 metric oracle equivalence", Box::new(metric_oracle)),
        ("7 determinism", Box::new(determinism)),
        ("8 length scaling", Box::new(length_scaling)),
        ("9 throughput", Box::new(|| throughput(&bank))),
    ];
    let mut failed = Vec::new();
    for (name, check) in &criteria {
        let o = check();
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
