//! CER, WER, exact match and latency aggregation.
//!
//! CER is computed over Unicode characters of the detokenized text, so a
//! command token such as `<STOP>` counts as six characters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// JSON Schema for serialized [`EvalReport`]s.
pub const EVAL_REPORT_SCHEMA: &str = include_str!("../schemas/eval_report.schema.json");

/// Unit-cost Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Character error rate; may exceed 1.0 when the hypothesis is long.
pub fn cer(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<char> = reference.chars().collect();
    if r.is_empty() {
        return Err(Error::UndefinedCer);
    }
    let h: Vec<char> = hypothesis.chars().collect();
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

/// Word error rate over whitespace-split words.
pub fn wer(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<&str> = reference.split_whitespace().collect();
    if r.is_empty() {
        return Err(Error::UndefinedWer);
    }
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(rename = "ref")]
    pub reference: String,
    #[serde(rename = "hyp")]
    pub hypothesis: String,
    pub cer: f64,
    pub wer: f64,
    pub exact: bool,
    pub encode_ms: f64,
    pub decode_ms: f64,
    /// The receiver produced nothing for this message.
    pub dropped: bool,
}

impl EvalRecord {
    pub fn new(reference: &str, hypothesis: &str, encode_ms: f64, decode_ms: f64) -> Result<Self> {
        let c = cer(reference, hypothesis)?;
        // A reference of pure punctuation/whitespace has no words; score it by
        // characters alone.
        let w = wer(reference, hypothesis).unwrap_or(c.min(1.0));
        Ok(Self {
            reference: reference.to_string(),
            hypothesis: hypothesis.to_string(),
            cer: c,
            wer: w,
            exact: c == 0.0,
            encode_ms,
            decode_ms,
            dropped: false,
        })
    }

    /// A message the receiver discarded. Stored with CER = WER = 1.
    pub fn dropped(reference: &str, encode_ms: f64, decode_ms: f64) -> Self {
        Self {
            reference: reference.to_string(),
            hypothesis: String::new(),
            cer: 1.0,
            wer: 1.0,
            exact: false,
            encode_ms,
            decode_ms,
            dropped: true,
        }
    }

    pub fn latency_ms(&self) -> f64 {
        self.encode_ms + self.decode_ms
    }
}

/// How dropped messages enter the aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropConvention {
    /// Count as 100% CER/WER and not exact.
    DropAs100,
    /// Leave out of CER/WER/EM entirely.
    DropAsExcluded,
}

impl std::str::FromStr for DropConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "100" | "drop_as_100" => Ok(DropConvention::DropAs100),
            "exclude" | "excluded" | "drop_as_excluded" => Ok(DropConvention::DropAsExcluded),
            other => Err(Error::InvalidConfig(format!("unknown drop convention {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub messages: usize,
    pub dropped: usize,
    /// Records that entered the CER/WER/EM means.
    pub scored: usize,
    pub mean_cer: f64,
    pub mean_wer: f64,
    pub em_rate: f64,
    pub latency_p50_ms: f64,
    pub latency_p95_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub condition: String,
    pub drop_convention: DropConvention,
    pub aggregates: Aggregates,
    pub records: Vec<EvalRecord>,
}

/// Order-independent mean: values are summed in sorted order.
fn stable_mean(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Linear-interpolated percentile, `p` in `[0, 100]`.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
}

pub fn aggregate(condition: &str, records: Vec<EvalRecord>, convention: DropConvention) -> EvalReport {
    let scored: Vec<&EvalRecord> = records
        .iter()
        .filter(|r| !(r.dropped && convention == DropConvention::DropAsExcluded))
        .collect();
    let pick = |f: fn(&EvalRecord) -> f64| stable_mean(scored.iter().map(|r| f(r)).collect());
    let mean_cer = pick(|r| if r.dropped { 1.0 } else { r.cer });
    let mean_wer = pick(|r| if r.dropped { 1.0 } else { r.wer });
    let em_rate = pick(|r| if r.exact && !r.dropped { 1.0 } else { 0.0 });
    let latencies: Vec<f64> = records.iter().map(EvalRecord::latency_ms).collect();
    EvalReport {
        condition: condition.to_string(),
        drop_convention: convention,
        aggregates: Aggregates {
            messages: records.len(),
            dropped: records.iter().filter(|r| r.dropped).count(),
            scored: scored.len(),
            mean_cer,
            mean_wer,
            em_rate,
            latency_p50_ms: percentile(&latencies, 50.0),
            latency_p95_ms: percentile(&latencies, 95.0),
        },
        records,
    }
}

/// Aligned text table with columns Condition, CER, WER, EM, Latency.
pub fn render_table(reports: &[EvalReport]) -> String {
    let header = ["Condition", "CER (%)", "WER (%)", "EM (%)", "Latency (ms)"];
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            let a = &r.aggregates;
            [
                r.condition.clone(),
                format!("{:.1}", 100.0 * a.mean_cer),
                format!("{:.1}", 100.0 * a.mean_wer),
                format!("{:.1}", 100.0 * a.em_rate),
                format!("{:.2}", a.latency_p50_ms),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for row in &rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}
