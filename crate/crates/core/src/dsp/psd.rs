//! Welch power spectral density estimate and log-log slope fitting.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::stft::hann;

/// One-sided PSD from Hann-windowed segments with 50% overlap.
/// Returns `(frequencies, density)`.
pub fn welch_psd(x: &[f64], sample_rate: u32, segment: usize) -> (Vec<f64>, Vec<f64>) {
    let segment = segment.min(x.len()).max(2);
    let step = segment / 2;
    let window = hann(segment);
    let wsum: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment);
    let n_bins = segment / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut count = 0usize;
    let mut buf = vec![Complex64::default(); segment];
    let mut start = 0;
    while start + segment <= x.len() {
        let seg = &x[start..start + segment];
        let mean = seg.iter().sum::<f64>() / segment as f64;
        for (b, (&s, &w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex64::new((s - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..n_bins {
            acc[k] += buf[k].norm_sqr();
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (sample_rate as f64 * wsum * count.max(1) as f64);
    let psd = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || k == n_bins - 1 { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let freqs = (0..n_bins)
        .map(|k| k as f64 * sample_rate as f64 / segment as f64)
        .collect();
    (freqs, psd)
}

/// Least-squares slope of `10·log10(psd)` against `log10(f)` over `[lo, hi]` Hz,
/// in dB per decade.
pub fn slope_db_per_decade(freqs: &[f64], psd: &[f64], lo: f64, hi: f64) -> f64 {
    let pts: Vec<(f64, f64)> = freqs
        .iter()
        .zip(psd)
        .filter(|(&f, &p)| f >= lo && f <= hi && p > 0.0)
        .map(|(&f, &p)| (f.log10(), 10.0 * p.log10()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_psd_integrates_to_variance() {
        let mut rng = crate::rng::RngState::new(5);
        let x: Vec<f64> = (0..64_000).map(|_| rng.gaussian()).collect();
        let (f, p) = welch_psd(&x, 16_000, 1024);
        let df = f[1] - f[0];
        let total: f64 = p.iter().sum::<f64>() * df;
        assert!((total - 1.0).abs() < 0.05, "{total}");
        assert!(slope_db_per_decade(&f, &p, 100.0, 4000.0).abs() < 1.0);
    }
}
