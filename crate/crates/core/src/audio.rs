//! Sampled mono audio and 16-bit PCM WAV I/O.

use std::io::{Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean power.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    pub fn rms(&self) -> f64 {
        self.power().sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|x| x.is_finite())
    }

    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_wav_to(file)
    }

    /// Writes 16-bit PCM mono. Samples outside `[-1, 1]` saturate.
    pub fn write_wav_to<W: Write + Seek>(&self, out: W) -> Result<()> {
        let spec = WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut writer = WavWriter::new(out, spec)?;
        for &x in &self.samples {
            writer.write_sample(quantize(x))?;
        }
        writer.finalize()?;
        Ok(())
    }

    pub fn wav_bytes(&self) -> Result<Vec<u8>> {
        let mut cursor = std::io::Cursor::new(Vec::new());
        self.write_wav_to(&mut cursor)?;
        Ok(cursor.into_inner())
    }

    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_wav_from(file)
    }

    /// Reads a mono WAV (16-bit int or 32-bit float). Multi-channel input is
    /// averaged down to mono.
    pub fn read_wav_from<R: Read>(input: R) -> Result<Self> {
        let reader = WavReader::new(input)?;
        let spec = reader.spec();
        let channels = spec.channels.max(1) as usize;
        let interleaved: Vec<f64> = match spec.sample_format {
            SampleFormat::Int => {
                let scale = ((1i64 << (spec.bits_per_sample - 1)) - 1) as f64;
                reader
                    .into_samples::<i32>()
                    .map(|s| s.map(|v| v as f64 / scale))
                    .collect::<std::result::Result<_, _>>()?
            }
            SampleFormat::Float => reader
                .into_samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()?,
        };
        let samples = interleaved
            .chunks(channels)
            .map(|c| c.iter().sum::<f64>() / channels as f64)
            .collect();
        Ok(Self::new(samples, spec.sample_rate))
    }
}

fn quantize(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16
}

/// Rejects a waveform whose rate differs from `expected`.
pub(crate) fn check_rate(w: &Waveform, expected: u32) -> Result<()> {
    if w.sample_rate != expected {
        return Err(Error::SampleRateMismatch {
            expected,
            actual: w.sample_rate,
        });
    }
    Ok(())
}
