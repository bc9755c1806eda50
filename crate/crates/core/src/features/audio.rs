use std::path::Path;

use crate::error::{Error, Result};

/// Mono waveform with nominal amplitude range [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Reads a mono 16-bit PCM WAV file, rejecting any other layout or a
    /// sample rate other than `expected_rate`.
    pub fn read_wav(path: impl AsRef<Path>, expected_rate: u32) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = hound::WavReader::open(path)
            .map_err(|e| Error::InvalidAudio(format!("{}: {e}", path.display())))?;
        let spec = reader.spec();
        if spec.channels != 1
            || spec.bits_per_sample != 16
            || spec.sample_format != hound::SampleFormat::Int
        {
            return Err(Error::InvalidAudio(format!(
                "{}: expected mono 16-bit PCM, got {} channel(s) of {}-bit {:?}",
                path.display(),
                spec.channels,
                spec.bits_per_sample,
                spec.sample_format
            )));
        }
        if spec.sample_rate != expected_rate {
            return Err(Error::InvalidAudio(format!(
                "{}: sample rate {} Hz, expected {expected_rate} Hz",
                path.display(),
                spec.sample_rate
            )));
        }
        let samples = reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidAudio(format!("{}: {e}", path.display())))?;
        Ok(Self::new(samples, spec.sample_rate))
    }

    /// Writes mono 16-bit PCM, clipping to [-1, 1).
    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let wrap = |e: hound::Error| Error::InvalidAudio(format!("{}: {e}", path.display()));
        let mut writer = hound::WavWriter::create(path, spec).map_err(wrap)?;
        for &s in &self.samples {
            writer.write_sample(pcm16(s)).map_err(wrap)?;
        }
        writer.finalize().map_err(wrap)
    }

    /// The clip as it reads back after a 16-bit PCM round trip.
    pub fn quantized_pcm16(&self) -> Self {
        Self::new(
            self.samples.iter().map(|&s| pcm16(s) as f32 / 32768.0).collect(),
            self.sample_rate,
        )
    }
}

fn pcm16(s: f32) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}
