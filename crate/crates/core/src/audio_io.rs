//! PCM audio container and RIFF/WAVE file I/O.
//!
//! Samples live in memory as planar `f64` channels with nominal full scale
//! ±1.0. On disk they are interleaved little-endian PCM (16/24-bit) or IEEE
//! float 32-bit.

use std::fs::File;
use std::io::{self, BufReader, BufWriter};
use std::path::Path;

use thiserror::Error;

/// Lowest sample rate accepted anywhere in the pipeline.
pub const MIN_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum AudioIoError {
    #[error("file not found: {0}")]
    NotFound(String),
    #[error("unsupported WAV encoding: {0}")]
    Unsupported(String),
    #[error("truncated data chunk: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("malformed WAV file: {0}")]
    Malformed(String),
    #[error("cannot write empty buffer")]
    EmptyBuffer,
    #[error("cannot write {path}: {source}")]
    Unwritable { path: String, source: io::Error },
    #[error("invalid audio buffer: {0}")]
    InvalidBuffer(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Multichannel PCM audio, planar in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    sample_rate: u32,
    channels: Vec<Vec<f64>>,
}

impl AudioBuffer {
    /// Builds a buffer from planar channel data, checking every invariant.
    pub fn new(sample_rate: u32, channels: Vec<Vec<f64>>) -> Result<Self, AudioIoError> {
        if channels.is_empty() {
            return Err(AudioIoError::InvalidBuffer("no channels".into()));
        }
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(AudioIoError::InvalidBuffer(format!(
                "sample rate {sample_rate} Hz below {MIN_SAMPLE_RATE} Hz"
            )));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(AudioIoError::InvalidBuffer("channel lengths differ".into()));
        }
        if channels.iter().flatten().any(|x| !x.is_finite()) {
            return Err(AudioIoError::InvalidBuffer("non-finite sample".into()));
        }
        Ok(Self { sample_rate, channels })
    }

    /// All-zero buffer.
    pub fn silent(sample_rate: u32, num_channels: usize, len: usize) -> Result<Self, AudioIoError> {
        Self::new(sample_rate, vec![vec![0.0; len]; num_channels])
    }

    /// Builds a buffer from interleaved frames.
    pub fn from_interleaved(sample_rate: u32, num_channels: usize, data: &[f64]) -> Result<Self, AudioIoError> {
        if num_channels == 0 || !data.len().is_multiple_of(num_channels) {
            return Err(AudioIoError::InvalidBuffer(
                "interleaved length is not a multiple of the channel count".into(),
            ));
        }
        let frames = data.len() / num_channels;
        let channels = (0..num_channels).map(|c| (0..frames).map(|i| data[i * num_channels + c]).collect()).collect();
        Self::new(sample_rate, channels)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Length in samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.channels[idx]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    pub fn to_interleaved(&self) -> Vec<f64> {
        let n = self.num_channels();
        let mut out = Vec::with_capacity(n * self.len());
        for i in 0..self.len() {
            for ch in &self.channels {
                out.push(ch[i]);
            }
        }
        out
    }

    /// Largest absolute sample value.
    pub fn peak(&self) -> f64 {
        self.channels.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        self.map(|x| x * gain)
    }

    /// Applies `f` to every sample. The result must stay finite.
    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            sample_rate: self.sample_rate,
            channels: self.channels.iter().map(|c| c.iter().map(|&x| f(x)).collect()).collect(),
        }
    }

    /// Sample-wise combination of two buffers with matching shape.
    pub(crate) fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, AudioIoError> {
        if !self.same_shape(other) {
            return Err(AudioIoError::InvalidBuffer("buffers differ in rate, channel count or length".into()));
        }
        let channels = self
            .channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Ok(Self { sample_rate: self.sample_rate, channels })
    }

    pub fn add(&self, other: &Self) -> Result<Self, AudioIoError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, AudioIoError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.sample_rate == other.sample_rate
            && self.num_channels() == other.num_channels()
            && self.len() == other.len()
    }

    /// Largest absolute per-sample difference to another buffer of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.channels
            .iter()
            .zip(&other.channels)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Sum of squares across all channels.
    pub fn energy(&self) -> f64 {
        self.channels.iter().flatten().map(|x| x * x).sum()
    }
}

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Int16,
    Int24,
    Float32,
}

impl BitDepth {
    fn bits(self) -> u16 {
        match self {
            BitDepth::Int16 => 16,
            BitDepth::Int24 => 24,
            BitDepth::Float32 => 32,
        }
    }
}

/// Quantizes a nominal ±1.0 sample to a signed integer of `bits` width.
///
/// Clamps to `[-1, 1 - 2^-(bits-1)]` first, then rounds to nearest with ties
/// away from zero.
pub fn quantize(x: f64, bits: u16) -> i32 {
    let full = f64::from(1u32 << (bits - 1));
    let clamped = x.clamp(-1.0, 1.0 - 1.0 / full);
    (clamped * full).round() as i32
}

/// Reads a RIFF/WAVE file (PCM 16/24-bit or IEEE float 32-bit).
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioIoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => AudioIoError::NotFound(path.display().to_string()),
        _ => AudioIoError::Io(e),
    })?;
    let reader = hound::WavReader::new(BufReader::new(file)).map_err(map_hound)?;
    let spec = reader.spec();
    let num_channels = usize::from(spec.channels);
    let expected = reader.len() as usize;

    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16 | 24) => {
            let scale = 1.0 / f64::from(1u32 << (spec.bits_per_sample - 1));
            collect_samples(reader.into_samples::<i32>(), expected, |s| f64::from(s) * scale)?
        }
        (hound::SampleFormat::Float, 32) => collect_samples(reader.into_samples::<f32>(), expected, f64::from)?,
        (fmt, bits) => return Err(AudioIoError::Unsupported(format!("{fmt:?} with {bits} bits per sample"))),
    };
    AudioBuffer::from_interleaved(spec.sample_rate, num_channels, &samples)
}

fn collect_samples<S, I>(iter: I, expected: usize, convert: impl Fn(S) -> f64) -> Result<Vec<f64>, AudioIoError>
where
    I: Iterator<Item = hound::Result<S>>,
{
    let mut out = Vec::with_capacity(expected);
    for s in iter {
        match s {
            Ok(v) => out.push(convert(v)),
            Err(hound::Error::IoError(e)) if e.kind() == io::ErrorKind::UnexpectedEof => {
                return Err(AudioIoError::Truncated { expected, found: out.len() })
            }
            Err(e) => return Err(map_hound(e)),
        }
    }
    if out.len() < expected {
        return Err(AudioIoError::Truncated { expected, found: out.len() });
    }
    Ok(out)
}

fn map_hound(e: hound::Error) -> AudioIoError {
    match e {
        hound::Error::IoError(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
            AudioIoError::Malformed("unexpected end of file in header".into())
        }
        hound::Error::IoError(e) => AudioIoError::Io(e),
        hound::Error::Unsupported => AudioIoError::Unsupported("unsupported fmt chunk".into()),
        hound::Error::FormatError(msg) => AudioIoError::Malformed(msg.into()),
        other => AudioIoError::Malformed(other.to_string()),
    }
}

/// Writes `buf` as an interleaved RIFF/WAVE file.
pub fn write_wav(buf: &AudioBuffer, path: impl AsRef<Path>, depth: BitDepth) -> Result<(), AudioIoError> {
    if buf.is_empty() {
        return Err(AudioIoError::EmptyBuffer);
    }
    let path = path.as_ref();
    let unwritable = |source: io::Error| AudioIoError::Unwritable { path: path.display().to_string(), source };
    let spec = hound::WavSpec {
        channels: buf.num_channels() as u16,
        sample_rate: buf.sample_rate(),
        bits_per_sample: depth.bits(),
        sample_format: match depth {
            BitDepth::Float32 => hound::SampleFormat::Float,
            _ => hound::SampleFormat::Int,
        },
    };
    let file = File::create(path).map_err(unwritable)?;
    let mut writer = hound::WavWriter::new(BufWriter::new(file), spec).map_err(map_hound)?;
    for i in 0..buf.len() {
        for ch in buf.channels() {
            let res = match depth {
                BitDepth::Float32 => writer.write_sample(ch[i] as f32),
                BitDepth::Int16 | BitDepth::Int24 => writer.write_sample(quantize(ch[i], depth.bits())),
            };
            res.map_err(map_hound)?;
        }
    }
    writer.finalize().map_err(map_hound)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_clamps_and_rounds_away_from_zero() {
        assert_eq!(quantize(1.5, 16), 32767);
        assert_eq!(quantize(-1.5, 16), -32768);
        assert_eq!(quantize(0.0, 16), 0);
        // exactly half an LSB
        assert_eq!(quantize(0.5 / 32768.0, 16), 1);
        assert_eq!(quantize(-0.5 / 32768.0, 16), -1);
        assert_eq!(quantize(1.0, 24), (1 << 23) - 1);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(AudioBuffer::new(48_000, vec![]).is_err());
        assert!(AudioBuffer::new(8_000, vec![vec![0.0]]).is_err());
        assert!(AudioBuffer::new(48_000, vec![vec![0.0], vec![]]).is_err());
        assert!(AudioBuffer::new(48_000, vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn interleave_round_trip() {
        let b = AudioBuffer::new(48_000, vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let il = b.to_interleaved();
        assert_eq!(il, vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(AudioBuffer::from_interleaved(48_000, 2, &il).unwrap(), b);
    }
}
