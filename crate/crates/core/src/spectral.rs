//! Short-time Fourier analysis and overlap-add synthesis.
//!
//! Framing: the signal is zero-padded with `frame_length - hop` samples in
//! front (half a frame at the default 50% overlap) and frame `k` covers padded
//! samples `[k*hop, k*hop + frame_length)`. The frame count is
//! `floor((len + frame_length - hop - 1) / hop) + 1`, the smallest number of
//! frames for which every original sample sees the full overlap-add sum. The
//! synthesis side divides by the constant overlap-add sum of
//! `analysis * synthesis` windows, so `istft(stft(x)) == x` up to rounding.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::audio_io::AudioBuffer;

/// Largest tolerated relative ripple of the window overlap-add sum.
pub const COLA_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("invalid STFT config: {0}")]
    InvalidConfig(String),
    #[error("cannot analyze an empty buffer")]
    EmptyBuffer,
    #[error("spectrogram dimensions inconsistent with its config: {0}")]
    Inconsistent(String),
}

/// Analysis/synthesis window pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    /// Periodic square-root Hann for both analysis and synthesis.
    #[default]
    SqrtHann,
    /// Rectangular (all ones) for both sides.
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::SqrtHann => {
                (0..len).map(|n| (0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos()).sqrt()).collect()
            }
            Window::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub frame_length: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { frame_length: 1024, hop: 512, window: Window::SqrtHann }
    }
}

impl StftConfig {
    pub fn new(frame_length: usize, hop: usize, window: Window) -> Result<Self, SpectralError> {
        let cfg = Self { frame_length, hop, window };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        if self.frame_length < 2 || !self.frame_length.is_power_of_two() {
            return Err(SpectralError::InvalidConfig(format!(
                "frame length {} is not a power of two ≥ 2",
                self.frame_length
            )));
        }
        if self.hop == 0 || !self.frame_length.is_multiple_of(self.hop) {
            return Err(SpectralError::InvalidConfig(format!(
                "hop {} does not divide frame length {}",
                self.hop, self.frame_length
            )));
        }
        let ripple = self.cola_ripple();
        if ripple > COLA_TOLERANCE || !ripple.is_finite() {
            return Err(SpectralError::InvalidConfig(format!(
                "window overlap-add ripple {ripple:e} exceeds {COLA_TOLERANCE:e}"
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.frame_length / 2 + 1
    }

    /// Zero samples inserted before the signal.
    pub fn front_padding(&self) -> usize {
        self.frame_length - self.hop
    }

    pub fn num_frames(&self, len: usize) -> usize {
        (len + self.frame_length - self.hop - 1) / self.hop + 1
    }

    /// Original-signal sample index of the first sample in frame `k`
    /// (may be negative for the leading frames).
    pub fn frame_start(&self, k: usize) -> isize {
        (k * self.hop) as isize - self.front_padding() as isize
    }

    /// Original-signal position of the centre of frame `k`.
    pub fn frame_center(&self, k: usize) -> f64 {
        self.frame_start(k) as f64 + self.frame_length as f64 / 2.0
    }

    /// Overlap-add sum of `analysis * synthesis` windows (constant under COLA).
    fn cola_sum(&self) -> f64 {
        let w = self.window.coefficients(self.frame_length);
        (0..self.frame_length / self.hop).map(|r| w[r * self.hop].powi(2)).sum()
    }

    /// Max relative deviation of the overlap-add window sum from its mean.
    pub fn cola_ripple(&self) -> f64 {
        let w = self.window.coefficients(self.frame_length);
        let sums: Vec<f64> = (0..self.hop)
            .map(|n| (0..self.frame_length / self.hop).map(|r| w[n + r * self.hop].powi(2)).sum())
            .collect();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        sums.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max) / mean
    }
}

/// Complex STFT coefficients for every channel of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    config: StftConfig,
    sample_rate: u32,
    signal_len: usize,
    num_frames: usize,
    /// `[channel][frame * num_bins + bin]`
    data: Vec<Vec<Complex64>>,
}

impl Spectrogram {
    pub fn from_parts(
        config: StftConfig,
        sample_rate: u32,
        signal_len: usize,
        data: Vec<Vec<Complex64>>,
    ) -> Result<Self, SpectralError> {
        config.validate()?;
        let num_frames = config.num_frames(signal_len);
        let expect = num_frames * config.num_bins();
        if data.is_empty() {
            return Err(SpectralError::Inconsistent("no channels".into()));
        }
        if let Some(bad) = data.iter().find(|c| c.len() != expect) {
            return Err(SpectralError::Inconsistent(format!(
                "channel holds {} coefficients, expected {} frames x {} bins",
                bad.len(),
                num_frames,
                config.num_bins()
            )));
        }
        if data.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SpectralError::Inconsistent("non-finite coefficient".into()));
        }
        Ok(Self { config, sample_rate, signal_len, num_frames, data })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }
    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
    pub fn signal_len(&self) -> usize {
        self.signal_len
    }
    pub fn num_frames(&self) -> usize {
        self.num_frames
    }
    pub fn num_bins(&self) -> usize {
        self.config.num_bins()
    }
    pub fn num_channels(&self) -> usize {
        self.data.len()
    }

    /// Row-major `frames x bins` coefficients of one channel.
    pub fn channel(&self, ch: usize) -> &[Complex64] {
        &self.data[ch]
    }

    pub fn channel_mut(&mut self, ch: usize) -> &mut [Complex64] {
        &mut self.data[ch]
    }

    pub fn frame(&self, ch: usize, frame: usize) -> &[Complex64] {
        let nb = self.num_bins();
        &self.data[ch][frame * nb..(frame + 1) * nb]
    }

    /// Centre frequency of `bin` in Hz.
    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.config.frame_length as f64
    }

    /// Same layout with every coefficient replaced by `f(channel, index, z)`.
    pub fn map(&self, f: impl Fn(usize, usize, Complex64) -> Complex64) -> Self {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(c, ch)| ch.iter().enumerate().map(|(i, &z)| f(c, i, z)).collect())
            .collect();
        Self { data, ..self.clone() }
    }

    /// Magnitudes of one channel, row-major `frames x bins`.
    pub fn magnitudes(&self, ch: usize) -> Vec<f64> {
        self.data[ch].iter().map(|z| z.norm()).collect()
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }
}

/// Forward STFT of every channel.
pub fn stft(buf: &AudioBuffer, cfg: &StftConfig) -> Result<Spectrogram, SpectralError> {
    cfg.validate()?;
    if buf.is_empty() {
        return Err(SpectralError::EmptyBuffer);
    }
    let n = cfg.frame_length;
    let bins = cfg.num_bins();
    let frames = cfg.num_frames(buf.len());
    let window = cfg.window.coefficients(n);
    let plans = Plans::new(n);
    let mut scratch = vec![Complex64::default(); plans.forward.get_inplace_scratch_len()];
    let mut frame = vec![Complex64::default(); n];

    let data = buf
        .channels()
        .iter()
        .map(|x| {
            let mut out = Vec::with_capacity(frames * bins);
            for k in 0..frames {
                let start = cfg.frame_start(k);
                for (j, slot) in frame.iter_mut().enumerate() {
                    let idx = start + j as isize;
                    let s = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] } else { 0.0 };
                    *slot = Complex64::new(s * window[j], 0.0);
                }
                plans.forward.process_with_scratch(&mut frame, &mut scratch);
                out.extend_from_slice(&frame[..bins]);
            }
            out
        })
        .collect();

    Ok(Spectrogram { config: *cfg, sample_rate: buf.sample_rate(), signal_len: buf.len(), num_frames: frames, data })
}

/// Inverse STFT by weighted overlap-add, trimmed to the original length.
pub fn istft(spec: &Spectrogram) -> Result<AudioBuffer, SpectralError> {
    let cfg = spec.config;
    cfg.validate()?;
    let n = cfg.frame_length;
    let bins = cfg.num_bins();
    if spec.num_frames != cfg.num_frames(spec.signal_len) || spec.data.iter().any(|c| c.len() != spec.num_frames * bins)
    {
        return Err(SpectralError::Inconsistent(format!(
            "{} frames for a {}-sample signal",
            spec.num_frames, spec.signal_len
        )));
    }
    let window = cfg.window.coefficients(n);
    let norm = 1.0 / (n as f64 * cfg.cola_sum());
    let plans = Plans::new(n);
    let mut scratch = vec![Complex64::default(); plans.inverse.get_inplace_scratch_len()];
    let mut frame = vec![Complex64::default(); n];

    let channels = spec
        .data
        .iter()
        .map(|coeffs| {
            let mut out = vec![0.0; spec.signal_len];
            for k in 0..spec.num_frames {
                let half = &coeffs[k * bins..(k + 1) * bins];
                frame[..bins].copy_from_slice(half);
                // DC and Nyquist of a real signal are real
                frame[0].im = 0.0;
                frame[bins - 1].im = 0.0;
                for j in 1..n / 2 {
                    frame[n - j] = half[j].conj();
                }
                plans.inverse.process_with_scratch(&mut frame, &mut scratch);
                let start = cfg.frame_start(k);
                for (j, z) in frame.iter().enumerate() {
                    let idx = start + j as isize;
                    if idx >= 0 && (idx as usize) < out.len() {
                        out[idx as usize] += z.re * window[j] * norm;
                    }
                }
            }
            out
        })
        .collect();

    AudioBuffer::new(spec.sample_rate, channels).map_err(|e| SpectralError::Inconsistent(e.to_string()))
}
