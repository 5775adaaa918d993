//! K-weighted, gated programme loudness (BS.1770-style subset).
//!
//! Only the integrated measure and its 400 ms gating blocks are provided.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::audio_io::AudioBuffer;

pub const ABSOLUTE_GATE_LUFS: f64 = -70.0;
pub const RELATIVE_GATE_LU: f64 = -10.0;
const BLOCK_SECONDS: f64 = 0.4;
const STEP_SECONDS: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum LoudnessError {
    #[error("loudness supports 1 or 2 channels, got {0}")]
    TooManyChannels(usize),
    #[error("loudness is undefined ({0})")]
    Undefined(Loudness),
}

/// Integrated loudness or the reason it could not be measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loudness {
    Lufs(f64),
    /// Every block fell below the absolute gate.
    Silence,
    /// Shorter than one gating block.
    TooShort,
}

impl Loudness {
    pub fn lufs(self) -> Option<f64> {
        match self {
            Loudness::Lufs(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Loudness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loudness::Lufs(v) => write!(f, "{v:.2} LUFS"),
            Loudness::Silence => f.write_str("silence"),
            Loudness::TooShort => f.write_str("too short"),
        }
    }
}

/// One 400 ms gating block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockLoudness {
    /// First sample of the block.
    pub start: usize,
    /// `None` for a block with zero weighted power.
    pub lufs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoudnessResult {
    pub integrated: Loudness,
    pub blocks: Vec<BlockLoudness>,
    /// Samples per block and hop between block starts.
    pub block_len: usize,
    pub block_step: usize,
}

/// Direct-form-I biquad, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// High-shelf stage of the K-weighting pre-filter, re-derived for `rate`
    /// by bilinear transform of the analog prototype.
    pub fn k_shelf(rate: f64) -> Self {
        let gain_db = 3.999_843_853_973_347;
        let q = 0.707_175_236_955_419_6;
        let f0 = 1_681.974_450_955_533;
        let k = (PI * f0 / rate).tan();
        let vh = 10f64.powf(gain_db / 20.0);
        let vb = vh.powf(0.499_666_774_154_541_6);
        let a0 = 1.0 + k / q + k * k;
        Self {
            b: [(vh + vb * k / q + k * k) / a0, 2.0 * (k * k - vh) / a0, (vh - vb * k / q + k * k) / a0],
            a: [2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0],
        }
    }

    /// High-pass stage of the K-weighting pre-filter.
    pub fn k_highpass(rate: f64) -> Self {
        let q = 0.500_327_037_323_877_3;
        let f0 = 38.135_470_876_024_44;
        let k = (PI * f0 / rate).tan();
        let a0 = 1.0 + k / q + k * k;
        Self { b: [1.0, -2.0, 1.0], a: [2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0] }
    }

    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }
}

/// K-weights one channel.
pub fn k_weight(x: &[f64], sample_rate: u32) -> Vec<f64> {
    let rate = f64::from(sample_rate);
    Biquad::k_highpass(rate).filter(&Biquad::k_shelf(rate).filter(x))
}

fn power_to_lufs(p: f64) -> f64 {
    -0.691 + 10.0 * p.log10()
}

/// Integrated loudness of a mono or stereo buffer.
pub fn integrated_loudness(buf: &AudioBuffer) -> Result<LoudnessResult, LoudnessError> {
    if buf.num_channels() > 2 {
        return Err(LoudnessError::TooManyChannels(buf.num_channels()));
    }
    let rate = f64::from(buf.sample_rate());
    let block_len = (BLOCK_SECONDS * rate).round() as usize;
    let block_step = (STEP_SECONDS * rate).round() as usize;
    if buf.len() < block_len {
        return Ok(LoudnessResult { integrated: Loudness::TooShort, blocks: Vec::new(), block_len, block_step });
    }

    // prefix sums of squared weighted samples, one per channel
    let prefix: Vec<Vec<f64>> = buf
        .channels()
        .iter()
        .map(|ch| {
            let w = k_weight(ch, buf.sample_rate());
            let mut acc = Vec::with_capacity(w.len() + 1);
            let mut sum = 0.0;
            acc.push(0.0);
            for v in w {
                sum += v * v;
                acc.push(sum);
            }
            acc
        })
        .collect();

    let num_blocks = (buf.len() - block_len) / block_step + 1;
    let powers: Vec<f64> = (0..num_blocks)
        .map(|j| {
            let s = j * block_step;
            prefix.iter().map(|p| ((p[s + block_len] - p[s]) / block_len as f64).max(0.0)).sum()
        })
        .collect();
    let blocks = powers
        .iter()
        .enumerate()
        .map(|(j, &p)| BlockLoudness { start: j * block_step, lufs: (p > 0.0).then(|| power_to_lufs(p)) })
        .collect();

    Ok(LoudnessResult { integrated: gate(&powers), blocks, block_len, block_step })
}

/// Two-stage gating over block powers.
fn gate(powers: &[f64]) -> Loudness {
    let above_abs: Vec<f64> =
        powers.iter().copied().filter(|&p| p > 0.0 && power_to_lufs(p) > ABSOLUTE_GATE_LUFS).collect();
    if above_abs.is_empty() {
        return Loudness::Silence;
    }
    let mean_abs = above_abs.iter().sum::<f64>() / above_abs.len() as f64;
    let relative = power_to_lufs(mean_abs) + RELATIVE_GATE_LU;
    let kept: Vec<f64> = above_abs.into_iter().filter(|&p| power_to_lufs(p) > relative).collect();
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    Loudness::Lufs(power_to_lufs(mean))
}

/// Gain in dB that moves `measured` onto `target`.
pub fn gain_to_match(measured: Loudness, target: Loudness) -> Result<f64, LoudnessError> {
    match (measured, target) {
        (Loudness::Lufs(m), Loudness::Lufs(t)) => Ok(t - m),
        (Loudness::Lufs(_), other) | (other, _) => Err(LoudnessError::Undefined(other)),
    }
}

pub fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, amp: f64, secs: f64, channels: usize) -> AudioBuffer {
        let sr = 48_000;
        let n = (secs * sr as f64) as usize;
        let x: Vec<f64> = (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / sr as f64).sin()).collect();
        AudioBuffer::new(sr, vec![x; channels]).unwrap()
    }

    #[test]
    fn k_weighting_matches_48k_reference_coefficients() {
        // published 48 kHz coefficient tables
        let s = Biquad::k_shelf(48_000.0);
        assert!((s.b[0] - 1.535_124_859_586_97).abs() < 1e-9);
        assert!((s.b[1] + 2.691_696_189_406_38).abs() < 1e-9);
        assert!((s.b[2] - 1.198_392_810_852_85).abs() < 1e-9);
        assert!((s.a[0] + 1.690_659_293_182_41).abs() < 1e-9);
        assert!((s.a[1] - 0.732_480_774_215_85).abs() < 1e-9);
        let h = Biquad::k_highpass(48_000.0);
        assert!((h.a[0] + 1.990_047_454_833_98).abs() < 1e-9);
        assert!((h.a[1] - 0.990_072_250_366_21).abs() < 1e-9);
    }

    #[test]
    fn silence_and_too_short() {
        let silent = AudioBuffer::silent(48_000, 2, 48_000).unwrap();
        assert_eq!(integrated_loudness(&silent).unwrap().integrated, Loudness::Silence);
        let short = sine(997.0, 0.5, 0.3, 2);
        assert_eq!(integrated_loudness(&short).unwrap().integrated, Loudness::TooShort);
    }

    #[test]
    fn rejects_surround() {
        let b = AudioBuffer::silent(48_000, 3, 48_000).unwrap();
        assert_eq!(integrated_loudness(&b), Err(LoudnessError::TooManyChannels(3)));
    }

    #[test]
    fn gain_to_match_examples() {
        assert_eq!(gain_to_match(Loudness::Lufs(-23.0), Loudness::Lufs(-23.0)), Ok(0.0));
        assert_eq!(gain_to_match(Loudness::Lufs(-26.0), Loudness::Lufs(-23.0)), Ok(3.0));
        assert!(gain_to_match(Loudness::Silence, Loudness::Lufs(-23.0)).is_err());
        assert!(gain_to_match(Loudness::Lufs(-23.0), Loudness::TooShort).is_err());
    }

    #[test]
    fn integrated_within_gated_block_range() {
        // stepped amplitudes so some blocks are gated out
        let sr = 48_000;
        let x: Vec<f64> = (0..sr * 4)
            .map(|i| {
                let amp = [0.5, 0.001, 0.2, 0.05][i / sr];
                amp * (2.0 * PI * 440.0 * i as f64 / sr as f64).sin()
            })
            .collect();
        let r = integrated_loudness(&AudioBuffer::new(sr as u32, vec![x]).unwrap()).unwrap();
        let l = r.integrated.lufs().unwrap();
        let vals: Vec<f64> = r.blocks.iter().filter_map(|b| b.lufs).filter(|&v| v > l - 10.0).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= l && l <= hi);
    }
}
