//! Synthetic dialogue/background training material.
//!
//! Dialogue is a centre-panned speech proxy: syllables of amplitude-shaped
//! harmonic complexes with formant emphasis, grouped into phrases separated by
//! pauses. Background is decorrelated coloured noise, sustained tone beds, or
//! both.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SeparationError;
use crate::audio_io::AudioBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechProxy {
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    /// Highest harmonic frequency generated.
    pub max_harmonic_hz: f64,
    pub syllable_ms: (f64, f64),
    pub syllables_per_phrase: (usize, usize),
    pub pause_ms: (f64, f64),
}

impl Default for SpeechProxy {
    fn default() -> Self {
        Self {
            f0_min_hz: 85.0,
            f0_max_hz: 300.0,
            max_harmonic_hz: 5_000.0,
            syllable_ms: (100.0, 250.0),
            syllables_per_phrase: (3, 8),
            pause_ms: (150.0, 600.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundKind {
    Silence,
    Noise,
    Music,
    NoiseAndMusic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDatasetConfig {
    pub items: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub speech: SpeechProxy,
    pub background: BackgroundKind,
    /// Dialogue-to-background energy ratio range in dB.
    pub snr_db: (f64, f64),
    /// Peak level of each generated mix.
    pub peak: f64,
    pub seed: u64,
}

impl Default for SynthDatasetConfig {
    fn default() -> Self {
        Self {
            items: 16,
            duration_s: 2.0,
            sample_rate: 48_000,
            speech: SpeechProxy::default(),
            background: BackgroundKind::NoiseAndMusic,
            snr_db: (-5.0, 5.0),
            peak: 0.5,
            seed: 0,
        }
    }
}

impl SynthDatasetConfig {
    fn validate(&self) -> Result<(), SeparationError> {
        let bad = |m: &str| Err(SeparationError::InvalidDataset(m.into()));
        if self.duration_s.is_nan() || self.duration_s <= 0.0 {
            return bad("duration must be positive");
        }
        if !self.snr_db.0.is_finite() || !self.snr_db.1.is_finite() || self.snr_db.0 > self.snr_db.1 {
            return bad("SNR range is empty");
        }
        let s = &self.speech;
        if !(0.0 < s.f0_min_hz && s.f0_min_hz <= s.f0_max_hz && s.f0_max_hz < s.max_harmonic_hz) {
            return bad("speech fundamental range is invalid");
        }
        if s.max_harmonic_hz >= f64::from(self.sample_rate) / 2.0 {
            return bad("speech harmonics exceed Nyquist");
        }
        if !(0.0 < s.syllable_ms.0 && s.syllable_ms.0 <= s.syllable_ms.1)
            || !(0.0 <= s.pause_ms.0 && s.pause_ms.0 <= s.pause_ms.1)
            || !(1 <= s.syllables_per_phrase.0 && s.syllables_per_phrase.0 <= s.syllables_per_phrase.1)
        {
            return bad("speech timing ranges are invalid");
        }
        if !(self.peak > 0.0 && self.peak <= 1.0) {
            return bad("peak must be in (0, 1]");
        }
        Ok(())
    }
}

/// One training example; `mix == dialogue + background` sample for sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub mix: AudioBuffer,
    pub dialogue: AudioBuffer,
    pub background: AudioBuffer,
    pub snr_db: f64,
}

/// Deterministic dataset; each item draws from its own RNG stream so items
/// do not depend on the item count.
pub fn synth_dataset(cfg: &SynthDatasetConfig) -> Result<Vec<SynthItem>, SeparationError> {
    cfg.validate()?;
    (0..cfg.items).map(|i| synth_item(cfg, i as u64)).collect()
}

fn synth_item(cfg: &SynthDatasetConfig, index: u64) -> Result<SynthItem, SeparationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let sr = f64::from(cfg.sample_rate);
    let n = (cfg.duration_s * sr).round().max(1.0) as usize;

    let speech = speech_proxy(&cfg.speech, n, sr, &mut rng);
    let mut dialogue = [speech.clone(), speech];
    let mut background = match cfg.background {
        BackgroundKind::Silence => [vec![0.0; n], vec![0.0; n]],
        BackgroundKind::Noise => coloured_noise(n, &mut rng),
        BackgroundKind::Music => tone_bed(n, sr, &mut rng),
        BackgroundKind::NoiseAndMusic => {
            let noise = coloured_noise(n, &mut rng);
            let music = tone_bed(n, sr, &mut rng);
            let (en, em) = (energy(&noise), energy(&music));
            let g = if en > 0.0 { (em / en).sqrt() } else { 0.0 };
            [0, 1].map(|c| noise[c].iter().zip(&music[c]).map(|(a, b)| g * a + b).collect())
        }
    };

    let snr_db =
        if cfg.snr_db.0 == cfg.snr_db.1 { cfg.snr_db.0 } else { rng.random_range(cfg.snr_db.0..=cfg.snr_db.1) };
    let (ed, eb) = (energy(&dialogue), energy(&background));
    if eb > 0.0 && ed > 0.0 {
        let g = (ed / (eb * 10f64.powf(snr_db / 10.0))).sqrt();
        background.iter_mut().flatten().for_each(|x| *x *= g);
    }

    let peak = dialogue
        .iter()
        .zip(&background)
        .flat_map(|(d, b)| d.iter().zip(b).map(|(x, y)| (x + y).abs()))
        .fold(0.0, f64::max);
    if peak > 0.0 {
        let g = cfg.peak / peak;
        dialogue.iter_mut().chain(background.iter_mut()).flatten().for_each(|x| *x *= g);
    }

    let mix = [0, 1].map(|c| dialogue[c].iter().zip(&background[c]).map(|(d, b)| d + b).collect());
    Ok(SynthItem {
        mix: AudioBuffer::new(cfg.sample_rate, mix.to_vec())?,
        dialogue: AudioBuffer::new(cfg.sample_rate, dialogue.to_vec())?,
        background: AudioBuffer::new(cfg.sample_rate, background.to_vec())?,
        snr_db,
    })
}

fn energy(chs: &[Vec<f64>; 2]) -> f64 {
    chs.iter().flatten().map(|x| x * x).sum()
}

fn speech_proxy(spec: &SpeechProxy, n: usize, sr: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let ms = |v: f64| (v * sr / 1000.0) as usize;
    // start with a short pause so items do not all begin mid-syllable
    let mut pos = ms(rng.random_range(0.0..=spec.pause_ms.1));
    while pos < n {
        let count = rng.random_range(spec.syllables_per_phrase.0..=spec.syllables_per_phrase.1);
        let base_f0 = rng.random_range(spec.f0_min_hz..=spec.f0_max_hz);
        for _ in 0..count {
            let len = ms(rng.random_range(spec.syllable_ms.0..=spec.syllable_ms.1));
            let f0_start = (base_f0 * rng.random_range(0.9..1.1)).clamp(spec.f0_min_hz, spec.f0_max_hz);
            let f0_end = (f0_start * rng.random_range(0.85..1.15)).clamp(spec.f0_min_hz, spec.f0_max_hz);
            let formants = [rng.random_range(400.0..900.0), rng.random_range(1_100.0..2_600.0)];
            let level = rng.random_range(0.5..1.0);
            syllable(&mut out, pos, len, (f0_start, f0_end), formants, level, spec.max_harmonic_hz, sr, rng);
            pos += len + ms(rng.random_range(20.0..60.0));
            if pos >= n {
                break;
            }
        }
        pos += ms(rng.random_range(spec.pause_ms.0..=spec.pause_ms.1));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn syllable(
    out: &mut [f64],
    start: usize,
    len: usize,
    f0: (f64, f64),
    formants: [f64; 2],
    level: f64,
    max_hz: f64,
    sr: f64,
    rng: &mut ChaCha8Rng,
) {
    let max_k = (max_hz / f0.0.max(f0.1)).floor() as usize;
    let phases: Vec<f64> = (0..max_k).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let mut phase_acc = 0.0;
    for i in 0..len.min(out.len().saturating_sub(start)) {
        let frac = i as f64 / len as f64;
        let f = f0.0 + (f0.1 - f0.0) * frac;
        phase_acc += 2.0 * PI * f / sr;
        let env = (PI * frac).sin().powi(2);
        let mut s = 0.0;
        for (k, ph) in phases.iter().enumerate() {
            let hk = (k + 1) as f64;
            let fk = hk * f;
            let emphasis: f64 = formants.iter().map(|&fm| 2.0 * (-((fk - fm) / 250.0).powi(2)).exp()).sum();
            s += (1.0 + emphasis) / hk * (hk * phase_acc + ph).sin();
        }
        out[start + i] += level * env * s;
    }
}

fn coloured_noise(n: usize, rng: &mut ChaCha8Rng) -> [Vec<f64>; 2] {
    let normal = Normal::new(0.0, 1.0).unwrap();
    // one-pole low-pass with a random corner shapes the spectral tilt
    let a = rng.random_range(0.0..0.9);
    [(), ()].map(|_| {
        let mut y = 0.0;
        (0..n)
            .map(|_| {
                y = a * y + (1.0 - a) * normal.sample(rng);
                y
            })
            .collect()
    })
}

fn tone_bed(n: usize, sr: f64, rng: &mut ChaCha8Rng) -> [Vec<f64>; 2] {
    let mut out = [vec![0.0; n], vec![0.0; n]];
    let mut pos = 0;
    while pos < n {
        let len = (rng.random_range(0.5..2.0) * sr) as usize;
        let fade = (0.05 * sr) as usize;
        for _ in 0..3 {
            let midi = rng.random_range(40..76) as f64;
            let freq = 440.0 * 2f64.powf((midi - 69.0) / 12.0);
            let pan = rng.random_range(0.0..1.0f64);
            let gains = [(pan * PI / 2.0).cos(), (pan * PI / 2.0).sin()];
            let phase = rng.random_range(0.0..2.0 * PI);
            for i in 0..len.min(n - pos) {
                let env = (i.min(len - i) as f64 / fade as f64).min(1.0);
                let t = i as f64 / sr;
                let s: f64 = (1..=6)
                    .map(|h| {
                        let h = h as f64;
                        (2.0 * PI * freq * h * t + phase * h).sin() * 0.6f64.powf(h - 1.0)
                    })
                    .sum();
                for c in 0..2 {
                    out[c][pos + i] += gains[c] * env * s;
                }
            }
        }
        pos += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthDatasetConfig {
        SynthDatasetConfig { items: 3, duration_s: 0.5, seed, ..Default::default() }
    }

    #[test]
    fn deterministic_given_seed() {
        assert_eq!(synth_dataset(&small(4)).unwrap(), synth_dataset(&small(4)).unwrap());
        assert_ne!(synth_dataset(&small(4)).unwrap(), synth_dataset(&small(5)).unwrap());
    }

    #[test]
    fn mix_is_exact_sum() {
        for item in synth_dataset(&small(1)).unwrap() {
            let sum = item.dialogue.add(&item.background).unwrap();
            assert_eq!(sum, item.mix);
        }
    }

    #[test]
    fn silent_background_leaves_dialogue() {
        let cfg = SynthDatasetConfig { background: BackgroundKind::Silence, ..small(2) };
        for item in synth_dataset(&cfg).unwrap() {
            assert_eq!(item.mix, item.dialogue);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(synth_dataset(&SynthDatasetConfig { duration_s: 0.0, ..small(0) }).is_err());
        assert!(synth_dataset(&SynthDatasetConfig { snr_db: (3.0, -3.0), ..small(0) }).is_err());
    }
}
