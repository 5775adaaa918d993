//! Background ducking and loudness-restoring remix.
//!
//! The background stem is attenuated by a fixed global amount, plus an extra
//! amount while the dialogue stem is active. The result is brought back to
//! the integrated loudness of the original mix with one scalar makeup gain.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{AudioBuffer, AudioIoError};
use crate::loudness::{db_to_gain, gain_to_match, integrated_loudness, Loudness, LoudnessError};
use crate::separation::StemPair;
use crate::spectral::StftConfig;

/// Frame energy used for digital silence.
const SILENCE_DB: f64 = -200.0;

#[derive(Debug, Error)]
pub enum RemixError {
    #[error("unknown preset \"{0}\"")]
    PresetNotFound(String),
    #[error("duplicate preset name \"{0}\"")]
    DuplicatePreset(String),
    #[error("invalid remix parameters: {0}")]
    InvalidParams(String),
    #[error("preset config: {0}")]
    Config(String),
    #[error(transparent)]
    Loudness(#[from] LoudnessError),
    #[error(transparent)]
    Audio(#[from] AudioIoError),
}

/// Energy-threshold voice activity detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VadConfig {
    /// Threshold above the tracked noise floor.
    pub offset_db: f64,
    /// Threshold never drops below this level.
    pub absolute_floor_db: f64,
    pub hangover_ms: f64,
    /// How fast the noise floor may creep upwards.
    pub floor_rise_db_per_s: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self { offset_db: 12.0, absolute_floor_db: -60.0, hangover_ms: 200.0, floor_rise_db_per_s: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemixParams {
    pub global_atten_db: f64,
    pub duck_extra_db: f64,
    #[serde(default = "default_attack")]
    pub attack_ms: f64,
    #[serde(default = "default_release")]
    pub release_ms: f64,
    #[serde(default)]
    pub vad: VadConfig,
}

fn default_attack() -> f64 {
    20.0
}
fn default_release() -> f64 {
    300.0
}

impl RemixParams {
    pub fn new(global_atten_db: f64, duck_extra_db: f64) -> Self {
        Self {
            global_atten_db,
            duck_extra_db,
            attack_ms: default_attack(),
            release_ms: default_release(),
            vad: VadConfig::default(),
        }
    }

    /// Leaves the mix untouched.
    pub fn identity() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn validate(&self) -> Result<(), RemixError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.global_atten_db) || !ok(self.duck_extra_db) {
            return Err(RemixError::InvalidParams("attenuation must be ≥ 0 dB".into()));
        }
        if !(self.attack_ms > 0.0 && self.release_ms > 0.0 && self.vad.hangover_ms >= 0.0) {
            return Err(RemixError::InvalidParams("envelope times must be > 0".into()));
        }
        if self.vad.floor_rise_db_per_s.is_nan() || self.vad.floor_rise_db_per_s < 0.0 {
            return Err(RemixError::InvalidParams("noise floor rise must be ≥ 0".into()));
        }
        Ok(())
    }

    pub fn inactive_gain(&self) -> f64 {
        db_to_gain(-self.global_atten_db)
    }

    pub fn active_gain(&self) -> f64 {
        db_to_gain(-(self.global_atten_db + self.duck_extra_db))
    }
}

/// Named parameter set selectable by listeners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    /// Display label (e.g. an English rendering of the name).
    #[serde(default)]
    pub label: String,
    #[serde(flatten)]
    pub params: RemixParams,
}

pub const PRESET_EMPHASIZED: &str = "Sprache betont";
pub const PRESET_EMPHASIZED_MORE: &str = "Sprache stärker betont";

/// Presets keyed by unique name.
///
/// Serialized as TOML, one `[[preset]]` table per entry:
///
/// ```toml
/// [[preset]]
/// name = "Sprache betont"
/// label = "speech emphasized"
/// global_atten_db = 3.0
/// duck_extra_db = 6.0
/// attack_ms = 20.0        # optional
/// release_ms = 300.0      # optional
///
/// [preset.vad]            # optional, every key optional
/// offset_db = 12.0
/// absolute_floor_db = -60.0
/// hangover_ms = 200.0
/// floor_rise_db_per_s = 1.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetRegistry {
    #[serde(rename = "preset", default)]
    presets: Vec<Preset>,
}

impl Default for PresetRegistry {
    fn default() -> Self {
        preset_registry()
    }
}

impl PresetRegistry {
    pub fn empty() -> Self {
        Self { presets: Vec::new() }
    }

    pub fn insert(&mut self, preset: Preset) -> Result<(), RemixError> {
        if self.presets.iter().any(|p| p.name == preset.name) {
            return Err(RemixError::DuplicatePreset(preset.name));
        }
        preset.params.validate()?;
        self.presets.push(preset);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Preset, RemixError> {
        self.presets.iter().find(|p| p.name == name).ok_or_else(|| RemixError::PresetNotFound(name.to_string()))
    }

    pub fn presets(&self) -> &[Preset] {
        &self.presets
    }

    pub fn from_toml(text: &str) -> Result<Self, RemixError> {
        let parsed: PresetRegistry = toml::from_str(text).map_err(|e| RemixError::Config(e.to_string()))?;
        let mut reg = Self::empty();
        for p in parsed.presets {
            reg.insert(p)?;
        }
        Ok(reg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("registry serializes")
    }
}

/// Built-in presets. The stronger one attenuates more both globally and
/// while dialogue is active.
pub fn preset_registry() -> PresetRegistry {
    let mut reg = PresetRegistry::empty();
    reg.insert(Preset {
        name: PRESET_EMPHASIZED.into(),
        label: "speech emphasized".into(),
        params: RemixParams::new(3.0, 6.0),
    })
    .unwrap();
    reg.insert(Preset {
        name: PRESET_EMPHASIZED_MORE.into(),
        label: "speech emphasized more strongly".into(),
        params: RemixParams::new(6.0, 12.0),
    })
    .unwrap();
    reg
}

/// Per-frame dialogue activity on the STFT frame grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityTrack {
    /// Activity per frame, 0.0 or 1.0.
    pub values: Vec<f64>,
    pub frame_energy_db: Vec<f64>,
    pub stft: StftConfig,
    pub sample_rate: u32,
    pub signal_len: usize,
}

impl ActivityTrack {
    pub fn is_active(&self, frame: usize) -> bool {
        self.values[frame] > 0.5
    }

    pub fn frame_center(&self, frame: usize) -> f64 {
        self.stft.frame_center(frame)
    }

    pub fn active_frames(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.5).count()
    }
}

/// Mean-square level (dBFS) of each STFT frame, averaged over channels.
pub fn frame_energy_db(buf: &AudioBuffer, cfg: &StftConfig) -> Vec<f64> {
    let frames = cfg.num_frames(buf.len());
    let n = cfg.frame_length;
    (0..frames)
        .map(|k| {
            let start = cfg.frame_start(k).max(0) as usize;
            let end = ((cfg.frame_start(k) + n as isize).max(0) as usize).min(buf.len());
            let sum: f64 =
                buf.channels().iter().map(|ch| ch[start.min(end)..end].iter().map(|x| x * x).sum::<f64>()).sum();
            let ms = sum / (n * buf.num_channels()) as f64;
            if ms > 0.0 {
                (10.0 * ms.log10()).max(SILENCE_DB)
            } else {
                SILENCE_DB
            }
        })
        .collect()
}

/// Marks frames whose level exceeds an adaptive threshold.
///
/// The threshold is `max(noise_floor + offset, absolute_floor)`. The noise
/// floor starts at the absolute floor, follows the frame level down
/// immediately and rises at most `floor_rise_db_per_s`. Activity is held for
/// the hangover time after the last active frame.
pub fn detect_activity(dialogue: &AudioBuffer, cfg: &StftConfig, vad: &VadConfig) -> ActivityTrack {
    let energy = frame_energy_db(dialogue, cfg);
    let frame_s = cfg.hop as f64 / f64::from(dialogue.sample_rate());
    let rise = vad.floor_rise_db_per_s * frame_s;
    let hangover = (vad.hangover_ms / 1000.0 / frame_s).ceil() as usize;

    let mut floor = vad.absolute_floor_db;
    let mut hold = 0usize;
    let values = energy
        .iter()
        .map(|&e| {
            let threshold = (floor + vad.offset_db).max(vad.absolute_floor_db);
            floor = if e < floor { e } else { (floor + rise).min(e) };
            if e > threshold {
                hold = hangover;
                1.0
            } else if hold > 0 {
                hold -= 1;
                1.0
            } else {
                0.0
            }
        })
        .collect();
    ActivityTrack {
        values,
        frame_energy_db: energy,
        stft: *cfg,
        sample_rate: dialogue.sample_rate(),
        signal_len: dialogue.len(),
    }
}

/// One-pole coefficient for a time constant at the frame rate.
pub fn one_pole_coefficient(time_ms: f64, hop: usize, sample_rate: u32) -> f64 {
    (-(hop as f64) / (time_ms / 1000.0 * f64::from(sample_rate))).exp()
}

/// Smoothed linear gain per frame.
pub fn frame_gains(activity: &ActivityTrack, p: &RemixParams) -> Vec<f64> {
    let (idle, ducked) = (p.inactive_gain(), p.active_gain());
    let attack = one_pole_coefficient(p.attack_ms, activity.stft.hop, activity.sample_rate);
    let release = one_pole_coefficient(p.release_ms, activity.stft.hop, activity.sample_rate);
    let mut state = idle;
    activity
        .values
        .iter()
        .map(|&a| {
            let target = if a > 0.5 { ducked } else { idle };
            let coef = if target < state { attack } else { release };
            state = target + (state - target) * coef;
            state
        })
        .collect()
}

/// Per-sample background gain, linearly interpolated between frame centres.
pub fn ducking_gain_curve(activity: &ActivityTrack, p: &RemixParams) -> Vec<f64> {
    let gains = frame_gains(activity, p);
    let cfg = activity.stft;
    let first = activity.frame_center(0);
    let last_idx = gains.len() - 1;
    (0..activity.signal_len)
        .map(|n| {
            let pos = (n as f64 - first) / cfg.hop as f64;
            if pos <= 0.0 {
                gains[0]
            } else if pos >= last_idx as f64 {
                gains[last_idx]
            } else {
                let k = pos.floor() as usize;
                let frac = pos - k as f64;
                gains[k] + (gains[k + 1] - gains[k]) * frac
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemixReport {
    pub makeup_gain_db: f64,
    #[serde(with = "loudness_serde")]
    pub loudness_before: Loudness,
    #[serde(with = "loudness_serde")]
    pub loudness_after: Loudness,
    /// Samples beyond ±1.0 after makeup (no limiter is applied).
    pub clipped_samples: usize,
    pub peak: f64,
    pub active_frames: usize,
    pub total_frames: usize,
}

/// Loudness as a number, or a string sentinel.
pub mod loudness_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::loudness::Loudness;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Lufs(f64),
        Sentinel(String),
    }

    pub fn serialize<S: Serializer>(l: &Loudness, s: S) -> Result<S::Ok, S::Error> {
        match l {
            Loudness::Lufs(v) => Repr::Lufs(*v),
            Loudness::Silence => Repr::Sentinel("silence".into()),
            Loudness::TooShort => Repr::Sentinel("too_short".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Loudness, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Lufs(v) => Ok(Loudness::Lufs(v)),
            Repr::Sentinel(s) if s == "silence" => Ok(Loudness::Silence),
            Repr::Sentinel(s) if s == "too_short" => Ok(Loudness::TooShort),
            Repr::Sentinel(s) => Err(serde::de::Error::custom(format!("unknown loudness sentinel {s}"))),
        }
    }
}

impl fmt::Display for RemixReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "loudness {} -> {}, makeup {:+.2} dB, {} clipped samples",
            self.loudness_before, self.loudness_after, self.makeup_gain_db, self.clipped_samples
        )
    }
}

/// Attenuates the background, then restores the loudness of the original mix.
///
/// The dialogue stem is only ever scaled by the scalar makeup gain.
pub fn remix(stems: &StemPair, p: &RemixParams, cfg: &StftConfig) -> Result<(AudioBuffer, RemixReport), RemixError> {
    p.validate()?;
    let activity = detect_activity(stems.dialogue(), cfg, &p.vad);
    let envelope = ducking_gain_curve(&activity, p);

    let background = stems.background();
    let ducked = AudioBuffer::new(
        background.sample_rate(),
        background.channels().iter().map(|ch| ch.iter().zip(&envelope).map(|(x, g)| x * g).collect()).collect(),
    )?;
    let raw = stems.dialogue().add(&ducked)?;

    let before = integrated_loudness(&stems.sum())?.integrated;
    let raw_loudness = integrated_loudness(&raw)?.integrated;
    let makeup_gain_db = gain_to_match(raw_loudness, before).unwrap_or(0.0);
    let out = if makeup_gain_db == 0.0 { raw } else { raw.scaled(db_to_gain(makeup_gain_db)) };
    let after = integrated_loudness(&out)?.integrated;

    let clipped_samples = out.channels().iter().flatten().filter(|x| x.abs() > 1.0).count();
    let report = RemixReport {
        makeup_gain_db,
        loudness_before: before,
        loudness_after: after,
        clipped_samples,
        peak: out.peak(),
        active_frames: activity.active_frames(),
        total_frames: activity.values.len(),
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(values: Vec<f64>) -> ActivityTrack {
        let cfg = StftConfig::default();
        let len = (values.len() - 1) * cfg.hop;
        assert_eq!(cfg.num_frames(len), values.len());
        ActivityTrack {
            frame_energy_db: vec![0.0; values.len()],
            values,
            stft: cfg,
            sample_rate: 48_000,
            signal_len: len,
        }
    }

    #[test]
    fn registry_contents() {
        let reg = preset_registry();
        let a = reg.get(PRESET_EMPHASIZED).unwrap().params;
        let b = reg.get(PRESET_EMPHASIZED_MORE).unwrap().params;
        assert!(b.global_atten_db + b.duck_extra_db > a.global_atten_db + a.duck_extra_db);
        assert!(b.global_atten_db > a.global_atten_db && b.duck_extra_db > a.duck_extra_db);
        assert!(matches!(reg.get("Lauter"), Err(RemixError::PresetNotFound(n)) if n == "Lauter"));
    }

    #[test]
    fn registry_toml_round_trip_and_duplicates() {
        let reg = preset_registry();
        assert_eq!(PresetRegistry::from_toml(&reg.to_toml()).unwrap(), reg);
        let dup = "[[preset]]\nname='x'\nglobal_atten_db=1.0\nduck_extra_db=1.0\n\
                   [[preset]]\nname='x'\nglobal_atten_db=2.0\nduck_extra_db=1.0\n";
        assert!(matches!(PresetRegistry::from_toml(dup), Err(RemixError::DuplicatePreset(_))));
        let minimal = "[[preset]]\nname='y'\nglobal_atten_db=1.0\nduck_extra_db=2.0\n";
        let r = PresetRegistry::from_toml(minimal).unwrap();
        assert_eq!(r.get("y").unwrap().params.attack_ms, 20.0);
        assert_eq!(r.get("y").unwrap().params.vad, VadConfig::default());
        let negative = "[[preset]]\nname='z'\nglobal_atten_db=-1.0\nduck_extra_db=2.0\n";
        assert!(matches!(PresetRegistry::from_toml(negative), Err(RemixError::InvalidParams(_))));
    }

    #[test]
    fn inactive_envelope_is_global_gain() {
        let p = RemixParams::new(3.0, 6.0);
        let env = ducking_gain_curve(&track(vec![0.0; 40]), &p);
        assert!(env.iter().all(|&g| g == p.inactive_gain()));
        assert!((p.inactive_gain() - 0.708).abs() < 1e-3);
    }

    #[test]
    fn active_envelope_settles_at_duck_gain() {
        let p = RemixParams::new(3.0, 6.0);
        let env = ducking_gain_curve(&track(vec![1.0; 100]), &p);
        let last = *env.last().unwrap();
        assert!((last - p.active_gain()).abs() < 1e-9);
        assert!((p.active_gain() - 0.355).abs() < 1e-3);
        assert!(env[0] > last);
    }

    #[test]
    fn identity_params_give_unit_envelope() {
        let values = (0..60).map(|k| if (20..30).contains(&k) { 1.0 } else { 0.0 }).collect();
        let env = ducking_gain_curve(&track(values), &RemixParams::identity());
        assert!(env.iter().all(|&g| g == 1.0));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(RemixParams::new(-1.0, 0.0).validate().is_err());
        let mut p = RemixParams::new(1.0, 0.0);
        p.attack_ms = 0.0;
        assert!(p.validate().is_err());
    }
}
