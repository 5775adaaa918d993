//! Dialogue/background separation.
//!
//! Every [`StemPair`] produced here is mixture-consistent: the background is
//! the sample-domain residual `mix - dialogue`, so the two stems add back to
//! the input up to a single rounding step.

mod boost;
mod center;
pub mod model;
pub mod synth;
pub mod train;

pub use boost::{speech_boost, BoostBand, DEFAULT_BOOST_DB};
pub use center::separate_center;
pub use model::{count_parameters, infer_mask, Activation, LayerSpec, MaskModel, MaskModelConfig};
pub use synth::{synth_dataset, BackgroundKind, SpeechProxy, SynthDatasetConfig, SynthItem};
pub use train::{train_desk, TrainConfig, TrainReport};

use thiserror::Error;

use crate::audio_io::{AudioBuffer, AudioIoError};
use crate::spectral::{istft, stft, SpectralError, StftConfig};

#[derive(Debug, Error)]
pub enum SeparationError {
    #[error("expected a stereo mix, got {0} channels")]
    NotStereo(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid model config: {0}")]
    InvalidModel(String),
    #[error("invalid boost: {0}")]
    InvalidBoost(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("training diverged at epoch {epoch}; last finite loss {last_finite_loss:?}")]
    Diverged { epoch: usize, last_finite_loss: Option<f64> },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Audio(#[from] AudioIoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dialogue and background components of one mix.
#[derive(Debug, Clone, PartialEq)]
pub struct StemPair {
    dialogue: AudioBuffer,
    background: AudioBuffer,
}

impl StemPair {
    /// Pairs stems that were obtained elsewhere (e.g. loaded from a package).
    pub fn new(dialogue: AudioBuffer, background: AudioBuffer) -> Result<Self, SeparationError> {
        if !dialogue.same_shape(&background) {
            return Err(SeparationError::ShapeMismatch(
                "dialogue and background differ in rate, channels or length".into(),
            ));
        }
        Ok(Self { dialogue, background })
    }

    /// Consistent pair whose background is `mix - dialogue`.
    pub fn from_residual(mix: &AudioBuffer, dialogue: AudioBuffer) -> Result<Self, SeparationError> {
        let background = mix.sub(&dialogue)?;
        Ok(Self { dialogue, background })
    }

    pub fn dialogue(&self) -> &AudioBuffer {
        &self.dialogue
    }

    pub fn background(&self) -> &AudioBuffer {
        &self.background
    }

    /// Length of the mix these stems were separated from.
    pub fn source_mix_length(&self) -> usize {
        self.dialogue.len()
    }

    /// `dialogue + background`.
    pub fn sum(&self) -> AudioBuffer {
        self.dialogue.add(&self.background).expect("stems share a shape")
    }

    /// Largest per-sample deviation of the stem sum from `mix`.
    pub fn consistency_error(&self, mix: &AudioBuffer) -> f64 {
        self.sum().max_abs_diff(mix)
    }

    pub fn into_parts(self) -> (AudioBuffer, AudioBuffer) {
        (self.dialogue, self.background)
    }
}

/// Real time-frequency gains in `[0, 1]`.
///
/// Holds either one grid shared by every signal channel or one grid per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    frames: usize,
    bins: usize,
    /// `[mask channel][frame * bins + bin]`
    gains: Vec<Vec<f64>>,
}

impl Mask {
    pub fn new(frames: usize, bins: usize, gains: Vec<Vec<f64>>) -> Result<Self, SeparationError> {
        if gains.is_empty() || gains.iter().any(|g| g.len() != frames * bins) {
            return Err(SeparationError::ShapeMismatch(format!("mask grids must hold {frames} x {bins} gains")));
        }
        if gains.iter().flatten().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(SeparationError::ShapeMismatch("mask gain outside [0, 1]".into()));
        }
        Ok(Self { frames, bins, gains })
    }

    pub fn constant(frames: usize, bins: usize, channels: usize, value: f64) -> Self {
        Self { frames, bins, gains: vec![vec![value.clamp(0.0, 1.0); frames * bins]; channels] }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn bins(&self) -> usize {
        self.bins
    }
    pub fn num_channels(&self) -> usize {
        self.gains.len()
    }
    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.gains[ch]
    }

    /// Grid applied to signal channel `ch`.
    pub fn for_signal_channel(&self, ch: usize) -> &[f64] {
        if self.gains.len() == 1 {
            &self.gains[0]
        } else {
            &self.gains[ch]
        }
    }
}

/// Masks the mix spectrogram to estimate dialogue; background is the residual.
pub fn apply_mask_consistent(mix: &AudioBuffer, mask: &Mask, cfg: &StftConfig) -> Result<StemPair, SeparationError> {
    let spec = stft(mix, cfg)?;
    if mask.frames != spec.num_frames()
        || mask.bins != spec.num_bins()
        || (mask.num_channels() != 1 && mask.num_channels() != spec.num_channels())
    {
        return Err(SeparationError::ShapeMismatch(format!(
            "mask is {}x{}x{}, spectrogram is {}x{}x{}",
            mask.num_channels(),
            mask.frames,
            mask.bins,
            spec.num_channels(),
            spec.num_frames(),
            spec.num_bins()
        )));
    }
    let masked = spec.map(|c, i, z| z * mask.for_signal_channel(c)[i]);
    let dialogue = istft(&masked)?;
    StemPair::from_residual(mix, dialogue)
}

/// Separation backend used by the processing pipeline.
#[derive(Debug, Clone)]
pub enum Separator {
    Center,
    Model(Box<MaskModel>),
}

impl Separator {
    pub fn separate(&self, mix: &AudioBuffer, cfg: &StftConfig) -> Result<StemPair, SeparationError> {
        match self {
            Separator::Center => separate_center(mix, cfg),
            Separator::Model(model) => {
                let spec = stft(mix, cfg)?;
                let mask = infer_mask(model, &spec)?;
                apply_mask_consistent(mix, &mask, cfg)
            }
        }
    }
}
