//! Supervised mask regression by mini-batch gradient descent.
//!
//! The loss is the mean squared error between `mask * |mix|` and
//! `|dialogue|` over time patches of normalized STFT magnitudes, divided by
//! the mean squared mix magnitude of the whole item.
//! Per-patch gradients may be computed in parallel and are reduced in patch
//! order. Runs are reproducible for a given seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::{activation_backward, conv_backward, magnitude_planes, MaskModel, Planes};
use super::synth::SynthItem;
use super::SeparationError;
use crate::audio_io::AudioBuffer;
use crate::spectral::{stft, StftConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub patch_frames: usize,
    pub patches_per_item: usize,
    pub seed: u64,
    pub stft: StftConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.03,
            momentum: 0.9,
            batch_size: 4,
            patch_frames: 24,
            patches_per_item: 4,
            seed: 0,
            stft: StftConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Loss over the fixed patch set before the first update.
    pub initial_loss: f64,
    /// Mean loss over the patch set during each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

/// Normalized mix and dialogue magnitudes of one item (or a patch of it).
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub mix: Planes,
    pub target: Planes,
    /// Reciprocal mean squared mix magnitude of the source item.
    pub loss_scale: f64,
}

impl Example {
    pub fn new(mix: &AudioBuffer, dialogue: &AudioBuffer, cfg: &StftConfig) -> Result<Self, SeparationError> {
        if !mix.same_shape(dialogue) {
            return Err(SeparationError::ShapeMismatch("mix and dialogue differ in shape".into()));
        }
        let mix = magnitude_planes(&stft(mix, cfg)?);
        let target = magnitude_planes(&stft(dialogue, cfg)?);
        let power = mix.data.iter().map(|x| x * x).sum::<f64>() / mix.data.len() as f64;
        let loss_scale = if power > 0.0 { 1.0 / power } else { 1.0 };
        Ok(Self { mix, target, loss_scale })
    }

    pub fn frames(&self) -> usize {
        self.mix.frames
    }

    pub fn patch(&self, start: usize, len: usize) -> Self {
        let end = (start + len).min(self.frames());
        Self {
            mix: self.mix.frame_range(start, end),
            target: self.target.frame_range(start, end),
            loss_scale: self.loss_scale,
        }
    }
}

fn masked_error<'a>(mask: &'a Planes, ex: &'a Example) -> impl Fn(usize, usize) -> (f64, f64) + 'a {
    let shared = mask.channels == 1;
    move |c, i| {
        let m = if shared { mask.plane(0)[i] } else { mask.plane(c)[i] };
        let x = ex.mix.plane(c)[i];
        (m * x - ex.target.plane(c)[i], x)
    }
}

fn mask_loss(mask: &Planes, ex: &Example) -> f64 {
    let n = ex.mix.data.len();
    let err = masked_error(mask, ex);
    let plane = ex.mix.frames * ex.mix.bins;
    let mut sum = 0.0;
    for c in 0..ex.mix.channels {
        for i in 0..plane {
            sum += err(c, i).0.powi(2);
        }
    }
    sum * ex.loss_scale / n as f64
}

/// Training loss of `model` on one example.
pub fn loss(model: &MaskModel, ex: &Example) -> f64 {
    mask_loss(&model.forward(&model.features(&ex.mix)), ex)
}

/// Loss and flat parameter gradient (layout of [`MaskModel::parameters`]).
pub fn loss_and_gradient(model: &MaskModel, ex: &Example) -> (f64, Vec<f64>) {
    let acts = model.forward_cached(model.features(&ex.mix));
    let mask = acts.last().unwrap();
    let value = mask_loss(mask, ex);

    // d loss / d mask
    let n = ex.mix.data.len() as f64 / ex.loss_scale;
    let err = masked_error(mask, ex);
    let plane = ex.mix.frames * ex.mix.bins;
    let mut grad = Planes::zeros(mask.channels, mask.frames, mask.bins);
    for c in 0..ex.mix.channels {
        let mc = if mask.channels == 1 { 0 } else { c };
        for i in 0..plane {
            let (e, x) = err(c, i);
            grad.plane_mut(mc)[i] += 2.0 * e * x / n;
        }
    }

    let layers = model.layers();
    let mut per_layer: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate().rev() {
        activation_backward(layer.spec.activation, &acts[l + 1], &mut grad);
        let (dw, db, dx) = conv_backward(&acts[l], layer, &grad, l > 0);
        per_layer.push((dw, db));
        if let Some(dx) = dx {
            grad = dx;
        }
    }
    per_layer.reverse();
    let flat = per_layer.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect();
    (value, flat)
}

/// Mean loss over whole items.
pub fn evaluate_loss(model: &MaskModel, examples: &[Example]) -> f64 {
    let total: f64 =
        examples.iter().map(|ex| mask_loss(&model.forward_chunked(&model.features(&ex.mix), 64), ex)).sum();
    total / examples.len() as f64
}

/// Trains `model` on synthetic items.
pub fn train_desk(
    mut model: MaskModel,
    dataset: &[SynthItem],
    cfg: &TrainConfig,
) -> Result<(MaskModel, TrainReport), SeparationError> {
    if dataset.is_empty() {
        return Err(SeparationError::InvalidDataset("empty dataset".into()));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || cfg.patch_frames == 0 || cfg.patches_per_item == 0 {
        return Err(SeparationError::InvalidDataset(
            "epochs, batch size, patch length and patches per item must be ≥ 1".into(),
        ));
    }
    let examples =
        dataset.iter().map(|item| Example::new(&item.mix, &item.dialogue, &cfg.stft)).collect::<Result<Vec<_>, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let patches: Vec<Example> = examples
        .iter()
        .flat_map(|ex| {
            let max_start = ex.frames().saturating_sub(cfg.patch_frames);
            (0..cfg.patches_per_item)
                .map(|_| ex.patch(rng.random_range(0..=max_start), cfg.patch_frames))
                .collect::<Vec<_>>()
        })
        .collect();

    let initial: Vec<f64> = patches.par_iter().map(|p| loss(&model, p)).collect();
    let initial_loss = initial.iter().sum::<f64>() / patches.len() as f64;
    if !initial_loss.is_finite() {
        return Err(SeparationError::Diverged { epoch: 0, last_finite_loss: None });
    }

    let mut velocity = vec![0.0; model.num_parameters()];
    let mut order: Vec<usize> = (0..patches.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut last_finite = initial_loss;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut patch_losses = vec![0.0; patches.len()];
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, Vec<f64>)> =
                batch.par_iter().map(|&i| loss_and_gradient(&model, &patches[i])).collect();
            let mut grad = vec![0.0; velocity.len()];
            for (&i, (l, g)) in batch.iter().zip(&results) {
                patch_losses[i] = *l;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            let scale = 1.0 / batch.len() as f64;
            let mut params = model.parameters();
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v - cfg.learning_rate * g * scale;
                *p += *v;
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(SeparationError::Diverged { epoch, last_finite_loss: Some(last_finite) });
            }
            model.set_parameters(&params)?;
        }
        let epoch_loss = patch_losses.iter().sum::<f64>() / patches.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(SeparationError::Diverged { epoch, last_finite_loss: Some(last_finite) });
        }
        last_finite = epoch_loss;
        epoch_losses.push(epoch_loss);
    }
    Ok((model, TrainReport { initial_loss, epoch_losses }))
}
