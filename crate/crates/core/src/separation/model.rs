//! Fully-convolutional mask estimator over stereo STFT magnitudes.
//!
//! All convolutions are stride 1 with "same" zero padding over the
//! (time x frequency) plane, so the mask has the shape of the input
//! spectrogram whatever its length.
//!
//! # Checkpoint format (version 1)
//!
//! All integers are little-endian `u32`, all parameters little-endian IEEE
//! `f64`:
//!
//! ```text
//! magic        4 bytes  "DEMM"
//! version      u32      1
//! config_len   u32      byte length of the JSON config that follows
//! config       UTF-8 JSON serialization of MaskModelConfig
//! num_layers   u32
//! per layer:
//!   out_ch, in_ch, kernel_time, kernel_freq   4 x u32
//!   weights    out_ch*in_ch*kernel_time*kernel_freq f64, row-major [out][in][t][f]
//!   bias       out_ch f64
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Mask, SeparationError};
use crate::spectral::Spectrogram;

const CHECKPOINT_MAGIC: &[u8; 4] = b"DEMM";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Frames per inference chunk (excluding the receptive-field halo).
const INFERENCE_CHUNK_FRAMES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_time: usize,
    pub kernel_freq: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: (usize, usize), activation: Activation) -> Self {
        Self { in_channels, out_channels, kernel_time: kernel.0, kernel_freq: kernel.1, activation }
    }

    fn num_weights(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_time * self.kernel_freq
    }
}

/// Input feature transform: `log1p(gain * |X|)` or `gain * |X|`, where `|X|`
/// is the STFT magnitude normalized to sine amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub log_compress: bool,
    pub gain: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self { log_compress: true, gain: 1000.0 }
    }
}

impl FeatureSpec {
    pub fn apply(&self, normalized_magnitude: f64) -> f64 {
        let v = self.gain * normalized_magnitude;
        if self.log_compress {
            v.ln_1p()
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskModelConfig {
    pub layers: Vec<LayerSpec>,
    pub features: FeatureSpec,
}

impl Default for MaskModelConfig {
    /// Six-layer network of about 366k parameters over stereo magnitudes.
    fn default() -> Self {
        use Activation::*;
        Self {
            layers: vec![
                LayerSpec::new(2, 32, (3, 5), Relu),
                LayerSpec::new(32, 64, (3, 5), Relu),
                LayerSpec::new(64, 128, (3, 3), Relu),
                LayerSpec::new(128, 128, (3, 3), Relu),
                LayerSpec::new(128, 96, (3, 3), Relu),
                LayerSpec::new(96, 2, (3, 3), Sigmoid),
            ],
            features: FeatureSpec::default(),
        }
    }
}

impl MaskModelConfig {
    /// Small network for desk-scale training runs.
    pub fn compact() -> Self {
        use Activation::*;
        Self {
            layers: vec![
                LayerSpec::new(2, 12, (3, 5), Relu),
                LayerSpec::new(12, 12, (3, 5), Relu),
                LayerSpec::new(12, 12, (3, 3), Relu),
                LayerSpec::new(12, 2, (3, 3), Sigmoid),
            ],
            features: FeatureSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SeparationError> {
        let bad = |m: String| Err(SeparationError::InvalidModel(m));
        let (Some(first), Some(last)) = (self.layers.first(), self.layers.last()) else {
            return bad("no layers".into());
        };
        if last.activation != Activation::Sigmoid {
            return bad("last layer must use a sigmoid".into());
        }
        if last.out_channels != 1 && last.out_channels != first.in_channels {
            return bad(format!(
                "mask channels {} must be 1 or match the {} input channels",
                last.out_channels, first.in_channels
            ));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_channels == 0 || l.out_channels == 0 {
                return bad(format!("layer {i} has zero channels"));
            }
            if l.kernel_time % 2 == 0 || l.kernel_freq % 2 == 0 {
                return bad(format!("layer {i} kernel must have odd extents"));
            }
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_channels != pair[1].in_channels {
                return bad(format!(
                    "layer {i} outputs {} channels but layer {} expects {}",
                    pair[0].out_channels,
                    i + 1,
                    pair[1].in_channels
                ));
            }
        }
        if !(self.features.gain > 0.0 && self.features.gain.is_finite()) {
            return bad("feature gain must be positive".into());
        }
        Ok(())
    }

    pub fn input_channels(&self) -> usize {
        self.layers[0].in_channels
    }

    pub fn mask_channels(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_channels)
    }

    /// Frames of context on each side that influence one output frame.
    pub fn time_radius(&self) -> usize {
        self.layers.iter().map(|l| l.kernel_time / 2).sum()
    }
}

/// Trainable parameters including biases.
pub fn count_parameters(cfg: &MaskModelConfig) -> usize {
    cfg.layers.iter().map(|l| (l.kernel_time * l.kernel_freq * l.in_channels + 1) * l.out_channels).sum()
}

/// Channel-major stack of (time x frequency) planes.
#[derive(Debug, Clone, PartialEq)]
pub struct Planes {
    pub channels: usize,
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<f64>,
}

impl Planes {
    pub fn zeros(channels: usize, frames: usize, bins: usize) -> Self {
        Self { channels, frames, bins, data: vec![0.0; channels * frames * bins] }
    }

    fn plane_len(&self) -> usize {
        self.frames * self.bins
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Frames `[start, end)` of every plane.
    pub fn frame_range(&self, start: usize, end: usize) -> Self {
        let mut out = Self::zeros(self.channels, end - start, self.bins);
        for c in 0..self.channels {
            out.plane_mut(c).copy_from_slice(&self.plane(c)[start * self.bins..end * self.bins]);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub spec: LayerSpec,
    /// Row-major `[out][in][time][freq]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    fn zeros(spec: LayerSpec) -> Self {
        Self { spec, weights: vec![0.0; spec.num_weights()], bias: vec![0.0; spec.out_channels] }
    }

    fn weight_index(&self, oc: usize, ic: usize, dt: usize, df: usize) -> usize {
        let s = &self.spec;
        ((oc * s.in_channels + ic) * s.kernel_time + dt) * s.kernel_freq + df
    }
}

/// Valid output range `[lo, hi)` for a kernel tap shifted by `offset`.
fn tap_range(offset: isize, len: usize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi = (len as isize - offset).clamp(0, len as isize) as usize;
    (lo, hi.max(lo))
}

/// Calls `f(dt, df, t_offset, f_offset)` for every tap of a layer's kernel.
fn for_each_tap(spec: &LayerSpec, mut f: impl FnMut(usize, usize, isize, isize)) {
    let pt = (spec.kernel_time / 2) as isize;
    let pf = (spec.kernel_freq / 2) as isize;
    for dt in 0..spec.kernel_time {
        for df in 0..spec.kernel_freq {
            f(dt, df, dt as isize - pt, df as isize - pf);
        }
    }
}

/// Pre-activation output of a same-padded convolution.
pub(crate) fn conv_forward(x: &Planes, layer: &ConvLayer) -> Planes {
    let spec = &layer.spec;
    let (tn, fnb) = (x.frames, x.bins);
    let mut out = Planes::zeros(spec.out_channels, tn, fnb);
    for oc in 0..spec.out_channels {
        let out_plane = out.plane_mut(oc);
        out_plane.fill(layer.bias[oc]);
        for ic in 0..spec.in_channels {
            let in_plane = x.plane(ic);
            for_each_tap(spec, |dt, df, so, fo| {
                let w = layer.weights[layer.weight_index(oc, ic, dt, df)];
                let (t_lo, t_hi) = tap_range(so, tn);
                let (f_lo, f_hi) = tap_range(fo, fnb);
                for t in t_lo..t_hi {
                    let ti = (t as isize + so) as usize;
                    let orow = &mut out_plane[t * fnb + f_lo..t * fnb + f_hi];
                    let start = ti * fnb + (f_lo as isize + fo) as usize;
                    let irow = &in_plane[start..start + (f_hi - f_lo)];
                    for (o, &i) in orow.iter_mut().zip(irow) {
                        *o += w * i;
                    }
                }
            });
        }
    }
    out
}

/// Gradients of one layer given the gradient w.r.t. its pre-activation
/// output. Returns (weight grads, bias grads, input grads when requested).
pub(crate) fn conv_backward(
    x: &Planes,
    layer: &ConvLayer,
    dz: &Planes,
    want_input_grad: bool,
) -> (Vec<f64>, Vec<f64>, Option<Planes>) {
    let spec = &layer.spec;
    let (tn, fnb) = (x.frames, x.bins);
    let mut dw = vec![0.0; layer.weights.len()];
    let db: Vec<f64> = (0..spec.out_channels).map(|oc| dz.plane(oc).iter().sum()).collect();
    let mut dx = want_input_grad.then(|| Planes::zeros(spec.in_channels, tn, fnb));

    for oc in 0..spec.out_channels {
        let g_plane = dz.plane(oc);
        for ic in 0..spec.in_channels {
            let in_plane = x.plane(ic);
            for_each_tap(spec, |dt, df, so, fo| {
                let wi = layer.weight_index(oc, ic, dt, df);
                let w = layer.weights[wi];
                let (t_lo, t_hi) = tap_range(so, tn);
                let (f_lo, f_hi) = tap_range(fo, fnb);
                let mut acc = 0.0;
                for t in t_lo..t_hi {
                    let ti = (t as isize + so) as usize;
                    let grow = &g_plane[t * fnb + f_lo..t * fnb + f_hi];
                    let start = ti * fnb + (f_lo as isize + fo) as usize;
                    let irow = &in_plane[start..start + (f_hi - f_lo)];
                    acc += grow.iter().zip(irow).map(|(g, i)| g * i).sum::<f64>();
                    if let Some(dx) = dx.as_mut() {
                        let drow = &mut dx.plane_mut(ic)[start..start + (f_hi - f_lo)];
                        for (d, &g) in drow.iter_mut().zip(grow) {
                            *d += w * g;
                        }
                    }
                }
                dw[wi] += acc;
            });
        }
    }
    (dw, db, dx)
}

fn activate(z: &mut Planes, act: Activation) {
    match act {
        Activation::Relu => z.data.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Sigmoid => z.data.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp())),
    }
}

/// Converts an upstream gradient w.r.t. activations into one w.r.t.
/// pre-activations, given the activations themselves.
pub(crate) fn activation_backward(act: Activation, a: &Planes, da: &mut Planes) {
    match act {
        Activation::Relu => {
            for (g, &y) in da.data.iter_mut().zip(&a.data) {
                if y <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        Activation::Sigmoid => {
            for (g, &y) in da.data.iter_mut().zip(&a.data) {
                *g *= y * (1.0 - y);
            }
        }
    }
}

/// Mask network with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskModel {
    config: MaskModelConfig,
    layers: Vec<ConvLayer>,
}

impl MaskModel {
    /// Seeded He-uniform initialization with zero biases.
    pub fn init(config: MaskModelConfig, seed: u64) -> Result<Self, SeparationError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config
            .layers
            .iter()
            .map(|&spec| {
                let mut layer = ConvLayer::zeros(spec);
                let fan_in = (spec.in_channels * spec.kernel_time * spec.kernel_freq) as f64;
                let limit = match spec.activation {
                    Activation::Relu => (6.0 / fan_in).sqrt(),
                    Activation::Sigmoid => (3.0 / fan_in).sqrt(),
                };
                layer.weights.iter_mut().for_each(|w| *w = rng.random_range(-limit..limit));
                layer
            })
            .collect();
        Ok(Self { config, layers })
    }

    /// All parameters zero (final sigmoid therefore outputs 0.5).
    pub fn zeros(config: MaskModelConfig) -> Result<Self, SeparationError> {
        config.validate()?;
        let layers = config.layers.iter().map(|&s| ConvLayer::zeros(s)).collect();
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &MaskModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat parameter vector: per layer, weights then biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<(), SeparationError> {
        if params.len() != self.num_parameters() {
            return Err(SeparationError::ShapeMismatch(format!(
                "{} parameters given, model has {}",
                params.len(),
                self.num_parameters()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    /// Input features from normalized magnitudes.
    pub fn features(&self, magnitudes: &Planes) -> Planes {
        let mut f = magnitudes.clone();
        f.data.iter_mut().for_each(|v| *v = self.config.features.apply(*v));
        f
    }

    /// Forward pass returning every layer's activation; entry 0 is the input.
    pub(crate) fn forward_cached(&self, input: Planes) -> Vec<Planes> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input);
        for layer in &self.layers {
            let mut z = conv_forward(acts.last().unwrap(), layer);
            activate(&mut z, layer.spec.activation);
            acts.push(z);
        }
        acts
    }

    /// Mask planes for a feature stack.
    pub fn forward(&self, input: &Planes) -> Planes {
        let mut x = conv_forward(input, &self.layers[0]);
        activate(&mut x, self.layers[0].spec.activation);
        for layer in &self.layers[1..] {
            let mut z = conv_forward(&x, layer);
            activate(&mut z, layer.spec.activation);
            x = z;
        }
        x
    }

    /// Forward pass in time chunks with enough halo that results equal a
    /// whole-signal pass while memory stays bounded.
    pub fn forward_chunked(&self, input: &Planes, chunk: usize) -> Planes {
        let radius = self.config.time_radius();
        let mut out = Planes::zeros(self.config.mask_channels(), input.frames, input.bins);
        let mut start = 0;
        while start < input.frames {
            let end = (start + chunk).min(input.frames);
            let lo = start.saturating_sub(radius);
            let hi = (end + radius).min(input.frames);
            let part = self.forward(&input.frame_range(lo, hi));
            for c in 0..out.channels {
                let src = &part.plane(c)[(start - lo) * input.bins..(end - lo) * input.bins];
                out.plane_mut(c)[start * input.bins..end * input.bins].copy_from_slice(src);
            }
            start = end;
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let config = serde_json::to_vec(&self.config).expect("config serializes");
        let mut out = Vec::with_capacity(16 + config.len() + self.num_parameters() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(&config);
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            let s = l.spec;
            for dim in [s.out_channels, s.in_channels, s.kernel_time, s.kernel_freq] {
                out.extend_from_slice(&(dim as u32).to_le_bytes());
            }
            for v in l.weights.iter().chain(&l.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SeparationError> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(SeparationError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(SeparationError::Checkpoint(format!("unsupported version {version}")));
        }
        let config_len = r.u32()? as usize;
        let config: MaskModelConfig = serde_json::from_slice(r.take(config_len)?)
            .map_err(|e| SeparationError::Checkpoint(format!("config: {e}")))?;
        let mut model = Self::zeros(config)?;
        let num_layers = r.u32()? as usize;
        if num_layers != model.layers.len() {
            return Err(SeparationError::Checkpoint(format!(
                "{num_layers} layers stored, config has {}",
                model.layers.len()
            )));
        }
        for (i, l) in model.layers.iter_mut().enumerate() {
            let s = l.spec;
            let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|d| d as usize);
            if dims != [s.out_channels, s.in_channels, s.kernel_time, s.kernel_freq] {
                return Err(SeparationError::Checkpoint(format!("layer {i} shape {dims:?} disagrees with config")));
            }
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = r.f64()?;
                if !v.is_finite() {
                    return Err(SeparationError::Checkpoint(format!("non-finite parameter in layer {i}")));
                }
            }
        }
        if r.pos != bytes.len() {
            return Err(SeparationError::Checkpoint("trailing bytes".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SeparationError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SeparationError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SeparationError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| SeparationError::Checkpoint("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, SeparationError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, SeparationError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Scale that maps an STFT magnitude to the amplitude of a bin-centred sine.
pub fn magnitude_normalizer(spec: &Spectrogram) -> f64 {
    let w = spec.config().window.coefficients(spec.config().frame_length);
    2.0 / w.iter().sum::<f64>()
}

/// Normalized magnitudes of every channel as planes.
pub fn magnitude_planes(spec: &Spectrogram) -> Planes {
    let norm = magnitude_normalizer(spec);
    let mut p = Planes::zeros(spec.num_channels(), spec.num_frames(), spec.num_bins());
    for c in 0..spec.num_channels() {
        for (dst, z) in p.plane_mut(c).iter_mut().zip(spec.channel(c)) {
            *dst = z.norm() * norm;
        }
    }
    p
}

/// Deterministic forward pass producing a mask shaped like `spec`.
pub fn infer_mask(model: &MaskModel, spec: &Spectrogram) -> Result<Mask, SeparationError> {
    if spec.num_channels() != model.config.input_channels() {
        return Err(SeparationError::ShapeMismatch(format!(
            "model expects {} channels, spectrogram has {}",
            model.config.input_channels(),
            spec.num_channels()
        )));
    }
    let features = model.features(&magnitude_planes(spec));
    let out = model.forward_chunked(&features, INFERENCE_CHUNK_FRAMES);
    let gains = (0..out.channels).map(|c| out.plane(c).to_vec()).collect();
    Mask::new(spec.num_frames(), spec.num_bins(), gains)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_formula() {
        let one = MaskModelConfig {
            layers: vec![LayerSpec::new(1, 1, (1, 1), Activation::Sigmoid)],
            features: FeatureSpec::default(),
        };
        assert_eq!(count_parameters(&one), 2);
        let l = LayerSpec::new(2, 32, (3, 3), Activation::Relu);
        let cfg = MaskModelConfig {
            layers: vec![l, LayerSpec::new(32, 2, (1, 1), Activation::Sigmoid)],
            features: FeatureSpec::default(),
        };
        assert_eq!(count_parameters(&cfg) - (32 + 1) * 2, 608);
        assert_eq!(MaskModel::zeros(cfg.clone()).unwrap().num_parameters(), count_parameters(&cfg));
    }

    #[test]
    fn config_validation() {
        let mut cfg = MaskModelConfig::compact();
        cfg.validate().unwrap();
        cfg.layers.last_mut().unwrap().activation = Activation::Relu;
        assert!(cfg.validate().is_err());
        let mut cfg = MaskModelConfig::compact();
        cfg.layers[1].in_channels = 7;
        assert!(cfg.validate().is_err());
        let mut cfg = MaskModelConfig::compact();
        cfg.layers[0].kernel_freq = 4;
        assert!(cfg.validate().is_err());
        assert!(MaskModelConfig { layers: vec![], features: FeatureSpec::default() }.validate().is_err());
    }

    #[test]
    fn chunked_forward_equals_whole() {
        let model = MaskModel::init(MaskModelConfig::compact(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = Planes::zeros(2, 50, 17);
        x.data.iter_mut().for_each(|v| *v = rng.random_range(0.0..3.0));
        assert_eq!(model.forward(&x), model.forward_chunked(&x, 7));
    }

    #[test]
    fn checkpoint_round_trip_and_corruption() {
        let model = MaskModel::init(MaskModelConfig::compact(), 11).unwrap();
        let bytes = model.to_bytes();
        assert_eq!(MaskModel::from_bytes(&bytes).unwrap(), model);
        assert!(MaskModel::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(MaskModel::from_bytes(&bad).is_err());
        let mut longer = bytes;
        longer.push(0);
        assert!(MaskModel::from_bytes(&longer).is_err());
    }
}
