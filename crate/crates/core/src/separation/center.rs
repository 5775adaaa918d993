use rustfft::num_complex::Complex64;

use super::{SeparationError, StemPair};
use crate::audio_io::AudioBuffer;
use crate::spectral::{istft, stft, Spectrogram, StftConfig};

const EPSILON: f64 = 1e-12;

/// Extracts the centre-panned component of a stereo mix as dialogue.
///
/// Each time-frequency bin keeps `0.5 * (L + R)` scaled by the inter-channel
/// coherence `Re(L R*) / (0.5 (|L|² + |R|²))`, clamped to `[0, 1]`. The mono
/// estimate is duplicated to both channels.
pub fn separate_center(mix: &AudioBuffer, cfg: &StftConfig) -> Result<StemPair, SeparationError> {
    if mix.num_channels() != 2 {
        return Err(SeparationError::NotStereo(mix.num_channels()));
    }
    let spec = stft(mix, cfg)?;
    let center: Vec<Complex64> = spec
        .channel(0)
        .iter()
        .zip(spec.channel(1))
        .map(|(&l, &r)| {
            let coherence = (l * r.conj()).re / (0.5 * (l.norm_sqr() + r.norm_sqr()) + EPSILON);
            0.5 * (l + r) * coherence.clamp(0.0, 1.0)
        })
        .collect();
    let mono = Spectrogram::from_parts(*cfg, mix.sample_rate(), mix.len(), vec![center])?;
    let c = istft(&mono)?.into_channels().remove(0);
    let dialogue = AudioBuffer::new(mix.sample_rate(), vec![c.clone(), c])?;
    StemPair::from_residual(mix, dialogue)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian(len: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, sigma).unwrap();
        (0..len).map(|_| n.sample(&mut rng)).collect()
    }

    #[test]
    fn pure_center_goes_to_dialogue() {
        let s = gaussian(20_000, 0.1, 1);
        let mix = AudioBuffer::new(48_000, vec![s.clone(), s]).unwrap();
        let stems = separate_center(&mix, &StftConfig::default()).unwrap();
        let rel = (stems.background().energy() / mix.energy()).sqrt();
        assert!(rel < 1e-3, "residual {rel}");
        assert!(stems.consistency_error(&mix) <= 1e-12);
    }

    #[test]
    fn anti_phase_goes_to_background() {
        let s = gaussian(20_000, 0.1, 2);
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        let mix = AudioBuffer::new(48_000, vec![s, neg]).unwrap();
        let stems = separate_center(&mix, &StftConfig::default()).unwrap();
        assert!(stems.dialogue().peak() < 1e-9);
        assert!(stems.background().max_abs_diff(&mix) < 1e-9);
    }

    #[test]
    fn mono_rejected() {
        let mix = AudioBuffer::silent(48_000, 1, 100).unwrap();
        assert!(matches!(separate_center(&mix, &StftConfig::default()), Err(SeparationError::NotStereo(1))));
    }
}
