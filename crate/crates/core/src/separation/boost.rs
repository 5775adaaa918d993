use std::f64::consts::PI;

use super::{SeparationError, StemPair};
use crate::spectral::{istft, stft, StftConfig};

pub const DEFAULT_BOOST_DB: f64 = 2.0;

/// Frequency band of the speech boost with raised-cosine skirts centred on
/// each band edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostBand {
    pub low_hz: f64,
    pub high_hz: f64,
    pub transition_hz: f64,
}

impl Default for BoostBand {
    fn default() -> Self {
        Self { low_hz: 1_000.0, high_hz: 4_000.0, transition_hz: 200.0 }
    }
}

impl BoostBand {
    fn validate(&self, sample_rate: u32) -> Result<(), SeparationError> {
        let nyquist = f64::from(sample_rate) / 2.0;
        let half = self.transition_hz / 2.0;
        if !(self.transition_hz >= 0.0 && self.low_hz - half >= 0.0 && self.low_hz < self.high_hz) {
            return Err(SeparationError::InvalidBoost(format!(
                "band {}-{} Hz with {} Hz skirts is malformed",
                self.low_hz, self.high_hz, self.transition_hz
            )));
        }
        if self.high_hz + half > nyquist {
            return Err(SeparationError::InvalidBoost(format!(
                "band edge {} Hz exceeds Nyquist ({nyquist} Hz)",
                self.high_hz + half
            )));
        }
        Ok(())
    }

    /// Fraction of the boost (0..=1) applied at `freq`.
    pub fn weight(&self, freq: f64) -> f64 {
        let half = self.transition_hz / 2.0;
        let rise = |edge: f64| {
            if freq <= edge - half {
                0.0
            } else if freq >= edge + half {
                1.0
            } else {
                0.5 - 0.5 * (PI * (freq - (edge - half)) / self.transition_hz).cos()
            }
        };
        rise(self.low_hz) * (1.0 - rise(self.high_hz))
    }
}

/// Boosts the speech band of the dialogue stem and takes the same energy out
/// of the background, leaving the stem sum unchanged.
pub fn speech_boost(
    stems: &StemPair,
    boost_db: f64,
    band: &BoostBand,
    cfg: &StftConfig,
) -> Result<StemPair, SeparationError> {
    if !(boost_db >= 0.0 && boost_db.is_finite()) {
        return Err(SeparationError::InvalidBoost(format!("boost {boost_db} dB must be ≥ 0")));
    }
    let sr = stems.dialogue().sample_rate();
    band.validate(sr)?;

    let spec = stft(stems.dialogue(), cfg)?;
    let bins = spec.num_bins();
    let gains: Vec<f64> = (0..bins).map(|b| 10f64.powf(boost_db * band.weight(spec.bin_frequency(b)) / 20.0)).collect();
    let boosted = istft(&spec.map(|_, i, z| z * gains[i % bins]))?;
    StemPair::from_residual(&stems.sum(), boosted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::AudioBuffer;

    #[test]
    fn weight_profile() {
        let band = BoostBand::default();
        assert_eq!(band.weight(500.0), 0.0);
        assert_eq!(band.weight(900.0), 0.0);
        assert!((band.weight(1_000.0) - 0.5).abs() < 1e-12);
        assert_eq!(band.weight(1_100.0), 1.0);
        assert_eq!(band.weight(2_500.0), 1.0);
        assert!((band.weight(4_000.0) - 0.5).abs() < 1e-12);
        assert_eq!(band.weight(4_100.0), 0.0);
    }

    #[test]
    fn rejects_negative_boost_and_bad_band() {
        let d = AudioBuffer::silent(48_000, 2, 2048).unwrap();
        let stems = StemPair::new(d.clone(), d).unwrap();
        let cfg = StftConfig::default();
        assert!(speech_boost(&stems, -1.0, &BoostBand::default(), &cfg).is_err());
        let above = BoostBand { low_hz: 20_000.0, high_hz: 30_000.0, transition_hz: 200.0 };
        assert!(matches!(
            speech_boost(&stems, 2.0, &above, &cfg),
            Err(SeparationError::InvalidBoost(msg)) if msg.contains("Nyquist")
        ));
    }
}
