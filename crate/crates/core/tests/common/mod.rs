#![allow(dead_code)]

use std::path::Path;

use dialogue_enhance::audio_io::{write_wav, BitDepth};
use dialogue_enhance::separation::{synth_dataset, BackgroundKind, SynthDatasetConfig};

/// Writes a 16-bit stereo speech-over-music fixture.
pub fn write_fixture(path: &Path, seconds: f64, seed: u64) {
    let item = synth_dataset(&SynthDatasetConfig {
        items: 1,
        duration_s: seconds,
        background: BackgroundKind::Music,
        snr_db: (0.0, 0.0),
        seed,
        ..Default::default()
    })
    .unwrap()
    .remove(0);
    write_wav(&item.mix, path, BitDepth::Int16).unwrap();
}
