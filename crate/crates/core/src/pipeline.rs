//! End-to-end processing of one program: separate, boost, package, remix.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio_io::{read_wav, write_wav, AudioBuffer, BitDepth};
use crate::delivery::{
    export_package, render_enhanced_track, DeliveryError, InteractivityBounds, Manifest, PackageManifest, StemLoudness,
};
use crate::remix::Preset;
use crate::separation::{speech_boost, BoostBand, MaskModel, Separator, StemPair, DEFAULT_BOOST_DB};
use crate::spectral::StftConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Center,
    Model,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Center => "center",
            Backend::Model => "model",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "center" => Ok(Backend::Center),
            "model" => Ok(Backend::Model),
            _ => Err(format!("unknown backend \"{s}\" (expected center or model)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProcessOptions {
    pub backend: Backend,
    /// Checkpoint for [`Backend::Model`].
    pub model: Option<PathBuf>,
    pub preset: Preset,
    pub boost_db: f64,
    pub band: BoostBand,
    pub bounds: InteractivityBounds,
    pub stft: StftConfig,
    /// Also write `<program>.{dialogue,background,mix}.wav`.
    pub write_stems: bool,
}

impl ProcessOptions {
    pub fn new(backend: Backend, preset: Preset) -> Self {
        Self {
            backend,
            model: None,
            preset,
            boost_db: DEFAULT_BOOST_DB,
            band: BoostBand::default(),
            bounds: InteractivityBounds::default(),
            stft: StftConfig::default(),
            write_stems: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessOutput {
    pub enhanced_track: PathBuf,
    pub package_audio: PathBuf,
    pub package_metadata: PathBuf,
    pub manifest_path: PathBuf,
    pub stems: Option<[PathBuf; 3]>,
    pub manifest: Manifest,
}

impl ProcessOutput {
    pub fn artifacts(&self) -> Vec<&Path> {
        let mut v = vec![
            self.enhanced_track.as_path(),
            self.package_audio.as_path(),
            self.package_metadata.as_path(),
            self.manifest_path.as_path(),
        ];
        if let Some(s) = &self.stems {
            v.extend(s.iter().map(PathBuf::as_path));
        }
        v
    }
}

pub fn separator(opts: &ProcessOptions) -> Result<Separator, DeliveryError> {
    Ok(match opts.backend {
        Backend::Center => Separator::Center,
        Backend::Model => {
            let path = opts.model.as_ref().ok_or_else(|| {
                DeliveryError::Separation(crate::separation::SeparationError::InvalidModel(
                    "model backend needs a checkpoint".into(),
                ))
            })?;
            Separator::Model(Box::new(MaskModel::load(path)?))
        }
    })
}

/// Separates and boosts `mix`.
pub fn make_stems(mix: &AudioBuffer, sep: &Separator, opts: &ProcessOptions) -> Result<StemPair, DeliveryError> {
    let stems = sep.separate(mix, &opts.stft)?;
    Ok(speech_boost(&stems, opts.boost_db, &opts.band, &opts.stft)?)
}

/// Processes `input` and writes all artifacts for `program` into `out_dir`:
/// `<program>.wav` (enhanced track), `<program>.json` (manifest) and
/// `<program>.package.{wav,xml}` (object package).
pub fn process_file(
    input: &Path,
    out_dir: &Path,
    program: &str,
    opts: &ProcessOptions,
) -> Result<ProcessOutput, DeliveryError> {
    let mix = read_wav(input)?;
    let sep = separator(opts)?;
    let stems = make_stems(&mix, &sep, opts)?;

    let (package, doc) = export_package(&stems, &opts.bounds, program, out_dir, &format!("{program}.package"))?;
    let rendered = render_enhanced_track(&stems, &opts.preset, &out_dir.join(format!("{program}.wav")), &opts.stft)?;

    let stem_paths = if opts.write_stems {
        let paths = ["dialogue", "background", "mix"].map(|s| out_dir.join(format!("{program}.{s}.wav")));
        write_wav(stems.dialogue(), &paths[0], BitDepth::Float32)?;
        write_wav(stems.background(), &paths[1], BitDepth::Float32)?;
        write_wav(&stems.sum(), &paths[2], BitDepth::Float32)?;
        Some(paths)
    } else {
        None
    };

    let file_name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let loudness = |role| doc.object(role).expect("validated document").integrated_loudness;
    let manifest = Manifest {
        program: program.to_string(),
        backend: Some(opts.backend.as_str().to_string()),
        input: Some(input.to_string_lossy().into_owned()),
        package: Some(PackageManifest {
            audio: file_name(&package.audio),
            metadata: file_name(&package.metadata),
            bounds: doc.bounds,
            stem_loudness: StemLoudness {
                dialogue: loudness(crate::delivery::ObjectRole::Dialogue),
                background: loudness(crate::delivery::ObjectRole::Background),
                mix: doc.mix_loudness,
            },
        }),
        ..rendered.manifest
    };
    manifest.write(&rendered.manifest_path)?;
    Ok(ProcessOutput {
        enhanced_track: rendered.track,
        package_audio: package.audio,
        package_metadata: package.metadata,
        manifest_path: rendered.manifest_path,
        stems: stem_paths,
        manifest,
    })
}
