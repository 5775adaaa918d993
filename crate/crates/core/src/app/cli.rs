use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::server::{self, ServeConfig};
use crate::delivery::InteractivityBounds;
use crate::pipeline::{process_file, Backend, ProcessOptions};
use crate::remix::{Preset, PresetRegistry, RemixError, RemixParams};
use crate::separation::{
    synth_dataset, train_desk, MaskModel, MaskModelConfig, SeparationError, SynthDatasetConfig, TrainConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

pub const ARTIFACT_DIR_ENV: &str = "DIALOGUE_ENHANCE_ARTIFACT_DIR";

/// Dialogue enhancement for finished stereo mixes.
///
/// Exit codes: 0 success, 1 processing failure, 2 usage error,
/// 3 training diverged.
#[derive(Debug, Parser)]
#[command(name = "dialogue-enhance", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Separate, boost and remix one WAV file.
    Process(ProcessArgs),
    /// Train the mask model on synthetic data.
    Train(TrainArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// List the available presets.
    Presets(PresetArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Center,
    Model,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Center => Backend::Center,
            BackendArg::Model => Backend::Model,
        }
    }
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    /// TOML preset file replacing the built-ins.
    #[arg(long)]
    pub presets: Option<PathBuf>,
    /// Print the registry as TOML.
    #[arg(long)]
    pub toml: bool,
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    pub input: PathBuf,
    #[arg(long, short, env = ARTIFACT_DIR_ENV)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "center")]
    pub backend: BackendArg,
    /// Checkpoint for the model backend.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "Sprache betont", conflicts_with_all = ["global_db", "duck_db"])]
    pub preset: String,
    /// TOML preset file replacing the built-ins.
    #[arg(long)]
    pub presets: Option<PathBuf>,
    /// Explicit global background attenuation (dB), instead of a preset.
    #[arg(long, requires = "duck_db")]
    pub global_db: Option<f64>,
    /// Explicit extra attenuation during dialogue (dB), instead of a preset.
    #[arg(long, requires = "global_db")]
    pub duck_db: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub boost_db: f64,
    #[arg(long, default_value_t = -6.0, allow_hyphen_values = true)]
    pub gain_min_db: f64,
    #[arg(long, default_value_t = 12.0)]
    pub gain_max_db: f64,
    /// Program name used for artifact file names (default: input file stem).
    #[arg(long)]
    pub program: Option<String>,
    /// Also write the dialogue, background and mix stems as WAV.
    #[arg(long)]
    pub stems: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelSize {
    Default,
    Compact,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Loss history CSV (default: checkpoint path with `.csv`).
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "default")]
    pub model_size: ModelSize,
    /// JSON model config, instead of --model-size.
    #[arg(long, conflicts_with = "model_size")]
    pub model_config: Option<PathBuf>,
    /// JSON dataset config; --items and --duration override its fields.
    #[arg(long)]
    pub dataset_config: Option<PathBuf>,
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 0.03)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 4)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = ARTIFACT_DIR_ENV, default_value = "artifacts")]
    pub artifact_dir: PathBuf,
    #[arg(long)]
    pub presets: Option<PathBuf>,
    /// Number of concurrent processing workers.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Origin allowed by CORS (default: any).
    #[arg(long)]
    pub cors_origin: Option<String>,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.command {
        Command::Process(a) => cli_process(&a),
        Command::Train(a) => cli_train(&a),
        Command::Serve(a) => cli_serve(a),
        Command::Presets(a) => cli_presets(&a),
    }
}

fn usage(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

fn failure(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_FAILURE
}

pub fn load_registry(path: Option<&Path>) -> Result<PresetRegistry, String> {
    match path {
        None => Ok(PresetRegistry::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            PresetRegistry::from_toml(&text).map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

fn cli_presets(a: &PresetArgs) -> i32 {
    let reg = match load_registry(a.presets.as_deref()) {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    if a.toml {
        print!("{}", reg.to_toml());
    } else {
        for p in reg.presets() {
            let q = &p.params;
            println!(
                "{}\t{}\tglobal {} dB, duck {} dB, attack {} ms, release {} ms",
                p.name, p.label, q.global_atten_db, q.duck_extra_db, q.attack_ms, q.release_ms
            );
        }
    }
    EXIT_OK
}

fn cli_process(a: &ProcessArgs) -> i32 {
    let preset = match (a.global_db, a.duck_db) {
        (Some(g), Some(d)) => {
            let params = RemixParams::new(g, d);
            if let Err(e) = params.validate() {
                return usage(e);
            }
            Preset { name: "custom".into(), label: String::new(), params }
        }
        _ => {
            let reg = match load_registry(a.presets.as_deref()) {
                Ok(r) => r,
                Err(e) => return usage(e),
            };
            match reg.get(&a.preset) {
                Ok(p) => p.clone(),
                Err(e @ RemixError::PresetNotFound(_)) => return usage(e),
                Err(e) => return failure(e),
            }
        }
    };
    let bounds = match InteractivityBounds::new(a.gain_min_db, a.gain_max_db) {
        Ok(b) => b,
        Err(e) => return usage(e),
    };
    let backend = Backend::from(a.backend);
    if backend == Backend::Model && a.model.is_none() {
        return usage("--backend model requires --model <checkpoint>");
    }
    let program = match &a.program {
        Some(p) => p.clone(),
        None => a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "program".into()),
    };
    let opts = ProcessOptions {
        model: a.model.clone(),
        boost_db: a.boost_db,
        bounds,
        write_stems: a.stems,
        ..ProcessOptions::new(backend, preset)
    };
    match process_file(&a.input, &a.out_dir, &program, &opts) {
        Ok(out) => {
            let m = &out.manifest;
            eprintln!(
                "{}: loudness {} -> {}, makeup {:+.2} dB, {} clipped samples",
                program, m.loudness_before_lufs, m.loudness_after_lufs, m.makeup_gain_db, m.clipped_samples
            );
            for p in out.artifacts() {
                println!("{}", p.display());
            }
            EXIT_OK
        }
        Err(e) => failure(e),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Loss history as CSV; row 0 is the loss before training.
pub fn loss_csv(initial: f64, epochs: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in std::iter::once(initial).chain(epochs.iter().copied()).enumerate() {
        writeln!(s, "{i},{l:e}").unwrap();
    }
    s
}

fn cli_train(a: &TrainArgs) -> i32 {
    if a.epochs == 0 {
        return usage("--epochs must be at least 1");
    }
    if a.batch_size == 0 {
        return usage("--batch-size must be at least 1");
    }
    let model_cfg = match &a.model_config {
        Some(p) => match read_json::<MaskModelConfig>(p) {
            Ok(c) => c,
            Err(e) => return usage(e),
        },
        None => match a.model_size {
            ModelSize::Default => MaskModelConfig::default(),
            ModelSize::Compact => MaskModelConfig::compact(),
        },
    };
    let mut data_cfg = match &a.dataset_config {
        Some(p) => match read_json::<SynthDatasetConfig>(p) {
            Ok(c) => c,
            Err(e) => return usage(e),
        },
        None => SynthDatasetConfig { seed: a.seed, ..Default::default() },
    };
    if let Some(n) = a.items {
        data_cfg.items = n;
    }
    if let Some(d) = a.duration {
        data_cfg.duration_s = d;
    }
    let model = match MaskModel::init(model_cfg, a.seed) {
        Ok(m) => m,
        Err(e) => return usage(e),
    };
    let dataset = match synth_dataset(&data_cfg) {
        Ok(d) => d,
        Err(e) => return usage(e),
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        seed: a.seed,
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        ..Default::default()
    };
    eprintln!("training {} parameters on {} items for {} epochs", model.num_parameters(), dataset.len(), cfg.epochs);
    match train_desk(model, &dataset, &cfg) {
        Ok((model, report)) => {
            if let Err(e) = model.save(&a.checkpoint) {
                return failure(e);
            }
            let csv_path = a.loss_csv.clone().unwrap_or_else(|| a.checkpoint.with_extension("csv"));
            if let Err(e) = fs::write(&csv_path, loss_csv(report.initial_loss, &report.epoch_losses)) {
                return failure(format!("cannot write {}: {e}", csv_path.display()));
            }
            eprintln!("loss {:e} -> {:e}", report.initial_loss, report.final_loss());
            println!("{}", a.checkpoint.display());
            println!("{}", csv_path.display());
            EXIT_OK
        }
        Err(e @ SeparationError::Diverged { .. }) => {
            eprintln!("error: {e}");
            EXIT_DIVERGED
        }
        Err(e) => failure(e),
    }
}

fn cli_serve(a: ServeArgs) -> i32 {
    let registry = match load_registry(a.presets.as_deref()) {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    if a.workers == 0 {
        return usage("--workers must be at least 1");
    }
    let addr = format!("{}:{}", a.bind, a.port);
    let cfg = ServeConfig { artifact_dir: a.artifact_dir, registry, workers: a.workers, cors_origin: a.cors_origin };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return failure(e),
    };
    match rt.block_on(server::serve(&addr, cfg)) {
        Ok(()) => EXIT_OK,
        Err(e) => failure(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors() {
        assert_eq!(run(["dialogue-enhance"]), EXIT_USAGE);
        assert_eq!(run(["dialogue-enhance", "train", "--checkpoint", "x.demm", "--epochs", "0"]), EXIT_USAGE);
        assert_eq!(run(["dialogue-enhance", "process", "in.wav", "--out-dir", "o", "--preset", "Nope"]), EXIT_USAGE);
    }

    #[test]
    fn loss_csv_layout() {
        assert_eq!(loss_csv(1.0, &[0.5]), "epoch,loss\n0,1e0\n1,5e-1\n");
    }
}
