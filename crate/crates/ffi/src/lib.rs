//! C interface to the dialogue enhancement library.
//!
//! Objects are exposed as opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`DeStatus`]; on failure [`de_last_error_message`] describes the error.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dialogue_enhance::audio_io::{read_wav, write_wav, AudioBuffer, AudioIoError, BitDepth};
use dialogue_enhance::delivery::DeliveryError;
use dialogue_enhance::loudness::integrated_loudness;
use dialogue_enhance::pipeline::{process_file, Backend, ProcessOptions};
use dialogue_enhance::remix::{remix, PresetRegistry, RemixError};
use dialogue_enhance::separation::{speech_boost, BoostBand, SeparationError, Separator, StemPair};
use dialogue_enhance::spectral::StftConfig;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    UnsupportedFormat = 4,
    Separation = 5,
    LoudnessUndefined = 6,
    UnknownPreset = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeBitDepth {
    Int16 = 16,
    Int24 = 24,
    Float32 = 32,
}

/// Multichannel audio buffer.
pub struct DeBuffer(AudioBuffer);

/// Dialogue and background stems of one mix.
pub struct DeStems(StemPair);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DeStatus, String);

impl Failure {
    fn new(status: DeStatus, msg: impl Into<String>) -> Self {
        Self(status, msg.into())
    }
}

impl From<AudioIoError> for Failure {
    fn from(e: AudioIoError) -> Self {
        let status = match e {
            AudioIoError::NotFound(_) | AudioIoError::Unwritable { .. } | AudioIoError::Io(_) => DeStatus::Io,
            AudioIoError::Unsupported(_) | AudioIoError::Truncated { .. } | AudioIoError::Malformed(_) => {
                DeStatus::UnsupportedFormat
            }
            _ => DeStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<SeparationError> for Failure {
    fn from(e: SeparationError) -> Self {
        Failure(DeStatus::Separation, e.to_string())
    }
}

impl From<RemixError> for Failure {
    fn from(e: RemixError) -> Self {
        let status = match e {
            RemixError::PresetNotFound(_) => DeStatus::UnknownPreset,
            RemixError::InvalidParams(_) => DeStatus::InvalidArgument,
            _ => DeStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<DeliveryError> for Failure {
    fn from(e: DeliveryError) -> Self {
        match e {
            DeliveryError::Audio(a) => a.into(),
            DeliveryError::Separation(s) => s.into(),
            DeliveryError::Remix(r) => r.into(),
            DeliveryError::Io(_) | DeliveryError::Unwritable { .. } => Failure(DeStatus::Io, e.to_string()),
            other => Failure(DeStatus::Internal, other.to_string()),
        }
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DeStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DeStatus::Internal
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(DeStatus::NullPointer, format!("{name} is null")))
}

unsafe fn string<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(DeStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(DeStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(DeStatus::NullPointer, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn de_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn de_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a buffer from `frames * channels` interleaved samples.
///
/// # Safety
/// `samples` must point to `frames * channels` readable doubles; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn de_buffer_from_interleaved(
    samples: *const f64,
    frames: usize,
    channels: u32,
    sample_rate: u32,
    out: *mut *mut DeBuffer,
) -> DeStatus {
    guard(|| {
        if samples.is_null() {
            return Err(Failure::new(DeStatus::NullPointer, "samples is null"));
        }
        let n = frames
            .checked_mul(channels as usize)
            .ok_or_else(|| Failure::new(DeStatus::InvalidArgument, "buffer size overflows"))?;
        let data = std::slice::from_raw_parts(samples, n);
        let buf = AudioBuffer::from_interleaved(sample_rate, channels as usize, data)?;
        store(out, DeBuffer(buf))
    })
}

/// Reads a WAV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_buffer_read_wav(path: *const c_char, out: *mut *mut DeBuffer) -> DeStatus {
    guard(|| {
        let path = string(path, "path")?;
        store(out, DeBuffer(read_wav(path)?))
    })
}

/// Writes a WAV file.
///
/// # Safety
/// `buffer` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn de_buffer_write_wav(
    buffer: *const DeBuffer,
    path: *const c_char,
    depth: DeBitDepth,
) -> DeStatus {
    guard(|| {
        let buf = borrow(buffer, "buffer")?;
        let path = string(path, "path")?;
        let depth = match depth {
            DeBitDepth::Int16 => BitDepth::Int16,
            DeBitDepth::Int24 => BitDepth::Int24,
            DeBitDepth::Float32 => BitDepth::Float32,
        };
        Ok(write_wav(&buf.0, path, depth)?)
    })
}

/// # Safety
/// `buffer` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn de_buffer_num_channels(buffer: *const DeBuffer) -> u32 {
    buffer.as_ref().map_or(0, |b| b.0.num_channels() as u32)
}

/// Samples per channel.
///
/// # Safety
/// `buffer` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn de_buffer_len(buffer: *const DeBuffer) -> usize {
    buffer.as_ref().map_or(0, |b| b.0.len())
}

/// # Safety
/// `buffer` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn de_buffer_sample_rate(buffer: *const DeBuffer) -> u32 {
    buffer.as_ref().map_or(0, |b| b.0.sample_rate())
}

/// Copies interleaved samples into `dst`, which holds `capacity` doubles.
///
/// # Safety
/// `buffer` must be a live handle and `dst` writable for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn de_buffer_copy_interleaved(
    buffer: *const DeBuffer,
    dst: *mut f64,
    capacity: usize,
) -> DeStatus {
    guard(|| {
        let buf = borrow(buffer, "buffer")?;
        if dst.is_null() {
            return Err(Failure::new(DeStatus::NullPointer, "dst is null"));
        }
        let data = buf.0.to_interleaved();
        if capacity < data.len() {
            return Err(Failure::new(
                DeStatus::InvalidArgument,
                format!("capacity {capacity} < {} samples", data.len()),
            ));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), dst, data.len());
        Ok(())
    })
}

/// # Safety
/// `buffer` must be a handle from this library or NULL, and not used after.
#[no_mangle]
pub unsafe extern "C" fn de_buffer_free(buffer: *mut DeBuffer) {
    if !buffer.is_null() {
        drop(Box::from_raw(buffer));
    }
}

/// Integrated loudness in LUFS. Returns `LoudnessUndefined` for silent or
/// too-short input.
///
/// # Safety
/// `buffer` must be a live handle; `out_lufs` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_integrated_loudness(buffer: *const DeBuffer, out_lufs: *mut f64) -> DeStatus {
    guard(|| {
        let buf = borrow(buffer, "buffer")?;
        if out_lufs.is_null() {
            return Err(Failure::new(DeStatus::NullPointer, "out_lufs is null"));
        }
        let l = integrated_loudness(&buf.0).map_err(|e| Failure::new(DeStatus::InvalidArgument, e.to_string()))?;
        match l.integrated.lufs() {
            Some(v) => {
                *out_lufs = v;
                Ok(())
            }
            None => Err(Failure::new(DeStatus::LoudnessUndefined, format!("loudness is {}", l.integrated))),
        }
    })
}

/// Center-extraction separation followed by the speech-band boost.
///
/// # Safety
/// `mix` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_separate_center(mix: *const DeBuffer, boost_db: f64, out: *mut *mut DeStems) -> DeStatus {
    guard(|| {
        let mix = borrow(mix, "mix")?;
        let cfg = StftConfig::default();
        let stems = Separator::Center.separate(&mix.0, &cfg)?;
        let stems = speech_boost(&stems, boost_db, &BoostBand::default(), &cfg)?;
        store(out, DeStems(stems))
    })
}

/// Copy of the dialogue stem.
///
/// # Safety
/// `stems` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_stems_dialogue(stems: *const DeStems, out: *mut *mut DeBuffer) -> DeStatus {
    guard(|| store(out, DeBuffer(borrow(stems, "stems")?.0.dialogue().clone())))
}

/// Copy of the background stem.
///
/// # Safety
/// `stems` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_stems_background(stems: *const DeStems, out: *mut *mut DeBuffer) -> DeStatus {
    guard(|| store(out, DeBuffer(borrow(stems, "stems")?.0.background().clone())))
}

/// # Safety
/// `stems` must be a handle from this library or NULL, and not used after.
#[no_mangle]
pub unsafe extern "C" fn de_stems_free(stems: *mut DeStems) {
    if !stems.is_null() {
        drop(Box::from_raw(stems));
    }
}

/// Remixes with a built-in preset. `out_makeup_db` may be NULL.
///
/// # Safety
/// `stems` must be a live handle, `preset` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn de_remix_preset(
    stems: *const DeStems,
    preset: *const c_char,
    out: *mut *mut DeBuffer,
    out_makeup_db: *mut f64,
) -> DeStatus {
    guard(|| {
        let stems = borrow(stems, "stems")?;
        let reg = PresetRegistry::default();
        let preset = reg.get(string(preset, "preset")?)?;
        let (buf, report) = remix(&stems.0, &preset.params, &StftConfig::default())?;
        if !out_makeup_db.is_null() {
            *out_makeup_db = report.makeup_gain_db;
        }
        store(out, DeBuffer(buf))
    })
}

/// Processes a WAV file with the center backend and writes the enhanced
/// track, object package and manifest into `out_dir`, named after `program`.
///
/// # Safety
/// All pointers must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn de_process_file(
    input: *const c_char,
    out_dir: *const c_char,
    program: *const c_char,
    preset: *const c_char,
) -> DeStatus {
    guard(|| {
        let input = string(input, "input")?;
        let out_dir = string(out_dir, "out_dir")?;
        let program = string(program, "program")?;
        let preset = PresetRegistry::default().get(string(preset, "preset")?)?.clone();
        let opts = ProcessOptions::new(Backend::Center, preset);
        process_file(Path::new(input), Path::new(out_dir), program, &opts)?;
        Ok(())
    })
}
