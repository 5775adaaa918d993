use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use dialogue_enhance_ffi::*;

fn last_error() -> String {
    let p = de_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn stereo_tone(frames: usize) -> Vec<f64> {
    (0..frames)
        .flat_map(|i| {
            let s = 0.3 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 48_000.0).sin();
            let n = 0.05 * (2.0 * std::f64::consts::PI * 97.0 * i as f64 / 48_000.0).sin();
            [s + n, s - n]
        })
        .collect()
}

#[test]
fn buffer_round_trip() {
    let data = stereo_tone(1000);
    let mut buf = ptr::null_mut();
    unsafe {
        assert_eq!(de_buffer_from_interleaved(data.as_ptr(), 1000, 2, 48_000, &mut buf), DeStatus::Ok);
        assert_eq!(de_buffer_num_channels(buf), 2);
        assert_eq!(de_buffer_len(buf), 1000);
        assert_eq!(de_buffer_sample_rate(buf), 48_000);
        let mut out = vec![0.0; 2000];
        assert_eq!(de_buffer_copy_interleaved(buf, out.as_mut_ptr(), out.len()), DeStatus::Ok);
        assert_eq!(out, data);
        assert_eq!(de_buffer_copy_interleaved(buf, out.as_mut_ptr(), 10), DeStatus::InvalidArgument);
        assert!(last_error().contains("capacity"));
        de_buffer_free(buf);
    }
}

#[test]
fn null_pointers_and_errors() {
    unsafe {
        let mut buf = ptr::null_mut();
        assert_eq!(de_buffer_from_interleaved(ptr::null(), 10, 2, 48_000, &mut buf), DeStatus::NullPointer);
        assert_eq!(de_buffer_num_channels(ptr::null()), 0);
        let missing = CString::new("/nonexistent/x.wav").unwrap();
        assert_eq!(de_buffer_read_wav(missing.as_ptr(), &mut buf), DeStatus::Io);
        let mut lufs = 0.0;
        assert_eq!(de_integrated_loudness(ptr::null(), &mut lufs), DeStatus::NullPointer);
        de_buffer_free(ptr::null_mut());
        de_stems_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(de_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn separate_and_remix() {
    let frames = 48_000;
    let data = stereo_tone(frames);
    unsafe {
        let mut mix = ptr::null_mut();
        assert_eq!(de_buffer_from_interleaved(data.as_ptr(), frames, 2, 48_000, &mut mix), DeStatus::Ok);
        let mut stems = ptr::null_mut();
        assert_eq!(de_separate_center(mix, 2.0, &mut stems), DeStatus::Ok);

        let (mut d, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(de_stems_dialogue(stems, &mut d), DeStatus::Ok);
        assert_eq!(de_stems_background(stems, &mut b), DeStatus::Ok);
        let mut dv = vec![0.0; 2 * frames];
        let mut bv = vec![0.0; 2 * frames];
        de_buffer_copy_interleaved(d, dv.as_mut_ptr(), dv.len());
        de_buffer_copy_interleaved(b, bv.as_mut_ptr(), bv.len());
        let err = data.iter().zip(dv.iter().zip(&bv)).map(|(m, (x, y))| (x + y - m).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-12, "{err}");

        let preset = CString::new("Sprache betont").unwrap();
        let mut out = ptr::null_mut();
        let mut makeup = f64::NAN;
        assert_eq!(de_remix_preset(stems, preset.as_ptr(), &mut out, &mut makeup), DeStatus::Ok);
        assert!(makeup.is_finite());
        let (mut l_in, mut l_out) = (0.0, 0.0);
        assert_eq!(de_integrated_loudness(mix, &mut l_in), DeStatus::Ok);
        assert_eq!(de_integrated_loudness(out, &mut l_out), DeStatus::Ok);
        assert!((l_in - l_out).abs() <= 0.5);

        let unknown = CString::new("Lauter").unwrap();
        assert_eq!(de_remix_preset(stems, unknown.as_ptr(), &mut out, ptr::null_mut()), DeStatus::UnknownPreset);
        assert!(last_error().contains("Lauter"));

        for p in [mix, d, b, out] {
            de_buffer_free(p);
        }
        de_stems_free(stems);
    }
}

#[test]
fn silence_has_undefined_loudness() {
    let data = vec![0.0; 2 * 48_000];
    unsafe {
        let mut buf = ptr::null_mut();
        de_buffer_from_interleaved(data.as_ptr(), 48_000, 2, 48_000, &mut buf);
        let mut lufs = 0.0;
        assert_eq!(de_integrated_loudness(buf, &mut lufs), DeStatus::LoudnessUndefined);
        de_buffer_free(buf);
    }
}

#[test]
fn process_file_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.wav");
    let frames = 96_000;
    let data = stereo_tone(frames);
    unsafe {
        let mut buf = ptr::null_mut();
        de_buffer_from_interleaved(data.as_ptr(), frames, 2, 48_000, &mut buf);
        let path = CString::new(input.to_str().unwrap()).unwrap();
        assert_eq!(de_buffer_write_wav(buf, path.as_ptr(), DeBitDepth::Int24), DeStatus::Ok);
        de_buffer_free(buf);

        let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
        let program = CString::new("show").unwrap();
        let preset = CString::new("Sprache stärker betont").unwrap();
        assert_eq!(de_process_file(path.as_ptr(), out.as_ptr(), program.as_ptr(), preset.as_ptr()), DeStatus::Ok);
    }
    for f in ["show.wav", "show.json", "show.package.wav", "show.package.xml"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dialogue_enhance.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["de_buffer_read_wav", "de_separate_center", "de_remix_preset", "de_last_error_message"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).status() else {
        eprintln!("no C compiler, skipping syntax check");
        return;
    };
    assert!(status.success());
}
