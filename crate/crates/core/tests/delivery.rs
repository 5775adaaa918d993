use dialogue_enhance::audio_io::{read_wav, AudioBuffer};
use dialogue_enhance::delivery::*;
use dialogue_enhance::loudness::{integrated_loudness, Loudness};
use dialogue_enhance::remix::{preset_registry, Preset, RemixParams, PRESET_EMPHASIZED};
use dialogue_enhance::separation::{synth_dataset, BackgroundKind, StemPair, SynthDatasetConfig};
use dialogue_enhance::spectral::StftConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SR: u32 = 48_000;

fn noise_stems(seed: u64, len: usize) -> StemPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = |amp: f64| {
        AudioBuffer::new(SR, (0..2).map(|_| (0..len).map(|_| rng.random_range(-amp..amp)).collect()).collect()).unwrap()
    };
    let d = buf(0.3);
    let b = buf(0.2);
    StemPair::new(d, b).unwrap()
}

fn f32_exact(buf: &AudioBuffer) -> AudioBuffer {
    AudioBuffer::new(
        buf.sample_rate(),
        buf.channels().iter().map(|c| c.iter().map(|&x| x as f32 as f64).collect()).collect(),
    )
    .unwrap()
}

fn bits(buf: &AudioBuffer) -> Vec<u64> {
    buf.channels().iter().flatten().map(|x| x.to_bits()).collect()
}

fn exported(dir: &std::path::Path) -> (PackagePaths, AdmDocument, StemPair) {
    let stems = noise_stems(1, SR as usize);
    let bounds = InteractivityBounds::new(-6.0, 12.0).unwrap();
    let (paths, doc) = export_package(&stems, &bounds, "Abendschau", dir, "show").unwrap();
    (paths, doc, stems)
}

#[test]
fn round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (paths, doc, stems) = exported(dir.path());
    let (back, parsed) = parse_package(&paths).unwrap();
    assert_eq!(bits(back.dialogue()), bits(&f32_exact(stems.dialogue())));
    assert_eq!(bits(back.background()), bits(&f32_exact(stems.background())));
    assert_eq!(parsed, doc);
}

#[test]
fn f32_representable_stems_round_trip_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let raw = noise_stems(2, 30_000);
    let stems = StemPair::new(f32_exact(raw.dialogue()), f32_exact(raw.background())).unwrap();
    let (paths, _) = export_package(&stems, &InteractivityBounds::default(), "p", dir.path(), "x").unwrap();
    let (back, _) = parse_package(&paths).unwrap();
    assert_eq!(back, stems);
}

#[test]
fn package_layout_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let (paths, doc, stems) = exported(dir.path());
    let audio = read_wav(&paths.audio).unwrap();
    assert_eq!(audio.num_channels(), 4);
    assert_eq!(audio.channel(2), f32_exact(stems.background()).channel(0));

    assert_eq!(doc.bounds, InteractivityBounds { dialogue_gain_min_db: -6.0, dialogue_gain_max_db: 12.0 });
    let d = doc.object(ObjectRole::Dialogue).unwrap();
    let b = doc.object(ObjectRole::Background).unwrap();
    assert_eq!((d.channels.clone(), b.channels.clone()), (vec![0, 1], vec![2, 3]));
    let measured = integrated_loudness(&f32_exact(stems.dialogue())).unwrap().integrated;
    assert_eq!(d.integrated_loudness, measured);
    assert!(matches!(doc.mix_loudness, Loudness::Lufs(_)));

    let xml = std::fs::read_to_string(&paths.metadata).unwrap();
    assert!(xml.contains(r#"<gainInteractionRange bound="min">-6</gainInteractionRange>"#));
    assert!(xml.contains(r#"<gainInteractionRange bound="max">12</gainInteractionRange>"#));
}

#[test]
fn silent_stem_loudness_uses_status() {
    let dir = tempfile::tempdir().unwrap();
    let raw = noise_stems(3, SR as usize);
    let stems = StemPair::new(AudioBuffer::silent(SR, 2, SR as usize).unwrap(), raw.background().clone()).unwrap();
    let (paths, doc) = export_package(&stems, &InteractivityBounds::default(), "p", dir.path(), "x").unwrap();
    assert_eq!(doc.object(ObjectRole::Dialogue).unwrap().integrated_loudness, Loudness::Silence);
    let xml = std::fs::read_to_string(&paths.metadata).unwrap();
    assert!(xml.contains(r#"<integratedLoudness status="silence"/>"#));
    assert_eq!(parse_package(&paths).unwrap().1, doc);
}

fn mutated(edit: impl Fn(String) -> String) -> Result<(StemPair, AdmDocument), DeliveryError> {
    let dir = tempfile::tempdir().unwrap();
    let (paths, _, _) = exported(dir.path());
    let xml = std::fs::read_to_string(&paths.metadata).unwrap();
    let changed = edit(xml.clone());
    assert_ne!(changed, xml, "edit had no effect");
    std::fs::write(&paths.metadata, changed).unwrap();
    parse_package(&paths)
}

fn without_element(xml: String, open: &str, close: &str) -> String {
    let start = xml.find(open).unwrap();
    let end = start + xml[start..].find(close).unwrap() + close.len();
    format!("{}{}", &xml[..start], &xml[end..])
}

#[test]
fn missing_background_object_names_role() {
    let err = mutated(|x| without_element(x, r#"<audioObject audioObjectID="AO_1002""#, "</audioObject>")).unwrap_err();
    match err {
        DeliveryError::SchemaViolation { message, .. } => {
            assert!(message.contains("\"background\""), "{message}")
        }
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn missing_element_reports_location() {
    let err = mutated(|x| without_element(x, "<loudnessMetadata>", "</loudnessMetadata>")).unwrap_err();
    match err {
        DeliveryError::SchemaViolation { location, .. } => {
            assert_eq!(location, "/audioFormatExtended/audioProgramme/loudnessMetadata")
        }
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn extra_element_is_a_violation() {
    let err = mutated(|x| x.replace("</audioProgramme>", "<note/></audioProgramme>")).unwrap_err();
    assert!(
        matches!(err, DeliveryError::SchemaViolation { ref location, .. } if location.ends_with("/note")),
        "{err:?}"
    );
}

#[test]
fn channel_index_out_of_range() {
    let err = mutated(|x| x.replace(r#"channelIndex="3""#, r#"channelIndex="7""#)).unwrap_err();
    match err {
        DeliveryError::ChannelReference { index, channels, .. } => assert_eq!((index, channels), (7, 4)),
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn non_numeric_loudness() {
    let err = mutated(|x| {
        let start = x.find("<integratedLoudness>").unwrap() + "<integratedLoudness>".len();
        let end = start + x[start..].find('<').unwrap();
        format!("{}loud{}", &x[..start], &x[end..])
    })
    .unwrap_err();
    match err {
        DeliveryError::NonNumericLoudness { value, .. } => assert_eq!(value, "loud"),
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn malformed_xml_is_reported() {
    let err = mutated(|x| x.replace("</audioFormatExtended>", "")).unwrap_err();
    assert!(matches!(err, DeliveryError::Xml(_)), "{err:?}");
}

#[test]
fn invalid_bounds_rejected() {
    assert!(matches!(InteractivityBounds::new(3.0, 12.0), Err(DeliveryError::InvalidBounds(_))));
    assert!(matches!(InteractivityBounds::new(-6.0, f64::NAN), Err(DeliveryError::InvalidBounds(_))));
    let dir = tempfile::tempdir().unwrap();
    let bad = InteractivityBounds { dialogue_gain_min_db: 1.0, dialogue_gain_max_db: 0.5 };
    let err = export_package(&noise_stems(4, 4_800), &bad, "p", dir.path(), "x").unwrap_err();
    assert!(matches!(err, DeliveryError::InvalidBounds(_)));
}

#[test]
fn unwritable_destination() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, b"x").unwrap();
    let err = export_package(&noise_stems(5, 4_800), &InteractivityBounds::default(), "p", &file.join("sub"), "x")
        .unwrap_err();
    assert!(matches!(err, DeliveryError::Unwritable { .. }), "{err:?}");
}

fn speech_music(seed: u64) -> StemPair {
    let item = synth_dataset(&SynthDatasetConfig {
        items: 1,
        duration_s: 5.0,
        background: BackgroundKind::Music,
        seed,
        ..Default::default()
    })
    .unwrap()
    .remove(0);
    StemPair::new(item.dialogue, item.background).unwrap()
}

#[test]
fn identity_preset_renders_the_mix() {
    let dir = tempfile::tempdir().unwrap();
    let stems = speech_music(6);
    let preset = Preset { name: "neutral".into(), label: "neutral".into(), params: RemixParams::identity() };
    let out = dir.path().join("neutral.wav");
    let r = render_enhanced_track(&stems, &preset, &out, &StftConfig::default()).unwrap();
    let track = read_wav(&r.track).unwrap();
    assert_eq!(track, f32_exact(&stems.sum()));
    assert_eq!(r.manifest_path, dir.path().join("neutral.json"));
    assert_eq!(r.manifest.enhanced_track, "neutral.wav");
    assert!(r.manifest.loudness_delta().unwrap().abs() < 1e-9);
}

#[test]
fn built_in_preset_manifest_delta_matches_remeasurement() {
    let dir = tempfile::tempdir().unwrap();
    let stems = speech_music(7);
    let preset = preset_registry().get(PRESET_EMPHASIZED).unwrap().clone();
    let r = render_enhanced_track(&stems, &preset, &dir.path().join("t.wav"), &StftConfig::default()).unwrap();
    let delta = r.manifest.loudness_delta().unwrap();
    assert!(delta.abs() <= 0.5, "{delta}");

    let remeasured = integrated_loudness(&read_wav(&r.track).unwrap()).unwrap().integrated.lufs().unwrap();
    let before = integrated_loudness(&stems.sum()).unwrap().integrated.lufs().unwrap();
    assert!((remeasured - before).abs() <= 0.5);
    assert!((remeasured - r.manifest.loudness_after_lufs.lufs().unwrap()).abs() < 1e-4);
    assert_eq!(r.manifest.preset, PRESET_EMPHASIZED);
    assert_eq!(r.manifest.clipped_samples, r.report.clipped_samples);
}

#[test]
fn manifest_round_trips_through_its_parser() {
    let dir = tempfile::tempdir().unwrap();
    let stems = speech_music(8);
    let preset = preset_registry().get(PRESET_EMPHASIZED).unwrap().clone();
    let mut m =
        render_enhanced_track(&stems, &preset, &dir.path().join("t.wav"), &StftConfig::default()).unwrap().manifest;
    let on_disk = Manifest::read(&dir.path().join("t.json")).unwrap();
    assert_eq!(on_disk, m);

    m.package = Some(PackageManifest {
        audio: "t.package.wav".into(),
        metadata: "t.package.xml".into(),
        bounds: InteractivityBounds::default(),
        stem_loudness: StemLoudness {
            dialogue: Loudness::Lufs(-27.25),
            background: Loudness::Silence,
            mix: Loudness::TooShort,
        },
    });
    m.backend = Some("center".into());
    let text = m.to_json();
    assert_eq!(Manifest::from_json(&text).unwrap(), m);
    assert_eq!(Manifest::from_json(&text).unwrap().to_json(), text);
    assert!(text.contains(r#""background": "silence""#));
}
