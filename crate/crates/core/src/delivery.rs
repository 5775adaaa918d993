//! Output packaging: the object package (stems plus XML metadata) and the
//! channel-based enhanced track with its JSON manifest.
//!
//! The XML format is described by `schema/adm-subset.xsd` ([`SCHEMA_XSD`]).
//! [`parse_package`] enforces the same structure and reports violations with
//! their location.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, BytesText, Event};
use quick_xml::Writer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{read_wav, write_wav, AudioBuffer, AudioIoError, BitDepth};
use crate::loudness::{integrated_loudness, Loudness, LoudnessError};
use crate::remix::{loudness_serde, remix, Preset, RemixError, RemixParams, RemixReport};
use crate::separation::{SeparationError, StemPair};
use crate::spectral::StftConfig;

pub const SCHEMA_XSD: &str = include_str!("../schema/adm-subset.xsd");
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DeliveryError {
    #[error("invalid interactivity bounds: {0}")]
    InvalidBounds(String),
    #[error("schema violation at {location}: {message}")]
    SchemaViolation { location: String, message: String },
    #[error("object \"{object}\" references channel {index}, package audio has {channels}")]
    ChannelReference { object: String, index: usize, channels: usize },
    #[error("non-numeric loudness at {location}: \"{value}\"")]
    NonNumericLoudness { location: String, value: String },
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("cannot write {path}: {source}")]
    Unwritable { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Audio(#[from] AudioIoError),
    #[error(transparent)]
    Loudness(#[from] LoudnessError),
    #[error(transparent)]
    Remix(#[from] RemixError),
    #[error(transparent)]
    Separation(#[from] SeparationError),
}

fn violation(location: impl Into<String>, message: impl Into<String>) -> DeliveryError {
    DeliveryError::SchemaViolation { location: location.into(), message: message.into() }
}

/// Broadcaster-defined range for listener dialogue gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractivityBounds {
    pub dialogue_gain_min_db: f64,
    pub dialogue_gain_max_db: f64,
}

impl Default for InteractivityBounds {
    fn default() -> Self {
        Self { dialogue_gain_min_db: -6.0, dialogue_gain_max_db: 12.0 }
    }
}

impl InteractivityBounds {
    pub fn new(min_db: f64, max_db: f64) -> Result<Self, DeliveryError> {
        let b = Self { dialogue_gain_min_db: min_db, dialogue_gain_max_db: max_db };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), DeliveryError> {
        let (lo, hi) = (self.dialogue_gain_min_db, self.dialogue_gain_max_db);
        if lo.is_finite() && hi.is_finite() && lo <= 0.0 && 0.0 <= hi {
            Ok(())
        } else {
            Err(DeliveryError::InvalidBounds(format!("need min ≤ 0 ≤ max, got {lo}..{hi} dB")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectRole {
    Dialogue,
    Background,
}

impl ObjectRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectRole::Dialogue => "dialogue",
            ObjectRole::Background => "background",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "dialogue" => Some(ObjectRole::Dialogue),
            "background" => Some(ObjectRole::Background),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmObject {
    pub id: String,
    pub role: ObjectRole,
    /// Channel indices into the package audio file.
    pub channels: Vec<usize>,
    pub integrated_loudness: Loudness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmDocument {
    pub programme_name: String,
    pub audio_file: String,
    pub sample_rate: u32,
    pub num_channels: usize,
    pub objects: Vec<AdmObject>,
    pub bounds: InteractivityBounds,
    pub mix_loudness: Loudness,
}

impl AdmDocument {
    pub fn object(&self, role: ObjectRole) -> Option<&AdmObject> {
        self.objects.iter().find(|o| o.role == role)
    }

    /// Checks role cardinality, bounds and channel references against
    /// `audio_channels`.
    pub fn validate(&self, audio_channels: usize) -> Result<(), DeliveryError> {
        for role in [ObjectRole::Dialogue, ObjectRole::Background] {
            let n = self.objects.iter().filter(|o| o.role == role).count();
            if n != 1 {
                let msg = if n == 0 {
                    format!("missing audioObject with role \"{}\"", role.as_str())
                } else {
                    format!("{n} audioObjects with role \"{}\"", role.as_str())
                };
                return Err(violation("/audioFormatExtended", msg));
            }
        }
        if self.objects.len() != 2 {
            return Err(violation("/audioFormatExtended", "expected exactly two audioObjects"));
        }
        self.bounds.validate()?;
        for o in &self.objects {
            if o.channels.is_empty() {
                return Err(violation(format!("audioObject {}", o.id), "no audioTrackUID"));
            }
            if let Some(&index) = o.channels.iter().find(|&&c| c >= audio_channels) {
                return Err(DeliveryError::ChannelReference { object: o.id.clone(), index, channels: audio_channels });
            }
        }
        Ok(())
    }

    pub fn to_xml(&self) -> String {
        let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
        let ok = "writing to a Vec cannot fail";
        w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None))).expect(ok);

        let mut root = BytesStart::new("audioFormatExtended");
        root.push_attribute(("version", FORMAT_VERSION.to_string().as_str()));
        root.push_attribute(("audioFile", self.audio_file.as_str()));
        root.push_attribute(("channels", self.num_channels.to_string().as_str()));
        root.push_attribute(("sampleRate", self.sample_rate.to_string().as_str()));
        w.write_event(Event::Start(root)).expect(ok);

        let mut prog = BytesStart::new("audioProgramme");
        prog.push_attribute(("audioProgrammeID", "APR_1001"));
        prog.push_attribute(("audioProgrammeName", self.programme_name.as_str()));
        w.write_event(Event::Start(prog)).expect(ok);
        write_loudness(&mut w, self.mix_loudness);
        for o in &self.objects {
            w.create_element("audioObjectIDRef").write_text_content(BytesText::new(&o.id)).expect(ok);
        }
        w.write_event(Event::End(BytesEnd::new("audioProgramme"))).expect(ok);

        let mut uid = 0;
        for o in &self.objects {
            let mut obj = BytesStart::new("audioObject");
            obj.push_attribute(("audioObjectID", o.id.as_str()));
            obj.push_attribute(("audioObjectName", o.role.as_str()));
            obj.push_attribute(("role", o.role.as_str()));
            w.write_event(Event::Start(obj)).expect(ok);
            write_loudness(&mut w, o.integrated_loudness);
            if o.role == ObjectRole::Dialogue {
                for (bound, v) in [("min", self.bounds.dialogue_gain_min_db), ("max", self.bounds.dialogue_gain_max_db)]
                {
                    w.create_element("gainInteractionRange")
                        .with_attribute(("bound", bound))
                        .write_text_content(BytesText::new(&v.to_string()))
                        .expect(ok);
                }
            }
            for &c in &o.channels {
                uid += 1;
                w.create_element("audioTrackUID")
                    .with_attribute(("UID", format!("ATU_{uid:08}").as_str()))
                    .with_attribute(("channelIndex", c.to_string().as_str()))
                    .write_empty()
                    .expect(ok);
            }
            w.write_event(Event::End(BytesEnd::new("audioObject"))).expect(ok);
        }
        w.write_event(Event::End(BytesEnd::new("audioFormatExtended"))).expect(ok);
        let mut text = String::from_utf8(w.into_inner()).expect("UTF-8 output");
        text.push('\n');
        text
    }

    /// Parses and structurally validates package XML. Channel references are
    /// checked against the `channels` attribute.
    pub fn from_xml(text: &str) -> Result<Self, DeliveryError> {
        let doc = roxmltree::Document::parse(text).map_err(|e| DeliveryError::Xml(e.to_string()))?;
        let root = doc.root_element();
        if root.tag_name().name() != "audioFormatExtended" {
            return Err(violation(format!("/{}", root.tag_name().name()), "root element must be audioFormatExtended"));
        }
        let loc = "/audioFormatExtended";
        check_attrs(root, loc, &["version", "audioFile", "channels", "sampleRate"], &[])?;
        let version = attr(root, loc, "version")?;
        if version != FORMAT_VERSION.to_string() {
            return Err(violation(loc, format!("unsupported version \"{version}\"")));
        }
        let audio_file = attr(root, loc, "audioFile")?.to_string();
        let num_channels: usize = parse_int(root, loc, "channels")?;
        let sample_rate: u32 = parse_int(root, loc, "sampleRate")?;
        if num_channels == 0 || sample_rate == 0 {
            return Err(violation(loc, "channels and sampleRate must be positive"));
        }

        let children = elements(root);
        let (prog, rest) = match children.split_first() {
            Some((p, rest)) if p.tag_name().name() == "audioProgramme" => (*p, rest),
            _ => return Err(violation(loc, "missing audioProgramme as first child")),
        };
        let (programme_name, mix_loudness, refs) = parse_programme(prog)?;

        let mut objects = Vec::new();
        let mut bounds = None;
        for (i, node) in rest.iter().enumerate() {
            let oloc = format!("{loc}/audioObject[{}]", i + 1);
            if node.tag_name().name() != "audioObject" {
                return Err(violation(format!("{loc}/{}", node.tag_name().name()), "unexpected element"));
            }
            let (object, b) = parse_object(*node, &oloc)?;
            if b.is_some() {
                bounds = b;
            }
            objects.push(object);
        }

        // Missing objects are reported by role.
        for role in [ObjectRole::Dialogue, ObjectRole::Background] {
            if !objects.iter().any(|o| o.role == role) {
                return Err(violation(loc, format!("missing audioObject with role \"{}\"", role.as_str())));
            }
        }
        let ids: Vec<&str> = objects.iter().map(|o| o.id.as_str()).collect();
        for r in &refs {
            if !ids.contains(&r.as_str()) {
                return Err(violation(
                    format!("{loc}/audioProgramme"),
                    format!("audioObjectIDRef \"{r}\" matches no audioObject"),
                ));
            }
        }
        let doc = AdmDocument {
            programme_name,
            audio_file,
            sample_rate,
            num_channels,
            objects,
            bounds: InteractivityBounds::default(),
            mix_loudness,
        };
        let bounds = bounds
            .ok_or_else(|| violation(format!("{loc}/audioObject"), "dialogue object lacks gainInteractionRange"))?;
        let doc = AdmDocument { bounds, ..doc };
        doc.validate(num_channels)?;
        Ok(doc)
    }
}

fn write_loudness(w: &mut Writer<Vec<u8>>, l: Loudness) {
    let ok = "writing to a Vec cannot fail";
    w.write_event(Event::Start(BytesStart::new("loudnessMetadata"))).expect(ok);
    let el = w.create_element("integratedLoudness");
    match l {
        Loudness::Lufs(v) => el.write_text_content(BytesText::new(&v.to_string())).expect(ok),
        Loudness::Silence => el.with_attribute(("status", "silence")).write_empty().expect(ok),
        Loudness::TooShort => el.with_attribute(("status", "too_short")).write_empty().expect(ok),
    };
    w.write_event(Event::End(BytesEnd::new("loudnessMetadata"))).expect(ok);
}

type Node<'a, 'i> = roxmltree::Node<'a, 'i>;

fn elements<'a, 'i>(node: Node<'a, 'i>) -> Vec<Node<'a, 'i>> {
    node.children().filter(|n| n.is_element()).collect()
}

fn attr<'a>(node: Node<'a, '_>, loc: &str, name: &str) -> Result<&'a str, DeliveryError> {
    node.attribute(name).ok_or_else(|| violation(loc, format!("missing attribute {name}")))
}

fn check_attrs(node: Node, loc: &str, required: &[&str], optional: &[&str]) -> Result<(), DeliveryError> {
    for a in node.attributes() {
        if !required.contains(&a.name()) && !optional.contains(&a.name()) {
            return Err(violation(loc, format!("unexpected attribute {}", a.name())));
        }
    }
    for r in required {
        attr(node, loc, r)?;
    }
    Ok(())
}

fn parse_int<T: std::str::FromStr>(node: Node, loc: &str, name: &str) -> Result<T, DeliveryError> {
    let v = attr(node, loc, name)?;
    v.trim().parse().map_err(|_| violation(loc, format!("attribute {name}=\"{v}\" is not an integer")))
}

fn no_children(node: Node, loc: &str) -> Result<(), DeliveryError> {
    match elements(node).first() {
        Some(c) => Err(violation(format!("{loc}/{}", c.tag_name().name()), "unexpected element")),
        None => Ok(()),
    }
}

/// Splits children into runs of expected element names, in order.
fn sequence<'a, 'i>(
    node: Node<'a, 'i>,
    loc: &str,
    spec: &[(&str, usize, usize)],
) -> Result<Vec<Vec<Node<'a, 'i>>>, DeliveryError> {
    let children = elements(node);
    let mut pos = 0;
    let mut groups = Vec::new();
    for &(name, min, max) in spec {
        let mut group = Vec::new();
        while pos < children.len() && children[pos].tag_name().name() == name && group.len() < max {
            group.push(children[pos]);
            pos += 1;
        }
        if group.len() < min {
            return Err(violation(
                format!("{loc}/{name}"),
                format!("expected at least {min} {name}, found {}", group.len()),
            ));
        }
        groups.push(group);
    }
    if let Some(extra) = children.get(pos) {
        return Err(violation(format!("{loc}/{}", extra.tag_name().name()), "unexpected element"));
    }
    Ok(groups)
}

fn parse_loudness_metadata(node: Node, loc: &str) -> Result<Loudness, DeliveryError> {
    check_attrs(node, loc, &[], &[])?;
    let groups = sequence(node, loc, &[("integratedLoudness", 1, 1)])?;
    let il = groups[0][0];
    let iloc = format!("{loc}/integratedLoudness");
    check_attrs(il, &iloc, &[], &["status"])?;
    no_children(il, &iloc)?;
    let text = il.text().unwrap_or("").trim();
    match il.attribute("status").unwrap_or("measured") {
        "measured" => match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Loudness::Lufs(v)),
            _ => Err(DeliveryError::NonNumericLoudness { location: iloc, value: text.to_string() }),
        },
        status @ ("silence" | "too_short") => {
            if !text.is_empty() {
                return Err(violation(iloc, format!("status \"{status}\" must not carry a value")));
            }
            Ok(if status == "silence" { Loudness::Silence } else { Loudness::TooShort })
        }
        other => Err(violation(iloc, format!("unknown status \"{other}\""))),
    }
}

fn parse_programme(node: Node) -> Result<(String, Loudness, Vec<String>), DeliveryError> {
    let loc = "/audioFormatExtended/audioProgramme";
    check_attrs(node, loc, &["audioProgrammeID", "audioProgrammeName"], &[])?;
    let groups = sequence(node, loc, &[("loudnessMetadata", 1, 1), ("audioObjectIDRef", 2, 2)])?;
    let loudness = parse_loudness_metadata(groups[0][0], &format!("{loc}/loudnessMetadata"))?;
    let refs = groups[1].iter().map(|n| n.text().unwrap_or("").trim().to_string()).collect();
    Ok((attr(node, loc, "audioProgrammeName")?.to_string(), loudness, refs))
}

fn parse_object(node: Node, loc: &str) -> Result<(AdmObject, Option<InteractivityBounds>), DeliveryError> {
    check_attrs(node, loc, &["audioObjectID", "audioObjectName", "role"], &[])?;
    let role_name = attr(node, loc, "role")?;
    let role = ObjectRole::parse(role_name).ok_or_else(|| violation(loc, format!("unknown role \"{role_name}\"")))?;
    let groups = sequence(
        node,
        loc,
        &[("loudnessMetadata", 1, 1), ("gainInteractionRange", 0, 2), ("audioTrackUID", 1, usize::MAX)],
    )?;
    let integrated_loudness = parse_loudness_metadata(groups[0][0], &format!("{loc}/loudnessMetadata"))?;

    let bounds = match (role, groups[1].len()) {
        (ObjectRole::Background, 0) => None,
        (ObjectRole::Dialogue, 2) => {
            let mut min = None;
            let mut max = None;
            for g in &groups[1] {
                let gloc = format!("{loc}/gainInteractionRange");
                check_attrs(*g, &gloc, &["bound"], &[])?;
                let text = g.text().unwrap_or("").trim();
                let v: f64 = text.parse().map_err(|_| violation(&gloc, format!("\"{text}\" is not a number")))?;
                match g.attribute("bound") {
                    Some("min") if min.is_none() => min = Some(v),
                    Some("max") if max.is_none() => max = Some(v),
                    b => return Err(violation(gloc, format!("bad or repeated bound {b:?}"))),
                }
            }
            Some(InteractivityBounds::new(min.unwrap(), max.unwrap())?)
        }
        (ObjectRole::Dialogue, _) => {
            return Err(violation(loc, "dialogue object needs gainInteractionRange min and max"))
        }
        (ObjectRole::Background, _) => {
            return Err(violation(format!("{loc}/gainInteractionRange"), "only allowed on dialogue"))
        }
    };

    let mut channels = Vec::new();
    for t in &groups[2] {
        let tloc = format!("{loc}/audioTrackUID");
        check_attrs(*t, &tloc, &["UID", "channelIndex"], &[])?;
        no_children(*t, &tloc)?;
        channels.push(parse_int(*t, &tloc, "channelIndex")?);
    }
    let object = AdmObject { id: attr(node, loc, "audioObjectID")?.to_string(), role, channels, integrated_loudness };
    Ok((object, bounds))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackagePaths {
    pub audio: PathBuf,
    pub metadata: PathBuf,
}

fn to_f32_precision(buf: &AudioBuffer) -> AudioBuffer {
    AudioBuffer::new(
        buf.sample_rate(),
        buf.channels().iter().map(|c| c.iter().map(|&x| x as f32 as f64).collect()).collect(),
    )
    .expect("same shape as a valid buffer")
}

fn ensure_dir(dir: &Path) -> Result<(), DeliveryError> {
    fs::create_dir_all(dir).map_err(|source| DeliveryError::Unwritable { path: dir.to_path_buf(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DeliveryError> {
    fs::write(path, bytes).map_err(|source| DeliveryError::Unwritable { path: path.to_path_buf(), source })
}

/// Writes `<name>.wav` (dialogue channels, then background channels, float32)
/// and `<name>.xml` into `out_dir`.
///
/// Loudness values describe the stems at float32 precision, i.e. exactly
/// what [`parse_package`] returns.
pub fn export_package(
    stems: &StemPair,
    bounds: &InteractivityBounds,
    programme_name: &str,
    out_dir: &Path,
    name: &str,
) -> Result<(PackagePaths, AdmDocument), DeliveryError> {
    bounds.validate()?;
    ensure_dir(out_dir)?;
    let dialogue = to_f32_precision(stems.dialogue());
    let background = to_f32_precision(stems.background());
    let nd = dialogue.num_channels();
    let nb = background.num_channels();
    let sr = dialogue.sample_rate();

    let mix = dialogue.add(&background)?;
    let doc = AdmDocument {
        programme_name: programme_name.to_string(),
        audio_file: format!("{name}.wav"),
        sample_rate: sr,
        num_channels: nd + nb,
        objects: vec![
            AdmObject {
                id: "AO_1001".into(),
                role: ObjectRole::Dialogue,
                channels: (0..nd).collect(),
                integrated_loudness: integrated_loudness(&dialogue)?.integrated,
            },
            AdmObject {
                id: "AO_1002".into(),
                role: ObjectRole::Background,
                channels: (nd..nd + nb).collect(),
                integrated_loudness: integrated_loudness(&background)?.integrated,
            },
        ],
        bounds: *bounds,
        mix_loudness: integrated_loudness(&mix)?.integrated,
    };
    doc.validate(nd + nb)?;

    let audio = out_dir.join(&doc.audio_file);
    let metadata = out_dir.join(format!("{name}.xml"));
    let all: Vec<Vec<f64>> = dialogue.into_channels().into_iter().chain(background.into_channels()).collect();
    write_wav(&AudioBuffer::new(sr, all)?, &audio, BitDepth::Float32)?;
    write_file(&metadata, doc.to_xml().as_bytes())?;
    Ok((PackagePaths { audio, metadata }, doc))
}

/// Reads a package written by [`export_package`] or an equivalent.
///
/// The audio path is taken from `paths.audio`; the document's `audioFile`
/// attribute is informative.
pub fn parse_package(paths: &PackagePaths) -> Result<(StemPair, AdmDocument), DeliveryError> {
    let text = fs::read_to_string(&paths.metadata)?;
    let doc = AdmDocument::from_xml(&text)?;
    let audio = read_wav(&paths.audio)?;
    doc.validate(audio.num_channels())?;
    if audio.num_channels() != doc.num_channels {
        return Err(violation(
            "/audioFormatExtended",
            format!("channels=\"{}\" but audio has {}", doc.num_channels, audio.num_channels()),
        ));
    }
    if audio.sample_rate() != doc.sample_rate {
        return Err(violation(
            "/audioFormatExtended",
            format!("sampleRate=\"{}\" but audio is {} Hz", doc.sample_rate, audio.sample_rate()),
        ));
    }
    let pick = |role| {
        let o = doc.object(role).expect("validated");
        AudioBuffer::new(audio.sample_rate(), o.channels.iter().map(|&c| audio.channel(c).to_vec()).collect())
    };
    let stems = StemPair::new(pick(ObjectRole::Dialogue)?, pick(ObjectRole::Background)?)?;
    Ok((stems, doc))
}

/// Per-stem loudness as carried in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StemLoudness {
    #[serde(with = "loudness_serde")]
    pub dialogue: Loudness,
    #[serde(with = "loudness_serde")]
    pub background: Loudness,
    #[serde(with = "loudness_serde")]
    pub mix: Loudness,
}

/// Machine-readable processing record. Contains no timestamps, so identical
/// inputs yield byte-identical manifests. Paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub program: String,
    pub preset: String,
    pub params: RemixParams,
    pub sample_rate: u32,
    pub num_samples: usize,
    #[serde(with = "loudness_serde")]
    pub loudness_before_lufs: Loudness,
    #[serde(with = "loudness_serde")]
    pub loudness_after_lufs: Loudness,
    pub makeup_gain_db: f64,
    pub clipped_samples: usize,
    pub peak: f64,
    pub enhanced_track: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub package: Option<PackageManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageManifest {
    pub audio: String,
    pub metadata: String,
    pub bounds: InteractivityBounds,
    pub stem_loudness: StemLoudness,
}

impl Manifest {
    pub fn loudness_delta(&self) -> Option<f64> {
        Some(self.loudness_after_lufs.lufs()? - self.loudness_before_lufs.lufs()?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, DeliveryError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), DeliveryError> {
        write_file(path, self.to_json().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, DeliveryError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTrack {
    pub track: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
    pub report: RemixReport,
}

/// Remixes with `preset` and writes a float32 stereo WAV to `out_path`, plus
/// the manifest next to it (same stem, `.json`).
pub fn render_enhanced_track(
    stems: &StemPair,
    preset: &Preset,
    out_path: &Path,
    cfg: &StftConfig,
) -> Result<RenderedTrack, DeliveryError> {
    let (out, report) = remix(stems, &preset.params, cfg)?;
    if let Some(dir) = out_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_wav(&out, out_path, BitDepth::Float32)?;
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        program: out_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        preset: preset.name.clone(),
        params: preset.params,
        sample_rate: out.sample_rate(),
        num_samples: out.len(),
        loudness_before_lufs: report.loudness_before,
        loudness_after_lufs: report.loudness_after,
        makeup_gain_db: report.makeup_gain_db,
        clipped_samples: report.clipped_samples,
        peak: report.peak,
        enhanced_track: out_path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        backend: None,
        input: None,
        package: None,
    };
    let manifest_path = out_path.with_extension("json");
    manifest.write(&manifest_path)?;
    Ok(RenderedTrack { track: out_path.to_path_buf(), manifest_path, manifest, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> AdmDocument {
        AdmDocument {
            programme_name: "Tatort & Co <1>".into(),
            audio_file: "package.wav".into(),
            sample_rate: 48_000,
            num_channels: 4,
            objects: vec![
                AdmObject {
                    id: "AO_1001".into(),
                    role: ObjectRole::Dialogue,
                    channels: vec![0, 1],
                    integrated_loudness: Loudness::Lufs(-26.123456789012345),
                },
                AdmObject {
                    id: "AO_1002".into(),
                    role: ObjectRole::Background,
                    channels: vec![2, 3],
                    integrated_loudness: Loudness::Silence,
                },
            ],
            bounds: InteractivityBounds::default(),
            mix_loudness: Loudness::Lufs(-23.0),
        }
    }

    #[test]
    fn xml_round_trip_is_exact() {
        let d = doc();
        assert_eq!(AdmDocument::from_xml(&d.to_xml()).unwrap(), d);
    }

    #[test]
    fn bounds_must_straddle_zero() {
        assert!(InteractivityBounds::new(-6.0, 12.0).is_ok());
        assert!(InteractivityBounds::new(1.0, 12.0).is_err());
        assert!(InteractivityBounds::new(-6.0, -1.0).is_err());
        assert!(InteractivityBounds::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn unknown_elements_and_attributes_rejected() {
        let xml = doc().to_xml();
        let extra = xml.replace("</audioFormatExtended>", "<foo/></audioFormatExtended>");
        assert!(matches!(
            AdmDocument::from_xml(&extra),
            Err(DeliveryError::SchemaViolation { location, .. }) if location.ends_with("/foo")
        ));
        let attr = xml.replace("role=\"background\"", "role=\"background\" x=\"1\"");
        assert!(matches!(AdmDocument::from_xml(&attr), Err(DeliveryError::SchemaViolation { .. })));
        assert!(matches!(AdmDocument::from_xml("<a"), Err(DeliveryError::Xml(_))));
    }

    #[test]
    fn manifest_round_trip() {
        let m = Manifest {
            manifest_version: 1,
            program: "p".into(),
            preset: "Sprache betont".into(),
            params: RemixParams::new(3.0, 6.0),
            sample_rate: 48_000,
            num_samples: 10,
            loudness_before_lufs: Loudness::Lufs(-23.1),
            loudness_after_lufs: Loudness::TooShort,
            makeup_gain_db: 0.1,
            clipped_samples: 0,
            peak: 0.5,
            enhanced_track: "p.wav".into(),
            backend: Some("center".into()),
            input: None,
            package: None,
        };
        assert_eq!(Manifest::from_json(&m.to_json()).unwrap(), m);
        assert!(m.to_json().contains("\"too_short\""));
    }
}
