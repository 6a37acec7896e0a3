//! Corpus manifests: tab-separated index files mapping utterance ids to
//! audio paths, labels, speakers, provenance, and transform logs.
//!
//! One record per line: `utterance_id, path, label, speaker_id, provenance,
//! transform_log` where the log is compact JSON. Lines starting with `#` are
//! headers or comments. Paths are relative to the manifest's directory.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::{AppliedTransform, TransformKind};

/// Ground-truth class of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    /// Manifest column text: `bonafide` or `spoof`.
    pub fn as_manifest_str(self) -> &'static str {
        match self {
            Label::Real => "bonafide",
            Label::Fake => "spoof",
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bonafide" => Ok(Label::Real),
            "spoof" => Ok(Label::Fake),
            other => Err(format!(
                "unknown label '{other}' (expected 'bonafide' or 'spoof')"
            )),
        }
    }
}

/// How a sample came to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Real,
    SelfVc,
    SelfRec,
    CrossVc,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::SelfVc => "self_vc",
            Provenance::SelfRec => "self_rec",
            Provenance::CrossVc => "cross_vc",
        }
    }

    /// The label this provenance mandates.
    pub fn implied_label(self) -> Label {
        match self {
            Provenance::Real => Label::Real,
            _ => Label::Fake,
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "real" => Ok(Provenance::Real),
            "self_vc" => Ok(Provenance::SelfVc),
            "self_rec" => Ok(Provenance::SelfRec),
            "cross_vc" => Ok(Provenance::CrossVc),
            other => Err(format!("unknown provenance '{other}'")),
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One applied transform plus the pipeline stage it ran at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformLogEntry {
    pub stage: String,
    #[serde(flatten)]
    pub transform: AppliedTransform,
}

/// Everything recorded about how a fake was synthesized.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformLog {
    /// Backend that produced the audio (VC or vocoder name).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    /// Speaker the conversion targeted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_speaker: Option<String>,
    /// Utterance used as the conversion target reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_utterance: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<TransformLogEntry>,
}

impl TransformLog {
    pub fn is_empty(&self) -> bool {
        self.backend.is_none()
            && self.target_speaker.is_none()
            && self.target_utterance.is_none()
            && self.entries.is_empty()
    }

    pub fn kinds(&self) -> Vec<TransformKind> {
        self.entries.iter().map(|e| e.transform.kind()).collect()
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub utterance_id: String,
    pub path: PathBuf,
    pub label: Label,
    pub speaker_id: String,
    pub provenance: Provenance,
    #[serde(default)]
    pub transform_log: TransformLog,
}

impl SampleRecord {
    /// A real (bona fide) record with an empty transform log.
    pub fn real(utterance_id: impl Into<String>, path: impl Into<PathBuf>, speaker_id: impl Into<String>) -> Self {
        SampleRecord {
            utterance_id: utterance_id.into(),
            path: path.into(),
            label: Label::Real,
            speaker_id: speaker_id.into(),
            provenance: Provenance::Real,
            transform_log: TransformLog::default(),
        }
    }

    /// Per-record consistency: provenance implies label, fields are
    /// non-empty and free of separator characters.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.utterance_id.is_empty() {
            return Err("empty utterance_id".into());
        }
        if self.speaker_id.is_empty() {
            return Err("empty speaker_id".into());
        }
        if self.path.as_os_str().is_empty() {
            return Err("empty path".into());
        }
        for (name, value) in [
            ("utterance_id", self.utterance_id.as_str()),
            ("speaker_id", self.speaker_id.as_str()),
        ] {
            if value.contains(['\t', '\n', '\r']) {
                return Err(format!("{name} contains tab or newline"));
            }
        }
        if self.path.to_string_lossy().contains(['\t', '\n', '\r']) {
            return Err("path contains tab or newline".into());
        }
        if self.label != self.provenance.implied_label() {
            return Err(format!(
                "provenance {} requires label {}, found {}",
                self.provenance,
                self.provenance.implied_label().as_manifest_str(),
                self.label.as_manifest_str()
            ));
        }
        Ok(())
    }
}

const HEADER: &str = "# utterance_id\tpath\tlabel\tspeaker_id\tprovenance\ttransform_log";

/// Write records as a tab-separated manifest with a `#` header line.
pub fn write_manifest(path: impl AsRef<Path>, records: &[SampleRecord]) -> Result<()> {
    let path = path.as_ref();
    for (i, r) in records.iter().enumerate() {
        r.check().map_err(|msg| {
            Error::InvalidInput(format!("record {i} ('{}'): {msg}", r.utterance_id))
        })?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let write_err = |e| Error::io(path, e);
    writeln!(out, "{HEADER}").map_err(write_err)?;
    for r in records {
        let log = serde_json::to_string(&r.transform_log)
            .map_err(|e| Error::Other(format!("transform_log for '{}': {e}", r.utterance_id)))?;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.utterance_id,
            r.path.display(),
            r.label.as_manifest_str(),
            r.speaker_id,
            r.provenance,
            log
        )
        .map_err(write_err)?;
    }
    out.flush().map_err(write_err)?;
    Ok(())
}

/// Read a manifest, failing on any malformed line.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut problems = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_line(&line) {
            Ok(r) => records.push(r),
            Err(msg) => problems.push(format!("line {lineno}: {msg}")),
        }
    }
    if !problems.is_empty() {
        return Err(Error::ManifestValidation {
            report: problems.join("\n"),
        });
    }
    Ok(records)
}

fn parse_line(line: &str) -> std::result::Result<SampleRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 tab-separated columns, found {}", fields.len()));
    }
    let label: Label = fields[2].parse()?;
    let provenance: Provenance = fields[4].parse()?;
    let transform_log: TransformLog = serde_json::from_str(fields[5])
        .map_err(|e| format!("bad transform_log JSON: {e}"))?;
    let record = SampleRecord {
        utterance_id: fields[0].to_string(),
        path: PathBuf::from(fields[1]),
        label,
        speaker_id: fields[3].to_string(),
        provenance,
        transform_log,
    };
    record.check()?;
    Ok(record)
}

/// Full validation report for a manifest file: structure, duplicate ids,
/// audio file existence, and sample-rate conformity with the pipeline rate.
///
/// Returns the list of problems; an empty list means the manifest is clean.
pub fn validate_manifest(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let base = path.parent().unwrap_or(Path::new("."));

    let mut problems = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let record = match parse_line(&line) {
            Ok(r) => r,
            Err(msg) => {
                problems.push(format!("line {lineno}: {msg}"));
                continue;
            }
        };
        if let Some(first) = seen.insert(record.utterance_id.clone(), lineno) {
            problems.push(format!(
                "line {lineno}: duplicate utterance_id '{}' (first at line {first})",
                record.utterance_id
            ));
        }
        let audio = base.join(&record.path);
        if !audio.is_file() {
            problems.push(format!(
                "line {lineno}: audio file not found: {}",
                audio.display()
            ));
            continue;
        }
        match hound::WavReader::open(&audio) {
            Ok(reader) => {
                let rate = reader.spec().sample_rate;
                if rate != crate::audio::PIPELINE_RATE {
                    problems.push(format!(
                        "line {lineno}: {} has sample rate {rate}, pipeline expects {}",
                        record.path.display(),
                        crate::audio::PIPELINE_RATE
                    ));
                }
            }
            Err(e) => problems.push(format!(
                "line {lineno}: cannot read {}: {e}",
                record.path.display()
            )),
        }
    }
    Ok(problems)
}

/// Resolve a record's audio path against the directory of its manifest.
pub fn resolve_audio_path(manifest_path: &Path, record: &SampleRecord) -> PathBuf {
    manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&record.path)
}
