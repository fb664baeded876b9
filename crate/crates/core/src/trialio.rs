//! Trial data model and persistence.
//!
//! # `MITS` trial container (version 1, little-endian)
//!
//! | field | type |
//! |---|---|
//! | magic | `b"MITS"` |
//! | version | `u32` = 1 |
//! | subject | `u32` length + UTF-8 |
//! | session | `u8`, ASCII `T` or `E` |
//! | sample rate | `f64` Hz |
//! | channel count | `u32` |
//! | channel names | count × (`u32` length + UTF-8) |
//! | trial count | `u32` |
//! | per trial | `u32` n_samples, `u32` cue_sample, `u8` label, channels × n_samples `f32`, channel-major |
//!
//! Label byte: bit 0 is the class (0 left, 1 right); bit 7 marks a trial
//! flagged as artifact-contaminated in the source recording. Other bits must
//! be zero.
//!
//! # `MITC` tensor cache (version 1)
//!
//! magic `b"MITC"`, `u32` version, `u64` grid hash, `u64` config digest,
//! `u32` count, `u32` height, `u32` width, `u32` planes, then per tensor a
//! `u8` label (0/1) followed by height × width × planes `f64`.
//!
//! # Text import
//!
//! A directory holding `manifest.toml` and one comma-separated file per
//! trial (one row per channel, one column per sample):
//!
//! ```toml
//! subject = "A01"
//! session = "T"
//! sample_rate = 250.0
//! channels = ["Fz", "FC3", "..."]
//!
//! [[trials]]
//! file = "trial_000.csv"
//! cue_sample = 500
//! label = "left"
//! rejected = false   # optional
//! ```

use std::io;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::autonet::Tensor3;
use crate::binfmt::{limit, BinError, ByteReader, ByteWriter};
use crate::featmap::FeatureTensor;
use crate::{Label, Session, SubjectId};

pub const TRIALSET_MAGIC: &[u8; 4] = b"MITS";
pub const TRIALSET_VERSION: u32 = 1;
pub const CACHE_MAGIC: &[u8; 4] = b"MITC";
pub const CACHE_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";

const REJECTED_BIT: u8 = 0x80;

#[derive(Debug, thiserror::Error)]
pub enum TrialIoError {
    #[error(transparent)]
    Format(#[from] BinError),
    #[error("container declares {declared} channels, expected {expected}")]
    ChannelCount { declared: usize, expected: usize },
    #[error("trial {trial}: invalid label byte {byte:#04x}")]
    BadLabel { trial: usize, byte: u8 },
    #[error("invalid session byte {0:#04x}")]
    BadSession(u8),
    #[error("invalid trial set: {0}")]
    Invariant(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: line {line}: {message}", path.display())]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: line {line}: unknown label {label:?} (only left and right hand classes are supported)", path.display())]
    UnknownLabel {
        path: PathBuf,
        line: usize,
        label: String,
    },
    #[error("{}: {rows} rows but {expected} channels declared (expected one row per channel)", path.display())]
    Orientation {
        path: PathBuf,
        rows: usize,
        expected: usize,
    },
    #[error("{}: line {line}: {message}", path.display())]
    Cell {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TrialIoError + '_ {
    move |source| TrialIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    /// Channel-major samples: `data[c * n_samples + t]`.
    pub data: Vec<f32>,
    pub n_samples: usize,
    pub cue_sample: usize,
    pub label: Label,
    /// Marked as artifact-contaminated in the source recording.
    pub rejected: bool,
}

impl Trial {
    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn channels_f64(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.n_samples.max(1))
            .map(|ch| ch.iter().map(|v| *v as f64).collect())
            .collect()
    }
}

/// One subject-session of labeled trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub subject: SubjectId,
    pub session: Session,
    pub sample_rate: f64,
    pub channels: Vec<String>,
    pub trials: Vec<Trial>,
}

impl TrialSet {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<(), TrialIoError> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(TrialIoError::Invariant(format!("sample rate {}", self.sample_rate)));
        }
        if self.channels.is_empty() {
            return Err(TrialIoError::Invariant("no channels".into()));
        }
        for (i, t) in self.trials.iter().enumerate() {
            if t.data.len() != t.n_samples * self.channels.len() {
                return Err(TrialIoError::Invariant(format!(
                    "trial {i}: {} samples stored, expected {} channels × {}",
                    t.data.len(),
                    self.channels.len(),
                    t.n_samples
                )));
            }
            if t.cue_sample >= t.n_samples.max(1) {
                return Err(TrialIoError::Invariant(format!(
                    "trial {i}: cue sample {} outside {} samples",
                    t.cue_sample, t.n_samples
                )));
            }
        }
        Ok(())
    }

    /// Trials kept for analysis; flagged trials are dropped unless
    /// `include_rejected`.
    pub fn usable(&self, include_rejected: bool) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(move |t| include_rejected || !t.rejected)
    }

    pub fn key(&self) -> String {
        format!("{}{}", self.subject, self.session)
    }
}

/// Caps applied while decoding untrusted containers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadLimits {
    /// Required channel count, if any.
    pub expected_channels: Option<usize>,
    pub max_channels: usize,
    pub max_trials: usize,
    pub max_samples: usize,
    pub max_name_len: usize,
}

impl Default for ReadLimits {
    fn default() -> Self {
        ReadLimits {
            expected_channels: Some(22),
            max_channels: 512,
            max_trials: 1 << 20,
            max_samples: 1 << 24,
            max_name_len: 256,
        }
    }
}

pub fn trialset_to_bytes(set: &TrialSet) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.magic(TRIALSET_MAGIC).u32(TRIALSET_VERSION);
    w.str(set.subject.as_str());
    w.u8(set.session.as_char() as u8);
    w.f64(set.sample_rate);
    w.u32(set.channels.len() as u32);
    for c in &set.channels {
        w.str(c);
    }
    w.u32(set.trials.len() as u32);
    for t in &set.trials {
        w.u32(t.n_samples as u32).u32(t.cue_sample as u32);
        let flag = if t.rejected { REJECTED_BIT } else { 0 };
        w.u8(t.label.index() as u8 | flag);
        for v in &t.data {
            w.f32(*v);
        }
    }
    w.into_bytes()
}

pub fn trialset_from_bytes(bytes: &[u8], limits: &ReadLimits) -> Result<TrialSet, TrialIoError> {
    let mut r = ByteReader::new(bytes);
    r.magic(TRIALSET_MAGIC)?;
    r.version(TRIALSET_VERSION)?;
    let subject = SubjectId(r.str("subject", limits.max_name_len)?);
    let sb = r.u8()?;
    let session = Session::from_char(sb as char).ok_or(TrialIoError::BadSession(sb))?;
    let sample_rate = r.f64()?;
    let n_ch = r.u32()? as usize;
    if let Some(expected) = limits.expected_channels {
        if n_ch != expected {
            return Err(TrialIoError::ChannelCount {
                declared: n_ch,
                expected,
            });
        }
    }
    limit("channel count", n_ch, limits.max_channels)?;
    let channels = (0..n_ch)
        .map(|_| r.str("channel name", limits.max_name_len))
        .collect::<Result<Vec<_>, _>>()?;
    let n_trials = r.u32()? as usize;
    limit("trial count", n_trials, limits.max_trials)?;
    // every trial needs at least its 9-byte header
    r.need(n_trials * 9)?;
    let mut trials = Vec::with_capacity(n_trials);
    for i in 0..n_trials {
        let n_samples = r.u32()? as usize;
        limit("samples per trial", n_samples, limits.max_samples)?;
        let cue_sample = r.u32()? as usize;
        let byte = r.u8()?;
        if byte & !(REJECTED_BIT | 1) != 0 {
            return Err(TrialIoError::BadLabel { trial: i, byte });
        }
        let label = Label::from_index((byte & 1) as usize).unwrap();
        let data = r.f32s(n_ch * n_samples)?;
        trials.push(Trial {
            data,
            n_samples,
            cue_sample,
            label,
            rejected: byte & REJECTED_BIT != 0,
        });
    }
    r.finish()?;
    Ok(TrialSet {
        subject,
        session,
        sample_rate,
        channels,
        trials,
    })
}

pub fn write_trialset(set: &TrialSet, path: &Path) -> Result<(), TrialIoError> {
    std::fs::write(path, trialset_to_bytes(set)).map_err(io_err(path))
}

pub fn read_trialset(path: &Path) -> Result<TrialSet, TrialIoError> {
    read_trialset_with(path, &ReadLimits::default())
}

pub fn read_trialset_with(path: &Path, limits: &ReadLimits) -> Result<TrialSet, TrialIoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    trialset_from_bytes(&bytes, limits)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    subject: String,
    session: toml::Spanned<String>,
    sample_rate: f64,
    channels: Vec<String>,
    #[serde(default)]
    trials: Vec<ManifestTrial>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestTrial {
    file: String,
    cue_sample: usize,
    label: toml::Spanned<String>,
    #[serde(default)]
    rejected: bool,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Reads a text-exported session directory.
pub fn import_text(dir: &Path) -> Result<TrialSet, TrialIoError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| TrialIoError::Manifest {
        path: manifest_path.clone(),
        line: e.span().map_or(0, |s| line_of(&text, s.start)),
        message: e.message().to_string(),
    })?;
    let session = manifest
        .session
        .get_ref()
        .parse::<Session>()
        .map_err(|message| TrialIoError::Manifest {
            path: manifest_path.clone(),
            line: line_of(&text, manifest.session.span().start),
            message,
        })?;
    if manifest.channels.is_empty() {
        return Err(TrialIoError::Manifest {
            path: manifest_path,
            line: 0,
            message: "channel list is empty".into(),
        });
    }
    let n_ch = manifest.channels.len();
    let mut trials = Vec::with_capacity(manifest.trials.len());
    for mt in &manifest.trials {
        let label = mt
            .label
            .get_ref()
            .parse::<Label>()
            .map_err(|_| TrialIoError::UnknownLabel {
                path: manifest_path.clone(),
                line: line_of(&text, mt.label.span().start),
                label: mt.label.get_ref().clone(),
            })?;
        let path = dir.join(&mt.file);
        let (data, n_samples) = read_trial_csv(&path, n_ch)?;
        trials.push(Trial {
            data,
            n_samples,
            cue_sample: mt.cue_sample,
            label,
            rejected: mt.rejected,
        });
    }
    let set = TrialSet {
        subject: SubjectId(manifest.subject),
        session,
        sample_rate: manifest.sample_rate,
        channels: manifest.channels,
        trials,
    };
    set.validate()?;
    Ok(set)
}

fn read_trial_csv(path: &Path, n_channels: usize) -> Result<(Vec<f32>, usize), TrialIoError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(io::BufReader::new(file));
    let mut data = Vec::new();
    let mut rows = 0usize;
    let mut width: Option<usize> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| TrialIoError::Cell {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(rows + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows += 1;
        if rows > n_channels {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(TrialIoError::Cell {
                    path: path.to_path_buf(),
                    line,
                    message: format!("{} columns, previous rows have {w}", rec.len()),
                })
            }
            _ => {}
        }
        for (col, cell) in rec.iter().enumerate() {
            let v: f32 = cell.parse().map_err(|_| TrialIoError::Cell {
                path: path.to_path_buf(),
                line,
                message: format!("column {}: non-numeric cell {cell:?}", col + 1),
            })?;
            data.push(v);
        }
    }
    if rows != n_channels {
        return Err(TrialIoError::Orientation {
            path: path.to_path_buf(),
            rows,
            expected: n_channels,
        });
    }
    Ok((data, width.unwrap_or(0)))
}

/// Writes a session as a text-import directory (manifest plus CSV files).
pub fn export_text(set: &TrialSet, dir: &Path) -> Result<(), TrialIoError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = String::new();
    manifest.push_str(&format!("subject = {:?}\n", set.subject.as_str()));
    manifest.push_str(&format!("session = \"{}\"\n", set.session));
    manifest.push_str(&format!("sample_rate = {:?}\n", set.sample_rate));
    let names: Vec<String> = set.channels.iter().map(|c| format!("{c:?}")).collect();
    manifest.push_str(&format!("channels = [{}]\n", names.join(", ")));
    for (i, t) in set.trials.iter().enumerate() {
        let file = format!("trial_{i:04}.csv");
        manifest.push_str(&format!(
            "\n[[trials]]\nfile = \"{file}\"\ncue_sample = {}\nlabel = \"{}\"\n",
            t.cue_sample, t.label
        ));
        if t.rejected {
            manifest.push_str("rejected = true\n");
        }
        let mut body = String::new();
        for c in 0..set.n_channels() {
            let row: Vec<String> = t.channel(c).iter().map(|v| format!("{v:?}")).collect();
            body.push_str(&row.join(","));
            body.push('\n');
        }
        let p = dir.join(&file);
        std::fs::write(&p, body).map_err(io_err(&p))?;
    }
    let p = dir.join(MANIFEST_FILE);
    std::fs::write(&p, manifest).map_err(io_err(&p))
}

/// Decoded tensor cache.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCache {
    pub tensors: Vec<FeatureTensor>,
    pub grid_hash: u64,
    pub config_digest: u64,
    /// Set when the cache was built under a different grid than requested.
    pub stale: bool,
}

pub fn tensors_to_bytes(tensors: &[FeatureTensor], grid_hash: u64, config_digest: u64) -> Vec<u8> {
    let (h, w, c) = tensors
        .first()
        .map_or((6, 7, 12), |t| (t.planes.height(), t.planes.width(), t.planes.channels()));
    let mut out = ByteWriter::new();
    out.magic(CACHE_MAGIC).u32(CACHE_VERSION).u64(grid_hash).u64(config_digest);
    out.u32(tensors.len() as u32).u32(h as u32).u32(w as u32).u32(c as u32);
    for t in tensors {
        out.u8(t.label.index() as u8);
        out.f64s(t.planes.data());
    }
    out.into_bytes()
}

pub fn tensors_from_bytes(bytes: &[u8], expected_grid_hash: u64) -> Result<TensorCache, TrialIoError> {
    let mut r = ByteReader::new(bytes);
    r.magic(CACHE_MAGIC)?;
    r.version(CACHE_VERSION)?;
    let grid_hash = r.u64()?;
    let config_digest = r.u64()?;
    let count = r.u32()? as usize;
    let (h, w, c) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    limit("tensor height", h, 64)?;
    limit("tensor width", w, 64)?;
    limit("tensor planes", c, 1024)?;
    let per = 1 + 8 * h * w * c;
    r.need(count.saturating_mul(per))?;
    let mut tensors = Vec::with_capacity(count);
    for i in 0..count {
        let byte = r.u8()?;
        let label = Label::from_index(byte as usize).ok_or(TrialIoError::BadLabel { trial: i, byte })?;
        let data = r.f64s(h * w * c)?;
        tensors.push(FeatureTensor {
            planes: Tensor3::from_vec(h, w, c, data),
            label,
        });
    }
    r.finish()?;
    let stale = grid_hash != expected_grid_hash;
    if stale {
        log::warn!(
            "tensor cache was built under grid {grid_hash:016x}, current grid is {expected_grid_hash:016x}; tensors may be stale"
        );
    }
    Ok(TensorCache {
        tensors,
        grid_hash,
        config_digest,
        stale,
    })
}

pub fn cache_tensors(
    tensors: &[FeatureTensor],
    grid_hash: u64,
    config_digest: u64,
    path: &Path,
) -> Result<(), TrialIoError> {
    std::fs::write(path, tensors_to_bytes(tensors, grid_hash, config_digest)).map_err(io_err(path))
}

pub fn load_tensors(path: &Path, expected_grid_hash: u64) -> Result<TensorCache, TrialIoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    tensors_from_bytes(&bytes, expected_grid_hash)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featmap::iv2a_channels;

    fn toy_set() -> TrialSet {
        let channels = iv2a_channels();
        let trials = (0..2)
            .map(|i| Trial {
                data: (0..22 * 10).map(|k| (k as f32) * 0.5 - i as f32).collect(),
                n_samples: 10,
                cue_sample: 2,
                label: if i == 0 { Label::Left } else { Label::Right },
                rejected: i == 1,
            })
            .collect();
        TrialSet {
            subject: "A01".into(),
            session: Session::T,
            sample_rate: 250.0,
            channels,
            trials,
        }
    }

    #[test]
    fn container_round_trip() {
        let set = toy_set();
        let bytes = trialset_to_bytes(&set);
        let back = trialset_from_bytes(&bytes, &ReadLimits::default()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn truncated_mid_trial() {
        let bytes = trialset_to_bytes(&toy_set());
        let cut = bytes.len() - 17;
        match trialset_from_bytes(&bytes[..cut], &ReadLimits::default()) {
            Err(TrialIoError::Format(BinError::Truncated { expected, actual })) => {
                assert_eq!(actual, cut);
                assert_eq!(expected, bytes.len());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_99_rejected() {
        let mut bytes = trialset_to_bytes(&toy_set());
        bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            trialset_from_bytes(&bytes, &ReadLimits::default()),
            Err(TrialIoError::Format(BinError::UnsupportedVersion { found: 99, .. }))
        ));
        let mut bytes = trialset_to_bytes(&toy_set());
        bytes[..4].copy_from_slice(b"MITZ");
        assert!(matches!(
            trialset_from_bytes(&bytes, &ReadLimits::default()),
            Err(TrialIoError::Format(BinError::BadMagic { .. }))
        ));
    }

    #[test]
    fn channel_count_mismatch() {
        let mut set = toy_set();
        set.channels.pop();
        for t in &mut set.trials {
            t.data.truncate(21 * 10);
        }
        let bytes = trialset_to_bytes(&set);
        assert!(matches!(
            trialset_from_bytes(&bytes, &ReadLimits::default()),
            Err(TrialIoError::ChannelCount { declared: 21, expected: 22 })
        ));
        let relaxed = ReadLimits {
            expected_channels: None,
            ..Default::default()
        };
        assert_eq!(trialset_from_bytes(&bytes, &relaxed).unwrap(), set);
    }

    #[test]
    fn huge_trial_count_is_refused_before_allocation() {
        let mut bytes = trialset_to_bytes(&toy_set());
        // trial count sits right after the header; overwrite with 1M
        let header = bytes.len() - 2 * (9 + 22 * 10 * 4) - 4;
        bytes[header..header + 4].copy_from_slice(&1_000_000u32.to_le_bytes());
        assert!(matches!(
            trialset_from_bytes(&bytes, &ReadLimits::default()),
            Err(TrialIoError::Format(BinError::Truncated { .. }))
        ));
    }

    #[test]
    fn text_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let set = toy_set();
        export_text(&set, dir.path()).unwrap();
        let back = import_text(dir.path()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn text_import_rejects_extra_row() {
        let dir = tempfile::tempdir().unwrap();
        export_text(&toy_set(), dir.path()).unwrap();
        let p = dir.path().join("trial_0001.csv");
        let mut body = std::fs::read_to_string(&p).unwrap();
        body.push_str("1,2,3,4,5,6,7,8,9,10\n");
        std::fs::write(&p, body).unwrap();
        match import_text(dir.path()) {
            Err(TrialIoError::Orientation { rows: 23, expected: 22, path }) => {
                assert!(path.ends_with("trial_0001.csv"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn text_import_rejects_foot_label() {
        let dir = tempfile::tempdir().unwrap();
        export_text(&toy_set(), dir.path()).unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&p).unwrap().replacen("label = \"right\"", "label = \"foot\"", 1);
        std::fs::write(&p, &text).unwrap();
        let expected_line = text.lines().position(|l| l.contains("foot")).unwrap() + 1;
        match import_text(dir.path()) {
            Err(TrialIoError::UnknownLabel { label, line, .. }) => {
                assert_eq!(label, "foot");
                assert_eq!(line, expected_line);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn text_import_rejects_non_numeric_cell() {
        let dir = tempfile::tempdir().unwrap();
        export_text(&toy_set(), dir.path()).unwrap();
        let p = dir.path().join("trial_0000.csv");
        let body = std::fs::read_to_string(&p).unwrap();
        let mut lines: Vec<String> = body.lines().map(String::from).collect();
        lines[4] = lines[4].replacen(',', ",abc,", 1);
        lines[4] = lines[4].rsplit_once(',').unwrap().0.to_string();
        std::fs::write(&p, lines.join("\n")).unwrap();
        match import_text(dir.path()) {
            Err(TrialIoError::Cell { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("abc"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_manifest_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = import_text(dir.path()).unwrap_err();
        assert!(err.to_string().contains(MANIFEST_FILE), "{err}");
    }

    #[test]
    fn tensor_cache_round_trip_and_staleness() {
        let mut t = FeatureTensor::zeros(Label::Right);
        t.planes.data_mut()[17] = -3.25;
        let tensors = vec![t, FeatureTensor::zeros(Label::Left)];
        let bytes = tensors_to_bytes(&tensors, 42, 7);
        let back = tensors_from_bytes(&bytes, 42).unwrap();
        assert_eq!(back.tensors, tensors);
        assert!(!back.stale);
        assert_eq!(back.config_digest, 7);
        assert!(tensors_from_bytes(&bytes, 43).unwrap().stale);

        let empty = tensors_to_bytes(&[], 42, 7);
        assert!(tensors_from_bytes(&empty, 42).unwrap().tensors.is_empty());
    }
}
