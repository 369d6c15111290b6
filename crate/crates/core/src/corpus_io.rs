//! On-disk artifacts: feature files, corpus manifests, alignment tracks and
//! segmentation outputs.
//!
//! Feature files (`FTRS`) are little-endian binary:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 4     | magic `FTRS`                              |
//! | 4     | `u32` version, always 1                   |
//! | 4     | `u32` number of rows `T`                  |
//! | 4     | `u32` number of columns `D`               |
//! | 4     | `f32` frame rate (frames per second)      |
//! | 4·T·D | `f32` values, row-major (frame-major)     |
//!
//! Manifests and segmentation outputs are JSON Lines; alignments are
//! tab-separated `utt_id start end label`.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

pub const FTRS_MAGIC: &[u8; 4] = b"FTRS";
pub const FTRS_VERSION: u32 = 1;

/// Tolerance used when checking that segments tile an utterance.
pub const COVERAGE_TOLERANCE: f64 = 1e-9;

/// Per-utterance matrix of frame vectors.
///
/// Frame `t` spans `[t / frame_rate, (t + 1) / frame_rate)` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub utt_id: String,
    pub frames: Matrix<f32>,
    pub frame_rate: f32,
}

impl FeatureSequence {
    pub fn new(utt_id: impl Into<String>, frames: Matrix<f32>, frame_rate: f32) -> Result<Self> {
        let seq = Self {
            utt_id: utt_id.into(),
            frames,
            frame_rate,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    /// Duration in seconds, `T / frame_rate`.
    pub fn duration(&self) -> f64 {
        self.num_frames() as f64 / self.frame_rate as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.rows() == 0 {
            return Err(Error::Data(format!("{}: sequence has no frames", self.utt_id)));
        }
        if self.frames.cols() == 0 {
            return Err(Error::Data(format!("{}: frames have dimension 0", self.utt_id)));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(Error::Data(format!(
                "{}: frame rate must be positive, got {}",
                self.utt_id, self.frame_rate
            )));
        }
        check_finite(self.frames.as_slice())
    }

    /// Frames widened to double precision.
    pub fn frames_f64(&self) -> Matrix<f64> {
        self.frames.map(|&v| v as f64)
    }
}

fn check_finite(values: &[f32]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Data(format!("non-finite value at payload index {i}"))),
        None => Ok(()),
    }
}

/// Writes a raw FTRS matrix. Used for feature files and for codebooks
/// (which store a frame rate of 0).
pub fn write_ftrs(path: &Path, rows: &Matrix<f32>, frame_rate: f32) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let to_io = |e| Error::io(path, e);
    w.write_all(FTRS_MAGIC).map_err(to_io)?;
    w.write_u32::<LittleEndian>(FTRS_VERSION).map_err(to_io)?;
    w.write_u32::<LittleEndian>(rows.rows() as u32).map_err(to_io)?;
    w.write_u32::<LittleEndian>(rows.cols() as u32).map_err(to_io)?;
    w.write_f32::<LittleEndian>(frame_rate).map_err(to_io)?;
    for &v in rows.as_slice() {
        w.write_f32::<LittleEndian>(v).map_err(to_io)?;
    }
    w.flush().map_err(to_io)
}

/// Reads a raw FTRS matrix and its frame-rate field.
pub fn read_ftrs(path: &Path) -> Result<(Matrix<f32>, f32)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    parse_ftrs(&bytes)
}

fn parse_ftrs(bytes: &[u8]) -> Result<(Matrix<f32>, f32)> {
    if bytes.len() < 20 {
        return Err(Error::Format(format!(
            "file is {} bytes, shorter than the 20-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != FTRS_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
    }
    let mut header = &bytes[4..20];
    let version = header.read_u32::<LittleEndian>().expect("header length checked");
    if version != FTRS_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rows = header.read_u32::<LittleEndian>().expect("header length checked") as usize;
    let cols = header.read_u32::<LittleEndian>().expect("header length checked") as usize;
    let frame_rate = header.read_f32::<LittleEndian>().expect("header length checked");

    let payload = &bytes[20..];
    let expected = rows * cols;
    if !payload.len().is_multiple_of(4) || payload.len() / 4 != expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len() / 4,
        });
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    check_finite(&values)?;
    Ok((Matrix::from_vec(rows, cols, values)?, frame_rate))
}

/// Reads a feature file. The utterance id is taken from the file stem.
pub fn read_feature_sequence(path: &Path) -> Result<FeatureSequence> {
    let (frames, frame_rate) = read_ftrs(path)?;
    let utt_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    FeatureSequence::new(utt_id, frames, frame_rate)
}

pub fn write_feature_sequence(seq: &FeatureSequence, path: &Path) -> Result<()> {
    seq.validate()?;
    write_ftrs(path, &seq.frames, seq.frame_rate)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub features_a: PathBuf,
    pub features_b: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
struct ManifestRecord {
    utt_id: Option<String>,
    features_a: Option<PathBuf>,
    features_b: Option<PathBuf>,
}

/// Loads a JSON Lines manifest. Relative feature paths are resolved against
/// the manifest's directory; blank lines are skipped.
pub fn load_manifest(path: &Path) -> Result<CorpusManifest> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Manifest(format!("line {}: {e}", lineno + 1)))?;
        let utt_id = rec
            .utt_id
            .ok_or_else(|| Error::Manifest(format!("line {}: missing utt_id", lineno + 1)))?;
        if utt_id.is_empty() || utt_id.contains(['/', '\\']) {
            return Err(Error::Manifest(format!(
                "line {}: invalid utt_id {utt_id:?}",
                lineno + 1
            )));
        }
        let features_a = rec.features_a.ok_or_else(|| {
            Error::Manifest(format!("line {}: {utt_id} is missing features_a", lineno + 1))
        })?;
        if !seen.insert(utt_id.clone()) {
            return Err(Error::Manifest(format!("duplicate utt_id {utt_id}")));
        }
        let features_a = base.join(features_a);
        let features_b = rec.features_b.map(|p| base.join(p)).unwrap_or_else(|| features_a.clone());
        entries.push(ManifestEntry {
            utt_id,
            features_a,
            features_b,
        });
    }
    Ok(CorpusManifest { entries })
}

pub fn write_manifest(path: &Path, manifest: &CorpusManifest) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in &manifest.entries {
        let mut rec = serde_json::json!({
            "utt_id": e.utt_id,
            "features_a": e.features_a,
        });
        if e.features_b != e.features_a {
            rec["features_b"] = serde_json::json!(e.features_b);
        }
        writeln!(w, "{rec}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedToken {
    pub start: f64,
    pub end: f64,
    pub label: String,
}

/// Reference tokens for one utterance, sorted by start and non-overlapping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignmentTrack {
    pub utt_id: String,
    pub tokens: Vec<AlignedToken>,
}

impl AlignmentTrack {
    /// Sorts tokens by start and checks durations and overlaps.
    pub fn new(utt_id: impl Into<String>, mut tokens: Vec<AlignedToken>) -> Result<Self> {
        let utt_id = utt_id.into();
        for t in &tokens {
            if !(t.start < t.end) {
                return Err(Error::Alignment(format!(
                    "{utt_id}: token {:?} has start {} >= end {}",
                    t.label, t.start, t.end
                )));
            }
        }
        tokens.sort_by(|a, b| a.start.total_cmp(&b.start));
        for w in tokens.windows(2) {
            if w[1].start < w[0].end - COVERAGE_TOLERANCE {
                return Err(Error::Alignment(format!(
                    "{utt_id}: tokens {:?} [{}, {}] and {:?} [{}, {}] overlap",
                    w[0].label, w[0].start, w[0].end, w[1].label, w[1].start, w[1].end
                )));
            }
        }
        Ok(Self { utt_id, tokens })
    }
}

/// Loads a tab-separated alignment file into per-utterance tracks.
pub fn load_alignments(path: &Path) -> Result<BTreeMap<String, AlignmentTrack>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut grouped: BTreeMap<String, Vec<AlignedToken>> = BTreeMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::Alignment(format!(
                "line {}: expected 4 tab-separated columns, found {}",
                lineno + 1,
                cols.len()
            )));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Alignment(format!("line {}: bad time {s:?}", lineno + 1)))
        };
        let token = AlignedToken {
            start: parse(cols[1])?,
            end: parse(cols[2])?,
            label: cols[3].to_string(),
        };
        grouped.entry(cols[0].to_string()).or_default().push(token);
    }
    grouped
        .into_iter()
        .map(|(utt, tokens)| Ok((utt.clone(), AlignmentTrack::new(utt, tokens)?)))
        .collect()
}

pub fn write_alignments(path: &Path, tracks: &BTreeMap<String, AlignmentTrack>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for track in tracks.values() {
        for t in &track.tokens {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                track.utt_id,
                round_time(t.start),
                round_time(t.end),
                t.label
            )
            .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rounds a time to the 1e-4 s resolution used in serialized outputs.
pub fn round_time(t: f64) -> f64 {
    (t * 1e4).round() / 1e4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_id: Option<usize>,
}

/// A full-coverage segmentation of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationOutput {
    pub utt_id: String,
    pub segments: Vec<Segment>,
}

impl SegmentationOutput {
    /// Checks that the segments are contiguous, start at 0 and, when
    /// `duration` is given, end at it.
    pub fn validate(&self, duration: Option<f64>) -> Result<()> {
        let err = |msg: String| Err(Error::Segmentation(format!("{}: {msg}", self.utt_id)));
        let Some(first) = self.segments.first() else {
            return err("no segments".into());
        };
        if first.start.abs() > COVERAGE_TOLERANCE {
            return err(format!("first segment starts at {}, not 0", first.start));
        }
        for s in &self.segments {
            if !(s.start < s.end) {
                return err(format!("segment [{}, {}] is empty", s.start, s.end));
            }
        }
        for w in self.segments.windows(2) {
            if (w[1].start - w[0].end).abs() > COVERAGE_TOLERANCE {
                return err(format!(
                    "gap or overlap between segments ending at {} and starting at {}",
                    w[0].end, w[1].start
                ));
            }
        }
        if let Some(d) = duration {
            let last = self.segments.last().expect("non-empty").end;
            if (last - d).abs() > COVERAGE_TOLERANCE {
                return err(format!("segments end at {last}, utterance lasts {d}"));
            }
        }
        Ok(())
    }

    fn rounded(&self) -> Self {
        Self {
            utt_id: self.utt_id.clone(),
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    start: round_time(s.start),
                    end: round_time(s.end),
                    cluster_id: s.cluster_id,
                })
                .collect(),
        }
    }
}

/// Writes one JSON record per utterance, times rounded to 1e-4 s. Every
/// output is validated for contiguity before anything is written.
pub fn write_segmentations(path: &Path, outputs: &[SegmentationOutput]) -> Result<()> {
    for o in outputs {
        o.validate(None)?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for o in outputs {
        let line = serde_json::to_string(&o.rounded()).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_segmentations(path: &Path) -> Result<Vec<SegmentationOutput>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SegmentationOutput = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if !seen.insert(rec.utt_id.clone()) {
            return Err(Error::Segmentation(format!("duplicate utt_id {}", rec.utt_id)));
        }
        rec.validate(None)?;
        out.push(rec);
    }
    Ok(out)
}
