//! End-to-end orchestration with per-stage outputs under a work directory.
//!
//! ```text
//! <work>/config.toml            effective configuration of the last run
//! <work>/units/codebook.ftrs    acoustic unit codebook
//! <work>/units/codes/<utt>.json unit segmentation per utterance
//! <work>/words/model.aern       trained autoencoder
//! <work>/words/loss.txt         per-epoch training loss
//! <work>/words/spans.jsonl      word spans in unit and frame indices
//! <work>/words/segments.jsonl   word boundaries in seconds
//! <work>/lexicon/lexicon.ftrs   lexicon centroids
//! <work>/segments.jsonl         final segmentation with cluster ids
//! ```
//!
//! Every stage writes a `stamp.json` describing the inputs it was run with.
//! A stage is skipped when its outputs and an identical stamp already exist,
//! unless `force` is set.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::{init_model, train, AeRnnConfig, CodeSequence};
use crate::codebook::{fit_kmeans, KMeansConfig};
use crate::corpus_io::{
    load_alignments, load_manifest, read_feature_sequence, read_segmentations, write_segmentations, CorpusManifest,
    FeatureSequence, ManifestEntry, Segment, SegmentationOutput,
};
use crate::evaluator::{evaluate, EvalConfig, EvalReport};
use crate::lexicon::{build_lexicon, dump_embeddings, embed_spans};
use crate::unit_segmenter::{dpdp_units, DpdpUnitConfig, UnitSegmentation};
use crate::word_segmenter::{dpdp_words, to_output, DpdpWordConfig, WordSpan};
use crate::{par, Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub work_dir: PathBuf,
    /// Acoustic unit codebook size.
    pub num_units: usize,
    pub units: DpdpUnitConfig,
    pub words: DpdpWordConfig,
    /// Number of lexicon clusters; required by the lexicon stage.
    pub lexicon_size: Option<usize>,
    /// K-means settings for the unit codebook; `k` and `seed` are set from
    /// `num_units` and `seed`.
    pub unit_kmeans: KMeansConfig,
    /// Fit the unit codebook on at most this many frames, sampled with a
    /// seeded generator.
    pub unit_kmeans_max_frames: Option<usize>,
    /// K-means settings for the lexicon; `k` and `seed` are set from
    /// `lexicon_size` and `seed`.
    pub lexicon_kmeans: KMeansConfig,
    /// Autoencoder settings; `vocab` and `seed` are set from `num_units` and
    /// `seed`.
    pub autoencoder: AeRnnConfig,
    pub seed: u64,
    /// Standardize stream-a features with corpus mean and variance.
    pub standardize: bool,
    /// Scale acoustic word embeddings to unit length before clustering.
    pub normalize_embeddings: bool,
    /// Also write the embeddings and their ids under `lexicon/`.
    pub dump_embeddings: bool,
    #[serde(skip)]
    pub force: bool,
    #[serde(skip)]
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.jsonl"),
            work_dir: PathBuf::from("work"),
            num_units: 100,
            units: DpdpUnitConfig::default(),
            words: DpdpWordConfig::default(),
            lexicon_size: None,
            unit_kmeans: KMeansConfig::default(),
            unit_kmeans_max_frames: None,
            lexicon_kmeans: KMeansConfig::default(),
            autoencoder: AeRnnConfig::default(),
            seed: 0,
            standardize: false,
            normalize_embeddings: false,
            dump_embeddings: false,
            force: false,
            jobs: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn unit_kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.num_units,
            seed: self.seed,
            ..self.unit_kmeans.clone()
        }
    }

    fn autoencoder(&self) -> AeRnnConfig {
        AeRnnConfig {
            vocab: self.num_units,
            seed: self.seed.wrapping_add(1),
            ..self.autoencoder.clone()
        }
    }

    fn lexicon_kmeans(&self, size: usize) -> KMeansConfig {
        KMeansConfig {
            k: size,
            seed: self.seed.wrapping_add(2),
            ..self.lexicon_kmeans.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_units == 0 {
            return Err(Error::Config("num_units must be >= 1".into()));
        }
        self.units.validate()?;
        self.words.validate()?;
        self.unit_kmeans().validate()?;
        self.autoencoder().validate()?;
        if self.lexicon_size == Some(0) {
            return Err(Error::Config("lexicon size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Paths of every artifact under the work directory.
#[derive(Debug, Clone)]
pub struct WorkLayout {
    root: PathBuf,
}

impl WorkLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }
    pub fn units_dir(&self) -> PathBuf {
        self.root.join("units")
    }
    pub fn codebook(&self) -> PathBuf {
        self.units_dir().join("codebook.ftrs")
    }
    pub fn codes_dir(&self) -> PathBuf {
        self.units_dir().join("codes")
    }
    pub fn code_file(&self, utt_id: &str) -> PathBuf {
        self.codes_dir().join(format!("{utt_id}.json"))
    }
    pub fn words_dir(&self) -> PathBuf {
        self.root.join("words")
    }
    pub fn model(&self) -> PathBuf {
        self.words_dir().join("model.aern")
    }
    pub fn loss(&self) -> PathBuf {
        self.words_dir().join("loss.txt")
    }
    pub fn word_spans(&self) -> PathBuf {
        self.words_dir().join("spans.jsonl")
    }
    pub fn word_segments(&self) -> PathBuf {
        self.words_dir().join("segments.jsonl")
    }
    pub fn lexicon_dir(&self) -> PathBuf {
        self.root.join("lexicon")
    }
    pub fn lexicon(&self) -> PathBuf {
        self.lexicon_dir().join("lexicon.ftrs")
    }
    pub fn embeddings(&self) -> (PathBuf, PathBuf) {
        (
            self.lexicon_dir().join("embeddings.ftrs"),
            self.lexicon_dir().join("embeddings.ids"),
        )
    }
    pub fn final_segments(&self) -> PathBuf {
        self.root.join("segments.jsonl")
    }
    fn stamp(dir: &Path) -> PathBuf {
        dir.join("stamp.json")
    }
}

/// Unit segmentation of one utterance as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeFile {
    pub utt_id: String,
    pub frame_rate: f32,
    pub num_frames: usize,
    pub objective: f64,
    pub codes: Vec<usize>,
    pub frame_spans: Vec<(usize, usize)>,
}

impl CodeFile {
    fn from_segmentation(seg: &UnitSegmentation, x: &FeatureSequence) -> Self {
        let seq = seg.to_code_sequence();
        Self {
            utt_id: seg.utt_id.clone(),
            frame_rate: x.frame_rate,
            num_frames: x.num_frames(),
            objective: seg.objective,
            codes: seq.codes,
            frame_spans: seq.frame_spans,
        }
    }

    pub fn code_sequence(&self) -> CodeSequence {
        CodeSequence {
            utt_id: self.utt_id.clone(),
            codes: self.codes.clone(),
            frame_spans: self.frame_spans.clone(),
        }
    }

    pub fn duration(&self) -> f64 {
        self.num_frames as f64 / self.frame_rate as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WordSpanRecord {
    utt_id: String,
    spans: Vec<WordSpan>,
}

/// What a stage ran with; equal stamps mean the stage can be skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Stamp {
    stage: String,
    settings: serde_json::Value,
    upstream: Option<serde_json::Value>,
}

fn read_stamp(dir: &Path) -> Option<Stamp> {
    let text = fs::read_to_string(WorkLayout::stamp(dir)).ok()?;
    serde_json::from_str(&text).ok()
}

fn write_stamp(dir: &Path, stamp: &Stamp) -> Result<()> {
    write_text(&WorkLayout::stamp(dir), &serde_json::to_string_pretty(stamp).expect("stamp serializes"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &serde_json::to_string(value).expect("value serializes"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn stamp_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("settings serialize")
}

fn skip_stage(force: bool, dir: &Path, stamp: &Stamp, outputs: &[PathBuf]) -> bool {
    !force && outputs.iter().all(|p| p.exists()) && read_stamp(dir).as_ref() == Some(stamp)
}

fn units_stamp(cfg: &PipelineConfig, manifest: &CorpusManifest) -> Stamp {
    Stamp {
        stage: "units".into(),
        settings: serde_json::json!({
            "manifest": manifest.entries.iter().map(|e| (&e.utt_id, &e.features_a)).collect::<Vec<_>>(),
            "kmeans": stamp_json(&cfg.unit_kmeans()),
            "kmeans_max_frames": cfg.unit_kmeans_max_frames,
            "dpdp": stamp_json(&cfg.units),
            "standardize": cfg.standardize,
        }),
        upstream: None,
    }
}

fn words_stamp(cfg: &PipelineConfig, units: &Stamp) -> Stamp {
    Stamp {
        stage: "words".into(),
        settings: serde_json::json!({
            "autoencoder": stamp_json(&cfg.autoencoder()),
            "dpdp": stamp_json(&cfg.words),
        }),
        upstream: Some(stamp_json(units)),
    }
}

fn lexicon_stamp(cfg: &PipelineConfig, size: usize, manifest: &CorpusManifest, words: &Stamp) -> Stamp {
    Stamp {
        stage: "lexicon".into(),
        settings: serde_json::json!({
            "streams_b": manifest.entries.iter().map(|e| &e.features_b).collect::<Vec<_>>(),
            "kmeans": stamp_json(&cfg.lexicon_kmeans(size)),
            "normalize": cfg.normalize_embeddings,
            "dump": cfg.dump_embeddings,
        }),
        upstream: Some(stamp_json(words)),
    }
}

fn read_stream(entry: &ManifestEntry, path: &Path) -> Result<FeatureSequence> {
    let mut seq = read_feature_sequence(path).map_err(|e| e.in_utterance(&entry.utt_id))?;
    seq.utt_id = entry.utt_id.clone();
    Ok(seq)
}

/// Corpus-level per-dimension standardization, in place.
fn standardize(features: &mut [FeatureSequence]) {
    let dim = features[0].dim();
    let mut mean = vec![0.0f64; dim];
    let mut sq = vec![0.0f64; dim];
    let mut n = 0usize;
    for f in features.iter() {
        for row in f.frames.iter_rows() {
            for k in 0..dim {
                mean[k] += row[k] as f64;
                sq[k] += (row[k] as f64) * (row[k] as f64);
            }
            n += 1;
        }
    }
    let n = n as f64;
    let std: Vec<f64> = (0..dim)
        .map(|k| {
            mean[k] /= n;
            let var = sq[k] / n - mean[k] * mean[k];
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    for f in features.iter_mut() {
        for t in 0..f.num_frames() {
            for (k, v) in f.frames.row_mut(t).iter_mut().enumerate() {
                *v = ((*v as f64 - mean[k]) / std[k]) as f32;
            }
        }
    }
}

fn load_manifest_checked(cfg: &PipelineConfig) -> Result<CorpusManifest> {
    let manifest = load_manifest(&cfg.manifest)?;
    if manifest.entries.is_empty() {
        return Err(Error::Manifest(format!("{} lists no utterances", cfg.manifest.display())));
    }
    Ok(manifest)
}

/// Outcome of a stage: whether it ran or was skipped as up to date.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    UpToDate,
}

/// Stage (a): fit the unit codebook on all stream-a frames and segment
/// every utterance into acoustic units.
pub fn run_units(cfg: &PipelineConfig) -> Result<StageStatus> {
    cfg.validate()?;
    par::with_jobs(cfg.jobs, || run_units_inner(cfg))
}

fn run_units_inner(cfg: &PipelineConfig) -> Result<StageStatus> {
    let layout = WorkLayout::new(&cfg.work_dir);
    let manifest = load_manifest_checked(cfg)?;
    let stamp = units_stamp(cfg, &manifest);
    let mut outputs = vec![layout.codebook()];
    outputs.extend(manifest.entries.iter().map(|e| layout.code_file(&e.utt_id)));
    if skip_stage(cfg.force, &layout.units_dir(), &stamp, &outputs) {
        log::info!("units: up to date");
        return Ok(StageStatus::UpToDate);
    }

    let loaded = par::map(&manifest.entries, |e| read_stream(e, &e.features_a));
    let mut features = loaded.into_iter().collect::<Result<Vec<_>>>()?;
    let dim = features[0].dim();
    if let Some(f) = features.iter().find(|f| f.dim() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: f.dim(),
        }
        .in_utterance(&f.utt_id));
    }
    if cfg.standardize {
        standardize(&mut features);
    }

    let total: usize = features.iter().map(|f| f.num_frames()).sum();
    let selected: Vec<(usize, usize)> = {
        let all = features
            .iter()
            .enumerate()
            .flat_map(|(u, f)| (0..f.num_frames()).map(move |t| (u, t)));
        match cfg.unit_kmeans_max_frames {
            Some(max) if max < total => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(3));
                let mut picks = rand::seq::index::sample(&mut rng, total, max).into_vec();
                picks.sort_unstable();
                let all: Vec<(usize, usize)> = all.collect();
                picks.into_iter().map(|i| all[i]).collect()
            }
            _ => all.collect(),
        }
    };
    let mut points = Matrix::<f64>::zeros(selected.len(), dim);
    for (i, &(u, t)) in selected.iter().enumerate() {
        for (p, &v) in points.row_mut(i).iter_mut().zip(features[u].frames.row(t)) {
            *p = v as f64;
        }
    }
    log::info!("units: fitting {} centroids on {} frames", cfg.num_units, points.rows());
    let fit = fit_kmeans(&points, &cfg.unit_kmeans())?;
    drop(points);
    let codebook = fit.codebook.to_stored_precision();

    log::info!("units: segmenting {} utterances", features.len());
    let segs = par::map(&features, |x| {
        dpdp_units(x, &codebook, &cfg.units).map_err(|e| e.in_utterance(&x.utt_id))
    });
    let segs = segs.into_iter().collect::<Result<Vec<_>>>()?;

    create_dir(&layout.codes_dir())?;
    codebook.save(&layout.codebook())?;
    for (seg, x) in segs.iter().zip(&features) {
        let file = CodeFile::from_segmentation(seg, x);
        file.code_sequence().validate(cfg.num_units)?;
        write_json(&layout.code_file(&seg.utt_id), &file)?;
    }
    write_stamp(&layout.units_dir(), &stamp)?;
    Ok(StageStatus::Ran)
}

fn load_code_files(layout: &WorkLayout, manifest: &CorpusManifest) -> Result<Vec<CodeFile>> {
    manifest
        .entries
        .iter()
        .map(|e| {
            let p = layout.code_file(&e.utt_id);
            let text = fs::read_to_string(&p).map_err(|_| {
                Error::Config(format!(
                    "unit outputs for {} not found at {}; run the `units` stage first",
                    e.utt_id,
                    p.display()
                ))
            })?;
            serde_json::from_str(&text).map_err(|err| Error::Format(format!("{}: {err}", p.display())))
        })
        .collect()
}

fn require_stamp(dir: &Path, stage: &str, next: &str) -> Result<Stamp> {
    read_stamp(dir).ok_or_else(|| {
        Error::Config(format!(
            "no completed `{stage}` stage found in {}; run `{stage}` before `{next}`",
            dir.display()
        ))
    })
}

/// Stage (b): train the autoencoder on all unit-code sequences, freeze it
/// and segment every utterance into words.
pub fn run_words(cfg: &PipelineConfig) -> Result<StageStatus> {
    cfg.validate()?;
    par::with_jobs(cfg.jobs, || run_words_inner(cfg))
}

fn run_words_inner(cfg: &PipelineConfig) -> Result<StageStatus> {
    let layout = WorkLayout::new(&cfg.work_dir);
    let manifest = load_manifest_checked(cfg)?;
    let units = require_stamp(&layout.units_dir(), "units", "words")?;
    let stamp = words_stamp(cfg, &units);
    let outputs = [layout.model(), layout.word_spans(), layout.word_segments()];
    if skip_stage(cfg.force, &layout.words_dir(), &stamp, &outputs) {
        log::info!("words: up to date");
        return Ok(StageStatus::UpToDate);
    }

    let code_files = load_code_files(&layout, &manifest)?;
    let corpus: Vec<CodeSequence> = code_files.iter().map(CodeFile::code_sequence).collect();
    let ae_cfg = cfg.autoencoder();
    for c in &corpus {
        c.validate(ae_cfg.vocab)?;
    }
    log::info!("words: training autoencoder on {} sequences", corpus.len());
    let (model, report) = train(&init_model(&ae_cfg), &corpus, &ae_cfg)?;

    log::info!("words: segmenting {} utterances", corpus.len());
    let segmented = par::map(&code_files, |f| {
        let words = dpdp_words(&f.code_sequence(), &model, &cfg.words).map_err(|e| e.in_utterance(&f.utt_id))?;
        let out = to_output(&f.utt_id, &words.spans, f.frame_rate as f64)?;
        out.validate(Some(f.duration()))?;
        Ok((words.spans, out))
    });
    let segmented = segmented.into_iter().collect::<Result<Vec<_>>>()?;

    create_dir(&layout.words_dir())?;
    model.save(&layout.model())?;
    let loss: String = report.epoch_loss.iter().map(|l| format!("{l}\n")).collect();
    write_text(&layout.loss(), &loss)?;
    let spans: String = code_files
        .iter()
        .zip(&segmented)
        .map(|(f, (spans, _))| {
            let rec = WordSpanRecord {
                utt_id: f.utt_id.clone(),
                spans: spans.clone(),
            };
            serde_json::to_string(&rec).expect("spans serialize") + "\n"
        })
        .collect();
    write_text(&layout.word_spans(), &spans)?;
    let outs: Vec<SegmentationOutput> = segmented.into_iter().map(|(_, o)| o).collect();
    write_segmentations(&layout.word_segments(), &outs)?;
    write_stamp(&layout.words_dir(), &stamp)?;
    Ok(StageStatus::Ran)
}

fn load_word_spans(layout: &WorkLayout) -> Result<BTreeMap<String, Vec<WordSpan>>> {
    let p = layout.word_spans();
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let rec: WordSpanRecord =
                serde_json::from_str(l).map_err(|e| Error::Format(format!("{}: {e}", p.display())))?;
            Ok((rec.utt_id, rec.spans))
        })
        .collect()
}

/// Stages (c) and (d): embed every word span from stream-b features and
/// cluster the embeddings into the lexicon.
pub fn run_lexicon(cfg: &PipelineConfig) -> Result<StageStatus> {
    cfg.validate()?;
    par::with_jobs(cfg.jobs, || run_lexicon_inner(cfg))
}

fn run_lexicon_inner(cfg: &PipelineConfig) -> Result<StageStatus> {
    let layout = WorkLayout::new(&cfg.work_dir);
    let size = cfg
        .lexicon_size
        .ok_or_else(|| Error::Config("the lexicon stage needs a lexicon size".into()))?;
    let manifest = load_manifest_checked(cfg)?;
    let words = require_stamp(&layout.words_dir(), "words", "lexicon")?;
    let stamp = lexicon_stamp(cfg, size, &manifest, &words);
    let outputs = [layout.lexicon(), layout.final_segments()];
    if skip_stage(cfg.force, &layout.lexicon_dir(), &stamp, &outputs) {
        log::info!("lexicon: up to date");
        return Ok(StageStatus::UpToDate);
    }

    let code_files = load_code_files(&layout, &manifest)?;
    let mut spans = load_word_spans(&layout)?;
    let per_utt: Vec<(&ManifestEntry, &CodeFile, Vec<WordSpan>)> = manifest
        .entries
        .iter()
        .zip(&code_files)
        .map(|(e, f)| {
            spans
                .remove(&e.utt_id)
                .map(|s| (e, f, s))
                .ok_or_else(|| Error::Config(format!("no word spans for {}; rerun the `words` stage", e.utt_id)))
        })
        .collect::<Result<_>>()?;

    let embedded = par::map(&per_utt, |(e, f, s)| {
        let xb = read_stream(e, &e.features_b)?;
        if xb.num_frames() != f.num_frames {
            log::warn!(
                "{}: stream b has {} frames, stream a has {}",
                e.utt_id,
                xb.num_frames(),
                f.num_frames
            );
        }
        let frames: Vec<(usize, usize)> = s.iter().map(|w| (w.frame_a, w.frame_b)).collect();
        embed_spans(&xb, &frames, cfg.normalize_embeddings)
    });
    let awes: Vec<_> = embedded.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    log::info!("lexicon: clustering {} word tokens into {size} types", awes.len());
    let lexicon = build_lexicon(&awes, size, &cfg.lexicon_kmeans(size))?;

    let outputs: Vec<SegmentationOutput> = per_utt
        .iter()
        .map(|(e, f, s)| {
            let rate = f.frame_rate as f64;
            let out = SegmentationOutput {
                utt_id: e.utt_id.clone(),
                segments: s
                    .iter()
                    .enumerate()
                    .map(|(k, w)| Segment {
                        start: w.frame_a as f64 / rate,
                        end: (w.frame_b + 1) as f64 / rate,
                        cluster_id: lexicon.cluster_of(&e.utt_id, k),
                    })
                    .collect(),
            };
            out.validate(Some(f.duration()))?;
            if out.segments.iter().any(|s| s.cluster_id.is_none_or(|c| c >= size)) {
                return Err(Error::Segmentation(format!("{}: segment without a valid cluster id", e.utt_id)));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    create_dir(&layout.lexicon_dir())?;
    lexicon.codebook.save(&layout.lexicon())?;
    if cfg.dump_embeddings {
        let (f, i) = layout.embeddings();
        dump_embeddings(&awes, &f, &i)?;
    }
    write_segmentations(&layout.final_segments(), &outputs)?;
    write_stamp(&layout.lexicon_dir(), &stamp)?;
    Ok(StageStatus::Ran)
}

/// Writes the effective configuration into the work directory.
pub fn write_effective_config(cfg: &PipelineConfig) -> Result<()> {
    let layout = WorkLayout::new(&cfg.work_dir);
    create_dir(&cfg.work_dir)?;
    write_text(&layout.config(), &cfg.to_toml())
}

/// All three segmentation stages in order.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<()> {
    if cfg.lexicon_size.is_none() {
        return Err(Error::Config("the pipeline needs a lexicon size".into()));
    }
    write_effective_config(cfg)?;
    run_units(cfg)?;
    run_words(cfg)?;
    run_lexicon(cfg)?;
    Ok(())
}

/// Alignment inputs for evaluation.
#[derive(Debug, Clone)]
pub struct EvalInputs {
    pub segments: PathBuf,
    pub word_alignments: PathBuf,
    pub phone_alignments: Option<PathBuf>,
    /// Compute NED; requires phone alignments and cluster ids.
    pub ned: bool,
}

pub fn run_eval(inputs: &EvalInputs, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let hyps = read_segmentations(&inputs.segments)?;
    let words = load_alignments(&inputs.word_alignments)?;
    let phones = match (&inputs.phone_alignments, inputs.ned) {
        (Some(p), true) => Some(load_alignments(p)?),
        (None, true) => {
            return Err(Error::Eval(
                "NED needs phone alignments; pass them or disable NED".into(),
            ))
        }
        (_, false) => None,
    };
    evaluate(&words, phones.as_ref(), &hyps, cfg)
}
