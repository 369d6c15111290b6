//! Synthetic corpus with exact word and phone references.
//!
//! Ten phone-like units are random Gaussian centroids. Ten word templates
//! are fixed sequences of 2 to 4 units with per-unit durations, 5 to 15
//! frames in total. Words start with a unit from the first half of the
//! inventory and end with one from the second half, so adjacent words never
//! share a unit at the join. An utterance concatenates 2 to 6 template
//! draws and adds Gaussian noise with standard deviation `noise` times the
//! centroid scale to every frame.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus_io::{
    write_alignments, write_feature_sequence, write_manifest, AlignedToken, AlignmentTrack, CorpusManifest,
    FeatureSequence, ManifestEntry,
};
use crate::{Error, Matrix, Result};

/// Templates are drawn from this seed so every corpus shares one lexicon.
const TEMPLATE_SEED: u64 = 0x005e_ed0f_70c5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_utterances: usize,
    pub num_words: usize,
    pub num_units: usize,
    pub dim: usize,
    pub min_words_per_utt: usize,
    pub max_words_per_utt: usize,
    /// Noise standard deviation relative to the centroid scale.
    pub noise: f64,
    pub frame_rate: f32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_utterances: 200,
            num_words: 10,
            num_units: 10,
            dim: 16,
            min_words_per_utt: 2,
            max_words_per_utt: 6,
            noise: 0.1,
            frame_rate: 50.0,
            seed: 0,
        }
    }
}

/// One word template: units with their frame counts.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTemplate {
    pub units: Vec<usize>,
    pub durations: Vec<usize>,
}

impl WordTemplate {
    pub fn num_frames(&self) -> usize {
        self.durations.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub centroids: Matrix<f64>,
    pub templates: Vec<WordTemplate>,
    pub features: Vec<FeatureSequence>,
    pub words: BTreeMap<String, AlignmentTrack>,
    pub phones: BTreeMap<String, AlignmentTrack>,
}

fn make_templates(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<WordTemplate> {
    let half = cfg.num_units / 2;
    let mut templates: Vec<WordTemplate> = Vec::new();
    while templates.len() < cfg.num_words {
        let len = rng.random_range(2..=4);
        let mut units = vec![rng.random_range(0..half)];
        while units.len() < len - 1 {
            let u = rng.random_range(0..cfg.num_units);
            if u != *units.last().unwrap() {
                units.push(u);
            }
        }
        loop {
            let u = rng.random_range(half..cfg.num_units);
            if u != *units.last().unwrap() {
                units.push(u);
                break;
            }
        }
        let durations: Vec<usize> = (0..len).map(|_| rng.random_range(2..=4)).collect();
        let total: usize = durations.iter().sum();
        if !(5..=15).contains(&total) || templates.iter().any(|t| t.units == units) {
            continue;
        }
        templates.push(WordTemplate { units, durations });
    }
    templates
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if cfg.num_units < 4 || cfg.num_words == 0 || cfg.dim == 0 || cfg.num_utterances == 0 {
        return Err(Error::Config("synthetic corpus needs >= 4 units, >= 1 word, dim >= 1 and >= 1 utterance".into()));
    }
    if cfg.min_words_per_utt == 0 || cfg.min_words_per_utt > cfg.max_words_per_utt {
        return Err(Error::Config("invalid words-per-utterance range".into()));
    }
    if !(cfg.noise >= 0.0) {
        return Err(Error::Config("noise must be >= 0".into()));
    }

    let mut trng = ChaCha8Rng::seed_from_u64(TEMPLATE_SEED);
    let unit_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let centroid_values: Vec<f64> = (0..cfg.num_units * cfg.dim).map(|_| unit_normal.sample(&mut trng)).collect();
    let centroids = Matrix::from_vec(cfg.num_units, cfg.dim, centroid_values)?;
    let templates = make_templates(cfg, &mut trng);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::Config(e.to_string()))?;
    let rate = cfg.frame_rate as f64;
    let mut features = Vec::with_capacity(cfg.num_utterances);
    let mut words = BTreeMap::new();
    let mut phones = BTreeMap::new();
    for u in 0..cfg.num_utterances {
        let utt_id = format!("synth_{u:04}");
        let n_words = rng.random_range(cfg.min_words_per_utt..=cfg.max_words_per_utt);
        let mut values = Vec::new();
        let mut word_tokens = Vec::new();
        let mut phone_tokens = Vec::new();
        let mut frame = 0usize;
        for _ in 0..n_words {
            let w = rng.random_range(0..templates.len());
            let start = frame;
            for (&unit, &dur) in templates[w].units.iter().zip(&templates[w].durations) {
                phone_tokens.push(AlignedToken {
                    start: frame as f64 / rate,
                    end: (frame + dur) as f64 / rate,
                    label: format!("p{unit}"),
                });
                for _ in 0..dur {
                    values.extend(centroids.row(unit).iter().map(|&c| (c + noise.sample(&mut rng)) as f32));
                }
                frame += dur;
            }
            word_tokens.push(AlignedToken {
                start: start as f64 / rate,
                end: frame as f64 / rate,
                label: format!("w{w}"),
            });
        }
        let seq = FeatureSequence::new(utt_id.clone(), Matrix::from_vec(frame, cfg.dim, values)?, cfg.frame_rate)?;
        features.push(seq);
        words.insert(utt_id.clone(), AlignmentTrack::new(utt_id.clone(), word_tokens)?);
        phones.insert(utt_id.clone(), AlignmentTrack::new(utt_id, phone_tokens)?);
    }
    Ok(SynthCorpus {
        centroids,
        templates,
        features,
        words,
        phones,
    })
}

/// Writes `features/<utt>.ftrs`, `manifest.jsonl`, `words.tsv` and
/// `phones.tsv` under `dir`.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<()> {
    let feat_dir = dir.join("features");
    fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;
    let mut entries = Vec::new();
    for f in &corpus.features {
        let rel = Path::new("features").join(format!("{}.ftrs", f.utt_id));
        write_feature_sequence(f, &dir.join(&rel))?;
        entries.push(ManifestEntry {
            utt_id: f.utt_id.clone(),
            features_a: rel.clone(),
            features_b: rel,
        });
    }
    write_manifest(&dir.join("manifest.jsonl"), &CorpusManifest { entries })?;
    write_alignments(&dir.join("words.tsv"), &corpus.words)?;
    write_alignments(&dir.join("phones.tsv"), &corpus.phones)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_follow_the_construction() {
        let cfg = SynthConfig::default();
        let c = generate(&SynthConfig { num_utterances: 5, ..cfg.clone() }).unwrap();
        assert_eq!(c.templates.len(), 10);
        for t in &c.templates {
            assert!((5..=15).contains(&t.num_frames()));
            assert!(t.units[0] < 5 && *t.units.last().unwrap() >= 5);
            assert!(t.units.windows(2).all(|w| w[0] != w[1]));
        }
    }

    #[test]
    fn references_tile_the_features() {
        let c = generate(&SynthConfig { num_utterances: 20, ..Default::default() }).unwrap();
        for f in &c.features {
            let w = &c.words[&f.utt_id];
            assert!((2..=6).contains(&w.tokens.len()));
            assert_eq!(w.tokens[0].start, 0.0);
            assert!((w.tokens.last().unwrap().end - f.duration()).abs() < 1e-12);
            let p = &c.phones[&f.utt_id];
            assert!((p.tokens.last().unwrap().end - f.duration()).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded() {
        let a = generate(&SynthConfig { num_utterances: 3, ..Default::default() }).unwrap();
        let b = generate(&SynthConfig { num_utterances: 3, ..Default::default() }).unwrap();
        assert_eq!(a.features, b.features);
        let c = generate(&SynthConfig { num_utterances: 3, seed: 1, ..Default::default() }).unwrap();
        assert_ne!(a.features, c.features);
        assert_eq!(a.templates, c.templates);
    }
}
