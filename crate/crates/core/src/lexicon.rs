//! Lexicon construction: mean-pooled acoustic word embeddings per word
//! token, clustered with K-means.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::codebook::{fit_kmeans, Codebook, KMeansConfig};
use crate::corpus_io::{write_ftrs, FeatureSequence};
use crate::{par, Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticWordEmbedding {
    pub utt_id: String,
    pub span_index: usize,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    pub codebook: Codebook,
    /// Cluster of every `(utt_id, span_index)` word token.
    pub assignments: BTreeMap<(String, usize), usize>,
}

impl Lexicon {
    pub fn cluster_of(&self, utt_id: &str, span_index: usize) -> Option<usize> {
        self.assignments.get(&(utt_id.to_string(), span_index)).copied()
    }
}

/// Mean of frames `frame_a..=frame_b`.
pub fn embed_span(features: &FeatureSequence, frame_a: usize, frame_b: usize) -> Result<Vec<f64>> {
    if frame_a > frame_b || frame_b >= features.num_frames() {
        return Err(Error::Index(format!(
            "{}: frame span ({frame_a}, {frame_b}) invalid for {} frames",
            features.utt_id,
            features.num_frames()
        )));
    }
    let mut sum = vec![0.0; features.dim()];
    for t in frame_a..=frame_b {
        for (s, &v) in sum.iter_mut().zip(features.frames.row(t)) {
            *s += v as f64;
        }
    }
    let n = (frame_b - frame_a + 1) as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// Embeds every frame span of one utterance. Frame indices past the end of
/// `features` are clamped to its last frame with a warning, which only
/// happens when the two feature streams disagree in length.
pub fn embed_spans(
    features: &FeatureSequence,
    spans: &[(usize, usize)],
    length_normalize: bool,
) -> Result<Vec<AcousticWordEmbedding>> {
    let last = features.num_frames() - 1;
    if spans.iter().any(|&(_, b)| b > last) {
        log::warn!(
            "{}: word spans reach past the {} frames of the embedding stream; clamping",
            features.utt_id,
            features.num_frames()
        );
    }
    let vectors = par::map(spans, |&(a, b)| {
        let mut v = embed_span(features, a.min(last), b.min(last))?;
        if length_normalize {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
        }
        Ok(v)
    });
    vectors
        .into_iter()
        .enumerate()
        .map(|(span_index, v)| {
            Ok(AcousticWordEmbedding {
                utt_id: features.utt_id.clone(),
                span_index,
                vector: v?,
            })
        })
        .collect()
}

/// Clusters embeddings into `lexicon_size` word types.
pub fn build_lexicon(
    awes: &[AcousticWordEmbedding],
    lexicon_size: usize,
    kmeans: &KMeansConfig,
) -> Result<Lexicon> {
    if lexicon_size == 0 {
        return Err(Error::Config("lexicon size must be >= 1".into()));
    }
    if awes.len() < lexicon_size {
        return Err(Error::Config(format!(
            "only {} word segments were found, fewer than the lexicon size {lexicon_size}; \
             choose a lexicon size of at most {}",
            awes.len(),
            awes.len()
        )));
    }
    let rows: Vec<&[f64]> = awes.iter().map(|a| a.vector.as_slice()).collect();
    let points = Matrix::from_rows(&rows)?;
    let cfg = KMeansConfig {
        k: lexicon_size,
        ..kmeans.clone()
    };
    let fit = fit_kmeans(&points, &cfg)?;
    let ids = par::map(awes, |a| fit.codebook.assign(&a.vector).map(|(k, _)| k));
    let mut assignments = BTreeMap::new();
    for (a, id) in awes.iter().zip(ids) {
        assignments.insert((a.utt_id.clone(), a.span_index), id?);
    }
    Ok(Lexicon {
        codebook: fit.codebook,
        assignments,
    })
}

/// Writes embeddings as an FTRS matrix plus a sidecar listing
/// `utt_id<TAB>span_index` per row.
pub fn dump_embeddings(awes: &[AcousticWordEmbedding], ftrs_path: &Path, ids_path: &Path) -> Result<()> {
    let rows: Vec<Vec<f32>> = awes
        .iter()
        .map(|a| a.vector.iter().map(|&v| v as f32).collect())
        .collect();
    write_ftrs(ftrs_path, &Matrix::from_rows(&rows)?, 0.0)?;
    let file = File::create(ids_path).map_err(|e| Error::io(ids_path, e))?;
    let mut w = BufWriter::new(file);
    for a in awes {
        writeln!(w, "{}\t{}", a.utt_id, a.span_index).map_err(|e| Error::io(ids_path, e))?;
    }
    w.flush().map_err(|e| Error::io(ids_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::read_ftrs;

    fn seq(rows: &[[f32; 2]]) -> FeatureSequence {
        FeatureSequence::new("u", Matrix::from_rows(rows).unwrap(), 50.0).unwrap()
    }

    fn awe(i: usize, v: Vec<f64>) -> AcousticWordEmbedding {
        AcousticWordEmbedding {
            utt_id: "u".into(),
            span_index: i,
            vector: v,
        }
    }

    #[test]
    fn span_means() {
        let x = seq(&[[0.0, 0.0], [2.0, 4.0], [5.0, 5.0]]);
        assert_eq!(embed_span(&x, 2, 2).unwrap(), vec![5.0, 5.0]);
        assert_eq!(embed_span(&x, 0, 1).unwrap(), vec![1.0, 2.0]);
        assert!(embed_span(&x, 1, 3).is_err());
        let c = seq(&[[1.5, -2.0]; 6]);
        assert_eq!(embed_span(&c, 1, 4).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn clamps_to_shorter_stream() {
        let x = seq(&[[0.0, 0.0], [2.0, 4.0]]);
        let e = embed_spans(&x, &[(0, 0), (1, 3)], false).unwrap();
        assert_eq!(e[1].vector, vec![2.0, 4.0]);
        let n = embed_spans(&x, &[(1, 1)], true).unwrap();
        let norm: f64 = n[0].vector.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn every_span_its_own_cluster() {
        let awes: Vec<_> = (0..4).map(|i| awe(i, vec![i as f64 * 3.0, 1.0])).collect();
        let lex = build_lexicon(&awes, 4, &KMeansConfig::default()).unwrap();
        let mut ids: Vec<usize> = lex.assignments.values().copied().collect();
        ids.sort();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn separated_groups_get_consistent_ids() {
        let mut awes = Vec::new();
        for i in 0..10 {
            let jitter = (i % 5) as f64 * 0.01;
            let base = if i < 5 { 0.0 } else { 100.0 };
            awes.push(awe(i, vec![base + jitter, base - jitter]));
        }
        let lex = build_lexicon(&awes, 2, &KMeansConfig { seed: 3, ..Default::default() }).unwrap();
        let a = lex.cluster_of("u", 0).unwrap();
        let b = lex.cluster_of("u", 5).unwrap();
        assert_ne!(a, b);
        for i in 0..10 {
            assert_eq!(lex.cluster_of("u", i).unwrap(), if i < 5 { a } else { b });
        }
    }

    #[test]
    fn identical_embeddings_share_an_id() {
        let awes: Vec<_> = (0..6).map(|i| awe(i, vec![0.3, 0.3])).collect();
        let lex = build_lexicon(&awes, 1, &KMeansConfig::default()).unwrap();
        assert!(lex.assignments.values().all(|&c| c == 0));
    }

    #[test]
    fn too_few_spans() {
        let awes = vec![awe(0, vec![1.0])];
        let err = build_lexicon(&awes, 2, &KMeansConfig::default()).unwrap_err();
        assert!(err.to_string().contains("at most 1"), "{err}");
    }

    #[test]
    fn dump_writes_matrix_and_ids() {
        let dir = tempfile::tempdir().unwrap();
        let awes = vec![awe(0, vec![1.0, 2.0]), awe(1, vec![3.0, 4.0])];
        let (f, i) = (dir.path().join("e.ftrs"), dir.path().join("e.ids"));
        dump_embeddings(&awes, &f, &i).unwrap();
        let (m, _) = read_ftrs(&f).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(std::fs::read_to_string(&i).unwrap(), "u\t0\nu\t1\n");
    }
}
