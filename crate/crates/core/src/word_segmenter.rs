//! Word segmentation of unit-code sequences, scoring candidate words by
//! autoencoder reconstruction NLL with a duration penalty in code units.

use serde::{Deserialize, Serialize};

use crate::autoencoder::{forward_nll, AeRnnModel, CodeSequence};
use crate::corpus_io::{Segment, SegmentationOutput};
use crate::dp::{self, PenaltyForm};
use crate::{par, Error, Result};

/// Units `i..=j`, covering frames `frame_a..=frame_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordSpan {
    pub i: usize,
    pub j: usize,
    pub frame_a: usize,
    pub frame_b: usize,
    pub nll: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordSegmentation {
    pub utt_id: String,
    pub spans: Vec<WordSpan>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpdpWordConfig {
    pub lambda: f64,
    /// Longest allowed word, in code units.
    pub max_len: usize,
    pub form: PenaltyForm,
}

impl Default for DpdpWordConfig {
    fn default() -> Self {
        Self {
            lambda: 5.0,
            max_len: 50,
            form: PenaltyForm::Duration,
        }
    }
}

impl DpdpWordConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("word lambda must be >= 0, got {}", self.lambda)));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max word length must be >= 1".into()));
        }
        Ok(())
    }
}

/// Reconstruction NLL of `codes[i..=j]`.
pub fn score_span(model: &AeRnnModel, codes: &[usize], i: usize, j: usize) -> Result<f64> {
    if i > j || j >= codes.len() {
        return Err(Error::Index(format!("span ({i}, {j}) invalid for {} codes", codes.len())));
    }
    forward_nll(model, &codes[i..=j])
}

/// Span NLLs of one utterance for every span of at most `max_len` codes.
///
/// For each start the encoder runs once over the longest span and its
/// intermediate states serve the shorter ones; the arithmetic is the same as
/// scoring each span on its own, so entries equal [`score_span`] bitwise.
pub struct SpanScores {
    /// `table[i][len - 1]` is the NLL of `codes[i..i + len]`.
    table: Vec<Vec<f64>>,
}

impl SpanScores {
    pub fn compute(model: &AeRnnModel, codes: &[usize], max_len: usize) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::Data("empty code sequence".into()));
        }
        if let Some(c) = codes.iter().find(|&&c| c >= model.vocab) {
            return Err(Error::Index(format!("code {c} outside vocabulary of {}", model.vocab)));
        }
        if max_len == 0 || max_len > crate::autoencoder::MAX_SCORED_LEN {
            return Err(Error::Config(format!("span length limit {max_len} out of range")));
        }
        let n = codes.len();
        let table = par::map_range(n, |i| {
            let end = n.min(i + max_len);
            let states = model.encoder_states(&codes[i..end]);
            states
                .iter()
                .enumerate()
                .map(|(k, h)| model.decode_nll(h, &codes[i..=i + k]))
                .collect()
        });
        Ok(Self { table })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.table[i][j - i]
    }
}

/// Globally optimal word segmentation of one code sequence.
pub fn dpdp_words(seq: &CodeSequence, model: &AeRnnModel, cfg: &DpdpWordConfig) -> Result<WordSegmentation> {
    cfg.validate()?;
    seq.validate(model.vocab)?;
    let n = seq.codes.len();
    let max_len = cfg.max_len.min(n);
    let scores = SpanScores::compute(model, &seq.codes, max_len).map_err(|e| e.in_utterance(&seq.utt_id))?;
    let sol = dp::segment(n, max_len, cfg.lambda, cfg.form, |i, j| scores.get(i, j));
    let spans = sol
        .spans
        .iter()
        .map(|&(i, j)| WordSpan {
            i,
            j,
            frame_a: seq.frame_spans[i].0,
            frame_b: seq.frame_spans[j].1,
            nll: scores.get(i, j),
        })
        .collect();
    Ok(WordSegmentation {
        utt_id: seq.utt_id.clone(),
        spans,
        objective: sol.objective,
    })
}

/// Converts word spans to times: a span over frames `a..=b` covers
/// `[a / rate, (b + 1) / rate)`.
pub fn to_output(utt_id: &str, spans: &[WordSpan], frame_rate: f64) -> Result<SegmentationOutput> {
    let err = |m: String| Err(Error::Segmentation(format!("{utt_id}: {m}")));
    let Some(first) = spans.first() else {
        return err("no word spans".into());
    };
    if first.frame_a != 0 {
        return err(format!("first span starts at frame {}", first.frame_a));
    }
    for w in spans.windows(2) {
        if w[1].frame_a != w[0].frame_b + 1 {
            return err(format!(
                "span ending at frame {} is followed by one starting at {}",
                w[0].frame_b, w[1].frame_a
            ));
        }
    }
    if let Some(s) = spans.iter().find(|s| s.frame_a > s.frame_b) {
        return err(format!("span ({}, {}) is empty", s.frame_a, s.frame_b));
    }
    Ok(SegmentationOutput {
        utt_id: utt_id.to_string(),
        segments: spans
            .iter()
            .map(|s| Segment {
                start: s.frame_a as f64 / frame_rate,
                end: (s.frame_b + 1) as f64 / frame_rate,
                cluster_id: None,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{init_model, AeRnnConfig};
    use crate::dp::oracle::all_segmentations;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_seq(codes: Vec<usize>) -> CodeSequence {
        CodeSequence {
            utt_id: "u".into(),
            frame_spans: (0..codes.len()).map(|t| (2 * t, 2 * t + 1)).collect(),
            codes,
        }
    }

    fn tiny(seed: u64, vocab: usize) -> AeRnnModel {
        init_model(&AeRnnConfig {
            vocab,
            emb_dim: 3,
            hidden_dim: 4,
            seed,
            ..Default::default()
        })
    }

    fn cfg(lambda: f64, max_len: usize) -> DpdpWordConfig {
        DpdpWordConfig {
            lambda,
            max_len,
            form: PenaltyForm::Duration,
        }
    }

    #[test]
    fn uniform_model_span_cost() {
        let m = AeRnnModel::zeros(100, 2, 3);
        let s = score_span(&m, &[1, 2, 3, 4], 1, 3).unwrap();
        assert!((s - 3.0 * 100f64.ln()).abs() < 1e-9);
        assert!((s - 13.8155).abs() < 1e-4);
        assert!(score_span(&m, &[1, 2], 1, 2).is_err());
    }

    #[test]
    fn single_unit_span_is_forward_nll() {
        let m = tiny(1, 6);
        let codes = [3, 1, 5];
        assert_eq!(score_span(&m, &codes, 1, 1).unwrap(), forward_nll(&m, &[1]).unwrap());
    }

    #[test]
    fn memoized_scores_match_recomputation() {
        let m = tiny(2, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let codes: Vec<usize> = (0..12).map(|_| rng.random_range(0..6)).collect();
        let table = SpanScores::compute(&m, &codes, 12).unwrap();
        for i in 0..12 {
            for j in i..12 {
                assert_eq!(table.get(i, j).to_bits(), score_span(&m, &codes, i, j).unwrap().to_bits());
            }
        }
    }

    #[test]
    fn single_unit_sequence() {
        let m = tiny(3, 4);
        let w = dpdp_words(&unit_seq(vec![2]), &m, &cfg(5.0, 50)).unwrap();
        assert_eq!(w.spans.len(), 1);
        assert_eq!((w.spans[0].i, w.spans[0].j, w.spans[0].frame_a, w.spans[0].frame_b), (0, 0, 0, 1));
    }

    #[test]
    fn uniform_scorer_prefers_fewest_spans() {
        // Every cover costs N ln V - lambda (N - #spans), which is smallest
        // with the fewest spans: ceil(N / max_len) of them.
        let m = AeRnnModel::zeros(4, 2, 3);
        for n in 1..=10 {
            for max_len in [3, 10] {
                let seq = unit_seq((0..n).map(|t| t % 4).collect());
                let w = dpdp_words(&seq, &m, &cfg(0.7, max_len)).unwrap();
                let fewest = n.div_ceil(max_len);
                assert_eq!(w.spans.len(), fewest);
                let expected = n as f64 * 4f64.ln() - 0.7 * (n - fewest) as f64;
                assert!((w.objective - expected).abs() < 1e-9);
                let brute = all_segmentations(n, max_len)
                    .iter()
                    .map(|s| dp::objective(s, 0.7, PenaltyForm::Duration, |i, j| (j - i + 1) as f64 * 4f64.ln()))
                    .fold(f64::INFINITY, f64::min);
                assert!((brute - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matches_brute_force_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for case in 0..20 {
            let vocab = rng.random_range(2..6);
            let m = tiny(case, vocab);
            let n = rng.random_range(1..=8);
            let seq = unit_seq((0..n).map(|_| rng.random_range(0..vocab)).collect());
            let lambda = rng.random_range(0.0..4.0);
            let w = dpdp_words(&seq, &m, &cfg(lambda, n)).unwrap();
            let brute = all_segmentations(n, n)
                .iter()
                .map(|s| {
                    dp::objective(s, lambda, PenaltyForm::Duration, |i, j| {
                        forward_nll(&m, &seq.codes[i..=j]).unwrap()
                    })
                })
                .fold(f64::INFINITY, f64::min);
            assert!((w.objective - brute).abs() < 1e-9);
        }
    }

    #[test]
    fn output_times() {
        let spans = [
            WordSpan { i: 0, j: 1, frame_a: 0, frame_b: 9, nll: 0.0 },
            WordSpan { i: 2, j: 2, frame_a: 10, frame_b: 19, nll: 0.0 },
        ];
        let out = to_output("u", &spans, 50.0).unwrap();
        let times: Vec<(f64, f64)> = out.segments.iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(times, vec![(0.0, 0.2), (0.2, 0.4)]);
        assert!(out.segments.iter().all(|s| s.cluster_id.is_none()));

        let one = to_output("u", &spans[..1], 50.0).unwrap();
        assert_eq!(one.segments.len(), 1);

        let gap = [spans[0], WordSpan { frame_a: 11, ..spans[1] }];
        assert!(to_output("u", &gap, 50.0).is_err());
    }
}
