//! Segmentation and lexicon metrics: boundary F1, token F1 and normalised
//! edit distance (NED) between the phone sequences of same-cluster tokens.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{AlignmentTrack, SegmentationOutput};
use crate::{par, Error, Result};

/// Slack added to every time comparison so values like `0.52 - 0.5` match
/// a tolerance of `0.02`.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Boundary matching slack in seconds.
    pub tolerance: f64,
    /// A phone belongs to a token if the overlap covers this fraction of the
    /// phone...
    pub overlap_frac: f64,
    /// ...or lasts at least this many seconds.
    pub overlap_abs: f64,
    /// Drop each utterance's first and last boundary before matching.
    pub exclude_edges: bool,
    /// Per-cluster cap on NED pairs; larger clusters are subsampled.
    pub ned_pair_cap: Option<usize>,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.02,
            overlap_frac: 0.5,
            overlap_abs: 0.03,
            exclude_edges: true,
            ned_pair_cap: None,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config(format!("tolerance must be >= 0, got {}", self.tolerance)));
        }
        if !(self.overlap_frac > 0.0 && self.overlap_frac <= 1.0) {
            return Err(Error::Config(format!(
                "overlap fraction must be in (0, 1], got {}",
                self.overlap_frac
            )));
        }
        if !(self.overlap_abs >= 0.0) {
            return Err(Error::Config(format!("overlap_abs must be >= 0, got {}", self.overlap_abs)));
        }
        if self.ned_pair_cap == Some(0) {
            return Err(Error::Config("NED pair cap must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matches: usize,
    pub num_hyp: usize,
    pub num_ref: usize,
}

impl PrecisionRecall {
    fn from_counts(matches: usize, num_hyp: usize, num_ref: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(matches, num_hyp);
        let recall = ratio(matches, num_ref);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            matches,
            num_hyp,
            num_ref,
        }
    }
}

fn sorted_times(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);
    v
}

fn ref_boundaries(track: &AlignmentTrack, exclude_edges: bool) -> Vec<f64> {
    let times = track.tokens.iter().flat_map(|t| [t.start, t.end]).collect();
    trim_edges(sorted_times(times), exclude_edges)
}

fn hyp_boundaries(hyp: &SegmentationOutput, exclude_edges: bool) -> Vec<f64> {
    let times = hyp.segments.iter().flat_map(|s| [s.start, s.end]).collect();
    trim_edges(sorted_times(times), exclude_edges)
}

fn trim_edges(mut v: Vec<f64>, exclude: bool) -> Vec<f64> {
    if exclude {
        if v.len() <= 2 {
            v.clear();
        } else {
            v.pop();
            v.remove(0);
        }
    }
    v
}

/// Greedy matching of ascending hypothesis boundaries to the nearest
/// unmatched reference boundary within `tol`. Returns the match count.
fn match_boundaries(hyp: &[f64], reference: &[f64], tol: f64) -> usize {
    let mut used = vec![false; reference.len()];
    let mut matches = 0;
    for &h in hyp {
        let mut best: Option<(usize, f64)> = None;
        for (i, &r) in reference.iter().enumerate() {
            let d = (h - r).abs();
            if !used[i] && d <= tol + TIME_EPS && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            used[i] = true;
            matches += 1;
        }
    }
    matches
}

/// Pairs each hypothesis with its reference track. Hypotheses without a
/// reference are an error; references without a hypothesis are ignored.
fn paired<'a>(
    refs: &'a BTreeMap<String, AlignmentTrack>,
    hyps: &'a [SegmentationOutput],
) -> Result<Vec<(&'a AlignmentTrack, &'a SegmentationOutput)>> {
    hyps.iter()
        .map(|h| {
            refs.get(&h.utt_id)
                .map(|r| (r, h))
                .ok_or_else(|| Error::Eval(format!("utterance {} has no reference alignment", h.utt_id)))
        })
        .collect()
}

pub fn boundary_f1(
    refs: &BTreeMap<String, AlignmentTrack>,
    hyps: &[SegmentationOutput],
    cfg: &EvalConfig,
) -> Result<PrecisionRecall> {
    cfg.validate()?;
    let pairs = paired(refs, hyps)?;
    let counts = par::map(&pairs, |(r, h)| {
        let rb = ref_boundaries(r, cfg.exclude_edges);
        let hb = hyp_boundaries(h, cfg.exclude_edges);
        (match_boundaries(&hb, &rb, cfg.tolerance), hb.len(), rb.len())
    });
    let (m, nh, nr) = counts
        .into_iter()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    Ok(PrecisionRecall::from_counts(m, nh, nr))
}

/// One-to-one token matches for an utterance as `(hyp index, ref index)`.
/// Hypothesis tokens are visited in time order and take the earliest
/// unmatched reference token whose start and end are both within `tol`.
pub fn token_matches(reference: &AlignmentTrack, hyp: &SegmentationOutput, tol: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..hyp.segments.len()).collect();
    order.sort_by(|&a, &b| hyp.segments[a].start.total_cmp(&hyp.segments[b].start));
    let mut used = vec![false; reference.tokens.len()];
    let mut out = Vec::new();
    for hi in order {
        let s = &hyp.segments[hi];
        let found = reference.tokens.iter().enumerate().position(|(ri, r)| {
            !used[ri] && (s.start - r.start).abs() <= tol + TIME_EPS && (s.end - r.end).abs() <= tol + TIME_EPS
        });
        if let Some(ri) = found {
            used[ri] = true;
            out.push((hi, ri));
        }
    }
    out
}

pub fn token_f1(
    refs: &BTreeMap<String, AlignmentTrack>,
    hyps: &[SegmentationOutput],
    cfg: &EvalConfig,
) -> Result<PrecisionRecall> {
    cfg.validate()?;
    let pairs = paired(refs, hyps)?;
    let counts = par::map(&pairs, |(r, h)| {
        (token_matches(r, h, cfg.tolerance).len(), h.segments.len(), r.tokens.len())
    });
    let (m, nh, nr) = counts
        .into_iter()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    Ok(PrecisionRecall::from_counts(m, nh, nr))
}

/// Labels of the phones overlapping `[start, end)` enough to count: the
/// overlap must cover `overlap_frac` of the phone or last `overlap_abs`
/// seconds.
pub fn token_phonemes(start: f64, end: f64, phones: &AlignmentTrack, cfg: &EvalConfig) -> Vec<String> {
    phones
        .tokens
        .iter()
        .filter(|p| {
            let overlap = end.min(p.end) - start.max(p.start);
            overlap > TIME_EPS
                && (overlap + TIME_EPS >= cfg.overlap_frac * (p.end - p.start)
                    || overlap + TIME_EPS >= cfg.overlap_abs)
        })
        .map(|p| p.label.clone())
        .collect()
}

/// Unit-cost edit distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the longer length; two empty sequences are at
/// distance 0.
pub fn normalized_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        0.0
    } else {
        levenshtein(a, b) as f64 / longest as f64
    }
}

/// Phone sequences of the tokens in each cluster.
pub type ClusterPhonemes = BTreeMap<usize, Vec<Vec<String>>>;

/// Mean NED over all same-cluster token pairs, pooled across clusters.
pub fn ned(clusters: &ClusterPhonemes) -> Result<f64> {
    ned_with_cap(clusters, None, 0)
}

/// [`ned`] with an optional per-cluster cap on the number of pairs. Clusters
/// with more pairs than the cap contribute `cap` pairs drawn with a
/// generator seeded from `seed` and the cluster id.
pub fn ned_with_cap(clusters: &ClusterPhonemes, cap: Option<usize>, seed: u64) -> Result<f64> {
    let groups: Vec<(&usize, &Vec<Vec<String>>)> = clusters.iter().collect();
    let sums = par::map(&groups, |&(&id, seqs)| {
        let n = seqs.len();
        let total_pairs = n * n.saturating_sub(1) / 2;
        match cap {
            Some(cap) if total_pairs > cap => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
                let mut sum = 0.0;
                for _ in 0..cap {
                    let a = rng.random_range(0..n);
                    let mut b = rng.random_range(0..n - 1);
                    if b >= a {
                        b += 1;
                    }
                    sum += normalized_edit_distance(&seqs[a], &seqs[b]);
                }
                (sum, cap)
            }
            _ => {
                let mut sum = 0.0;
                for a in 0..n {
                    for b in a + 1..n {
                        sum += normalized_edit_distance(&seqs[a], &seqs[b]);
                    }
                }
                (sum, total_pairs)
            }
        }
    });
    let (sum, pairs) = sums.into_iter().fold((0.0, 0), |acc, (s, p)| (acc.0 + s, acc.1 + p));
    if pairs == 0 {
        return Err(Error::Eval("no cluster holds two or more tokens; NED is undefined".into()));
    }
    Ok(sum / pairs as f64)
}

/// Groups the phone sequences of every clustered hypothesis token.
pub fn cluster_phonemes(
    phones: &BTreeMap<String, AlignmentTrack>,
    hyps: &[SegmentationOutput],
    cfg: &EvalConfig,
) -> Result<ClusterPhonemes> {
    let mut clusters = ClusterPhonemes::new();
    for h in hyps {
        let track = phones
            .get(&h.utt_id)
            .ok_or_else(|| Error::Eval(format!("utterance {} has no phone alignment", h.utt_id)))?;
        for s in &h.segments {
            let id = s.cluster_id.ok_or_else(|| {
                Error::Eval(format!("utterance {} has a segment without a cluster id", h.utt_id))
            })?;
            clusters
                .entry(id)
                .or_default()
                .push(token_phonemes(s.start, s.end, track, cfg));
        }
    }
    Ok(clusters)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub boundary: PrecisionRecall,
    pub token: PrecisionRecall,
    pub ned: Option<f64>,
    pub num_clusters: usize,
    pub num_utterances: usize,
}

/// Runs every metric. NED is computed only when phone alignments are given.
pub fn evaluate(
    words: &BTreeMap<String, AlignmentTrack>,
    phones: Option<&BTreeMap<String, AlignmentTrack>>,
    hyps: &[SegmentationOutput],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let boundary = boundary_f1(words, hyps, cfg)?;
    let token = token_f1(words, hyps, cfg)?;
    let (ned, num_clusters) = match phones {
        Some(p) => {
            let clusters = cluster_phonemes(p, hyps, cfg)?;
            (Some(ned_with_cap(&clusters, cfg.ned_pair_cap, cfg.seed)?), clusters.len())
        }
        None => (None, 0),
    };
    Ok(EvalReport {
        boundary,
        token,
        ned,
        num_clusters,
        num_utterances: hyps.len(),
    })
}

impl EvalReport {
    /// `key=value` lines preceded by `#` comments stating the matching
    /// conventions in effect.
    pub fn to_text(&self, cfg: &EvalConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# boundary tolerance {} s; edge boundaries excluded: {}", cfg.tolerance, cfg.exclude_edges);
        let _ = writeln!(
            s,
            "# phone inclusion: overlap >= {} of the phone or >= {} s; NED pooled over same-cluster pairs",
            cfg.overlap_frac, cfg.overlap_abs
        );
        let _ = writeln!(s, "# these conventions are configurable and may differ from other evaluation tools");
        let ned = self.ned.map(|v| format!("{v:.6}")).unwrap_or_else(|| "NA".into());
        let fields = [
            ("ned", ned),
            ("boundary_precision", format!("{:.6}", self.boundary.precision)),
            ("boundary_recall", format!("{:.6}", self.boundary.recall)),
            ("boundary_f1", format!("{:.6}", self.boundary.f1)),
            ("token_precision", format!("{:.6}", self.token.precision)),
            ("token_recall", format!("{:.6}", self.token.recall)),
            ("token_f1", format!("{:.6}", self.token.f1)),
            ("boundary_matches", self.boundary.matches.to_string()),
            ("boundary_hyp", self.boundary.num_hyp.to_string()),
            ("boundary_ref", self.boundary.num_ref.to_string()),
            ("token_matches", self.token.matches.to_string()),
            ("token_hyp", self.token.num_hyp.to_string()),
            ("token_ref", self.token.num_ref.to_string()),
            ("clusters", self.num_clusters.to_string()),
            ("utterances", self.num_utterances.to_string()),
        ];
        for (k, v) in fields {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::{AlignedToken, Segment};
    use proptest::prelude::*;

    fn track(utt: &str, spans: &[(f64, f64, &str)]) -> AlignmentTrack {
        AlignmentTrack::new(
            utt,
            spans
                .iter()
                .map(|&(start, end, l)| AlignedToken {
                    start,
                    end,
                    label: l.into(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn hyp(utt: &str, edges: &[f64]) -> SegmentationOutput {
        SegmentationOutput {
            utt_id: utt.into(),
            segments: edges
                .windows(2)
                .map(|w| Segment {
                    start: w[0],
                    end: w[1],
                    cluster_id: None,
                })
                .collect(),
        }
    }

    fn refs(tracks: Vec<AlignmentTrack>) -> BTreeMap<String, AlignmentTrack> {
        tracks.into_iter().map(|t| (t.utt_id.clone(), t)).collect()
    }

    fn seqs(v: &[&[&str]]) -> Vec<Vec<String>> {
        v.iter().map(|s| s.iter().map(|x| x.to_string()).collect()).collect()
    }

    #[test]
    fn perfect_hypothesis() {
        let r = refs(vec![track("u", &[(0.0, 0.3, "a"), (0.3, 0.7, "b"), (0.7, 1.0, "c")])]);
        let h = [hyp("u", &[0.0, 0.3, 0.7, 1.0])];
        let cfg = EvalConfig::default();
        assert_eq!(boundary_f1(&r, &h, &cfg).unwrap().f1, 1.0);
        let t = token_f1(&r, &h, &cfg).unwrap();
        assert_eq!((t.precision, t.recall, t.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn boundary_tolerance_edge() {
        let r = refs(vec![track("u", &[(0.0, 0.5, "a"), (0.5, 1.0, "b")])]);
        let h = [hyp("u", &[0.0, 0.52, 1.0])];
        let mut cfg = EvalConfig::default();
        assert_eq!(boundary_f1(&r, &h, &cfg).unwrap().f1, 1.0);
        cfg.tolerance = 0.01;
        let b = boundary_f1(&r, &h, &cfg).unwrap();
        assert_eq!((b.precision, b.recall, b.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn one_extra_boundary() {
        let r = refs(vec![track(
            "u",
            &[(0.0, 0.2, "a"), (0.2, 0.4, "b"), (0.4, 0.6, "c"), (0.6, 0.8, "d"), (0.8, 1.0, "e")],
        )]);
        let h = [hyp("u", &[0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0])];
        let b = boundary_f1(&r, &h, &EvalConfig::default()).unwrap();
        assert_eq!((b.matches, b.num_hyp, b.num_ref), (4, 5, 4));
        assert!((b.precision - 0.8).abs() < 1e-15);
        assert_eq!(b.recall, 1.0);
        assert!((b.f1 - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn token_examples() {
        let r = refs(vec![track("u", &[(0.0, 0.5, "a"), (0.5, 1.0, "b")])]);
        let cfg = EvalConfig::default();
        let t = token_f1(&r, &[hyp("u", &[0.0, 1.0])], &cfg).unwrap();
        assert_eq!((t.precision, t.recall, t.f1), (0.0, 0.0, 0.0));
        let t = token_f1(&r, &[hyp("u", &[0.0, 0.49, 1.0])], &cfg).unwrap();
        assert_eq!((t.precision, t.recall, t.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn unknown_utterance_is_an_error() {
        let r = refs(vec![track("u", &[(0.0, 1.0, "a")])]);
        let h = [hyp("v", &[0.0, 1.0])];
        assert!(matches!(boundary_f1(&r, &h, &EvalConfig::default()), Err(Error::Eval(_))));
        assert!(matches!(token_f1(&r, &h, &EvalConfig::default()), Err(Error::Eval(_))));
    }

    #[test]
    fn phone_inclusion_rule() {
        let cfg = EvalConfig::default();
        let p = track("u", &[(0.0, 0.1, "k"), (0.1, 0.2, "ae"), (0.2, 0.3, "t")]);
        assert_eq!(token_phonemes(0.0, 0.3, &p, &cfg), vec!["k", "ae", "t"]);
        // 10 ms of a 100 ms phone: below 50% and below 30 ms.
        assert_eq!(token_phonemes(0.09, 0.3, &p, &cfg), vec!["ae", "t"]);
        let long = track("u", &[(0.0, 1.0, "aa")]);
        assert_eq!(token_phonemes(0.4, 0.45, &long, &cfg), vec!["aa"]);
        assert!(token_phonemes(0.4, 0.42, &long, &cfg).is_empty());
    }

    #[test]
    fn ned_examples() {
        let mut c = ClusterPhonemes::new();
        c.insert(0, seqs(&[&["k", "ae", "t"], &["k", "ae", "t"], &["k", "ae", "t"]]));
        assert_eq!(ned(&c).unwrap(), 0.0);

        let mut c = ClusterPhonemes::new();
        c.insert(0, seqs(&[&["k", "ae", "t"], &["b", "ae", "t"]]));
        assert!((ned(&c).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let mut c = ClusterPhonemes::new();
        c.insert(0, seqs(&[&["a"], &["b"]]));
        c.insert(1, seqs(&[&["a"], &["a"]]));
        assert_eq!(ned(&c).unwrap(), 0.5);

        let mut c = ClusterPhonemes::new();
        c.insert(0, seqs(&[&[], &[]]));
        c.insert(1, seqs(&[&[], &["x"]]));
        assert_eq!(ned(&c).unwrap(), 0.5);

        let mut c = ClusterPhonemes::new();
        c.insert(0, seqs(&[&["a"]]));
        assert!(ned(&c).is_err());
    }

    #[test]
    fn ned_pair_cap_is_seeded() {
        let mut c = ClusterPhonemes::new();
        let v: Vec<Vec<String>> = (0..30).map(|i| vec![format!("p{}", i % 4)]).collect();
        c.insert(0, v);
        let a = ned_with_cap(&c, Some(50), 1).unwrap();
        assert_eq!(a, ned_with_cap(&c, Some(50), 1).unwrap());
        assert!((0.0..=1.0).contains(&a));
        assert_eq!(ned_with_cap(&c, Some(10_000), 1).unwrap(), ned(&c).unwrap());
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein(&["a", "b"], &["a", "b"]), 0);
        assert_eq!(levenshtein(&["a", "b", "c"], &[]), 3);
        assert_eq!(levenshtein(&["a", "b", "c"], &["a", "c"]), 1);
        assert_eq!(levenshtein(b"kitten", b"sitting"), 3);
    }

    #[test]
    fn report_lists_all_fields() {
        let r = refs(vec![track("u", &[(0.0, 0.5, "a"), (0.5, 1.0, "b")])]);
        let rep = evaluate(&r, None, &[hyp("u", &[0.0, 0.5, 1.0])], &EvalConfig::default()).unwrap();
        let text = rep.to_text(&EvalConfig::default());
        for key in ["ned=NA", "boundary_f1=1.000000", "token_f1=1.000000", "token_ref=2"] {
            assert!(text.contains(key), "{text}");
        }
    }

    fn label_seq() -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(0u8..4, 0..8)
    }

    proptest! {
        #[test]
        fn levenshtein_is_a_metric(a in label_seq(), b in label_seq(), c in label_seq()) {
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
            prop_assert_eq!(levenshtein(&a, &a), 0);
            let n = normalized_edit_distance(&a, &b);
            prop_assert!((0.0..=1.0).contains(&n));
        }

        #[test]
        fn jitter_below_half_tolerance_is_harmless(
            durs in proptest::collection::vec(0.05f64..0.5, 1..8),
            jitter in proptest::collection::vec(-0.0099f64..0.0099, 8),
        ) {
            let mut edges = vec![0.0];
            for d in &durs {
                edges.push(edges.last().unwrap() + d);
            }
            let labels: Vec<(f64, f64, &str)> = edges.windows(2).map(|w| (w[0], w[1], "w")).collect();
            let r = refs(vec![track("u", &labels)]);
            let mut jittered = edges.clone();
            let last = jittered.len() - 1;
            for (i, e) in jittered.iter_mut().enumerate().take(last).skip(1) {
                *e += jitter[i % jitter.len()];
            }
            let cfg = EvalConfig::default();
            let b = boundary_f1(&r, &[hyp("u", &jittered)], &cfg).unwrap();
            let t = token_f1(&r, &[hyp("u", &jittered)], &cfg).unwrap();
            prop_assert_eq!(b.matches, b.num_ref);
            prop_assert_eq!(t.f1, 1.0);
        }

        #[test]
        fn token_match_implies_boundary_matches(
            ref_durs in proptest::collection::vec(0.05f64..0.4, 1..6),
            hyp_durs in proptest::collection::vec(0.05f64..0.4, 1..6),
        ) {
            let mut re = vec![0.0];
            for d in &ref_durs { re.push(re.last().unwrap() + d); }
            let mut he = vec![0.0];
            for d in &hyp_durs { he.push(he.last().unwrap() + d); }
            let labels: Vec<(f64, f64, &str)> = re.windows(2).map(|w| (w[0], w[1], "w")).collect();
            let tr = track("u", &labels);
            let h = hyp("u", &he);
            let tol = 0.02;
            for (hi, ri) in token_matches(&tr, &h, tol) {
                let (s, e) = (h.segments[hi].start, h.segments[hi].end);
                prop_assert!(re.iter().any(|&b| (b - s).abs() <= tol + TIME_EPS));
                prop_assert!(re.iter().any(|&b| (b - e).abs() <= tol + TIME_EPS));
                prop_assert!((tr.tokens[ri].start - s).abs() <= tol + TIME_EPS);
            }
        }
    }

    #[test]
    fn order_invariance() {
        let r = refs(vec![
            track("a", &[(0.0, 0.3, "x"), (0.3, 1.0, "y")]),
            track("b", &[(0.0, 0.6, "x"), (0.6, 0.9, "z")]),
        ]);
        let h1 = vec![hyp("a", &[0.0, 0.31, 1.0]), hyp("b", &[0.0, 0.2, 0.9])];
        let h2 = vec![h1[1].clone(), h1[0].clone()];
        let cfg = EvalConfig::default();
        assert_eq!(boundary_f1(&r, &h1, &cfg).unwrap(), boundary_f1(&r, &h2, &cfg).unwrap());
        assert_eq!(token_f1(&r, &h1, &cfg).unwrap(), token_f1(&r, &h2, &cfg).unwrap());
    }
}
