//! Exact dynamic programming over contiguous segmentations with a duration
//! penalty, shared by the unit and word stages.
//!
//! A segmentation of `n` items is a list of inclusive spans `(start, end)`
//! covering `0..n` in order. With the duration form every span scores
//! `cost(start, end) - lambda * (end - start)`; with the count form it scores
//! `cost(start, end) + lambda`. Over full-coverage segmentations the two
//! differ by the constant `lambda * n`, so they share a minimizer.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyForm {
    /// `-lambda * (end - start)` per span.
    #[default]
    Duration,
    /// `+lambda` per span.
    Count,
}

impl PenaltyForm {
    pub fn span_score(self, cost: f64, start: usize, end: usize, lambda: f64) -> f64 {
        match self {
            PenaltyForm::Duration => cost - lambda * (end - start) as f64,
            PenaltyForm::Count => cost + lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    /// Inclusive `(start, end)` spans in order.
    pub spans: Vec<(usize, usize)>,
    pub objective: f64,
}

/// Minimizes the penalised cost over all segmentations of `0..n` with spans
/// of at most `max_len` items.
///
/// Forward recursion `best[t] = min_j best[j] + score(j, t - 1)` with
/// backpointers. Scores within [`TIE_TOL`] (relative) of each other count
/// as equal, and equal scores prefer the shorter final span; without the
/// tolerance, rounding would break exact ties (e.g. where to split a run of
/// identically coded frames) differently for the two penalty forms.
pub fn segment(
    n: usize,
    max_len: usize,
    lambda: f64,
    form: PenaltyForm,
    cost: impl Fn(usize, usize) -> f64,
) -> DpSolution {
    assert!(n >= 1 && max_len >= 1, "segment needs n >= 1 and max_len >= 1");
    let mut best = vec![f64::INFINITY; n + 1];
    let mut back = vec![0usize; n + 1];
    best[0] = 0.0;
    for t in 1..=n {
        for len in 1..=max_len.min(t) {
            let j = t - len;
            let cand = best[j] + form.span_score(cost(j, t - 1), j, t - 1, lambda);
            if improves(cand, best[t]) {
                best[t] = cand;
                back[t] = j;
            }
        }
    }
    let mut spans = Vec::new();
    let mut t = n;
    while t > 0 {
        let j = back[t];
        spans.push((j, t - 1));
        t = j;
    }
    spans.reverse();
    DpSolution {
        spans,
        objective: best[n],
    }
}

/// Relative tolerance under which two DP scores are treated as tied.
pub const TIE_TOL: f64 = 1e-10;

fn improves(cand: f64, incumbent: f64) -> bool {
    if incumbent.is_infinite() {
        return cand < incumbent;
    }
    cand < incumbent - TIE_TOL * (1.0 + cand.abs().max(incumbent.abs()))
}

/// Objective of a given segmentation, accumulated in the same order as
/// [`segment`] so the optimum reproduces its objective exactly.
pub fn objective(
    spans: &[(usize, usize)],
    lambda: f64,
    form: PenaltyForm,
    cost: impl Fn(usize, usize) -> f64,
) -> f64 {
    spans
        .iter()
        .fold(0.0, |acc, &(a, b)| acc + form.span_score(cost(a, b), a, b, lambda))
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts() {
        assert_eq!(oracle::all_segmentations(4, 4).len(), 8);
        assert_eq!(oracle::all_segmentations(4, 1).len(), 1);
        assert_eq!(oracle::all_segmentations(1, 1), vec![vec![(0, 0)]]);
    }

    #[test]
    fn rounding_ties_agree_across_forms() {
        // Per-item additive costs: every split of the sequence has the same
        // exact cost, so only rounding separates the candidates.
        let w = [0.1, 0.7, 0.3, 1.9, 0.2, 0.6, 0.4];
        let prefix: Vec<f64> = std::iter::once(0.0)
            .chain(w.iter().scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            }))
            .collect();
        let cost = |a: usize, b: usize| prefix[b + 1] - prefix[a];
        for max_len in 1..=w.len() {
            for lambda in [0.0, 0.3, 1.7] {
                let d = segment(w.len(), max_len, lambda, PenaltyForm::Duration, cost);
                let c = segment(w.len(), max_len, lambda, PenaltyForm::Count, cost);
                assert_eq!(d.spans, c.spans);
            }
        }
    }

    #[test]
    fn ties_prefer_short_final_span() {
        // All costs zero and no penalty: every segmentation scores 0, the
        // shortest final span wins at every step.
        let sol = segment(3, 3, 0.0, PenaltyForm::Duration, |_, _| 0.0);
        assert_eq!(sol.spans, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn matches_enumeration_on_random_costs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(1..=9);
            let max_len = rng.random_range(1..=n);
            let lambda = rng.random_range(0.0..3.0);
            let table: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..5.0)).collect()).collect();
            let cost = |a: usize, b: usize| table[a][b];
            let sol = segment(n, max_len, lambda, PenaltyForm::Duration, cost);
            let brute = oracle::all_segmentations(n, max_len)
                .iter()
                .map(|s| objective(s, lambda, PenaltyForm::Duration, cost))
                .fold(f64::INFINITY, f64::min);
            assert!((sol.objective - brute).abs() < 1e-9);
            assert_eq!(objective(&sol.spans, lambda, PenaltyForm::Duration, cost), sol.objective);
        }
    }
}
