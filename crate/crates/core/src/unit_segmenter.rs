//! Acoustic unit discovery: jointly segment a feature sequence and label
//! every segment with one codebook entry, minimizing the summed squared
//! distance of each frame to its segment's centroid minus a duration bonus
//! `lambda * (b - a)` per segment.

use serde::{Deserialize, Serialize};

use crate::autoencoder::CodeSequence;
use crate::codebook::Codebook;
use crate::corpus_io::FeatureSequence;
use crate::dp::{self, PenaltyForm};
use crate::matrix::dot;
use crate::{par, Error, Result};

/// Frames `a..=b` labelled with code `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSegment {
    pub a: usize,
    pub b: usize,
    pub z: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitSegmentation {
    pub utt_id: String,
    pub segments: Vec<UnitSegment>,
    /// Achieved value of the penalised objective.
    pub objective: f64,
}

impl UnitSegmentation {
    pub fn to_code_sequence(&self) -> CodeSequence {
        CodeSequence {
            utt_id: self.utt_id.clone(),
            codes: self.segments.iter().map(|s| s.z).collect(),
            frame_spans: self.segments.iter().map(|s| (s.a, s.b)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpdpUnitConfig {
    pub lambda: f64,
    /// Longest allowed segment, in frames.
    pub max_len: usize,
    pub form: PenaltyForm,
}

impl Default for DpdpUnitConfig {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            max_len: 25,
            form: PenaltyForm::Duration,
        }
    }
}

impl DpdpUnitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("unit lambda must be >= 0, got {}", self.lambda)));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max unit length must be >= 1".into()));
        }
        Ok(())
    }
}

/// O(K·D) span costs from prefix sums of frames and squared frame norms:
/// `sum ||x_t - e||^2 = sum ||x_t||^2 - 2 e·sum x_t + n ||e||^2`.
pub struct SpanCoster<'a> {
    codebook: &'a Codebook,
    dim: usize,
    /// `(T + 1) × D` running sums of frames.
    prefix: Vec<f64>,
    /// `T + 1` running sums of squared norms.
    prefix_sq: Vec<f64>,
    centroid_sq: Vec<f64>,
}

impl<'a> SpanCoster<'a> {
    pub fn new(x: &FeatureSequence, codebook: &'a Codebook) -> Result<Self> {
        let dim = x.dim();
        if dim != codebook.dim() {
            return Err(Error::Dimension {
                expected: codebook.dim(),
                got: dim,
            });
        }
        let t = x.num_frames();
        let mut prefix = vec![0.0; (t + 1) * dim];
        let mut prefix_sq = vec![0.0; t + 1];
        for (i, row) in x.frames.iter_rows().enumerate() {
            let mut sq = 0.0;
            for (k, &v) in row.iter().enumerate() {
                let v = v as f64;
                prefix[(i + 1) * dim + k] = prefix[i * dim + k] + v;
                sq += v * v;
            }
            prefix_sq[i + 1] = prefix_sq[i] + sq;
        }
        let centroid_sq = codebook.centroids().iter_rows().map(|c| dot(c, c)).collect();
        Ok(Self {
            codebook,
            dim,
            prefix,
            prefix_sq,
            centroid_sq,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.prefix_sq.len() - 1
    }

    /// Best code for frames `a..=b` (ties to the smallest code) and its cost.
    pub fn cost(&self, a: usize, b: usize) -> (usize, f64) {
        let d = self.dim;
        let n = (b - a + 1) as f64;
        let sum_sq = self.prefix_sq[b + 1] - self.prefix_sq[a];
        let hi = &self.prefix[(b + 1) * d..(b + 2) * d];
        let lo = &self.prefix[a * d..(a + 1) * d];
        let mut best = (0, f64::INFINITY);
        for (k, e) in self.codebook.centroids().iter_rows().enumerate() {
            let cross: f64 = e.iter().zip(hi.iter().zip(lo)).map(|(e, (h, l))| e * (h - l)).sum();
            let c = (sum_sq - 2.0 * cross + n * self.centroid_sq[k]).max(0.0);
            if c < best.1 {
                best = (k, c);
            }
        }
        best
    }
}

/// Cost of labelling frames `a..=b` with a single code, and that code.
pub fn span_cost(x: &FeatureSequence, a: usize, b: usize, codebook: &Codebook) -> Result<(usize, f64)> {
    if a > b || b >= x.num_frames() {
        return Err(Error::Index(format!(
            "span ({a}, {b}) invalid for {} frames",
            x.num_frames()
        )));
    }
    Ok(SpanCoster::new(x, codebook)?.cost(a, b))
}

/// Globally optimal unit segmentation of one utterance.
pub fn dpdp_units(x: &FeatureSequence, codebook: &Codebook, cfg: &DpdpUnitConfig) -> Result<UnitSegmentation> {
    cfg.validate()?;
    let coster = SpanCoster::new(x, codebook)?;
    let t = coster.num_frames();
    if t == 0 {
        return Err(Error::Data(format!("{}: empty feature sequence", x.utt_id)));
    }
    let max_len = cfg.max_len.min(t);
    // table[end][len - 1] = (code, cost) of frames end+1-len..=end
    let table = par::map_range(t, |end| {
        (1..=max_len.min(end + 1))
            .map(|len| coster.cost(end + 1 - len, end))
            .collect::<Vec<_>>()
    });
    let lookup = |a: usize, b: usize| table[b][b - a];
    let sol = dp::segment(t, max_len, cfg.lambda, cfg.form, |a, b| lookup(a, b).1);
    let segments = sol
        .spans
        .iter()
        .map(|&(a, b)| UnitSegment { a, b, z: lookup(a, b).0 })
        .collect();
    Ok(UnitSegmentation {
        utt_id: x.utt_id.clone(),
        segments,
        objective: sol.objective,
    })
}

/// Re-evaluates the objective of a segmentation from its per-segment codes.
pub fn segmentation_objective(
    x: &FeatureSequence,
    codebook: &Codebook,
    seg: &UnitSegmentation,
    cfg: &DpdpUnitConfig,
) -> Result<f64> {
    let coster = SpanCoster::new(x, codebook)?;
    let spans: Vec<(usize, usize)> = seg.segments.iter().map(|s| (s.a, s.b)).collect();
    Ok(dp::objective(&spans, cfg.lambda, cfg.form, |a, b| coster.cost(a, b).1))
}
