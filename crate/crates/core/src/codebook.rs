//! K-means codebooks.
//!
//! Used twice in the pipeline: for the acoustic-unit codebook fitted on
//! frames, and for the lexicon fitted on acoustic word embeddings.

use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{read_ftrs, write_ftrs};
use crate::matrix::sq_dist;
use crate::{par, Error, Matrix, Result};

/// K centroids of dimension D.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: Matrix<f64>,
}

impl Codebook {
    pub fn new(centroids: Matrix<f64>) -> Result<Self> {
        if centroids.rows() == 0 || centroids.cols() == 0 {
            return Err(Error::Config("codebook needs at least one centroid of dimension >= 1".into()));
        }
        if centroids.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite centroid value".into()));
        }
        Ok(Self { centroids })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn len(&self) -> usize {
        self.centroids.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }

    pub fn centroid(&self, k: usize) -> &[f64] {
        self.centroids.row(k)
    }

    pub fn centroids(&self) -> &Matrix<f64> {
        &self.centroids
    }

    /// Nearest centroid to `v` and its squared distance; ties go to the
    /// smallest index.
    pub fn assign(&self, v: &[f64]) -> Result<(usize, f64)> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(self.nearest(v))
    }

    fn nearest(&self, v: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, c) in self.centroids.iter_rows().enumerate() {
            let d = sq_dist(v, c);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }

    /// Rounds centroids to single precision, matching what [`Codebook::save`]
    /// stores. Used so in-memory and reloaded codebooks behave identically.
    pub fn to_stored_precision(&self) -> Self {
        Self {
            centroids: self.centroids.map(|&v| v as f32 as f64),
        }
    }

    /// Saves in the FTRS layout with a frame rate of 0.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_ftrs(path, &self.centroids.map(|&v| v as f32), 0.0)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (m, _) = read_ftrs(path)?;
        Self::new(m.map(|&v| v as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KMeansInit {
    KMeansPlusPlus,
    Forgy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once the relative inertia improvement drops below this.
    pub tol: f64,
    pub init: KMeansInit,
    /// Independent initializations; the lowest final inertia wins.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 100,
            max_iters: 100,
            seed: 0,
            tol: 1e-6,
            init: KMeansInit::KMeansPlusPlus,
            restarts: 1,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::Config("k, max_iters and restarts must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!("tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Cluster index of every input point under `codebook`.
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each assignment step of the winning run.
    pub inertia_trace: Vec<f64>,
}

/// Lloyd's algorithm from a seeded initialization.
///
/// Distances are computed in parallel; centroid sums and inertia are
/// accumulated sequentially in input order so the result does not depend on
/// the thread count.
pub fn fit_kmeans(points: &Matrix<f64>, cfg: &KMeansConfig) -> Result<KMeansFit> {
    cfg.validate()?;
    if points.rows() < cfg.k {
        return Err(Error::InsufficientPoints {
            points: points.rows(),
            clusters: cfg.k,
        });
    }
    if points.cols() == 0 {
        return Err(Error::Data("points have dimension 0".into()));
    }
    if points.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite input point".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..cfg.restarts {
        let init = match cfg.init {
            KMeansInit::KMeansPlusPlus => init_plus_plus(points, cfg.k, &mut rng),
            KMeansInit::Forgy => init_forgy(points, cfg.k, &mut rng),
        };
        let fit = lloyd(points, init, cfg);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn init_forgy(points: &Matrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let picks = index::sample(rng, points.rows(), k);
    let rows: Vec<&[f64]> = picks.iter().map(|i| points.row(i)).collect();
    Matrix::from_rows(&rows).expect("rows share a dimension")
}

fn init_plus_plus(points: &Matrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let n = points.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = par::map_range(n, |i| sq_dist(points.row(i), points.row(chosen[0])));
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("total > 0 implies a positive weight")
        } else {
            // Every point coincides with a chosen centre; fall back to an
            // unchosen index so the centres are at least distinct rows.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        let c = points.row(next);
        let updated = par::map_range(n, |i| d2[i].min(sq_dist(points.row(i), c)));
        d2 = updated;
    }
    let rows: Vec<&[f64]> = chosen.iter().map(|&i| points.row(i)).collect();
    Matrix::from_rows(&rows).expect("rows share a dimension")
}

fn lloyd(points: &Matrix<f64>, init: Matrix<f64>, cfg: &KMeansConfig) -> KMeansFit {
    let mut codebook = Codebook { centroids: init };
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    loop {
        let nearest = par::map_range(points.rows(), |i| codebook.nearest(points.row(i)));
        let inertia: f64 = nearest.iter().map(|&(_, d)| d).sum();
        trace.push(inertia);
        let converged = prev.is_finite() && prev - inertia <= cfg.tol * prev;
        prev = inertia;
        if converged || trace.len() >= cfg.max_iters {
            return KMeansFit {
                codebook,
                assignments: nearest.iter().map(|&(k, _)| k).collect(),
                inertia,
                inertia_trace: trace,
            };
        }
        codebook.centroids = update_centroids(points, &nearest, codebook.len());
    }
}

/// Means of the assigned points. Empty clusters take the point farthest from
/// its current centroid (distinct points for distinct empty clusters).
fn update_centroids(points: &Matrix<f64>, nearest: &[(usize, f64)], k: usize) -> Matrix<f64> {
    let d = points.cols();
    let mut sums = Matrix::<f64>::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &(c, _)) in nearest.iter().enumerate() {
        counts[c] += 1;
        for (s, &x) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    let mut taken = Vec::new();
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            sums.row_mut(c).iter_mut().for_each(|s| *s /= n);
            continue;
        }
        let mut far = None;
        for (i, &(_, dist)) in nearest.iter().enumerate() {
            if taken.contains(&i) {
                continue;
            }
            if far.is_none_or(|(_, best)| dist > best) {
                far = Some((i, dist));
            }
        }
        if let Some((i, _)) = far {
            taken.push(i);
            sums.row_mut(c).copy_from_slice(points.row(i));
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    fn cfg(k: usize) -> KMeansConfig {
        KMeansConfig {
            k,
            ..Default::default()
        }
    }

    #[test]
    fn n_equals_k_recovers_points() {
        let pts = Matrix::from_rows(&[[0.0, 1.0], [5.0, 5.0], [-3.0, 2.0]]).unwrap();
        let fit = fit_kmeans(&pts, &cfg(3)).unwrap();
        assert_eq!(fit.inertia, 0.0);
        let mut rows: Vec<Vec<f64>> = fit.codebook.centroids().iter_rows().map(|r| r.to_vec()).collect();
        rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(rows, vec![vec![-3.0, 2.0], vec![0.0, 1.0], vec![5.0, 5.0]]);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = Matrix::from_rows(&[[1.0, 2.0], [3.0, 6.0], [5.0, 1.0], [7.0, -1.0]]).unwrap();
        let fit = fit_kmeans(&pts, &cfg(1)).unwrap();
        assert_eq!(fit.codebook.centroid(0), &[4.0, 2.0]);
    }

    #[test]
    fn two_clusters_on_a_line() {
        // Brute force over the 7 non-trivial 2-partitions of {0,1,10,11}
        // gives {0,1}|{10,11} with inertia 4 * 0.25 = 1.
        let pts = col(&[0.0, 1.0, 10.0, 11.0]);
        let fit = fit_kmeans(&pts, &KMeansConfig { restarts: 3, ..cfg(2) }).unwrap();
        let mut c: Vec<f64> = (0..2).map(|k| fit.codebook.centroid(k)[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.5, 10.5]);
        assert!((fit.inertia - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assign_examples() {
        let cb = Codebook::from_rows(&[[0.0], [10.0]]).unwrap();
        assert_eq!(cb.assign(&[5.0]).unwrap(), (0, 25.0));
        let cb = Codebook::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(cb.assign(&[3.0, 0.0]).unwrap(), (0, 9.0));
        assert!(matches!(cb.assign(&[1.0]), Err(Error::Dimension { .. })));
        let cb = Codebook::from_rows(&[[0.0], [1.0], [2.0], [7.5]]).unwrap();
        assert_eq!(cb.assign(&[7.5]).unwrap(), (3, 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            fit_kmeans(&col(&[1.0, 2.0]), &cfg(3)),
            Err(Error::InsufficientPoints { points: 2, clusters: 3 })
        ));
        assert!(matches!(fit_kmeans(&col(&[1.0, f64::NAN]), &cfg(1)), Err(Error::Data(_))));
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        // Centroid 2 starts far from all data and captures nothing.
        let pts = col(&[0.0, 0.1, 5.0, 5.1, 9.0]);
        let init = col(&[0.0, 5.0, 100.0]);
        let fit = lloyd(&pts, init, &cfg(3));
        let counts = (0..3).map(|k| fit.assignments.iter().filter(|&&a| a == k).count());
        assert!(counts.into_iter().all(|c| c > 0));
        assert!(fit.inertia < 0.02);
    }

    #[test]
    fn deterministic_and_duplicate_tolerant() {
        let pts = col(&[1.0, 1.0, 1.0, 2.0, 2.0, 3.0]);
        let a = fit_kmeans(&pts, &cfg(3)).unwrap();
        let b = fit_kmeans(&pts, &cfg(3)).unwrap();
        assert_eq!(a.codebook, b.codebook);
        let same = col(&[4.0; 5]);
        let fit = fit_kmeans(&same, &cfg(2)).unwrap();
        assert_eq!(fit.inertia, 0.0);
    }

    #[test]
    fn save_load_round_trip() {
        let cb = Codebook::from_rows(&[[0.1, 0.2], [0.3, -4.5]]).unwrap().to_stored_precision();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cb.ftrs");
        cb.save(&p).unwrap();
        assert_eq!(Codebook::load(&p).unwrap(), cb);
    }
}
