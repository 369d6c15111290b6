//! Single-thread versus default pool on the hot paths. Build with
//! `--no-default-features` to measure the sequential fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wordseg::autoencoder::{init_model, AeRnnConfig};
use wordseg::codebook::{fit_kmeans, KMeansConfig};
use wordseg::corpus_io::FeatureSequence;
use wordseg::par::with_jobs;
use wordseg::unit_segmenter::{dpdp_units, DpdpUnitConfig};
use wordseg::word_segmenter::SpanScores;
use wordseg::Matrix;

const POOLS: [(&str, Option<usize>); 2] = [("1-thread", Some(1)), ("default", None)];

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn kmeans(c: &mut Criterion) {
    let points = random_matrix(20_000, 32, 1);
    let cfg = KMeansConfig {
        k: 50,
        max_iters: 10,
        tol: 0.0,
        ..Default::default()
    };
    let mut g = c.benchmark_group("kmeans_20k_x32_k50");
    g.sample_size(10);
    for (name, jobs) in POOLS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| with_jobs(jobs, || fit_kmeans(&points, &cfg).unwrap()))
        });
    }
    g.finish();
}

fn units(c: &mut Criterion) {
    let frames = random_matrix(1000, 32, 2).map(|&v| v as f32);
    let x = FeatureSequence::new("bench", frames, 50.0).unwrap();
    let codebook = fit_kmeans(
        &random_matrix(2000, 32, 3),
        &KMeansConfig {
            k: 100,
            max_iters: 5,
            ..Default::default()
        },
    )
    .unwrap()
    .codebook;
    let cfg = DpdpUnitConfig::default();
    let mut g = c.benchmark_group("dpdp_units_1000_frames");
    g.sample_size(10);
    for (name, jobs) in POOLS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| with_jobs(jobs, || dpdp_units(&x, &codebook, &cfg).unwrap()))
        });
    }
    g.finish();
}

fn span_scores(c: &mut Criterion) {
    let model = init_model(&AeRnnConfig {
        vocab: 100,
        ..Default::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let codes: Vec<usize> = (0..120).map(|_| rng.random_range(0..100)).collect();
    let mut g = c.benchmark_group("span_scores_120_codes");
    g.sample_size(10);
    for (name, jobs) in POOLS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| with_jobs(jobs, || SpanScores::compute(&model, &codes, 20).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, kmeans, units, span_scores);
criterion_main!(benches);
