use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use evprof_bench::{corpus, features, noisy_series, segments, training_set, SEED};
use evprof_core::features::extract_matrix;
use evprof_core::learn::{KnnModel, MaxFeatures, Metric, RandomForest, Weights};
use evprof_core::signal::{moving_average, moving_median};

fn filters(c: &mut Criterion) {
    let mut group = c.benchmark_group("filters");
    let series = noisy_series(10_000);
    for n in [5, 51] {
        group.bench_with_input(BenchmarkId::new("moving_average", n), &n, |b, &n| {
            b.iter(|| moving_average(black_box(&series), n).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("moving_median", n), &n, |b, &n| {
            b.iter(|| moving_median(black_box(&series), n).unwrap())
        });
    }
    group.finish();
}

fn segmentation_and_features(c: &mut Criterion) {
    let synthetic = corpus(10, 20);
    c.bench_function("segment_corpus/200", |b| b.iter(|| segments(black_box(&synthetic))));
    let segmented = segments(&synthetic);
    c.bench_function("extract_matrix/200", |b| {
        b.iter(|| extract_matrix(black_box(&segmented.segments)))
    });
}

fn classifiers(c: &mut Criterion) {
    let (x, y, k) = training_set(10, 20);
    let mut group = c.benchmark_group("classifiers");
    group.sample_size(10);
    group.bench_function("random_forest_fit/50", |b| {
        b.iter(|| RandomForest::fit(&x, &y, k, 50, None, MaxFeatures::Sqrt, SEED))
    });
    let knn = KnnModel::fit(5, Metric::Euclidean, Weights::Uniform, x.clone(), y.clone(), k);
    let queries = features(10, 5);
    group.bench_function("knn_predict", |b| {
        b.iter(|| {
            queries
                .rows()
                .iter()
                .map(|r| knn.predict_row(black_box(&r.values)))
                .sum::<usize>()
        })
    });
    group.finish();
}

criterion_group!(benches, filters, segmentation_and_features, classifiers);
criterion_main!(benches);
