//! Shared fixtures for the benchmarks.

use evprof_core::features::{extract_matrix, FeatureMatrix};
use evprof_core::learn::{encode_labels, Dense};
use evprof_core::signal::FilterParams;
use evprof_core::synth::{generate_corpus, Separation, SynthOptions, SyntheticCorpus};
use evprof_core::tail::{segment_corpus, Segmentation, TailParams};
use evprof_core::TimeSeries;

pub const SEED: u64 = 42;

/// A deterministic noisy series of `len` samples.
pub fn noisy_series(len: usize) -> TimeSeries {
    let values = (0..len)
        .map(|t| {
            let x = t as f64;
            20.0 + 5.0 * (x / 50.0).sin() + ((t * 7919) % 101) as f64 / 50.0
        })
        .collect();
    TimeSeries::from_values(values).expect("finite values")
}

pub fn corpus(n_evs: usize, sessions_per_ev: usize) -> SyntheticCorpus {
    let options = SynthOptions { separation: Separation::WellSeparated, ..SynthOptions::default() };
    generate_corpus(n_evs, sessions_per_ev, SEED, &options).expect("valid synth parameters")
}

pub fn segments(corpus: &SyntheticCorpus) -> Segmentation {
    segment_corpus(&corpus.corpus, &FilterParams::default(), &TailParams::default())
}

pub fn features(n_evs: usize, sessions_per_ev: usize) -> FeatureMatrix {
    extract_matrix(&segments(&corpus(n_evs, sessions_per_ev)).segments)
}

/// Feature rows and encoded labels ready for a classifier.
pub fn training_set(n_evs: usize, sessions_per_ev: usize) -> (Dense, Vec<usize>, usize) {
    let m = features(n_evs, sessions_per_ev);
    let rows: Vec<Vec<f64>> = m.rows().iter().map(|r| r.values.clone()).collect();
    let (classes, y) = encode_labels(&m.labels());
    (Dense::from_rows(&rows).expect("rectangular rows"), y, classes.len())
}
