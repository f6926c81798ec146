use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;

use evprof_core::experiments::{
    build_binary_dataset, negative_order, subsample_distribution, subsample_multiclass,
    BalanceConfig, BalanceMode, DatasetSize, DistributionShape, NEGATIVE_LABEL, POSITIVE_LABEL,
};
use evprof_core::features::{FeatureMatrix, FeatureVector};

/// A matrix with the given number of rows per EV.
fn corpus(counts: &[usize]) -> FeatureMatrix {
    let mut rows = Vec::new();
    for (e, &n) in counts.iter().enumerate() {
        for j in 0..n {
            rows.push(FeatureVector {
                session_id: format!("EV{e}-{j}"),
                ev_label: format!("EV{e}"),
                values: vec![e as f64, j as f64],
            });
        }
    }
    FeatureMatrix::new(vec!["a".into(), "b".into()], rows).unwrap()
}

fn ids(m: &FeatureMatrix) -> Vec<String> {
    m.rows().iter().map(|r| r.session_id.clone()).collect()
}

fn per_ev(m: &FeatureMatrix) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for r in m.rows() {
        *out.entry(r.ev_label.clone()).or_insert(0) += 1;
    }
    out
}

proptest! {
    #[test]
    fn binary_datasets_hit_the_requested_ratio(
        counts in prop::collection::vec(1usize..40, 2..8),
        q in 1.0f64..=5.0,
        prime in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let m = corpus(&counts);
        let mode = if prime { BalanceMode::QPrime } else { BalanceMode::Q };
        let balance = BalanceConfig { mode, value: q, min_target_samples: 1 };
        let n_t = counts[0];
        let pool = counts.iter().sum::<usize>() - n_t;
        match build_binary_dataset(&m, "EV0", &balance, seed) {
            Ok(ds) => {
                let want = if prime { q * n_t as f64 } else { n_t as f64 / q };
                prop_assert_eq!(ds.n_positive, n_t);
                prop_assert_eq!(ds.n_negative, balance.negatives_for(n_t));
                prop_assert!((ds.n_negative as f64 - want).abs() < 1.0);
                prop_assert_eq!(ds.labels.iter().filter(|l| *l == POSITIVE_LABEL).count(), n_t);
                prop_assert_eq!(ds.labels.iter().filter(|l| *l == NEGATIVE_LABEL).count(), ds.n_negative);
                let unique: HashSet<String> = ids(&ds.matrix).into_iter().collect();
                prop_assert_eq!(unique.len(), ds.matrix.n_rows());
            }
            Err(_) => prop_assert!(pool < balance.negatives_for(n_t)),
        }
    }

    #[test]
    fn larger_ratios_extend_smaller_ones(counts in prop::collection::vec(1usize..30, 2..8), seed in any::<u64>()) {
        let m = corpus(&counts);
        let small = BalanceConfig { mode: BalanceMode::QPrime, value: 1.0, min_target_samples: 1 };
        let large = BalanceConfig { value: 2.0, ..small };
        if let (Ok(a), Ok(b)) = (
            build_binary_dataset(&m, "EV0", &small, seed),
            build_binary_dataset(&m, "EV0", &large, seed),
        ) {
            let bigger: HashSet<String> = ids(&b.matrix).into_iter().collect();
            prop_assert!(ids(&a.matrix).iter().all(|id| bigger.contains(id)));
        }
        let order = negative_order(&m, "EV0", seed);
        prop_assert_eq!(order.len(), counts.iter().sum::<usize>() - counts[0]);
        prop_assert!(order.iter().all(|&i| m.rows()[i].ev_label != "EV0"));
    }

    #[test]
    fn fixed_subsamples_are_reproducible_and_without_replacement(
        counts in prop::collection::vec(1usize..30, 1..12),
        n_evs in 1usize..6,
        k in 1usize..15,
        seed in any::<u64>(),
    ) {
        let m = corpus(&counts);
        let size = DatasetSize::Fixed { n_evs, samples_per_ev: k };
        let eligible = counts.iter().filter(|&&c| c >= k).count();
        match subsample_multiclass(&m, size, seed) {
            Ok(sub) => {
                prop_assert!(eligible >= n_evs);
                prop_assert_eq!(&sub, &subsample_multiclass(&m, size, seed).unwrap());
                let evs = per_ev(&sub);
                prop_assert_eq!(evs.len(), n_evs);
                prop_assert!(evs.values().all(|&c| c == k));
                let unique: HashSet<String> = ids(&sub).into_iter().collect();
                prop_assert_eq!(unique.len(), sub.n_rows());
            }
            Err(_) => prop_assert!(eligible < n_evs),
        }
    }

    #[test]
    fn complete_subsample_is_identity(counts in prop::collection::vec(1usize..20, 1..8), seed in any::<u64>()) {
        let m = corpus(&counts);
        prop_assert_eq!(subsample_multiclass(&m, DatasetSize::Complete, seed).unwrap(), m.clone());
        prop_assert_eq!(subsample_distribution(&m, &DistributionShape::Regular, seed).unwrap(), m);
    }

    #[test]
    fn shaped_subsamples_are_reproducible_and_without_replacement(
        counts in prop::collection::vec(10usize..80, 4..30),
        uniform in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let m = corpus(&counts);
        let shape = if uniform {
            DistributionShape::Uniform { bins: 2, per_bin: 2, lo: 10, hi: None }
        } else {
            DistributionShape::Normal { n_evs: 4, mean: 30.0, std: 10.0 }
        };
        if let Ok(sub) = subsample_distribution(&m, &shape, seed) {
            prop_assert_eq!(&sub, &subsample_distribution(&m, &shape, seed).unwrap());
            let evs = per_ev(&sub);
            prop_assert_eq!(evs.len(), 4);
            prop_assert!(evs.values().all(|&c| c >= 10));
            let unique: HashSet<String> = ids(&sub).into_iter().collect();
            prop_assert_eq!(unique.len(), sub.n_rows());
            for (ev, c) in evs {
                let idx: usize = ev.trim_start_matches("EV").parse().unwrap();
                prop_assert!(c <= counts[idx]);
            }
        }
    }
}
