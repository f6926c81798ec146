use proptest::prelude::*;

use evprof_core::features::{
    anova_f_scores, apply_minmax, catalog_len, chi2_scores, extract_features, fit_minmax,
    select_k_best, series_features, FeatureMatrix, FeatureVector, FEATURES_PER_SERIES,
};
use evprof_core::tail::SegmentPair;
use evprof_core::TimeSeries;

/// Rows of `d` values with labels drawn from `k` classes; every class appears.
fn labelled_rows() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<String>)> {
    (2usize..5, 1usize..5).prop_flat_map(|(k, d)| {
        let rows = prop::collection::vec(prop::collection::vec(0.0f64..10.0, d), k + 1..25);
        (Just(k), rows).prop_flat_map(|(k, rows)| {
            let n = rows.len();
            (Just(rows), prop::collection::vec(0..k, n)).prop_map(move |(rows, mut cls)| {
                for (i, c) in cls.iter_mut().enumerate().take(k) {
                    *c = i;
                }
                let labels = cls.iter().map(|c| format!("c{c}")).collect();
                (rows, labels)
            })
        })
    })
}

fn matrix(rows: &[Vec<f64>], labels: &[String]) -> FeatureMatrix {
    let cols = (0..rows[0].len()).map(|j| format!("f{j}")).collect();
    let rows = rows
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (r, l))| FeatureVector {
            session_id: format!("s{i}"),
            ev_label: l.clone(),
            values: r.clone(),
        })
        .collect();
    FeatureMatrix::new(cols, rows).unwrap()
}

fn classes(labels: &[String]) -> Vec<String> {
    let mut c = labels.to_vec();
    c.sort();
    c.dedup();
    c
}

fn reference_chi2(rows: &[Vec<f64>], labels: &[String], j: usize) -> f64 {
    let total: f64 = rows.iter().map(|r| r[j]).sum();
    let n = rows.len() as f64;
    classes(labels)
        .iter()
        .map(|c| {
            let mine: Vec<&Vec<f64>> = rows.iter().zip(labels).filter(|(_, l)| *l == c).map(|(r, _)| r).collect();
            let observed: f64 = mine.iter().map(|r| r[j]).sum();
            let expected = mine.len() as f64 / n * total;
            if expected > 0.0 {
                (observed - expected).powi(2) / expected
            } else {
                0.0
            }
        })
        .sum()
}

fn reference_anova(rows: &[Vec<f64>], labels: &[String], j: usize) -> f64 {
    let cls = classes(labels);
    let (n, k) = (rows.len() as f64, cls.len() as f64);
    let grand = rows.iter().map(|r| r[j]).sum::<f64>() / n;
    let (mut between, mut within) = (0.0, 0.0);
    for c in &cls {
        let g: Vec<f64> = rows.iter().zip(labels).filter(|(_, l)| *l == c).map(|(r, _)| r[j]).collect();
        let m = g.iter().sum::<f64>() / g.len() as f64;
        between += g.len() as f64 * (m - grand).powi(2);
        within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    if within == 0.0 {
        return if between > 0.0 { f64::INFINITY } else { 0.0 };
    }
    (between / (k - 1.0)) / (within / (n - k))
}

fn close(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= 1e-9 * (1.0 + b.abs())
}

proptest! {
    #[test]
    fn chi2_matches_reference((rows, labels) in labelled_rows()) {
        let m = matrix(&rows, &labels);
        let got = chi2_scores(&m, &labels).unwrap();
        for (j, g) in got.iter().enumerate() {
            prop_assert!(close(*g, reference_chi2(&rows, &labels, j)));
            prop_assert!(*g >= 0.0);
        }
    }

    #[test]
    fn anova_matches_reference((rows, labels) in labelled_rows()) {
        let m = matrix(&rows, &labels);
        let got = anova_f_scores(&m, &labels).unwrap();
        for (j, g) in got.iter().enumerate() {
            prop_assert!(close(*g, reference_anova(&rows, &labels, j)), "{} vs {}", g, reference_anova(&rows, &labels, j));
        }
    }

    #[test]
    fn minmax_maps_training_rows_into_unit_box((rows, labels) in labelled_rows()) {
        let m = matrix(&rows, &labels);
        let scaler = fit_minmax(&m);
        let scaled = apply_minmax(&m, &scaler);
        for j in 0..m.n_cols() {
            let col: Vec<f64> = scaled.rows().iter().map(|r| r.values[j]).collect();
            prop_assert!(col.iter().all(|v| (0.0..=1.0).contains(v)));
            if scaler.max[j] > scaler.min[j] {
                prop_assert!(col.contains(&0.0));
                prop_assert!(col.contains(&1.0));
            }
        }
    }

    #[test]
    fn select_k_best_keeps_the_top_scores(scores in prop::collection::vec(-5.0f64..5.0, 1..40), k in 1usize..50) {
        let chosen = select_k_best(&scores, k);
        prop_assert_eq!(chosen.len(), k.min(scores.len()));
        let worst_kept = chosen.iter().map(|&j| scores[j]).fold(f64::INFINITY, f64::min);
        for (j, s) in scores.iter().enumerate() {
            if !chosen.contains(&j) {
                prop_assert!(*s <= worst_kept);
            }
        }
        prop_assert!(chosen.windows(2).all(|w| scores[w[0]] >= scores[w[1]]));
    }

    #[test]
    fn feature_vectors_have_fixed_width_and_are_finite(
        tail in prop::collection::vec(0.0f64..40.0, 1..400),
        delta in prop::collection::vec(-5.0f64..40.0, 1..400),
    ) {
        let seg = SegmentPair {
            session_id: "s".into(),
            ev_label: Some("EV".into()),
            tail: TimeSeries::from_values(tail.clone()).unwrap(),
            delta: TimeSeries::from_values(delta).unwrap(),
            t_start: 1,
            t_s: 2,
        };
        let v = extract_features(&seg);
        prop_assert_eq!(v.values.len(), catalog_len());
        prop_assert!(v.values.iter().all(|x| x.is_finite()));
        prop_assert_eq!(&v.values[..FEATURES_PER_SERIES], &series_features(&tail)[..]);
    }

    #[test]
    fn feature_csv_round_trips((rows, labels) in labelled_rows()) {
        let m = matrix(&rows, &labels);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        prop_assert_eq!(FeatureMatrix::read_csv(buf.as_slice()).unwrap(), m);
    }
}
