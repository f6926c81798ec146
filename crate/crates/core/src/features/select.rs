use std::collections::BTreeMap;
use std::sync::Once;

use serde::{Deserialize, Serialize};

use super::{apply_minmax, fit_minmax, FeatureMatrix, MinMaxScaler};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scorer {
    Chi2,
    AnovaF,
}

impl std::str::FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chi2" => Ok(Self::Chi2),
            "anova-f" | "f_classif" => Ok(Self::AnovaF),
            other => Err(Error::Config(format!("unknown scorer `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub nof: usize,
    pub scorer: Scorer,
}

impl SelectionConfig {
    pub fn binary_default() -> Self {
        Self { nof: 100, scorer: Scorer::Chi2 }
    }

    pub fn multiclass_default() -> Self {
        Self { nof: 200, scorer: Scorer::Chi2 }
    }
}

/// Selected columns plus the training bounds used to scale them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionModel {
    pub selected_names: Vec<String>,
    pub scaler: MinMaxScaler,
    /// Scores of the selected columns, in selection order.
    #[serde(with = "extended_floats")]
    pub scores: Vec<f64>,
}

/// JSON has no infinities; non-finite scores are written as strings.
mod extended_floats {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let r: Vec<Repr> = v
            .iter()
            .map(|&x| if x.is_finite() { Repr::Num(x) } else { Repr::Text(x.to_string()) })
            .collect();
        r.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Num(x) => Ok(x),
                Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
            })
            .collect()
    }
}

impl SelectionModel {
    /// Extracts, scales and clips the selected columns of every row.
    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        let idx = self
            .selected_names
            .iter()
            .map(|n| {
                matrix
                    .column_index(n)
                    .ok_or_else(|| Error::Prediction(format!("missing feature column `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(matrix
            .rows()
            .iter()
            .map(|r| {
                idx.iter()
                    .enumerate()
                    .map(|(k, &j)| self.scaler.scale(k, r.values[j]))
                    .collect()
            })
            .collect())
    }
}

/// Row indices per class, classes in sorted order.
fn groups(labels: &[String]) -> BTreeMap<&str, Vec<usize>> {
    let mut g: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        g.entry(l.as_str()).or_default().push(i);
    }
    g
}

fn check_labels(matrix: &FeatureMatrix, labels: &[String]) -> Result<()> {
    if labels.len() != matrix.n_rows() {
        return Err(Error::Selection(format!(
            "{} labels for {} rows",
            labels.len(),
            matrix.n_rows()
        )));
    }
    Ok(())
}

/// Chi-squared statistic of each non-negative feature against the class labels.
pub fn chi2_scores(scaled: &FeatureMatrix, labels: &[String]) -> Result<Vec<f64>> {
    check_labels(scaled, labels)?;
    let g = groups(labels);
    if g.len() < 2 {
        return Err(Error::Selection("chi2 needs at least two classes".into()));
    }
    let n = labels.len() as f64;
    let d = scaled.n_cols();
    if scaled.rows().iter().any(|r| r.values.iter().any(|&v| v < 0.0)) {
        return Err(Error::Selection("chi2 needs non-negative features".into()));
    }
    let mut observed = vec![vec![0.0; d]; g.len()];
    for (k, rows) in g.values().enumerate() {
        for &i in rows {
            for (j, v) in scaled.rows()[i].values.iter().enumerate() {
                observed[k][j] += v;
            }
        }
    }
    let scores = (0..d)
        .map(|j| {
            let total: f64 = observed.iter().map(|o| o[j]).sum();
            g.values()
                .enumerate()
                .map(|(k, rows)| {
                    let expected = rows.len() as f64 / n * total;
                    if expected > 0.0 {
                        (observed[k][j] - expected).powi(2) / expected
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect();
    Ok(scores)
}

/// One-way ANOVA F statistic of each feature. A feature whose groups are
/// internally constant but differ between groups scores `+inf`.
pub fn anova_f_scores(matrix: &FeatureMatrix, labels: &[String]) -> Result<Vec<f64>> {
    check_labels(matrix, labels)?;
    let g = groups(labels);
    let k = g.len();
    let n = labels.len();
    if k < 2 {
        return Err(Error::Selection("ANOVA needs at least two classes".into()));
    }
    if n <= k {
        return Err(Error::Selection(format!(
            "ANOVA needs more rows ({n}) than classes ({k})"
        )));
    }
    let d = matrix.n_cols();
    let rows = matrix.rows();
    let scores = (0..d)
        .map(|j| {
            let grand = rows.iter().map(|r| r.values[j]).sum::<f64>() / n as f64;
            let mut between = 0.0;
            let mut within = 0.0;
            for members in g.values() {
                let m = members.iter().map(|&i| rows[i].values[j]).sum::<f64>() / members.len() as f64;
                between += members.len() as f64 * (m - grand).powi(2);
                within += members.iter().map(|&i| (rows[i].values[j] - m).powi(2)).sum::<f64>();
            }
            if within <= 0.0 {
                if between > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                (between / (k - 1) as f64) / (within / (n - k) as f64)
            }
        })
        .collect();
    Ok(scores)
}

/// Indices of the `nof` best scores, best first; ties keep column order.
pub fn select_k_best(scores: &[f64], nof: usize) -> Vec<usize> {
    let k = if nof > scores.len() {
        static CLIPPED: Once = Once::new();
        CLIPPED.call_once(|| {
            log::warn!(
                "requested {nof} features but only {} are available; keeping all",
                scores.len()
            )
        });
        scores.len()
    } else {
        nof
    };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Fits the scaler and selection on training rows only.
pub fn fit_selection(
    train: &FeatureMatrix,
    labels: &[String],
    config: &SelectionConfig,
) -> Result<SelectionModel> {
    if config.nof == 0 {
        return Err(Error::Config("nof must be >= 1".into()));
    }
    let scaler = fit_minmax(train);
    let scores = match config.scorer {
        Scorer::Chi2 => chi2_scores(&apply_minmax(train, &scaler), labels)?,
        Scorer::AnovaF => anova_f_scores(train, labels)?,
    };
    let chosen = select_k_best(&scores, config.nof);
    Ok(SelectionModel {
        selected_names: chosen.iter().map(|&j| train.columns()[j].clone()).collect(),
        scaler: MinMaxScaler {
            min: chosen.iter().map(|&j| scaler.min[j]).collect(),
            max: chosen.iter().map(|&j| scaler.max[j]).collect(),
        },
        scores: chosen.iter().map(|&j| scores[j]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;

    fn matrix(cols: &[&str], rows: &[(&str, Vec<f64>)]) -> (FeatureMatrix, Vec<String>) {
        let rows: Vec<FeatureVector> = rows
            .iter()
            .enumerate()
            .map(|(i, (l, v))| FeatureVector {
                session_id: format!("r{i}"),
                ev_label: l.to_string(),
                values: v.clone(),
            })
            .collect();
        let m = FeatureMatrix::new(cols.iter().map(|s| s.to_string()).collect(), rows).unwrap();
        let labels = m.labels();
        (m, labels)
    }

    #[test]
    fn chi2_hand_example() {
        let (m, y) = matrix(
            &["f", "same", "zero"],
            &[
                ("A", vec![1.0, 0.3, 0.0]),
                ("A", vec![0.5, 0.3, 0.0]),
                ("B", vec![0.0, 0.3, 0.0]),
                ("B", vec![0.5, 0.3, 0.0]),
            ],
        );
        let s = chi2_scores(&m, &y).unwrap();
        assert_eq!(s[0], 0.5);
        assert!(s[1].abs() < 1e-15);
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn chi2_single_class_is_error() {
        let (m, y) = matrix(&["f"], &[("A", vec![1.0]), ("A", vec![0.0])]);
        assert!(matches!(chi2_scores(&m, &y), Err(Error::Selection(_))));
    }

    #[test]
    fn anova_hand_examples() {
        let (m, y) = matrix(
            &["f", "sep", "flat"],
            &[
                ("A", vec![1.0, 0.0, 1.0]),
                ("A", vec![2.0, 0.0, 3.0]),
                ("B", vec![3.0, 1.0, 1.0]),
                ("B", vec![4.0, 1.0, 3.0]),
            ],
        );
        let f = anova_f_scores(&m, &y).unwrap();
        assert_eq!(f[0], 8.0);
        assert_eq!(f[1], f64::INFINITY);
        assert_eq!(f[2], 0.0);
    }

    #[test]
    fn anova_without_residual_dof_is_error() {
        let (m, y) = matrix(&["f"], &[("A", vec![1.0]), ("B", vec![2.0])]);
        assert!(matches!(anova_f_scores(&m, &y), Err(Error::Selection(_))));
    }

    #[test]
    fn ranking_and_ties() {
        assert_eq!(select_k_best(&[5.0, 2.0, 9.0], 2), vec![2, 0]);
        assert_eq!(select_k_best(&[3.0, 3.0], 1), vec![0]);
        assert_eq!(select_k_best(&[0.0, f64::INFINITY, 1.0], 3), vec![1, 2, 0]);
        let all = select_k_best(&vec![1.0; 134], 200);
        assert_eq!(all.len(), 134);
    }

    #[test]
    fn selection_transform_uses_training_bounds() {
        let (m, y) = matrix(
            &["noise", "signal"],
            &[
                ("A", vec![5.0, 0.0]),
                ("A", vec![6.0, 1.0]),
                ("B", vec![5.0, 9.0]),
                ("B", vec![6.0, 10.0]),
            ],
        );
        let sel = fit_selection(&m, &y, &SelectionConfig { nof: 1, scorer: Scorer::Chi2 }).unwrap();
        assert_eq!(sel.selected_names, vec!["signal".to_string()]);
        let t = sel.transform(&m).unwrap();
        assert_eq!(t, vec![vec![0.0], vec![0.1], vec![0.9], vec![1.0]]);
        let sel = fit_selection(&m, &y, &SelectionConfig { nof: 1, scorer: Scorer::AnovaF }).unwrap();
        assert_eq!(sel.selected_names, vec!["signal".to_string()]);
    }

    #[test]
    fn infinite_scores_survive_json() {
        let sel = SelectionModel {
            selected_names: vec!["a".into(), "b".into()],
            scaler: MinMaxScaler { min: vec![0.0, 1.0], max: vec![1.0, 2.0] },
            scores: vec![f64::INFINITY, 0.1],
        };
        let s = serde_json::to_string(&sel).unwrap();
        let back: SelectionModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, sel);
    }
}
