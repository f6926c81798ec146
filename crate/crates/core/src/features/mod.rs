//! Feature extraction over segment pairs, min-max scaling and univariate
//! feature selection.

mod catalog;
mod scale;
mod select;

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tail::SegmentPair;

pub use catalog::{series_feature_names, series_features, FEATURES_PER_SERIES};
pub use scale::{apply_minmax, fit_minmax, MinMaxScaler};
pub use select::{
    anova_f_scores, chi2_scores, fit_selection, select_k_best, Scorer, SelectionConfig,
    SelectionModel,
};

pub const TAIL_PREFIX: &str = "tail__";
pub const DELTA_PREFIX: &str = "delta__";

/// Full catalog (tail features then delta features) in its frozen order.
pub fn catalog_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        [TAIL_PREFIX, DELTA_PREFIX]
            .iter()
            .flat_map(|p| series_feature_names().iter().map(move |n| format!("{p}{n}")))
            .collect()
    })
}

pub fn catalog_len() -> usize {
    2 * FEATURES_PER_SERIES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub session_id: String,
    pub ev_label: String,
    pub values: Vec<f64>,
}

/// Rows of feature values sharing one column layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, rows: Vec<FeatureVector>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.values.len() != columns.len()) {
            return Err(Error::Param(format!(
                "row `{}` has {} values for {} columns",
                r.session_id,
                r.values.len(),
                columns.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.values.iter().any(|v| !v.is_finite())) {
            return Err(Error::Param(format!("row `{}` has non-finite values", r.session_id)));
        }
        Ok(Self { columns, rows })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.ev_label.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn value(&self, row: usize, name: &str) -> Option<f64> {
        self.column_index(name).map(|j| self.rows[row].values[j])
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Distinct labels in sorted order.
    pub fn classes(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.ev_label.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(String::from)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["session_id".to_string(), "ev_label".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.session_id.clone(), r.ev_label.clone()];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers()?.clone();
        if header.len() < 2 || &header[0] != "session_id" || &header[1] != "ev_label" {
            return Err(Error::Parse {
                record: 0,
                message: "feature CSV must start with session_id,ev_label".into(),
            });
        }
        let columns: Vec<String> = header.iter().skip(2).map(String::from).collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let values = rec
                .iter()
                .skip(2)
                .map(|v| {
                    v.parse::<f64>().map_err(|e| Error::Parse {
                        record: i + 1,
                        message: format!("`{v}`: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(FeatureVector {
                session_id: rec[0].to_string(),
                ev_label: rec[1].to_string(),
                values,
            });
        }
        Self::new(columns, rows)
    }
}

/// Computes the full catalog for one accepted segment pair.
pub fn extract_features(segment: &SegmentPair) -> FeatureVector {
    let mut values = series_features(segment.tail.values());
    values.extend(series_features(segment.delta.values()));
    FeatureVector {
        session_id: segment.session_id.clone(),
        ev_label: segment.ev_label.clone().unwrap_or_default(),
        values,
    }
}

pub fn extract_matrix(segments: &[SegmentPair]) -> FeatureMatrix {
    let rows = segments.par_iter().map(extract_features).collect();
    FeatureMatrix {
        columns: catalog_names().to_vec(),
        rows,
    }
}
