use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major matrix of model inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Dense {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(Error::Param(format!(
                    "row {i} has {} values, expected {n_cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n_rows: idx.len(),
            n_cols: self.n_cols,
            data,
        }
    }
}

/// Encodes string labels as indices into the sorted class list.
pub fn encode_labels(labels: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let y = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    (classes, y)
}

/// Index of the largest vote; ties go to the smallest class index.
pub(crate) fn argmax_first(votes: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in votes.iter().enumerate().skip(1) {
        if v > votes[best] {
            best = k;
        }
    }
    best
}
