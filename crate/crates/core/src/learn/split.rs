use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, hash_str, rng_from};

/// Row indices per label, labels in sorted order.
fn by_class(labels: &[String]) -> BTreeMap<&str, Vec<usize>> {
    let mut g: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        g.entry(l.as_str()).or_default().push(i);
    }
    g
}

/// Stratified train/test partition. Returns sorted `(train, test)` indices.
pub fn stratified_split(
    labels: &[String],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut rows) in by_class(labels) {
        if rows.len() < 2 {
            return Err(Error::Split(format!(
                "class `{label}` has {} row(s); at least 2 are needed",
                rows.len()
            )));
        }
        let mut rng = rng_from(derive_seed(&[seed, hash_str(label)]));
        rows.shuffle(&mut rng);
        let n_test = ((rows.len() as f64 * test_fraction).round() as usize).clamp(1, rows.len() - 1);
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified k-fold assignment. Each returned fold is a sorted list of
/// validation indices; together the folds partition `0..labels.len()`.
pub fn stratified_kfold(labels: &[String], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Param(format!("k-fold needs k >= 2, got {k}")));
    }
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for (label, mut rows) in by_class(labels) {
        if rows.len() < k {
            log::warn!(
                "class `{label}` has {} rows, fewer than {k} folds",
                rows.len()
            );
        }
        let mut rng = rng_from(derive_seed(&[seed, hash_str(label)]));
        rows.shuffle(&mut rng);
        let n = rows.len();
        for (i, r) in rows.into_iter().enumerate() {
            folds[(offset + i) % k].push(r);
        }
        offset = (offset + n) % k;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Training indices for fold `i`: everything outside it, sorted.
pub fn fold_complement(folds: &[Vec<usize>], i: usize) -> Vec<usize> {
    let mut out: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(spec: &[(&str, usize)]) -> Vec<String> {
        spec.iter()
            .flat_map(|&(l, n)| std::iter::repeat_n(l.to_string(), n))
            .collect()
    }

    fn count(idx: &[usize], y: &[String], l: &str) -> usize {
        idx.iter().filter(|&&i| y[i] == l).count()
    }

    #[test]
    fn split_exact_proportions() {
        let y = labels(&[("A", 10), ("B", 10)]);
        let (tr, te) = stratified_split(&y, 0.2, 1).unwrap();
        assert_eq!((count(&tr, &y, "A"), count(&tr, &y, "B")), (8, 8));
        assert_eq!((count(&te, &y, "A"), count(&te, &y, "B")), (2, 2));
    }

    #[test]
    fn split_rounding() {
        let y = labels(&[("A", 7), ("B", 13)]);
        let (tr, te) = stratified_split(&y, 0.2, 1).unwrap();
        assert_eq!((count(&te, &y, "A"), count(&te, &y, "B")), (1, 3));
        assert_eq!(tr.len() + te.len(), 20);
    }

    #[test]
    fn split_seeds_differ() {
        let y = labels(&[("A", 20), ("B", 20)]);
        let a = stratified_split(&y, 0.2, 1).unwrap();
        let b = stratified_split(&y, 0.2, 2).unwrap();
        assert_eq!(a.1.len(), b.1.len());
        assert_ne!(a, b);
    }

    #[test]
    fn split_singleton_class_is_error() {
        let y = labels(&[("A", 5), ("B", 1)]);
        assert!(matches!(stratified_split(&y, 0.2, 0), Err(Error::Split(_))));
    }

    #[test]
    fn kfold_examples() {
        let y = labels(&[("A", 10), ("B", 10)]);
        for f in stratified_kfold(&y, 5, 3).unwrap() {
            assert_eq!((count(&f, &y, "A"), count(&f, &y, "B")), (2, 2));
        }
        let y = labels(&[("A", 11)]);
        let sizes: Vec<usize> = stratified_kfold(&y, 5, 3).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
        let y = labels(&[("A", 4), ("B", 4)]);
        for f in stratified_kfold(&y, 2, 3).unwrap() {
            assert_eq!((count(&f, &y, "A"), count(&f, &y, "B")), (2, 2));
        }
        assert!(stratified_kfold(&y, 1, 0).is_err());
    }

    #[test]
    fn complement_is_disjoint() {
        let y = labels(&[("A", 6), ("B", 7)]);
        let folds = stratified_kfold(&y, 3, 0).unwrap();
        for i in 0..3 {
            let tr = fold_complement(&folds, i);
            assert_eq!(tr.len() + folds[i].len(), 13);
            assert!(tr.iter().all(|r| !folds[i].contains(r)));
        }
    }
}
