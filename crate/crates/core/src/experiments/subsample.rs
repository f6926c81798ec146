use std::collections::BTreeMap;
use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::rng_from;

/// Smallest per-EV row count produced by distribution-shaped subsampling.
pub const MIN_EV_ROWS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSize {
    Small,
    Medium,
    Large,
    Complete,
    Fixed { n_evs: usize, samples_per_ev: usize },
}

impl DatasetSize {
    /// Number of EVs for the named sizes; `None` means every EV.
    pub fn n_evs(self) -> Option<usize> {
        match self {
            DatasetSize::Small => Some(25),
            DatasetSize::Medium => Some(75),
            DatasetSize::Large => Some(140),
            DatasetSize::Complete => None,
            DatasetSize::Fixed { n_evs, .. } => Some(n_evs),
        }
    }
}

impl fmt::Display for DatasetSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSize::Small => f.write_str("size=small"),
            DatasetSize::Medium => f.write_str("size=medium"),
            DatasetSize::Large => f.write_str("size=large"),
            DatasetSize::Complete => f.write_str("size=complete"),
            DatasetSize::Fixed {
                n_evs,
                samples_per_ev,
            } => write!(f, "evs={n_evs};samples={samples_per_ev}"),
        }
    }
}

impl std::str::FromStr for DatasetSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Self::Small),
            "medium" => Ok(Self::Medium),
            "large" => Ok(Self::Large),
            "complete" => Ok(Self::Complete),
            other => Err(Error::Config(format!("unknown dataset size `{other}`"))),
        }
    }
}

/// Rows per labelled EV, EVs in label order.
fn rows_by_ev(features: &FeatureMatrix) -> BTreeMap<String, Vec<usize>> {
    let mut g: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in features.rows().iter().enumerate() {
        if !r.ev_label.is_empty() {
            g.entry(r.ev_label.clone()).or_default().push(i);
        }
    }
    g
}

/// Picks `n` of the candidates, one at random from each of `n` equal strata
/// of the candidates ordered by row count, so the size profile is preserved.
fn stratified_pick<'a>(
    candidates: &[(&'a String, &'a Vec<usize>)],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(&'a String, &'a Vec<usize>)> {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|a, b| a.1.len().cmp(&b.1.len()).then(a.0.cmp(b.0)));
    let m = sorted.len();
    (0..n)
        .map(|s| {
            let lo = s * m / n;
            let hi = ((s + 1) * m / n).max(lo + 1);
            sorted[rng.random_range(lo..hi)]
        })
        .collect()
}

fn take_rows(rows: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut r = rows.to_vec();
    r.shuffle(rng);
    r.truncate(n);
    r
}

fn assemble(features: &FeatureMatrix, mut rows: Vec<usize>) -> FeatureMatrix {
    rows.sort_unstable();
    features.subset(&rows)
}

pub fn subsample_multiclass(features: &FeatureMatrix, size: DatasetSize, seed: u64) -> Result<FeatureMatrix> {
    let groups = rows_by_ev(features);
    let mut rng = rng_from(seed);
    let (n_evs, per_ev) = match size {
        DatasetSize::Complete => return Ok(assemble(features, groups.into_values().flatten().collect())),
        DatasetSize::Fixed {
            n_evs,
            samples_per_ev,
        } => (n_evs, Some(samples_per_ev)),
        named => (named.n_evs().expect("named sizes have an EV count"), None),
    };
    if n_evs == 0 || per_ev == Some(0) {
        return Err(Error::Subsample("EV and sample counts must be >= 1".into()));
    }
    let eligible: Vec<(&String, &Vec<usize>)> = groups
        .iter()
        .filter(|(_, rows)| per_ev.is_none_or(|k| rows.len() >= k))
        .collect();
    if eligible.len() < n_evs {
        let what = per_ev.map_or(String::new(), |k| format!(" with at least {k} rows"));
        return Err(Error::Subsample(format!(
            "requested {n_evs} EVs{what} but only {} qualify (deficit {})",
            eligible.len(),
            n_evs - eligible.len()
        )));
    }
    let chosen = stratified_pick(&eligible, n_evs, &mut rng);
    let rows = chosen
        .into_iter()
        .flat_map(|(_, rows)| match per_ev {
            Some(k) => take_rows(rows, k, &mut rng),
            None => rows.clone(),
        })
        .collect();
    Ok(assemble(features, rows))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum DistributionShape {
    /// The complete dataset, unchanged.
    Regular,
    Normal { n_evs: usize, mean: f64, std: f64 },
    /// `per_bin` EVs per bin of the row-count range `[lo, hi)`. A missing
    /// `hi` is replaced by the largest value the corpus can fill.
    Uniform {
        bins: usize,
        per_bin: usize,
        lo: usize,
        hi: Option<usize>,
    },
}

impl DistributionShape {
    pub fn normal_default() -> Self {
        Self::Normal {
            n_evs: 119,
            mean: 50.0,
            std: 15.0,
        }
    }

    pub fn uniform_default() -> Self {
        Self::Uniform {
            bins: 20,
            per_bin: 6,
            lo: MIN_EV_ROWS,
            hi: None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Regular => "regular",
            Self::Normal { .. } => "normal",
            Self::Uniform { .. } => "uniform",
        }
    }
}

impl fmt::Display for DistributionShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "shape={}", self.name())
    }
}

/// Parses a shape name into its default parameters.
impl std::str::FromStr for DistributionShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(Self::Regular),
            "normal" => Ok(Self::normal_default()),
            "uniform" => Ok(Self::uniform_default()),
            other => Err(Error::Config(format!(
                "unknown distribution shape `{other}` (expected regular, normal or uniform)"
            ))),
        }
    }
}

/// Per-EV row targets for a normal profile: evenly spaced quantiles.
pub fn normal_targets(n_evs: usize, mean: f64, std: f64) -> Result<Vec<usize>> {
    if n_evs == 0 || std.is_nan() || std < 0.0 || !mean.is_finite() {
        return Err(Error::Distribution(format!(
            "invalid normal parameters n_evs={n_evs} mean={mean} std={std}"
        )));
    }
    if std == 0.0 {
        return Ok(vec![(mean.round() as usize).max(MIN_EV_ROWS); n_evs]);
    }
    let dist = Normal::new(mean, std).map_err(|e| Error::Distribution(e.to_string()))?;
    Ok((0..n_evs)
        .map(|i| {
            let q = dist.inverse_cdf((i as f64 + 0.5) / n_evs as f64);
            (q.round().max(0.0) as usize).max(MIN_EV_ROWS)
        })
        .collect())
}

/// Bin edges and midpoints for a uniform profile over `[lo, hi)`.
pub fn uniform_bins(bins: usize, lo: usize, hi: usize) -> Vec<(f64, f64, usize)> {
    let w = (hi - lo) as f64 / bins as f64;
    (0..bins)
        .map(|b| {
            let a = lo as f64 + b as f64 * w;
            (a, a + w, (a + w / 2.0).floor() as usize)
        })
        .collect()
}

fn uniform_targets(bins: usize, per_bin: usize, lo: usize, hi: usize) -> Vec<usize> {
    uniform_bins(bins, lo, hi)
        .into_iter()
        .flat_map(|(_, _, mid)| std::iter::repeat_n(mid, per_bin))
        .collect()
}

/// True when every target can be served by a distinct EV.
fn feasible(targets: &[usize], counts: &[usize]) -> bool {
    let mut t = targets.to_vec();
    t.sort_unstable_by(|a, b| b.cmp(a));
    let mut c = counts.to_vec();
    c.sort_unstable_by(|a, b| b.cmp(a));
    t.len() <= c.len() && t.iter().zip(&c).all(|(t, c)| c >= t)
}

/// Largest upper bound the corpus can fill for a uniform profile.
pub fn max_feasible_hi(features: &FeatureMatrix, bins: usize, per_bin: usize, lo: usize) -> Option<usize> {
    let counts: Vec<usize> = rows_by_ev(features).values().map(Vec::len).collect();
    let max = counts.iter().copied().max()?;
    let ok = |hi: usize| feasible(&uniform_targets(bins, per_bin, lo, hi), &counts);
    let (mut good, mut bad) = (lo + bins, max + 1);
    if !ok(good) {
        return None;
    }
    while bad - good > 1 {
        let mid = (good + bad) / 2;
        if ok(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Some(good)
}

/// Serves targets largest first, each with a random unused EV holding at
/// least that many rows, trimmed to the target without replacement.
fn greedy_match(
    groups: &BTreeMap<String, Vec<usize>>,
    targets: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = targets.to_vec();
    order.sort_unstable_by(|a, b| b.cmp(a));
    let mut used = vec![false; groups.len()];
    let entries: Vec<(&String, &Vec<usize>)> = groups.iter().collect();
    let mut rows = Vec::new();
    let mut unmet: BTreeMap<usize, usize> = BTreeMap::new();
    for &t in &order {
        let eligible: Vec<usize> = (0..entries.len())
            .filter(|&i| !used[i] && entries[i].1.len() >= t)
            .collect();
        match eligible.choose(rng) {
            Some(&i) => {
                used[i] = true;
                rows.extend(take_rows(entries[i].1, t, rng));
            }
            None => *unmet.entry(t).or_default() += 1,
        }
    }
    if !unmet.is_empty() {
        let report: Vec<String> = unmet.iter().map(|(t, n)| format!("{n} EV(s) with >= {t} rows")).collect();
        return Err(Error::Distribution(format!(
            "cannot fill targets: missing {}",
            report.join(", ")
        )));
    }
    Ok(rows)
}

pub fn subsample_distribution(
    features: &FeatureMatrix,
    shape: &DistributionShape,
    seed: u64,
) -> Result<FeatureMatrix> {
    let groups = rows_by_ev(features);
    let mut rng = rng_from(seed);
    let targets = match *shape {
        DistributionShape::Regular => {
            return Ok(assemble(features, groups.into_values().flatten().collect()))
        }
        DistributionShape::Normal { n_evs, mean, std } => normal_targets(n_evs, mean, std)?,
        DistributionShape::Uniform {
            bins,
            per_bin,
            lo,
            hi,
        } => {
            if bins == 0 || per_bin == 0 {
                return Err(Error::Distribution("bins and per_bin must be >= 1".into()));
            }
            let hi = match hi {
                Some(h) => h,
                None => max_feasible_hi(features, bins, per_bin, lo).ok_or_else(|| {
                    Error::Distribution(format!(
                        "corpus cannot fill {bins} bins of {per_bin} EVs starting at {lo} rows"
                    ))
                })?,
            };
            if hi < lo + bins {
                return Err(Error::Distribution(format!(
                    "row-count range [{lo}, {hi}) is narrower than {bins} bins"
                )));
            }
            uniform_targets(bins, per_bin, lo, hi)
        }
    };
    Ok(assemble(features, greedy_match(&groups, &targets, &mut rng)?))
}
