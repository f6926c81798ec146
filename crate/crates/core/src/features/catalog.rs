//! The fixed per-series feature catalog.
//!
//! Every function here is total: degenerate inputs (single samples, constant
//! series, lags longer than the series) produce defined finite values rather
//! than NaN.

use std::sync::OnceLock;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const QUANTILES: [f64; 4] = [0.05, 0.25, 0.75, 0.95];
const AUTOCORR_LAGS: usize = 10;
const DFT_COEFFS: usize = 10;
const ENTROPY_BINS: usize = 10;
const PEAK_SUPPORT: usize = 3;

/// Number of features computed for one series.
pub const FEATURES_PER_SERIES: usize = 67;

/// Feature names for one series, in catalog order, without prefix.
pub fn series_feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut n: Vec<String> = [
            "length",
            "mean",
            "median",
            "variance",
            "standard_deviation",
            "skewness",
            "kurtosis",
            "minimum",
            "maximum",
            "range",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        n.extend(QUANTILES.iter().map(|q| format!("quantile_{q}")));
        n.extend(
            [
                "sum",
                "abs_energy",
                "root_mean_square",
                "abs_sum_of_changes",
                "mean_abs_change",
                "mean_change",
                "mean_second_derivative_central",
                "variation_coefficient",
                "zero_crossings",
                "count_above_mean",
                "count_below_mean",
                "longest_run_above_mean",
                "longest_run_below_mean",
                "first_location_of_maximum",
                "last_location_of_maximum",
                "first_location_of_minimum",
                "last_location_of_minimum",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        n.extend((1..=AUTOCORR_LAGS).map(|l| format!("autocorrelation_lag{l}")));
        n.extend(
            ["linear_trend_slope", "linear_trend_intercept", "linear_trend_rvalue"]
                .iter()
                .map(|s| s.to_string()),
        );
        n.push(format!("number_peaks_support{PEAK_SUPPORT}"));
        n.push("cid_ce".into());
        n.push(format!("binned_entropy_{ENTROPY_BINS}"));
        n.extend((1..=DFT_COEFFS).map(|k| format!("fft_abs_coeff{k}")));
        n.push("spectral_centroid".into());
        n.extend((1..=3).map(|l| format!("c3_lag{l}")));
        n.extend((1..=3).map(|l| format!("time_reversal_asymmetry_lag{l}")));
        n.extend((1..=3).map(|r| format!("ratio_beyond_{r}_sigma")));
        debug_assert_eq!(n.len(), FEATURES_PER_SERIES);
        n
    })
}

struct Moments {
    mean: f64,
    variance: f64,
}

fn moments(x: &[f64]) -> Moments {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let variance = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Moments { mean, variance }
}

/// Linear-interpolated quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn longest_run(x: &[f64], pred: impl Fn(f64) -> bool) -> usize {
    let mut best = 0;
    let mut cur = 0;
    for &v in x {
        if pred(v) {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

fn autocorrelation(x: &[f64], lag: usize, m: &Moments) -> f64 {
    let n = x.len();
    if lag >= n || m.variance <= 0.0 {
        return 0.0;
    }
    let s: f64 = (0..n - lag)
        .map(|t| (x[t] - m.mean) * (x[t + lag] - m.mean))
        .sum();
    s / ((n - lag) as f64 * m.variance)
}

/// Least-squares fit against the sample index: (slope, intercept, r).
fn linear_trend(x: &[f64], m: &Moments) -> (f64, f64, f64) {
    let n = x.len() as f64;
    if x.len() < 2 {
        return (0.0, x[0], 0.0);
    }
    let t_mean = (n - 1.0) / 2.0;
    let sxx: f64 = (0..x.len()).map(|t| (t as f64 - t_mean).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .enumerate()
        .map(|(t, v)| (t as f64 - t_mean) * (v - m.mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = m.mean - slope * t_mean;
    let syy = m.variance * n;
    let r = if syy > 0.0 { sxy / (sxx * syy).sqrt() } else { 0.0 };
    (slope, intercept, r)
}

fn number_peaks(x: &[f64], support: usize) -> usize {
    if x.len() < 2 * support + 1 {
        return 0;
    }
    (support..x.len() - support)
        .filter(|&i| (1..=support).all(|k| x[i] > x[i - k] && x[i] > x[i + k]))
        .count()
}

fn binned_entropy(x: &[f64], bins: usize, min: f64, max: f64) -> f64 {
    let width = (max - min) / bins as f64;
    if width <= 0.0 {
        return 0.0;
    }
    let mut counts = vec![0usize; bins];
    for &v in x {
        let b = (((v - min) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = x.len() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

fn spectrum(x: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let fft = FftPlanner::new().plan_fft_forward(buf.len());
    fft.process(&mut buf);
    buf[..x.len() / 2 + 1].iter().map(|c| c.norm()).collect()
}

fn lagged_mean(x: &[f64], lag: usize, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let n = x.len();
    if n <= 2 * lag {
        return 0.0;
    }
    let m = n - 2 * lag;
    (0..m).map(|i| f(x[i], x[i + lag], x[i + 2 * lag])).sum::<f64>() / m as f64
}

/// Computes the catalog for one series, in catalog order.
pub fn series_features(x: &[f64]) -> Vec<f64> {
    assert!(!x.is_empty(), "feature extraction needs a non-empty series");
    let n = x.len();
    let nf = n as f64;
    let m = moments(x);
    let std = m.variance.sqrt();
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[n - 1];

    let (skew, kurt) = if m.variance > 0.0 {
        let m3 = x.iter().map(|v| (v - m.mean).powi(3)).sum::<f64>() / nf;
        let m4 = x.iter().map(|v| (v - m.mean).powi(4)).sum::<f64>() / nf;
        (m3 / m.variance.powf(1.5), m4 / (m.variance * m.variance) - 3.0)
    } else {
        (0.0, 0.0)
    };

    let mut out = Vec::with_capacity(FEATURES_PER_SERIES);
    out.extend([
        nf,
        m.mean,
        quantile_sorted(&sorted, 0.5),
        m.variance,
        std,
        skew,
        kurt,
        min,
        max,
        max - min,
    ]);
    out.extend(QUANTILES.iter().map(|&q| quantile_sorted(&sorted, q)));

    let sum: f64 = x.iter().sum();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    let diffs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let abs_changes: f64 = diffs.iter().map(|d| d.abs()).sum();
    let (mean_abs_change, mean_change) = if n > 1 {
        (abs_changes / (n - 1) as f64, (x[n - 1] - x[0]) / (n - 1) as f64)
    } else {
        (0.0, 0.0)
    };
    let second_deriv = if n > 2 {
        x.windows(3).map(|w| 0.5 * (w[2] - 2.0 * w[1] + w[0])).sum::<f64>() / (n - 2) as f64
    } else {
        0.0
    };
    let variation = if m.mean != 0.0 { std / m.mean.abs() } else { 0.0 };
    let above = |v: f64| v > m.mean;
    let below = |v: f64| v < m.mean;
    let crossings = x.windows(2).filter(|w| above(w[0]) != above(w[1])).count();
    let first_max = x.iter().position(|&v| v == max).unwrap_or(0);
    let last_max = x.iter().rposition(|&v| v == max).unwrap_or(0);
    let first_min = x.iter().position(|&v| v == min).unwrap_or(0);
    let last_min = x.iter().rposition(|&v| v == min).unwrap_or(0);
    out.extend([
        sum,
        energy,
        (energy / nf).sqrt(),
        abs_changes,
        mean_abs_change,
        mean_change,
        second_deriv,
        variation,
        crossings as f64,
        x.iter().filter(|&&v| above(v)).count() as f64,
        x.iter().filter(|&&v| below(v)).count() as f64,
        longest_run(x, above) as f64,
        longest_run(x, below) as f64,
        first_max as f64 / nf,
        (last_max + 1) as f64 / nf,
        first_min as f64 / nf,
        (last_min + 1) as f64 / nf,
    ]);

    out.extend((1..=AUTOCORR_LAGS).map(|l| autocorrelation(x, l, &m)));
    let (slope, intercept, r) = linear_trend(x, &m);
    out.extend([slope, intercept, r]);
    out.push(number_peaks(x, PEAK_SUPPORT) as f64);
    out.push(diffs.iter().map(|d| d * d).sum::<f64>().sqrt());
    out.push(binned_entropy(x, ENTROPY_BINS, min, max));

    let spec = spectrum(x);
    out.extend((1..=DFT_COEFFS).map(|k| spec.get(k).copied().unwrap_or(0.0)));
    let total: f64 = spec.iter().sum();
    out.push(if total > 0.0 {
        spec.iter().enumerate().map(|(k, a)| k as f64 * a).sum::<f64>() / total
    } else {
        0.0
    });

    out.extend((1..=3).map(|l| lagged_mean(x, l, |a, b, c| a * b * c)));
    out.extend((1..=3).map(|l| lagged_mean(x, l, |a, b, c| c * c * b - b * a * a)));
    out.extend((1..=3).map(|r| {
        x.iter().filter(|&&v| (v - m.mean).abs() > r as f64 * std).count() as f64 / nf
    }));
    debug_assert_eq!(out.len(), FEATURES_PER_SERIES);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feature(x: &[f64], name: &str) -> f64 {
        let i = series_feature_names().iter().position(|n| n == name).unwrap();
        series_features(x)[i]
    }

    #[test]
    fn names_are_unique() {
        let names = series_feature_names();
        let mut sorted = names.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        assert_eq!(names.len(), FEATURES_PER_SERIES);
    }

    #[test]
    fn constant_series() {
        let x = [5.0; 4];
        assert_eq!(feature(&x, "variance"), 0.0);
        assert_eq!(feature(&x, "autocorrelation_lag1"), 0.0);
        assert_eq!(feature(&x, "abs_sum_of_changes"), 0.0);
        assert_eq!(feature(&x, "binned_entropy_10"), 0.0);
        assert_eq!(feature(&x, "linear_trend_rvalue"), 0.0);
    }

    #[test]
    fn ramp_series() {
        let x = [0.0, 1.0, 2.0, 3.0];
        assert!((feature(&x, "linear_trend_slope") - 1.0).abs() < 1e-12);
        assert!(feature(&x, "linear_trend_intercept").abs() < 1e-12);
        assert!((feature(&x, "linear_trend_rvalue") - 1.0).abs() < 1e-12);
        assert_eq!(feature(&x, "mean_change"), 1.0);
        assert_eq!(feature(&x, "zero_crossings"), 1.0);
        assert_eq!(feature(&x, "quantile_0.25"), 0.75);
        assert_eq!(feature(&x, "median"), 1.5);
    }

    #[test]
    fn alternating_series() {
        let x = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(feature(&x, "mean"), 0.0);
        assert_eq!(feature(&x, "abs_energy"), 4.0);
        assert_eq!(feature(&x, "mean_abs_change"), 2.0);
        assert_eq!(feature(&x, "zero_crossings"), 3.0);
        // lag-1 products are all -1: sum -3 over 3 pairs, variance 1
        assert!((feature(&x, "autocorrelation_lag1") + 1.0).abs() < 1e-12);
        assert_eq!(feature(&x, "variation_coefficient"), 0.0);
    }

    #[test]
    fn dft_matches_direct_sum() {
        let x: Vec<f64> = (0..37).map(|i| ((i * i) % 11) as f64 - 3.0).collect();
        let fft = spectrum(&x);
        for (k, &got) in fft.iter().enumerate().take(11).skip(1) {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * t) as f64 / x.len() as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            assert!((got - (re * re + im * im).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn short_series_are_total() {
        for x in [vec![3.0], vec![1.0, 2.0], vec![0.0, 0.0, 0.0]] {
            let f = series_features(&x);
            assert_eq!(f.len(), FEATURES_PER_SERIES);
            assert!(f.iter().all(|v| v.is_finite()), "{x:?}: {f:?}");
        }
        // DFT coefficients past the spectrum are zero
        assert_eq!(feature(&[1.0, 2.0, 3.0], "fft_abs_coeff5"), 0.0);
    }

    #[test]
    fn peaks_c3_and_asymmetry() {
        let x = [0.0, 1.0, 2.0, 5.0, 2.0, 1.0, 0.0];
        assert_eq!(number_peaks(&x, 3), 1);
        assert_eq!(number_peaks(&x, 4), 0);
        let y = [1.0, 2.0, 3.0, 4.0];
        // lag 1: (1*2*3 + 2*3*4) / 2
        assert_eq!(feature(&y, "c3_lag1"), 15.0);
        // lag 1: ((9*2 - 2*1) + (16*3 - 3*4)) / 2
        assert_eq!(feature(&y, "time_reversal_asymmetry_lag1"), 26.0);
        assert_eq!(feature(&y, "c3_lag2"), 0.0);
    }
}
