//! Baseline distance representations: Euclidean DTW and SAX bag-of-patterns.

use crate::embedding::{DistanceMatrix, Metric};
use crate::error::{Error, Result};
use crate::series::Dataset;
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;

/// Dynamic time warping with squared point costs and steps
/// {down, right, diagonal}; returns the square root of the optimal path sum.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("DTW inputs must be nonempty"));
    }
    let (n, m) = (a.len(), b.len());
    // Rolling rows of the (n+1) x (m+1) DP table.
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr[0] = f64::INFINITY;
        for j in 1..=m {
            let cost = (a[i - 1] - b[j - 1]) * (a[i - 1] - b[j - 1]);
            curr[j] = cost + prev[j].min(curr[j - 1]).min(prev[j - 1]);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m].sqrt())
}

/// Pairwise DTW distances over a dataset.
pub fn dtw_distance_matrix(dataset: &Dataset) -> Result<DistanceMatrix> {
    let values: Vec<&[f64]> = dataset.series.iter().map(|s| s.y.as_slice()).collect();
    let mut failure = None;
    let dm = DistanceMatrix::from_fn(dataset.ids(), Metric::Precomputed, |a, b| {
        match dtw_distance(values[a], values[b]) {
            Ok(d) => d,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(dm),
    }
}

/// SAX bag-of-patterns settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SaxConfig {
    /// Sliding subsequence length.
    pub window: usize,
    /// PAA segments per window.
    pub word_length: usize,
    /// Alphabet size, 2..=10.
    pub alphabet: usize,
    /// Drop consecutive duplicate words.
    pub numerosity_reduction: bool,
}

impl SaxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.word_length == 0 || self.word_length > self.window {
            return Err(Error::validation(format!(
                "word_length {} must be in 1..=window ({})",
                self.word_length, self.window
            )));
        }
        if !(2..=10).contains(&self.alphabet) {
            return Err(Error::validation(format!(
                "alphabet size {} must be in 2..=10",
                self.alphabet
            )));
        }
        Ok(())
    }

    /// Defaults for series of length `n`: window `n/4`, 8-symbol words over a
    /// 4-letter alphabet, numerosity reduction on.
    pub fn for_length(n: usize) -> SaxConfig {
        let word_length = 8;
        SaxConfig {
            window: (n / 4).max(word_length),
            word_length,
            alphabet: 4,
            numerosity_reduction: true,
        }
    }
}

/// Equiprobable standard-Gaussian breakpoints: `alphabet - 1` quantiles at
/// `i / alphabet`.
pub fn sax_breakpoints(alphabet: usize) -> Vec<f64> {
    let normal = Normal::standard();
    (1..alphabet)
        .map(|i| normal.inverse_cdf(i as f64 / alphabet as f64))
        .collect()
}

/// Piecewise aggregate approximation to `segments` means; segment boundaries
/// may fall inside points, in which case the point's value is split
/// proportionally.
fn paa(values: &[f64], segments: usize) -> Vec<f64> {
    let n = values.len();
    if segments == n {
        return values.to_vec();
    }
    let seg_len = n as f64 / segments as f64;
    (0..segments)
        .map(|s| {
            let lo = s as f64 * seg_len;
            let hi = lo + seg_len;
            let mut total = 0.0;
            let (first, last) = (lo.floor() as usize, (hi.ceil() as usize).min(n));
            for i in first..last {
                let cover = (hi.min((i + 1) as f64) - lo.max(i as f64)).max(0.0);
                total += values[i] * cover;
            }
            total / seg_len
        })
        .collect()
}

fn quantize(value: f64, breakpoints: &[f64]) -> char {
    let idx = breakpoints.iter().filter(|&&b| b <= value).count();
    (b'a' + idx as u8) as char
}

/// SAX word of one window: z-normalize, PAA, quantize against Gaussian
/// breakpoints. A flat window maps to the all-middle-symbol word.
pub fn sax_word(segment: &[f64], cfg: &SaxConfig) -> Result<String> {
    cfg.validate()?;
    if segment.len() != cfg.window {
        return Err(Error::validation(format!(
            "segment length {} does not match window {}",
            segment.len(),
            cfg.window
        )));
    }
    let breakpoints = sax_breakpoints(cfg.alphabet);
    let (z, degenerate) = crate::series::standardize_series(segment);
    if degenerate {
        let middle = quantize(0.0, &breakpoints);
        return Ok(std::iter::repeat_n(middle, cfg.word_length).collect());
    }
    Ok(paa(&z, cfg.word_length)
        .into_iter()
        .map(|m| quantize(m, &breakpoints))
        .collect())
}

/// Bag-of-patterns histogram: one word per stride-1 window, consecutive
/// duplicates dropped under numerosity reduction.
pub fn sax_bop_histogram(values: &[f64], cfg: &SaxConfig) -> Result<BTreeMap<String, u64>> {
    cfg.validate()?;
    if values.len() < cfg.window {
        return Err(Error::validation(format!(
            "series of length {} is shorter than the window {}",
            values.len(),
            cfg.window
        )));
    }
    let mut histogram = BTreeMap::new();
    let mut previous: Option<String> = None;
    for start in 0..=(values.len() - cfg.window) {
        let word = sax_word(&values[start..start + cfg.window], cfg)?;
        if cfg.numerosity_reduction && previous.as_deref() == Some(word.as_str()) {
            continue;
        }
        *histogram.entry(word.clone()).or_insert(0) += 1;
        previous = Some(word);
    }
    Ok(histogram)
}

/// Euclidean distance between two word histograms over the union of keys.
pub fn bop_distance(h1: &BTreeMap<String, u64>, h2: &BTreeMap<String, u64>) -> f64 {
    let keys: std::collections::BTreeSet<&String> = h1.keys().chain(h2.keys()).collect();
    keys.into_iter()
        .map(|k| {
            let a = h1.get(k).copied().unwrap_or(0) as f64;
            let b = h2.get(k).copied().unwrap_or(0) as f64;
            (a - b) * (a - b)
        })
        .sum::<f64>()
        .sqrt()
}

/// Pairwise SAX bag-of-patterns distances over a dataset.
pub fn sax_bop_distance_matrix(dataset: &Dataset, cfg: &SaxConfig) -> Result<DistanceMatrix> {
    let histograms: Vec<BTreeMap<String, u64>> = dataset
        .series
        .iter()
        .map(|s| sax_bop_histogram(&s.y, cfg))
        .collect::<Result<_>>()?;
    Ok(DistanceMatrix::from_fn(
        dataset.ids(),
        Metric::Precomputed,
        |a, b| bop_distance(&histograms[a], &histograms[b]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn dtw_identity_and_singletons() {
        let a = [0.3, 1.0, -0.5, 2.0];
        assert_eq!(dtw_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(dtw_distance(&[0.0], &[3.0]).unwrap(), 3.0);
        assert!(dtw_distance(&[], &[1.0]).is_err());
    }

    /// Exhaustive enumeration of monotone warping paths.
    fn dtw_brute_force(a: &[f64], b: &[f64]) -> f64 {
        fn explore(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
            let d = a[i] - b[j];
            let acc = acc + d * d;
            if acc >= *best {
                return;
            }
            if i == a.len() - 1 && j == b.len() - 1 {
                *best = acc;
                return;
            }
            if i + 1 < a.len() {
                explore(a, b, i + 1, j, acc, best);
            }
            if j + 1 < b.len() {
                explore(a, b, i, j + 1, acc, best);
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                explore(a, b, i + 1, j + 1, acc, best);
            }
        }
        let mut best = f64::INFINITY;
        explore(a, b, 0, 0, 0.0, &mut best);
        best.sqrt()
    }

    #[test]
    fn dtw_matches_brute_force_on_short_series() {
        assert_abs_diff_eq!(
            dtw_distance(&[0.0, 1.0, 2.0], &[0.0, 2.0]).unwrap(),
            dtw_brute_force(&[0.0, 1.0, 2.0], &[0.0, 2.0]),
            epsilon = 1e-12
        );
        let mut rng = crate::seed::rng(31, &[]);
        for _ in 0..50 {
            let la = rng.random_range(1..=6);
            let lb = rng.random_range(1..=6);
            let a: Vec<f64> = (0..la).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..lb).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert_abs_diff_eq!(
                dtw_distance(&a, &b).unwrap(),
                dtw_brute_force(&a, &b),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn dtw_never_exceeds_aligned_euclidean_distance() {
        let mut rng = crate::seed::rng(37, &[]);
        for _ in 0..50 {
            let n = rng.random_range(2..40);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let euclid = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            let dtw = dtw_distance(&a, &b).unwrap();
            assert!(dtw <= euclid + 1e-12);
            assert_abs_diff_eq!(dtw, dtw_distance(&b, &a).unwrap(), epsilon = 1e-12);
        }
    }

    /// Inverse-CDF oracle: bisect the standard normal CDF computed by
    /// Simpson quadrature of the density.
    fn inverse_normal_cdf_oracle(p: f64) -> f64 {
        fn cdf(x: f64) -> f64 {
            // Integrate the density from -12 to x.
            let steps = 40_000;
            let lo = -12.0;
            let h = (x - lo) / steps as f64;
            let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let mut acc = pdf(lo) + pdf(x);
            for i in 1..steps {
                let t = lo + i as f64 * h;
                acc += pdf(t) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        }
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn breakpoints_match_inverse_cdf_oracle() {
        let bp = sax_breakpoints(4);
        assert_eq!(bp.len(), 3);
        for (b, p) in bp.iter().zip([0.25, 0.5, 0.75]) {
            assert_abs_diff_eq!(b, &inverse_normal_cdf_oracle(p), epsilon = 1e-6);
        }
        assert_abs_diff_eq!(bp[0], -0.6745, epsilon = 1e-3);
        assert_abs_diff_eq!(bp[1], 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(bp[2], 0.6745, epsilon = 1e-3);
    }

    #[test]
    fn monotone_ramp_spells_the_alphabet() {
        let ramp: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let cfg = SaxConfig { window: 16, word_length: 4, alphabet: 4, numerosity_reduction: true };
        assert_eq!(sax_word(&ramp, &cfg).unwrap(), "abcd");
    }

    #[test]
    fn flat_window_maps_to_middle_symbols() {
        let cfg = SaxConfig { window: 8, word_length: 4, alphabet: 4, numerosity_reduction: true };
        assert_eq!(sax_word(&[2.5; 8], &cfg).unwrap(), "cccc");
        let odd = SaxConfig { alphabet: 5, ..cfg };
        assert_eq!(sax_word(&[2.5; 8], &odd).unwrap(), "cccc");
    }

    #[test]
    fn histogram_of_constant_series_collapses_to_one_word() {
        let cfg = SaxConfig { window: 8, word_length: 4, alphabet: 4, numerosity_reduction: true };
        let histogram = sax_bop_histogram(&[1.0; 32], &cfg).unwrap();
        assert_eq!(histogram.len(), 1);
        assert_eq!(histogram.values().sum::<u64>(), 1);
    }

    #[test]
    fn histogram_total_without_reduction_counts_windows() {
        let mut rng = crate::seed::rng(41, &[]);
        let values: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = SaxConfig { window: 12, word_length: 4, alphabet: 4, numerosity_reduction: false };
        let histogram = sax_bop_histogram(&values, &cfg).unwrap();
        assert_eq!(histogram.values().sum::<u64>(), 60 - 12 + 1);
    }

    #[test]
    fn periodic_series_uses_few_words() {
        let values: Vec<f64> = (0..96)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 12.0).sin())
            .collect();
        let cfg = SaxConfig { window: 12, word_length: 4, alphabet: 4, numerosity_reduction: false };
        let histogram = sax_bop_histogram(&values, &cfg).unwrap();
        assert!(histogram.len() <= 12, "{} distinct words", histogram.len());
        assert!(histogram.len() <= 4usize.pow(4));
    }

    #[test]
    fn series_shorter_than_window_is_rejected() {
        let cfg = SaxConfig { window: 8, word_length: 4, alphabet: 4, numerosity_reduction: true };
        assert!(sax_bop_histogram(&[1.0; 7], &cfg).is_err());
    }

    #[test]
    fn bop_distance_identities() {
        let mut h1 = BTreeMap::new();
        h1.insert("x".to_string(), 1u64);
        let mut h2 = BTreeMap::new();
        h2.insert("y".to_string(), 1u64);
        assert_eq!(bop_distance(&h1, &h1), 0.0);
        assert_abs_diff_eq!(bop_distance(&h1, &h2), 2f64.sqrt(), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn sax_word_is_affine_invariant(
            raw in proptest::collection::vec(-5.0..5.0f64, 16),
            scale in 0.1..10.0f64,
            shift in -10.0..10.0f64,
        ) {
            let cfg = SaxConfig { window: 16, word_length: 4, alphabet: 4, numerosity_reduction: true };
            let transformed: Vec<f64> = raw.iter().map(|v| scale * v + shift).collect();
            // Skip near-degenerate windows where rounding can flip a symbol.
            let (z, degenerate) = crate::series::standardize_series(&raw);
            prop_assume!(!degenerate);
            let margins = paa(&z, 4);
            let bp = sax_breakpoints(4);
            prop_assume!(margins
                .iter()
                .all(|m| bp.iter().all(|b| (m - b).abs() > 1e-9)));
            prop_assert_eq!(
                sax_word(&raw, &cfg).unwrap(),
                sax_word(&transformed, &cfg).unwrap()
            );
        }

        #[test]
        fn bop_distance_is_symmetric(
            counts1 in proptest::collection::btree_map("[a-d]{3}", 1u64..20, 0..6),
            counts2 in proptest::collection::btree_map("[a-d]{3}", 1u64..20, 0..6),
        ) {
            prop_assert_eq!(bop_distance(&counts1, &counts2), bop_distance(&counts2, &counts1));
        }
    }

    #[test]
    fn paa_handles_non_divisible_windows() {
        // 5 points into 2 segments: boundaries split the middle point.
        let values = [1.0, 1.0, 4.0, 2.0, 2.0];
        let means = paa(&values, 2);
        assert_abs_diff_eq!(means[0], (1.0 + 1.0 + 0.5 * 4.0) / 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(means[1], (0.5 * 4.0 + 2.0 + 2.0) / 2.5, epsilon = 1e-12);
    }
}
