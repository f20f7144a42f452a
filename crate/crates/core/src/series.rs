//! Time-series containers, standardization, CSV ingestion, and seeded data
//! generators.
//!
//! Conventions used across the crate: time coordinates are normalized to
//! `[0, 1]` per series, observations are z-scored with the *population*
//! standard deviation, and every generator is a pure function of its seed.

use crate::error::{Error, Result};
use crate::seed;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

/// Standard deviations below this are treated as zero variance.
pub const DEGENERATE_STD: f64 = 1e-12;

/// One univariate series with normalized time coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub id: String,
    /// Strictly increasing; `x[0] = 0`, `x[n-1] = 1` after normalization.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TimeSeries {
    /// Validates lengths and monotonicity; does not normalize or standardize.
    pub fn new(id: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Result<TimeSeries> {
        let id = id.into();
        if x.len() != y.len() {
            return Err(Error::validation(format!(
                "series {id:?}: {} time points but {} values",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::validation(format!(
                "series {id:?} has {} points; need at least 2",
                x.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation(format!(
                "series {id:?}: time coordinates must be strictly increasing"
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "series {id:?} contains non-finite values"
            )));
        }
        Ok(TimeSeries { id, x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Maps time coordinates affinely onto `[0, 1]`.
    pub fn normalize_time(&mut self) {
        let first = self.x[0];
        let span = self.x[self.x.len() - 1] - first;
        for v in &mut self.x {
            *v = (*v - first) / span;
        }
        self.x[0] = 0.0;
        let last = self.x.len() - 1;
        self.x[last] = 1.0;
    }

    /// Replaces `y` with its z-scores; returns the degenerate flag.
    pub fn standardize(&mut self) -> bool {
        let (standardized, degenerate) = standardize_series(&self.y);
        self.y = standardized;
        degenerate
    }
}

/// An ordered collection of series with optional class labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub series: Vec<TimeSeries>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(series: Vec<TimeSeries>, labels: Option<Vec<usize>>) -> Result<Dataset> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &series {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::validation(format!("duplicate series id {:?}", s.id)));
            }
        }
        if let Some(l) = &labels {
            if l.len() != series.len() {
                return Err(Error::validation(format!(
                    "{} labels for {} series",
                    l.len(),
                    series.len()
                )));
            }
        }
        Ok(Dataset { series, labels })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.series.iter().map(|s| s.id.clone()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.series.iter().position(|s| s.id == id)
    }
}

pub(crate) fn population_mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-scores `y` with the population standard deviation. A zero-variance input
/// (std below [`DEGENERATE_STD`]) maps to all zeros with the flag set.
pub fn standardize_series(y: &[f64]) -> (Vec<f64>, bool) {
    let (mean, std) = population_mean_std(y);
    if std < DEGENERATE_STD {
        return (vec![0.0; y.len()], true);
    }
    (y.iter().map(|v| (v - mean) / std).collect(), false)
}

/// CSV layouts accepted by [`load_csv`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvLayout {
    /// Header `series_id,t,value`; one observation per row.
    Long,
    /// Header `t,<id1>,<id2>,...`; one row per timestamp.
    Wide,
}

impl std::str::FromStr for CsvLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<CsvLayout> {
        match s {
            "long" => Ok(CsvLayout::Long),
            "wide" => Ok(CsvLayout::Wide),
            other => Err(Error::validation(format!(
                "unknown CSV layout {other:?}; expected 'long' or 'wide'"
            ))),
        }
    }
}

fn parse_field(raw: &str, line: usize, what: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("cannot parse {what} from {raw:?}")))
}

/// Loads a dataset from CSV. Each series keeps its first-appearance order,
/// gets its time axis normalized to `[0, 1]`, and is standardized.
pub fn load_csv(path: &Path, layout: CsvLayout) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    load_csv_str(&text, layout)
}

/// [`load_csv`] over an in-memory string; line numbers include the header.
pub fn load_csv_str(text: &str, layout: CsvLayout) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file".to_string()))?;
    let header_fields: Vec<&str> = header.split(',').map(str::trim).collect();

    // (id -> (first appearance, x, y)) keyed for grouping, ordered on output.
    let mut groups: BTreeMap<String, (usize, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    match layout {
        CsvLayout::Long => {
            if header_fields != ["series_id", "t", "value"] {
                return Err(Error::parse(
                    1,
                    format!("expected header 'series_id,t,value', got {header:?}"),
                ));
            }
            for (i, raw) in lines {
                let line = i + 1;
                if raw.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = raw.split(',').collect();
                if fields.len() != 3 {
                    return Err(Error::parse(
                        line,
                        format!("expected 3 fields, got {}", fields.len()),
                    ));
                }
                let id = fields[0].trim().to_string();
                if id.is_empty() {
                    return Err(Error::parse(line, "empty series_id".to_string()));
                }
                let t = parse_field(fields[1], line, "timestamp")?;
                let v = parse_field(fields[2], line, "value")?;
                let order = groups.len();
                let entry = groups.entry(id).or_insert_with(|| (order, Vec::new(), Vec::new()));
                entry.1.push(t);
                entry.2.push(v);
            }
        }
        CsvLayout::Wide => {
            if header_fields.first() != Some(&"t") || header_fields.len() < 2 {
                return Err(Error::parse(
                    1,
                    format!("expected header 't,<id>,...', got {header:?}"),
                ));
            }
            let ids: Vec<String> = header_fields[1..].iter().map(|s| s.to_string()).collect();
            for (order, id) in ids.iter().enumerate() {
                if groups
                    .insert(id.clone(), (order, Vec::new(), Vec::new()))
                    .is_some()
                {
                    return Err(Error::parse(1, format!("duplicate column id {id:?}")));
                }
            }
            for (i, raw) in lines {
                let line = i + 1;
                if raw.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = raw.split(',').collect();
                if fields.len() != ids.len() + 1 {
                    return Err(Error::parse(
                        line,
                        format!("expected {} fields, got {}", ids.len() + 1, fields.len()),
                    ));
                }
                let t = parse_field(fields[0], line, "timestamp")?;
                for (id, raw_value) in ids.iter().zip(&fields[1..]) {
                    let v = parse_field(raw_value, line, "value")?;
                    let entry = groups.get_mut(id).expect("column registered above");
                    entry.1.push(t);
                    entry.2.push(v);
                }
            }
        }
    }

    let mut ordered: Vec<(usize, String, Vec<f64>, Vec<f64>)> = groups
        .into_iter()
        .map(|(id, (order, x, y))| (order, id, x, y))
        .collect();
    ordered.sort_by_key(|(order, ..)| *order);

    let mut series = Vec::with_capacity(ordered.len());
    for (_, id, x, y) in ordered {
        let mut ts = TimeSeries::new(id, x, y)?;
        ts.normalize_time();
        ts.standardize();
        series.push(ts);
    }
    if series.is_empty() {
        return Err(Error::validation("CSV contains no series"));
    }
    Dataset::new(series, None)
}

/// Writes the long layout (`series_id,t,value`). Floats use the shortest
/// round-trip form, so identical datasets produce identical bytes.
pub fn write_long_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "series_id,t,value")?;
    for s in &dataset.series {
        for (x, y) in s.x.iter().zip(&s.y) {
            writeln!(out, "{},{},{}", s.id, x, y)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes the class-labels file (`series_id,label`).
pub fn write_labels_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let labels = dataset
        .labels
        .as_ref()
        .ok_or_else(|| Error::validation("dataset has no labels to write"))?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "series_id,label")?;
    for (s, label) in dataset.series.iter().zip(labels) {
        writeln!(out, "{},{}", s.id, label)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a `series_id,<integer>` two-column file (class or cluster labels).
pub fn load_labels_csv(path: &Path) -> Result<Vec<(String, i64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty labels file".to_string()))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.len() != 2 || fields[0] != "series_id" {
        return Err(Error::parse(
            1,
            format!("expected header 'series_id,<label column>', got {header:?}"),
        ));
    }
    let mut out = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                line,
                format!("expected 2 fields, got {}", fields.len()),
            ));
        }
        let label = fields[1]
            .trim()
            .parse::<i64>()
            .map_err(|_| Error::parse(line, format!("cannot parse label from {:?}", fields[1])))?;
        out.push((fields[0].trim().to_string(), label));
    }
    if out.is_empty() {
        return Err(Error::validation("labels file contains no rows"));
    }
    Ok(out)
}

/// Knobs for the synthetic benchmark generator.
#[derive(Debug, Clone)]
pub struct SyntheticOptions {
    /// Force one sine series to the maximum noise level, making it hard to
    /// tell apart from the noise class.
    pub high_noise_sine: bool,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        SyntheticOptions { high_noise_sine: true }
    }
}

pub const SYNTHETIC_CLASSES: usize = 6;
pub const SYNTHETIC_PER_CLASS: usize = 10;
pub const SYNTHETIC_LENGTH: usize = 100;

/// The 60-series benchmark: six structural classes of ten series each
/// (sines, lines, sines with linear trends, white noise, step functions,
/// sinc bumps), length 100 on a uniform grid, each standardized. Labels are
/// the class indices 0..=5.
pub fn generate_synthetic(seed: u64) -> Dataset {
    generate_synthetic_with(seed, &SyntheticOptions::default())
}

pub fn generate_synthetic_with(seed: u64, opts: &SyntheticOptions) -> Dataset {
    let n = SYNTHETIC_LENGTH;
    let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let mut series = Vec::with_capacity(SYNTHETIC_CLASSES * SYNTHETIC_PER_CLASS);
    let mut labels = Vec::with_capacity(SYNTHETIC_CLASSES * SYNTHETIC_PER_CLASS);
    let normal = Normal::new(0.0, 1.0).unwrap();

    for class in 0..SYNTHETIC_CLASSES {
        for idx in 0..SYNTHETIC_PER_CLASS {
            let mut rng = seed::rng(seed, &[class as u64, idx as u64]);
            let mut y: Vec<f64> = match class {
                0 => {
                    let amplitude = rng.random_range(0.5..2.0);
                    let frequency = rng.random_range(2.0..8.0);
                    let phase = rng.random_range(0.0..2.0 * PI);
                    let mut noise_std = rng.random_range(0.05..0.5);
                    if opts.high_noise_sine && idx == 0 {
                        noise_std = 0.5;
                    }
                    x.iter()
                        .map(|&t| {
                            amplitude * (2.0 * PI * frequency * t + phase).sin()
                                + noise_std * normal.sample(&mut rng)
                        })
                        .collect()
                }
                1 => {
                    let slope = rng.random_range(-2.0..2.0);
                    let intercept = rng.random_range(-1.0..1.0);
                    let noise_std = rng.random_range(0.05..0.5);
                    x.iter()
                        .map(|&t| slope * t + intercept + noise_std * normal.sample(&mut rng))
                        .collect()
                }
                2 => {
                    let amplitude = rng.random_range(0.5..2.0);
                    let frequency = rng.random_range(2.0..8.0);
                    let phase = rng.random_range(0.0..2.0 * PI);
                    let slope = rng.random_range(-2.0..2.0);
                    let intercept = rng.random_range(-1.0..1.0);
                    let noise_std = rng.random_range(0.05..0.5);
                    x.iter()
                        .map(|&t| {
                            amplitude * (2.0 * PI * frequency * t + phase).sin()
                                + slope * t
                                + intercept
                                + noise_std * normal.sample(&mut rng)
                        })
                        .collect()
                }
                3 => (0..n).map(|_| normal.sample(&mut rng)).collect(),
                4 => {
                    let location = rng.random_range(0.2..0.8);
                    let sign = if rng.random_range(0.0..1.0) < 0.5 { 1.0 } else { -1.0 };
                    let noise_std = rng.random_range(0.05..0.15);
                    x.iter()
                        .map(|&t| {
                            let step = if t >= location { sign } else { 0.0 };
                            step + noise_std * normal.sample(&mut rng)
                        })
                        .collect()
                }
                _ => {
                    let center = rng.random_range(0.3..0.7);
                    let width = rng.random_range(0.05..0.2);
                    let noise_std = rng.random_range(0.05..0.15);
                    x.iter()
                        .map(|&t| {
                            let u = (t - center) / width;
                            let sinc = if u.abs() < 1e-12 { 1.0 } else { (PI * u).sin() / (PI * u) };
                            sinc + noise_std * normal.sample(&mut rng)
                        })
                        .collect()
                }
            };
            let (standardized, _) = standardize_series(&y);
            y = standardized;
            series.push(TimeSeries {
                id: format!("s{:02}", class * SYNTHETIC_PER_CLASS + idx),
                x: x.clone(),
                y,
            });
            labels.push(class);
        }
    }
    Dataset { series, labels: Some(labels) }
}

/// Smoothed seeded random walk plus Gaussian noise; a desk-scale stand-in for
/// physiological stride-interval recordings. Labels are all zero.
pub fn generate_gait_like(seed: u64, count: usize, n: usize) -> Result<Dataset> {
    if count < 1 {
        return Err(Error::validation("count must be at least 1"));
    }
    if n < 10 {
        return Err(Error::validation("series length must be at least 10"));
    }
    let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let window = (n / 20).max(3);
    let mut series = Vec::with_capacity(count);
    for idx in 0..count {
        let mut rng = seed::rng(seed, &[0x6741_u64, idx as u64]);
        let mut walk = Vec::with_capacity(n);
        let mut level = 0.0;
        for _ in 0..n {
            level += normal.sample(&mut rng);
            walk.push(level);
        }
        // Centered moving average; window shrinks at the edges.
        let smoothed: Vec<f64> = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(window / 2);
                let hi = (i + window / 2 + 1).min(n);
                walk[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            })
            .collect();
        let (_, smooth_std) = population_mean_std(&smoothed);
        let noisy: Vec<f64> = smoothed
            .iter()
            .map(|v| v + 0.05 * smooth_std * normal.sample(&mut rng))
            .collect();
        let (y, _) = standardize_series(&noisy);
        series.push(TimeSeries {
            id: format!("g{idx:02}"),
            x: x.clone(),
            y,
        });
    }
    let labels = vec![0; count];
    Dataset::new(series, Some(labels))
}

/// Zeroes out `sections` non-overlapping intervals of length
/// `round(frac * n)` at seeded uniform positions. Applied to the
/// standardized series; the result is not re-standardized.
pub fn corrupt(series: &TimeSeries, seed: u64, sections: usize, frac: f64) -> Result<TimeSeries> {
    if sections < 1 {
        return Err(Error::validation("sections must be at least 1"));
    }
    if !(0.0..=1.0).contains(&frac) || sections as f64 * frac > 0.8 {
        return Err(Error::validation(format!(
            "sections * frac = {} exceeds 0.8 of the series",
            sections as f64 * frac
        )));
    }
    let n = series.n();
    let len = (frac * n as f64).round() as usize;
    let mut corrupted = series.clone();
    if len == 0 {
        return Ok(corrupted);
    }
    if sections * len > n {
        return Err(Error::validation(format!(
            "{sections} sections of {len} points cannot fit in {n} points"
        )));
    }
    let mut rng = seed::rng(seed, &[0xC0_u64]);
    for _ in 0..1000 {
        let mut starts: Vec<usize> = (0..sections)
            .map(|_| rng.random_range(0..=n - len))
            .collect();
        starts.sort_unstable();
        if starts.windows(2).all(|w| w[1] >= w[0] + len) {
            for &s in &starts {
                corrupted.y[s..s + len].iter_mut().for_each(|v| *v = 0.0);
            }
            return Ok(corrupted);
        }
    }
    Err(Error::validation(format!(
        "could not place {sections} non-overlapping sections of {len} points after 1000 attempts"
    )))
}
