//! The interpretable embedding: row-standardized BIC matrix and pairwise
//! distances.
//!
//! Each row of the BIC matrix is z-scored independently (population std), so
//! a series is represented by the *profile* of how well each kernel explains
//! it rather than by absolute evidence values. Cosine distance then compares
//! profile orientation; Euclidean distance over the same rows is available
//! for hierarchical clustering.

use crate::error::{Error, Result};
use crate::gp::BicMatrix;
use crate::series::{population_mean_std, DEGENERATE_STD};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

/// Row-standardized BIC matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub series_ids: Vec<String>,
    pub kernels: Vec<String>,
    values: Vec<f64>,
    /// Rows with zero variance; stored as all-zero rows.
    pub degenerate_rows: BTreeSet<usize>,
}

impl Embedding {
    pub fn rows(&self) -> usize {
        self.series_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.kernels.len()
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let k = self.cols();
        &self.values[row * k..(row + 1) * k]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "series_id,{}", self.kernels.join(","))?;
        for (j, id) in self.series_ids.iter().enumerate() {
            write!(out, "{id}")?;
            for v in self.row(j) {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Distance metric tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Euclidean,
    /// Distances imported from a baseline representation.
    Precomputed,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Metric> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::validation(format!(
                "unknown metric {other:?}; expected 'cosine' or 'euclidean'"
            ))),
        }
    }
}

/// Symmetric pairwise distance matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub ids: Vec<String>,
    pub metric: Metric,
    values: Vec<f64>,
    /// Rows whose distances are uninformative (degenerate embedding rows).
    pub flagged_rows: BTreeSet<usize>,
}

impl DistanceMatrix {
    /// Builds from a symmetric generator; enforces the zero diagonal.
    pub fn from_fn(
        ids: Vec<String>,
        metric: Metric,
        mut dist: impl FnMut(usize, usize) -> f64,
    ) -> DistanceMatrix {
        let j = ids.len();
        let mut values = vec![0.0; j * j];
        for a in 0..j {
            for b in (a + 1)..j {
                let d = dist(a, b);
                values[a * j + b] = d;
                values[b * j + a] = d;
            }
        }
        DistanceMatrix { ids, metric, values, flagged_rows: BTreeSet::new() }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.len() + b]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "series_id,{}", self.ids.join(","))?;
        for (a, id) in self.ids.iter().enumerate() {
            write!(out, "{id}")?;
            for b in 0..self.len() {
                write!(out, ",{:.16e}", self.get(a, b))?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Z-scores every row of the BIC matrix with the population std. Rows with
/// zero variance become zero rows and are listed in `degenerate_rows`.
pub fn standardize_rows(b: &BicMatrix) -> Result<Embedding> {
    if b.cols() < 2 {
        return Err(Error::validation(format!(
            "row standardization needs at least 2 kernels, got {}",
            b.cols()
        )));
    }
    let mut values = Vec::with_capacity(b.rows() * b.cols());
    let mut degenerate_rows = BTreeSet::new();
    for j in 0..b.rows() {
        let row = b.row(j);
        let (mean, std) = population_mean_std(row);
        if std < DEGENERATE_STD {
            degenerate_rows.insert(j);
            values.extend(std::iter::repeat_n(0.0, row.len()));
        } else {
            values.extend(row.iter().map(|v| (v - mean) / std));
        }
    }
    Ok(Embedding {
        series_ids: b.series_ids.clone(),
        kernels: b.kernels.clone(),
        values,
        degenerate_rows,
    })
}

/// Pairwise cosine distances `1 - cos(e_i, e_j)`, clamped to `[0, 2]`.
/// Pairs involving a zero row get the indifference distance 1 and the rows
/// are flagged.
pub fn cosine_distances(e: &Embedding) -> DistanceMatrix {
    let norms: Vec<f64> = (0..e.rows())
        .map(|j| e.row(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut dm = DistanceMatrix::from_fn(e.series_ids.clone(), Metric::Cosine, |a, b| {
        if norms[a] < DEGENERATE_STD || norms[b] < DEGENERATE_STD {
            1.0
        } else {
            let dot: f64 = e.row(a).iter().zip(e.row(b)).map(|(u, v)| u * v).sum();
            (1.0 - dot / (norms[a] * norms[b])).clamp(0.0, 2.0)
        }
    });
    dm.flagged_rows = e.degenerate_rows.clone();
    dm
}

/// Pairwise Euclidean distances over embedding rows.
pub fn euclidean_distances(e: &Embedding) -> DistanceMatrix {
    let mut dm = DistanceMatrix::from_fn(e.series_ids.clone(), Metric::Euclidean, |a, b| {
        e.row(a)
            .iter()
            .zip(e.row(b))
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt()
    });
    dm.flagged_rows = e.degenerate_rows.clone();
    dm
}
