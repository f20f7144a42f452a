//! Sub-population discovery and per-cluster kernel selection.

mod hac;
mod hdbscan;

pub use hac::{cut_dendrogram, hac_single_linkage, Dendrogram, Merge};
pub use hdbscan::hdbscan;

use crate::error::{Error, Result};
use crate::gp::BicMatrix;
use std::io::Write;
use std::path::Path;

/// Flat cluster assignment: `-1` marks outliers, clusters are `0..C-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    pub labels: Vec<i64>,
    pub n_clusters: usize,
}

impl ClusterLabels {
    pub fn new(labels: Vec<i64>) -> ClusterLabels {
        let n_clusters = labels
            .iter()
            .filter(|&&l| l >= 0)
            .map(|&l| l as usize + 1)
            .max()
            .unwrap_or(0);
        ClusterLabels { labels, n_clusters }
    }

    pub fn n_outliers(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }

    /// Member row indices of cluster `c`.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == c as i64).then_some(i))
            .collect()
    }

    /// Writes the `series_id,cluster` file.
    pub fn write_csv(&self, path: &Path, ids: &[String]) -> Result<()> {
        if ids.len() != self.labels.len() {
            return Err(Error::validation(format!(
                "{} ids for {} labels",
                ids.len(),
                self.labels.len()
            )));
        }
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "series_id,cluster")?;
        for (id, label) in ids.iter().zip(&self.labels) {
            writeln!(out, "{id},{label}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// The kernel minimizing the summed BIC over the member rows; the sum is the
/// dataset-level BIC under per-series conditional independence. Ties go to
/// the lexicographically smallest canonical string.
pub fn select_cluster_kernel(b: &BicMatrix, members: &[usize]) -> Result<String> {
    if members.is_empty() {
        return Err(Error::validation("cannot select a kernel for an empty cluster"));
    }
    if let Some(&bad) = members.iter().find(|&&m| m >= b.rows()) {
        return Err(Error::validation(format!(
            "member index {bad} out of range for {} series",
            b.rows()
        )));
    }
    let mut best: Option<(f64, &str)> = None;
    for k in 0..b.cols() {
        let total: f64 = members.iter().map(|&j| b.get(j, k)).sum();
        let kernel = b.kernels[k].as_str();
        let better = match best {
            None => true,
            Some((t, name)) => total < t || (total == t && kernel < name),
        };
        if better {
            best = Some((total, kernel));
        }
    }
    Ok(best.expect("at least one kernel column").1.to_string())
}

/// The single kernel that best explains every series (all rows at once).
pub fn select_shared_kernel(b: &BicMatrix) -> Result<String> {
    if b.rows() == 0 {
        return Err(Error::validation("BIC matrix has no rows"));
    }
    let members: Vec<usize> = (0..b.rows()).collect();
    select_cluster_kernel(b, &members)
}
