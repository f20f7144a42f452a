//! External cluster-quality metrics: homogeneity, completeness, V-measure.
//!
//! Entropy-based definitions with natural logarithms:
//! `h = 1 - H(C|K)/H(C)` (1 when `H(C) = 0`),
//! `c = 1 - H(K|C)/H(K)` (1 when `H(K) = 0`),
//! `V = 2hc/(h+c)` (0 when both are 0).
//!
//! Predicted outliers (label -1) are scored as their own singleton clusters:
//! the conservative convention that rewards homogeneity and pays for it in
//! completeness.

use crate::clustering::ClusterLabels;
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Metric scores plus the class-by-cluster contingency table.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricReport {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
    pub n_clusters: usize,
    pub n_outliers: usize,
    /// `contingency[class][cluster]` over the remapped cluster indices.
    pub contingency: Vec<Vec<usize>>,
}

fn entropy(counts: impl Iterator<Item = usize>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Scores a predicted clustering against ground-truth class labels.
pub fn cluster_metrics(truth: &[usize], pred: &ClusterLabels) -> Result<MetricReport> {
    if truth.len() != pred.labels.len() {
        return Err(Error::validation(format!(
            "{} truth labels vs {} predicted labels",
            truth.len(),
            pred.labels.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::validation("cannot score an empty labelling"));
    }
    let n = truth.len() as f64;

    // Remap: clusters keep compact indices, each outlier becomes a fresh
    // singleton cluster after them.
    let mut next_outlier = pred.n_clusters;
    let cluster_ids: Vec<usize> = pred
        .labels
        .iter()
        .map(|&l| {
            if l >= 0 {
                l as usize
            } else {
                let id = next_outlier;
                next_outlier += 1;
                id
            }
        })
        .collect();
    let n_clusters_scored = next_outlier;

    let classes: BTreeMap<usize, usize> = truth
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect();
    let mut contingency = vec![vec![0usize; n_clusters_scored]; classes.len()];
    for (&t, &k) in truth.iter().zip(&cluster_ids) {
        contingency[classes[&t]][k] += 1;
    }

    let class_totals: Vec<usize> = contingency.iter().map(|row| row.iter().sum()).collect();
    let cluster_totals: Vec<usize> = (0..n_clusters_scored)
        .map(|k| contingency.iter().map(|row| row[k]).sum())
        .collect();

    let h_c = entropy(class_totals.iter().copied(), n);
    let h_k = entropy(cluster_totals.iter().copied(), n);

    // H(C|K) = sum_k p(k) H(C | K = k); same joint loop gives H(K|C).
    let mut h_c_given_k = 0.0;
    let mut h_k_given_c = 0.0;
    for (ci, row) in contingency.iter().enumerate() {
        for (ki, &count) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let joint = count as f64 / n;
            h_c_given_k -= joint * (count as f64 / cluster_totals[ki] as f64).ln();
            h_k_given_c -= joint * (count as f64 / class_totals[ci] as f64).ln();
        }
    }

    let homogeneity = if h_c > 0.0 { 1.0 - h_c_given_k / h_c } else { 1.0 };
    let completeness = if h_k > 0.0 { 1.0 - h_k_given_c / h_k } else { 1.0 };
    let v_measure = if homogeneity + completeness > 0.0 {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    } else {
        0.0
    };

    Ok(MetricReport {
        homogeneity,
        completeness,
        v_measure,
        n_clusters: pred.n_clusters,
        n_outliers: pred.n_outliers(),
        contingency,
    })
}
