//! HDBSCAN over a precomputed distance matrix.
//!
//! Pipeline: core distances (`min_samples = min_cluster_size`, counting the
//! point itself), mutual-reachability graph, minimum spanning tree with ties
//! broken by smallest index pair, single-linkage hierarchy, condensation by
//! minimum cluster size, and excess-of-mass cluster extraction. The root
//! cluster is never selected, and points outside every selected cluster are
//! labelled -1.

use crate::clustering::hac::single_linkage_merges;
use crate::clustering::ClusterLabels;
use crate::embedding::DistanceMatrix;
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Condensed-tree edge: `child` (a point `< j` or a cluster `>= j`) leaves or
/// splits from `parent` at density `lambda = 1 / distance`.
#[derive(Debug, Clone, PartialEq)]
struct CondensedEdge {
    parent: usize,
    child: usize,
    lambda: f64,
    size: usize,
}

fn lambda_of(height: f64) -> f64 {
    if height > 0.0 {
        1.0 / height
    } else {
        f64::INFINITY
    }
}

/// Children and height of every internal node of the single-linkage tree.
struct Hierarchy {
    j: usize,
    children: Vec<(usize, usize)>,
    heights: Vec<f64>,
    sizes: Vec<usize>,
}

impl Hierarchy {
    fn from_merges(j: usize, merges: &[crate::clustering::Merge]) -> Hierarchy {
        let mut children = Vec::with_capacity(merges.len());
        let mut heights = Vec::with_capacity(merges.len());
        let mut sizes = vec![1usize; j];
        for m in merges {
            children.push((m.left, m.right));
            heights.push(m.height);
            sizes.push(m.size);
        }
        Hierarchy { j, children, heights, sizes }
    }

    fn size(&self, node: usize) -> usize {
        self.sizes[node]
    }

    fn is_point(&self, node: usize) -> bool {
        node < self.j
    }

    /// All leaf points under `node`.
    fn points_under(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            if self.is_point(v) {
                out.push(v);
            } else {
                let (l, r) = self.children[v - self.j];
                stack.push(l);
                stack.push(r);
            }
        }
        out
    }
}

/// Walks the hierarchy top-down, keeping only clusters of at least
/// `min_cluster_size` points. Cluster ids start at `j` (the root).
fn condense(h: &Hierarchy, min_cluster_size: usize) -> Vec<CondensedEdge> {
    let j = h.j;
    let root = j + h.children.len() - 1;
    let mut edges = Vec::new();
    let mut next_cluster = j;
    // (hierarchy node, condensed cluster it belongs to)
    let mut stack = vec![(root, j)];
    while let Some((node, cluster)) = stack.pop() {
        let (left, right) = h.children[node - j];
        let lambda = lambda_of(h.heights[node - j]);
        let (ls, rs) = (h.size(left), h.size(right));
        let left_big = ls >= min_cluster_size;
        let right_big = rs >= min_cluster_size;
        match (left_big, right_big) {
            (true, true) => {
                // True split: two new clusters are born.
                for &(child, size) in &[(left, ls), (right, rs)] {
                    next_cluster += 1;
                    edges.push(CondensedEdge { parent: cluster, child: next_cluster, lambda, size });
                    stack.push((child, next_cluster));
                }
            }
            (false, false) => {
                // The cluster dissolves; every point exits here.
                for side in [left, right] {
                    for p in h.points_under(side) {
                        edges.push(CondensedEdge { parent: cluster, child: p, lambda, size: 1 });
                    }
                }
            }
            _ => {
                // The cluster continues through the big side; the small
                // side's points fall out as noise at this density.
                let (big, small) = if left_big { (left, right) } else { (right, left) };
                for p in h.points_under(small) {
                    edges.push(CondensedEdge { parent: cluster, child: p, lambda, size: 1 });
                }
                if h.is_point(big) {
                    edges.push(CondensedEdge { parent: cluster, child: big, lambda, size: 1 });
                } else {
                    stack.push((big, cluster));
                }
            }
        }
    }
    edges
}

/// Stability of every condensed cluster:
/// `sum over exits (lambda_exit - lambda_birth) * exit size`.
fn stabilities(edges: &[CondensedEdge], root: usize) -> BTreeMap<usize, f64> {
    let mut birth: BTreeMap<usize, f64> = BTreeMap::new();
    birth.insert(root, 0.0);
    for e in edges {
        if e.child >= root {
            birth.insert(e.child, e.lambda);
        }
    }
    let mut stability: BTreeMap<usize, f64> = birth.keys().map(|&c| (c, 0.0)).collect();
    for e in edges {
        let b = birth[&e.parent];
        let gap = if e.lambda.is_infinite() && b.is_infinite() {
            0.0
        } else {
            e.lambda - b
        };
        *stability.get_mut(&e.parent).unwrap() += gap * e.size as f64;
    }
    stability
}

/// Excess-of-mass extraction: a cluster is selected when its stability is at
/// least the summed (adjusted) stability of its child clusters; selecting a
/// cluster deselects every descendant. The root is never selected.
fn extract_eom(
    edges: &[CondensedEdge],
    stability: &BTreeMap<usize, f64>,
    root: usize,
) -> Vec<usize> {
    let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in edges {
        if e.child > root {
            children.entry(e.parent).or_default().push(e.child);
        }
    }
    let mut adjusted = stability.clone();
    let mut selected: BTreeMap<usize, bool> = stability.keys().map(|&c| (c, false)).collect();
    let mut clusters: Vec<usize> = stability.keys().copied().filter(|&c| c != root).collect();
    clusters.sort_unstable_by(|a, b| b.cmp(a));

    for &c in &clusters {
        let child_sum: f64 = children
            .get(&c)
            .map(|kids| kids.iter().map(|k| adjusted[k]).sum())
            .unwrap_or(0.0);
        if stability[&c] < child_sum {
            adjusted.insert(c, child_sum);
        } else {
            selected.insert(c, true);
            // Deselect the whole subtree below c.
            let mut stack: Vec<usize> = children.get(&c).cloned().unwrap_or_default();
            while let Some(d) = stack.pop() {
                selected.insert(d, false);
                stack.extend(children.get(&d).cloned().unwrap_or_default());
            }
        }
    }
    selected
        .into_iter()
        .filter_map(|(c, on)| (on && c != root).then_some(c))
        .collect()
}

fn label_points(
    j: usize,
    edges: &[CondensedEdge],
    selected: &[usize],
) -> ClusterLabels {
    let selected: std::collections::BTreeSet<usize> = selected.iter().copied().collect();
    let mut parent_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut point_parent: Vec<Option<usize>> = vec![None; j];
    for e in edges {
        if e.child < j {
            point_parent[e.child] = Some(e.parent);
        } else {
            parent_of.insert(e.child, e.parent);
        }
    }
    // Nearest selected ancestor of every point, if any.
    let mut owner: Vec<Option<usize>> = vec![None; j];
    for p in 0..j {
        let mut c = point_parent[p];
        while let Some(cluster) = c {
            if selected.contains(&cluster) {
                owner[p] = Some(cluster);
                break;
            }
            c = parent_of.get(&cluster).copied();
        }
    }
    // Number selected clusters by their smallest member.
    let mut first_member: BTreeMap<usize, usize> = BTreeMap::new();
    for p in 0..j {
        if let Some(c) = owner[p] {
            first_member.entry(c).or_insert(p);
        }
    }
    let mut order: Vec<(usize, usize)> = first_member.into_iter().map(|(c, p)| (p, c)).collect();
    order.sort_unstable();
    let index_of: BTreeMap<usize, i64> = order
        .into_iter()
        .enumerate()
        .map(|(i, (_, c))| (c, i as i64))
        .collect();
    let labels = owner
        .into_iter()
        .map(|o| o.map(|c| index_of[&c]).unwrap_or(-1))
        .collect();
    ClusterLabels::new(labels)
}

/// HDBSCAN with `min_samples = min_cluster_size` over a precomputed distance
/// matrix. Fewer points than `min_cluster_size` yields all outliers rather
/// than an error.
pub fn hdbscan(p: &DistanceMatrix, min_cluster_size: usize) -> Result<ClusterLabels> {
    if min_cluster_size < 2 {
        return Err(Error::validation(format!(
            "min_cluster_size must be at least 2, got {min_cluster_size}"
        )));
    }
    let j = p.len();
    if j < min_cluster_size {
        return Ok(ClusterLabels::new(vec![-1; j]));
    }

    // Core distance: distance to the min_samples-th neighbor, self included.
    let min_samples = min_cluster_size;
    let core: Vec<f64> = (0..j)
        .map(|a| {
            let mut row: Vec<f64> = (0..j).map(|b| p.get(a, b)).collect();
            row.sort_by(f64::total_cmp);
            row[min_samples - 1]
        })
        .collect();
    let mutual_reachability =
        |a: usize, b: usize| p.get(a, b).max(core[a]).max(core[b]);

    let merges = single_linkage_merges(j, mutual_reachability);
    let hierarchy = Hierarchy::from_merges(j, &merges);
    let edges = condense(&hierarchy, min_cluster_size);
    let root = j;
    let stability = stabilities(&edges, root);
    let selected = extract_eom(&edges, &stability, root);
    Ok(label_points(j, &edges, &selected))
}
