//! Single-linkage agglomerative clustering.
//!
//! Implemented as a Kruskal pass over all pairs sorted by
//! `(distance, i, j)`: single linkage merges exactly along minimum spanning
//! tree edges, and the explicit sort pins tie-breaking to the smallest index
//! pair. Heights are therefore non-decreasing by construction.

use crate::clustering::ClusterLabels;
use crate::embedding::DistanceMatrix;
use crate::error::{Error, Result};
use std::path::Path;

/// One agglomeration step. Leaves are `0..J-1`; the t-th merge creates
/// internal node `J + t`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// A stepwise dendrogram: exactly `J - 1` merges with non-decreasing heights.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn leaves(&self) -> usize {
        self.merges.len() + 1
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.merges)
            .map_err(|e| Error::validation(format!("cannot serialize dendrogram: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Graphviz rendering; leaves are labelled with `ids` when provided.
    pub fn to_dot(&self, ids: Option<&[String]>) -> String {
        let j = self.leaves();
        let mut out = String::from("digraph dendrogram {\n  rankdir=BT;\n");
        for leaf in 0..j {
            let label = ids
                .and_then(|ids| ids.get(leaf))
                .cloned()
                .unwrap_or_else(|| leaf.to_string());
            out.push_str(&format!("  n{leaf} [shape=box, label=\"{label}\"];\n"));
        }
        for (t, m) in self.merges.iter().enumerate() {
            let node = j + t;
            out.push_str(&format!(
                "  n{node} [shape=ellipse, label=\"h={:.4}\"];\n  n{} -> n{node};\n  n{} -> n{node};\n",
                m.height, m.left, m.right
            ));
        }
        out.push_str("}\n");
        out
    }

    pub fn write_dot(&self, path: &Path, ids: Option<&[String]>) -> Result<()> {
        std::fs::write(path, self.to_dot(ids))?;
        Ok(())
    }
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Dsu {
        Dsu { parent: (0..n).collect() }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[rb] = ra;
        true
    }
}

/// Single-linkage merges over an arbitrary symmetric dissimilarity lookup.
/// Shared by HAC (raw distances) and HDBSCAN (mutual reachability).
pub(crate) fn single_linkage_merges(n: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<Merge> {
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            edges.push((dist(a, b), a, b));
        }
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut dsu = Dsu::new(n);
    // Current dendrogram node id of each component root.
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut size_of: Vec<usize> = vec![1; n];
    let mut merges = Vec::with_capacity(n - 1);
    for (w, a, b) in edges {
        let (ra, rb) = (dsu.find(a), dsu.find(b));
        if ra == rb {
            continue;
        }
        let (left, right) = {
            let (na, nb) = (node_of[ra], node_of[rb]);
            (na.min(nb), na.max(nb))
        };
        let size = size_of[ra] + size_of[rb];
        dsu.union(ra, rb);
        let root = dsu.find(ra);
        node_of[root] = n + merges.len();
        size_of[root] = size;
        merges.push(Merge { left, right, height: w, size });
        if merges.len() == n - 1 {
            break;
        }
    }
    merges
}

/// Agglomerative single-linkage clustering of a precomputed distance matrix.
pub fn hac_single_linkage(p: &DistanceMatrix) -> Result<Dendrogram> {
    let j = p.len();
    if j < 2 {
        return Err(Error::validation(format!(
            "hierarchical clustering needs at least 2 series, got {j}"
        )));
    }
    Ok(Dendrogram {
        merges: single_linkage_merges(j, |a, b| p.get(a, b)),
    })
}

/// Removes the `c - 1` highest merges; connected components become clusters
/// numbered by their smallest member index.
pub fn cut_dendrogram(d: &Dendrogram, c: usize) -> Result<ClusterLabels> {
    let j = d.leaves();
    if c < 1 || c > j {
        return Err(Error::validation(format!(
            "cut into {c} clusters is out of range for {j} leaves"
        )));
    }
    let mut dsu = Dsu::new(j);
    // Representative leaf of every dendrogram node seen so far.
    let mut leaf_of: Vec<usize> = (0..j).collect();
    for merge in &d.merges[..j - c] {
        let (la, lb) = (leaf_of[merge.left], leaf_of[merge.right]);
        dsu.union(la, lb);
        leaf_of.push(dsu.find(la));
    }
    let mut cluster_of_root = std::collections::BTreeMap::new();
    let mut labels = vec![0i64; j];
    for p in 0..j {
        let root = dsu.find(p);
        let next = cluster_of_root.len() as i64;
        let label = *cluster_of_root.entry(root).or_insert(next);
        labels[p] = label;
    }
    Ok(ClusterLabels::new(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Metric;
    use rand::Rng;

    fn matrix_from_points(points: &[f64]) -> DistanceMatrix {
        DistanceMatrix::from_fn(
            (0..points.len()).map(|i| format!("p{i}")).collect(),
            Metric::Euclidean,
            |a, b| (points[a] - points[b]).abs(),
        )
    }

    #[test]
    fn three_point_line_merges_as_forced() {
        let d = hac_single_linkage(&matrix_from_points(&[0.0, 1.0, 10.0])).unwrap();
        assert_eq!(d.merges.len(), 2);
        assert_eq!(
            d.merges[0],
            Merge { left: 0, right: 1, height: 1.0, size: 2 }
        );
        assert_eq!(
            d.merges[1],
            Merge { left: 2, right: 3, height: 9.0, size: 3 }
        );
    }

    #[test]
    fn heights_are_non_decreasing() {
        let mut rng = crate::seed::rng(17, &[]);
        let points: Vec<f64> = (0..40).map(|_| rng.random_range(-5.0..5.0)).collect();
        let d = hac_single_linkage(&matrix_from_points(&points)).unwrap();
        assert_eq!(d.merges.len(), 39);
        assert!(d
            .merges
            .windows(2)
            .all(|w| w[1].height >= w[0].height));
    }

    /// Brute-force O(J^3) active-set agglomeration with the same tie-break:
    /// pick the active pair with the smallest (distance, point pair) over
    /// closest members.
    fn brute_force_single_linkage(p: &DistanceMatrix) -> Vec<Merge> {
        let j = p.len();
        struct Cluster {
            node: usize,
            members: Vec<usize>,
        }
        let mut active: Vec<Cluster> = (0..j)
            .map(|i| Cluster { node: i, members: vec![i] })
            .collect();
        let mut merges = Vec::new();
        let mut next = j;
        while active.len() > 1 {
            let mut best: Option<(f64, usize, usize, usize, usize)> = None;
            for u in 0..active.len() {
                for v in (u + 1)..active.len() {
                    for &a in &active[u].members {
                        for &b in &active[v].members {
                            let (lo, hi) = (a.min(b), a.max(b));
                            let cand = (p.get(lo, hi), lo, hi, u, v);
                            let better = match &best {
                                None => true,
                                Some((d, i1, j1, ..)) => {
                                    (cand.0, cand.1, cand.2)
                                        .0
                                        .total_cmp(d)
                                        .then(cand.1.cmp(i1))
                                        .then(cand.2.cmp(j1))
                                        .is_lt()
                                }
                            };
                            if better {
                                best = Some(cand);
                            }
                        }
                    }
                }
            }
            let (dist, _, _, u, v) = best.unwrap();
            let second = active.swap_remove(v.max(u));
            let first = active.swap_remove(v.min(u));
            let (left, right) = (first.node.min(second.node), first.node.max(second.node));
            let mut members = first.members;
            members.extend(second.members);
            merges.push(Merge { left, right, height: dist, size: members.len() });
            active.push(Cluster { node: next, members });
            next += 1;
        }
        merges
    }

    #[test]
    fn matches_brute_force_agglomeration_oracle() {
        let mut rng = crate::seed::rng(23, &[]);
        let points: Vec<(f64, f64)> = (0..25)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let p = DistanceMatrix::from_fn(
            (0..25).map(|i| format!("p{i}")).collect(),
            Metric::Euclidean,
            |a, b| {
                let (dx, dy) = (points[a].0 - points[b].0, points[a].1 - points[b].1);
                (dx * dx + dy * dy).sqrt()
            },
        );
        let fast = hac_single_linkage(&p).unwrap().merges;
        let slow = brute_force_single_linkage(&p);
        assert_eq!(fast, slow);
    }

    #[test]
    fn cut_extremes() {
        let d = hac_single_linkage(&matrix_from_points(&[0.0, 1.0, 10.0])).unwrap();
        let one = cut_dendrogram(&d, 1).unwrap();
        assert_eq!(one.labels, vec![0, 0, 0]);
        let all = cut_dendrogram(&d, 3).unwrap();
        assert_eq!(all.labels, vec![0, 1, 2]);
        let two = cut_dendrogram(&d, 2).unwrap();
        assert_eq!(two.labels, vec![0, 0, 1]);
        assert!(cut_dendrogram(&d, 0).is_err());
        assert!(cut_dendrogram(&d, 4).is_err());
    }

    #[test]
    fn cut_produces_exactly_c_clusters() {
        let mut rng = crate::seed::rng(5, &[]);
        let points: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..100.0)).collect();
        let d = hac_single_linkage(&matrix_from_points(&points)).unwrap();
        for c in 1..=20 {
            let cut = cut_dendrogram(&d, c).unwrap();
            assert_eq!(cut.n_clusters, c);
        }
    }

    #[test]
    fn dot_output_mentions_every_leaf() {
        let d = hac_single_linkage(&matrix_from_points(&[0.0, 1.0, 10.0])).unwrap();
        let dot = d.to_dot(Some(&["a".into(), "b".into(), "c".into()]));
        for label in ["\"a\"", "\"b\"", "\"c\""] {
            assert!(dot.contains(label));
        }
    }
}
