//! Weighted k-nearest-neighbor graph over dataset rows.
//!
//! Each row is linked to its `k` nearest other rows by Euclidean distance
//! (ties to the lower row index), the edge set is union-symmetrized, and a
//! disconnected result is repaired by adding the shortest edges between
//! components until one component remains. Added edges are kept in
//! [`NeighborGraph::bridged_edges`].

use std::fs;
use std::path::Path;

use ndarray::ArrayView1;

use crate::dataio::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::par::Execution;

pub const DEFAULT_K: usize = 96;

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborGraph {
    n: usize,
    k: usize,
    /// Per vertex, `(neighbor, weight)` sorted by neighbor index.
    adjacency: Vec<Vec<(usize, f64)>>,
    /// `(i, j, weight)` with `i < j`, in the order they were added.
    bridged_edges: Vec<(usize, usize, f64)>,
}

pub fn euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Disjoint-set forest with path halving.
struct Components {
    parent: Vec<usize>,
    count: usize,
}

impl Components {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            count: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // Smaller root wins so labels do not depend on union order.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        self.count -= 1;
        true
    }

    fn labels(&mut self) -> Vec<usize> {
        (0..self.parent.len()).map(|i| self.find(i)).collect()
    }
}

impl NeighborGraph {
    /// Builds a symmetric graph from an undirected edge list. Duplicate edges
    /// keep the first weight; self-loops are rejected.
    pub fn from_edges(n: usize, k: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) out of range for n={n}"
                )));
            }
            if i == j {
                return Err(Error::invalid(format!("self-loop at vertex {i}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!("edge ({i}, {j}) has weight {w}")));
            }
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(j, _)| j);
            list.dedup_by_key(|&mut (j, _)| j);
        }
        Ok(Self {
            n,
            k,
            adjacency,
            bridged_edges: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bridged_edges(&self) -> &[(usize, usize, f64)] {
        &self.bridged_edges
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(v, _)| v)
            .ok()
            .map(|p| self.adjacency[i][p].1)
    }

    /// Undirected edges as `(i, j, weight)` with `i < j`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, list)| {
            list.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, w)| (i, j, w))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn component_count(&self) -> usize {
        self.components().count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    fn components(&self) -> Components {
        let mut c = Components::new(self.n);
        for (i, j, _) in self.edges() {
            c.union(i, j);
        }
        c
    }

    pub(crate) fn set_bridged_edges(&mut self, bridged: Vec<(usize, usize, f64)>) {
        self.bridged_edges = bridged;
    }

    fn insert_edge(&mut self, i: usize, j: usize, w: f64) {
        for (a, b) in [(i, j), (j, i)] {
            let list = &mut self.adjacency[a];
            match list.binary_search_by_key(&b, |&(v, _)| v) {
                Ok(_) => {}
                Err(p) => list.insert(p, (b, w)),
            }
        }
    }

    /// Edge list CSV with header `i,j,weight,bridged`.
    pub fn write_edge_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("i,j,weight,bridged\n");
        for (i, j, w) in self.edges() {
            let bridged = self.bridged_edges.iter().any(|&(a, b, _)| (a, b) == (i, j));
            out.push_str(&format!("{i},{j},{w:.17e},{}\n", u8::from(bridged)));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

pub fn build_knn_graph(ds: &EmbeddingDataset, k: usize) -> Result<NeighborGraph> {
    build_knn_graph_with(ds, k, Execution::default())
}

pub fn build_knn_graph_with(
    ds: &EmbeddingDataset,
    k: usize,
    exec: Execution,
) -> Result<NeighborGraph> {
    let n = ds.n();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "neighbor count k = {k} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let x = ds.vectors();
    let nearest: Vec<Vec<(usize, f64)>> = exec.map_range(n, |i| {
        let xi = x.row(i);
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (euclidean(xi, x.row(j)), j))
            .collect();
        let by_dist_then_index =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        cand.select_nth_unstable_by(k - 1, by_dist_then_index);
        cand.truncate(k);
        cand.sort_by(by_dist_then_index);
        cand.into_iter().map(|(w, j)| (j, w)).collect()
    });
    let edges: Vec<(usize, usize, f64)> = nearest
        .iter()
        .enumerate()
        .flat_map(|(i, list)| list.iter().map(move |&(j, w)| (i, j, w)))
        .collect();
    let graph = NeighborGraph::from_edges(n, k, &edges)?;
    connect_components_with(graph, ds, exec)
}

pub fn connect_components(g: NeighborGraph, ds: &EmbeddingDataset) -> Result<NeighborGraph> {
    connect_components_with(g, ds, Execution::default())
}

/// Adds minimum-distance edges between components until the graph is
/// connected.
///
/// Repeatedly adding the globally shortest cross-component edge is
/// Kruskal's algorithm on the component graph. This computes the same edge
/// set with Borůvka rounds (each component picks its shortest outgoing
/// edge), which needs one O(n²·d) pass per round instead of a full table of
/// component-pair distances. Ties are ordered by `(weight, i, j)`, which
/// makes the minimum spanning forest unique, and the recorded edges are
/// sorted in that order.
pub fn connect_components_with(
    mut g: NeighborGraph,
    ds: &EmbeddingDataset,
    exec: Execution,
) -> Result<NeighborGraph> {
    if ds.n() != g.n {
        return Err(Error::DimensionMismatch {
            expected: g.n,
            got: ds.n(),
        });
    }
    let x = ds.vectors();
    let mut comps = g.components();
    let mut added: Vec<(usize, usize, f64)> = Vec::new();
    while comps.count > 1 {
        let labels = comps.labels();
        let best_foreign: Vec<Option<(f64, usize)>> = exec.map_range(g.n, |i| {
            let mut best: Option<(f64, usize)> = None;
            for j in 0..g.n {
                if labels[j] == labels[i] {
                    continue;
                }
                let w = euclidean(x.row(i), x.row(j));
                let key = (w, i.min(j), i.max(j));
                let better = match best {
                    None => true,
                    Some((bw, bj)) => key < (bw, i.min(bj), i.max(bj)),
                };
                if better {
                    best = Some((w, j));
                }
            }
            best
        });
        let mut per_component: Vec<Option<(f64, usize, usize)>> = vec![None; g.n];
        for (i, cand) in best_foreign.iter().enumerate() {
            if let Some((w, j)) = *cand {
                let key = (w, i.min(j), i.max(j));
                let slot = &mut per_component[labels[i]];
                if slot.is_none_or(|cur| key < cur) {
                    *slot = Some(key);
                }
            }
        }
        let mut round: Vec<(f64, usize, usize)> = per_component.into_iter().flatten().collect();
        round.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        round.dedup();
        for (w, i, j) in round {
            if comps.union(i, j) {
                g.insert_edge(i, j, w);
                added.push((i, j, w));
            }
        }
    }
    added.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    g.bridged_edges.extend(added);
    Ok(g)
}
