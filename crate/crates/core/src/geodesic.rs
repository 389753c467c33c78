//! Shortest-path (geodesic) distances over a [`NeighborGraph`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::Array2;

use crate::dataio::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::neighbors::NeighborGraph;
use crate::par::Execution;

/// Default ceiling on the n×n distance matrix: 2 GiB.
pub const DEFAULT_MEMORY_LIMIT: u64 = 2 << 30;

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicMatrix {
    distances: Array2<f64>,
}

impl GeodesicMatrix {
    pub fn n(&self) -> usize {
        self.distances.nrows()
    }

    pub fn distances(&self) -> &Array2<f64> {
        &self.distances
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.distances[[i, j]]
    }

    /// The matrix as an unlabeled dataset with `d = n`, for dumping.
    pub fn to_dataset(&self) -> Result<EmbeddingDataset> {
        EmbeddingDataset::unlabeled(self.distances.clone())
    }

    pub fn bytes_required(n: usize) -> u64 {
        (n as u64).saturating_mul(n as u64).saturating_mul(8)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    vertex: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    // Reversed so BinaryHeap pops the smallest distance first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from a set of seeded vertices; unreachable vertices stay at
/// infinity.
fn dijkstra(g: &NeighborGraph, seeds: &[(usize, f64)]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.n()];
    let mut heap = BinaryHeap::with_capacity(g.n());
    for &(v, w) in seeds {
        if w < dist[v] {
            dist[v] = w;
            heap.push(Frontier { dist: w, vertex: v });
        }
    }
    while let Some(Frontier {
        dist: du,
        vertex: u,
    }) = heap.pop()
    {
        if du > dist[u] {
            continue;
        }
        for &(v, w) in g.neighbors(u) {
            let alt = du + w;
            if alt < dist[v] {
                dist[v] = alt;
                heap.push(Frontier {
                    dist: alt,
                    vertex: v,
                });
            }
        }
    }
    dist
}

pub fn all_pairs_geodesic(g: &NeighborGraph) -> Result<GeodesicMatrix> {
    all_pairs_geodesic_with(g, Execution::default(), DEFAULT_MEMORY_LIMIT)
}

/// One Dijkstra pass per source vertex. The two directed estimates of each
/// pair are merged with `min`, so the result is exactly symmetric.
pub fn all_pairs_geodesic_with(
    g: &NeighborGraph,
    exec: Execution,
    memory_limit: u64,
) -> Result<GeodesicMatrix> {
    let n = g.n();
    let required = GeodesicMatrix::bytes_required(n);
    if required > memory_limit {
        return Err(Error::MemoryCeiling {
            required,
            limit: memory_limit,
        });
    }
    let mut flat = vec![0.0f64; n * n];
    exec.fill_chunks(&mut flat, n.max(1), |s, row| {
        row.copy_from_slice(&dijkstra(g, &[(s, 0.0)]));
    });
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Disconnected {
            components: g.component_count(),
        });
    }
    let mut distances = Array2::from_shape_vec((n, n), flat).expect("n*n entries");
    for i in 0..n {
        for j in i + 1..n {
            let m = distances[[i, j]].min(distances[[j, i]]);
            distances[[i, j]] = m;
            distances[[j, i]] = m;
        }
    }
    Ok(GeodesicMatrix { distances })
}

/// Distances from a new point attached to the graph through `entry_edges`
/// (`(vertex, Euclidean weight)` pairs), read off the geodesic matrix.
pub fn single_source_geodesic(
    geo: &GeodesicMatrix,
    entry_edges: &[(usize, f64)],
) -> Result<Vec<f64>> {
    if entry_edges.is_empty() {
        return Err(Error::invalid("empty entry edge list"));
    }
    let n = geo.n();
    let mut out = vec![f64::INFINITY; n];
    for &(v, w) in entry_edges {
        if v >= n {
            return Err(Error::invalid(format!("entry vertex {v} out of range")));
        }
        for (o, g) in out.iter_mut().zip(geo.distances.row(v)) {
            *o = o.min(w + g);
        }
    }
    Ok(out)
}

/// Same distances as [`single_source_geodesic`], computed with one Dijkstra
/// pass over the graph augmented by the virtual vertex.
pub fn single_source_geodesic_augmented(
    g: &NeighborGraph,
    entry_edges: &[(usize, f64)],
) -> Result<Vec<f64>> {
    if entry_edges.is_empty() {
        return Err(Error::invalid("empty entry edge list"));
    }
    if let Some(&(v, _)) = entry_edges.iter().find(|&&(v, _)| v >= g.n()) {
        return Err(Error::invalid(format!("entry vertex {v} out of range")));
    }
    let dist = dijkstra(g, entry_edges);
    if dist.iter().any(|v| !v.is_finite()) {
        return Err(Error::Disconnected {
            components: g.component_count(),
        });
    }
    Ok(dist)
}
