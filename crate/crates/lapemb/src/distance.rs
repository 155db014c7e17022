//! Graph distances and pair enumeration.
//!
//! Intrinsic distances are approximated by shortest paths: edge lengths on
//! mesh edges, Euclidean lengths on the symmetrized k-NN graph for clouds.
//! Scans over vertex pairs go through [`DistanceField`] so the same code
//! serves Dijkstra tables and analytically known metrics, with one shared
//! sampling policy: visit every covered pair when there are at most
//! [`EXHAUSTIVE_PAIR_CAP`], otherwise a seeded sample of
//! [`SAMPLED_PAIR_BUDGET`] pairs.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Geometry, DEFAULT_CLOUD_K};
use crate::{Error, Result};

pub const EXHAUSTIVE_PAIR_CAP: u64 = 2_100_000;
pub const SAMPLED_PAIR_BUDGET: u64 = 1_000_000;

/// Seed used by every operation in this crate that needs randomness and is
/// not handed an explicit seed.
pub const DEFAULT_SEED: u64 = 42;

/// Shortest-path distances from a set of source vertices.
#[derive(Debug, Clone)]
pub struct GraphDistances {
    n: usize,
    sources: Vec<usize>,
    /// `dist[s][v]` = distance from `sources[s]` to vertex `v`.
    dist: Vec<Vec<f64>>,
}

impl GraphDistances {
    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    /// Distance from the `rank`-th source to vertex `v`.
    pub fn from_source(&self, rank: usize, v: usize) -> f64 {
        self.dist[rank][v]
    }

    pub fn max_finite(&self) -> f64 {
        self.dist
            .iter()
            .flatten()
            .copied()
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max)
    }
}

/// Weighted adjacency lists for a geometry's distance graph.
pub fn distance_graph(geom: &Geometry, cloud_k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); geom.n_points()];
    match geom {
        Geometry::Mesh(mesh) => {
            for &(i, j) in mesh.edges() {
                let d = mesh.edge_length(i, j);
                adj[i].push((j, d));
                adj[j].push((i, d));
            }
        }
        Geometry::Cloud(cloud) => {
            for (i, j, d) in cloud.symmetrized_knn_edges(cloud_k)? {
                adj[i].push((j, d));
                adj[j].push((i, d));
            }
        }
    }
    for list in &mut adj {
        list.sort_by(|a, b| a.0.cmp(&b.0));
    }
    Ok(adj)
}

/// Dijkstra from each source over the geometry's distance graph, with the
/// default cloud neighborhood size.
pub fn graph_distance(geom: &Geometry, sources: &[usize]) -> Result<GraphDistances> {
    graph_distance_k(geom, sources, DEFAULT_CLOUD_K)
}

pub fn graph_distance_k(geom: &Geometry, sources: &[usize], cloud_k: usize) -> Result<GraphDistances> {
    let n = geom.n_points();
    for &s in sources {
        if s >= n {
            return Err(Error::InvalidParameter(format!(
                "source vertex {s} out of range for {n} points"
            )));
        }
    }
    let adj = distance_graph(geom, cloud_k)?;

    let sizes = crate::geometry::component_sizes(n, |v| adj[v].iter().map(|&(w, _)| w));
    if sizes.len() != 1 {
        return Err(Error::Disconnected { sizes });
    }

    let dist = sources.iter().map(|&s| dijkstra(&adj, s)).collect();
    Ok(GraphDistances {
        n,
        sources: sources.to_vec(),
        dist,
    })
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap: BinaryHeap<Reverse<(OrdF64, usize)>> = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((OrdF64(0.0), source)));
    while let Some(Reverse((OrdF64(d), v))) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, len) in &adj[v] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Reverse((OrdF64(nd), w)));
            }
        }
    }
    dist
}

/// Total-order wrapper so distances can live in a binary heap.
#[derive(Copy, Clone, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// A set of vertex pairs with known intrinsic distances.
pub trait DistanceField {
    fn n_points(&self) -> usize;

    /// Number of covered (unordered) pairs, counting each at most once.
    fn covered_pairs(&self) -> u64;

    /// Visits every covered pair exactly once.
    fn for_each_pair(&self, f: &mut dyn FnMut(usize, usize, f64));

    /// Distance for an arbitrary pair if covered, used by the sampler.
    fn pair_distance(&self, i: usize, j: usize) -> Option<f64>;
}

impl DistanceField for GraphDistances {
    fn n_points(&self) -> usize {
        self.n
    }

    fn covered_pairs(&self) -> u64 {
        // (source, vertex) pairs, minus self-pairs, minus the double-counted
        // source-source pairs.
        let s = self.sources.len() as u64;
        s * (self.n as u64) - s - s * (s - 1) / 2
    }

    fn for_each_pair(&self, f: &mut dyn FnMut(usize, usize, f64)) {
        let mut source_rank = vec![usize::MAX; self.n];
        for (r, &s) in self.sources.iter().enumerate() {
            source_rank[s] = r;
        }
        for (r, &s) in self.sources.iter().enumerate() {
            for v in 0..self.n {
                if v == s {
                    continue;
                }
                // Skip pairs of sources already visited from the other end.
                if source_rank[v] < r {
                    continue;
                }
                f(s, v, self.dist[r][v]);
            }
        }
    }

    fn pair_distance(&self, i: usize, j: usize) -> Option<f64> {
        if let Some(r) = self.sources.iter().position(|&s| s == i) {
            return Some(self.dist[r][j]);
        }
        if let Some(r) = self.sources.iter().position(|&s| s == j) {
            return Some(self.dist[r][i]);
        }
        None
    }
}

/// How a scan chooses pairs from a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairScan {
    /// All covered pairs up to [`EXHAUSTIVE_PAIR_CAP`], otherwise a seeded
    /// sample of [`SAMPLED_PAIR_BUDGET`] pairs.
    Auto,
    /// Every covered pair, regardless of count.
    Exhaustive,
}

/// Runs `f` over the pairs selected by `mode`. Returns the number of pairs
/// visited. Deterministic for a fixed seed.
pub fn scan_pairs(
    field: &dyn DistanceField,
    mode: PairScan,
    seed: u64,
    f: &mut dyn FnMut(usize, usize, f64),
) -> u64 {
    let covered = field.covered_pairs();
    if mode == PairScan::Exhaustive || covered <= EXHAUSTIVE_PAIR_CAP {
        let mut count = 0u64;
        field.for_each_pair(&mut |i, j, d| {
            count += 1;
            f(i, j, d);
        });
        return count;
    }
    let n = field.n_points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = 0u64;
    let mut attempts = 0u64;
    let max_attempts = SAMPLED_PAIR_BUDGET * 20;
    while count < SAMPLED_PAIR_BUDGET && attempts < max_attempts {
        attempts += 1;
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        if let Some(d) = field.pair_distance(i, j) {
            count += 1;
            f(i, j, d);
        }
    }
    count
}

/// Evenly spread source vertices: all of them when pairing every vertex
/// against them stays within the exhaustive cap, otherwise a seeded sample
/// sized so that roughly [`SAMPLED_PAIR_BUDGET`] pairs are covered.
pub fn default_sources(n: usize, seed: u64) -> Vec<usize> {
    let all_pairs = (n as u64) * (n as u64 - 1) / 2;
    if all_pairs <= EXHAUSTIVE_PAIR_CAP {
        return (0..n).collect();
    }
    let want = ((SAMPLED_PAIR_BUDGET / n as u64) as usize + 1).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = vec![false; n];
    let mut sources = Vec::with_capacity(want);
    while sources.len() < want {
        let v = rng.random_range(0..n);
        if !picked[v] {
            picked[v] = true;
            sources.push(v);
        }
    }
    sources.sort_unstable();
    sources
}
