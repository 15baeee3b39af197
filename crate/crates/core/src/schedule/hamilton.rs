use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{SemanticGraph, TypeId};
use crate::rng;

/// Largest node count solved exactly.
pub const EXACT_LIMIT: usize = 20;

/// Complete weighted graph over semantic graphs.
///
/// Pairs sharing `eta > 0` endpoint types get weight `1 - eta / S`, where
/// `S` sums `eta` over all such pairs; every other pair is joined by a
/// completion edge of weight 1. Two implicit virtual endpoints connect to
/// every node at weight 0. Weights are kept as exact numerators over `S`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityHypergraph {
    /// Node ids, sorted ascending.
    pub nodes: Vec<String>,
    /// Shared types `(i, j, eta)` for `i < j`.
    pub shared: Vec<(usize, usize, u32)>,
    pub denom: u32,
    numer: Vec<Vec<u32>>,
}

impl SimilarityHypergraph {
    /// Builds the hypergraph from each node's vertex-type set.
    pub fn from_type_sets<T: Ord>(nodes: Vec<(String, BTreeSet<T>)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Empty("hypergraph needs at least one semantic graph"));
        }
        let mut nodes = nodes;
        nodes.sort_by(|a, b| a.0.cmp(&b.0));
        if nodes.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateName("semantic graph id".into()));
        }
        let n = nodes.len();
        let mut shared = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let eta = nodes[i].1.intersection(&nodes[j].1).count() as u32;
                if eta > 0 {
                    shared.push((i, j, eta));
                }
            }
        }
        let denom = shared.iter().map(|s| s.2).sum::<u32>().max(1);
        let mut numer = vec![vec![denom; n]; n];
        for i in 0..n {
            numer[i][i] = 0;
        }
        for &(i, j, eta) in &shared {
            numer[i][j] = denom - eta;
            numer[j][i] = denom - eta;
        }
        Ok(Self {
            nodes: nodes.into_iter().map(|x| x.0).collect(),
            shared,
            denom,
            numer,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(id)).ok()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        f64::from(self.numer[i][j]) / f64::from(self.denom)
    }

    /// Weight numerator over [`SimilarityHypergraph::denom`].
    pub fn weight_numerator(&self, i: usize, j: usize) -> u32 {
        self.numer[i][j]
    }

    /// Full weight matrix over the nodes followed by the two virtual
    /// endpoints (indices `n` and `n + 1`).
    pub fn augmented(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n + 2]; n + 2];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = self.weight(i, j);
            }
        }
        m
    }

    fn path_numerator(&self, path: &[usize]) -> u64 {
        path.windows(2)
            .map(|w| u64::from(self.numer[w[0]][w[1]]))
            .sum()
    }
}

/// Node per semantic graph, keyed by the endpoint types whose projected
/// features it consumes.
pub fn build_hypergraph(sgs: &[SemanticGraph]) -> Result<SimilarityHypergraph> {
    SimilarityHypergraph::from_type_sets(
        sgs.iter()
            .map(|sg| (sg.id.clone(), sg.types_touched.clone()))
            .collect::<Vec<(String, BTreeSet<TypeId>)>>(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOrder {
    pub ids: Vec<String>,
    pub cost: f64,
}

impl ExecutionOrder {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Positions of `self.ids` inside `ids`; fails unless it is a
    /// permutation of them.
    pub fn positions(&self, ids: &[String]) -> Result<Vec<usize>> {
        if self.ids.len() != ids.len() {
            return Err(Error::InvalidOrder(format!(
                "order has {} graphs, expected {}",
                self.ids.len(),
                ids.len()
            )));
        }
        let mut seen = vec![false; ids.len()];
        self.ids
            .iter()
            .map(|id| {
                let i = ids
                    .iter()
                    .position(|x| x == id)
                    .ok_or_else(|| Error::InvalidOrder(format!("unknown graph `{id}`")))?;
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidOrder(format!("graph `{id}` repeated")));
                }
                Ok(i)
            })
            .collect()
    }
}

/// Sum of consecutive edge weights along `ids`.
pub fn path_cost(h: &SimilarityHypergraph, ids: &[String]) -> Result<f64> {
    let path = ExecutionOrder { ids: ids.to_vec(), cost: 0.0 }.positions(&h.nodes)?;
    Ok(h.path_numerator(&path) as f64 / f64::from(h.denom))
}

fn finish(h: &SimilarityHypergraph, path: Vec<usize>) -> ExecutionOrder {
    let cost = h.path_numerator(&path) as f64 / f64::from(h.denom);
    ExecutionOrder {
        ids: path.into_iter().map(|i| h.nodes[i].clone()).collect(),
        cost,
    }
}

/// Minimum-cost path through every node. Exact (bitmask dynamic program,
/// lexicographically smallest id sequence among optima) up to
/// [`EXACT_LIMIT`] nodes; nearest neighbor plus 2-opt beyond.
pub fn shortest_hamilton_path(h: &SimilarityHypergraph) -> ExecutionOrder {
    let n = h.len();
    if n <= EXACT_LIMIT {
        finish(h, exact(h))
    } else {
        finish(h, heuristic(h))
    }
}

fn exact(h: &SimilarityHypergraph) -> Vec<usize> {
    let n = h.len();
    let full = (1usize << n) - 1;
    // rest[mask * n + v]: cheapest way to visit the nodes outside `mask`
    // starting from `v`, where `mask` already contains `v`.
    let mut rest = vec![u32::MAX; (full + 1) * n];
    for v in 0..n {
        rest[full * n + v] = 0;
    }
    for mask in (1..full).rev() {
        for v in (0..n).filter(|v| mask & (1 << v) != 0) {
            let mut best = u32::MAX;
            for u in (0..n).filter(|u| mask & (1 << u) == 0) {
                let c = rest[(mask | 1 << u) * n + u].saturating_add(h.numer[v][u]);
                best = best.min(c);
            }
            rest[mask * n + v] = best;
        }
    }
    let opt = (0..n).map(|v| rest[(1 << v) * n + v]).min().unwrap();
    let mut v = (0..n).find(|&v| rest[(1 << v) * n + v] == opt).unwrap();
    let mut mask = 1usize << v;
    let mut path = vec![v];
    while mask != full {
        let remaining = rest[mask * n + v];
        let u = (0..n)
            .filter(|u| mask & (1 << u) == 0)
            .find(|&u| h.numer[v][u] + rest[(mask | 1 << u) * n + u] == remaining)
            .unwrap();
        mask |= 1 << u;
        path.push(u);
        v = u;
    }
    path
}

fn heuristic(h: &SimilarityHypergraph) -> Vec<usize> {
    let n = h.len();
    let mut best: Option<(u64, Vec<usize>)> = None;
    for start in 0..n {
        let mut used = vec![false; n];
        let mut path = vec![start];
        used[start] = true;
        while path.len() < n {
            let v = *path.last().unwrap();
            let u = (0..n)
                .filter(|&u| !used[u])
                .min_by_key(|&u| (h.numer[v][u], u))
                .unwrap();
            used[u] = true;
            path.push(u);
        }
        two_opt(h, &mut path);
        let c = h.path_numerator(&path);
        if best.as_ref().is_none_or(|(b, p)| c < *b || (c == *b && path < *p)) {
            best = Some((c, path));
        }
    }
    best.unwrap().1
}

/// Reverses segments while that lowers the open-path cost.
fn two_opt(h: &SimilarityHypergraph, path: &mut [usize]) {
    let n = path.len();
    let w = |a: usize, b: usize| i64::from(h.numer[a][b]);
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..n {
            for j in i + 1..n {
                // Reverse path[i..=j]; the edges at both ends change.
                let mut delta = 0i64;
                if i > 0 {
                    delta += w(path[i - 1], path[j]) - w(path[i - 1], path[i]);
                }
                if j + 1 < n {
                    delta += w(path[i], path[j + 1]) - w(path[j], path[j + 1]);
                }
                if delta < 0 {
                    path[i..=j].reverse();
                    improved = true;
                }
            }
        }
    }
}

/// Seeded uniform shuffle of the hypergraph's nodes.
pub fn random_order(h: &SimilarityHypergraph, seed: u64) -> ExecutionOrder {
    let mut path: Vec<usize> = (0..h.len()).collect();
    path.shuffle(&mut rng::stream(seed, "random_order"));
    finish(h, path)
}
