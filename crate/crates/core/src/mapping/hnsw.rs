//! Hierarchical navigable small-world graph over unit vectors.
//!
//! Distance is `1 - dot(a, b)`, i.e. cosine distance for normalized input.
//! Construction is sequential and seeded, so the same vectors and parameters
//! always produce the same graph. After construction the graph is read-only.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use fnv::FnvBuildHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HnswParams {
    /// Links per node on upper layers; layer 0 allows `2 * m`.
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 200,
            ef_search: 128,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Scored {
    dist: f32,
    id: u32,
}

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hnsw {
    pub(crate) dim: usize,
    pub(crate) params: HnswParams,
    pub(crate) vectors: Vec<f32>,
    /// `links[node][layer]`, one list per layer the node lives on.
    pub(crate) links: Vec<Vec<Vec<u32>>>,
    pub(crate) entry: Option<u32>,
}

impl Hnsw {
    /// Builds the graph by inserting `vectors` (row-major, `dim` wide) in order.
    pub fn build(dim: usize, params: HnswParams, vectors: Vec<f32>) -> Self {
        assert!(dim > 0 && vectors.len() % dim == 0, "vector buffer is not a multiple of dim");
        let n = vectors.len() / dim;
        let mut graph = Hnsw {
            dim,
            params: HnswParams {
                m: params.m.max(2),
                ..params
            },
            vectors,
            links: Vec::with_capacity(n),
            entry: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let ml = 1.0 / (graph.params.m as f64).ln();
        for id in 0..n as u32 {
            let u: f64 = rng.random::<f64>();
            let level = (-(1.0 - u).ln() * ml).floor() as usize;
            graph.insert(id, level.min(32));
        }
        graph
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &HnswParams {
        &self.params
    }

    pub fn vector(&self, id: usize) -> &[f32] {
        &self.vectors[id * self.dim..(id + 1) * self.dim]
    }

    fn top_layer(&self) -> usize {
        self.entry.map_or(0, |e| self.links[e as usize].len() - 1)
    }

    fn dist(&self, q: &[f32], id: u32) -> f32 {
        let v = self.vector(id as usize);
        1.0 - q.iter().zip(v).map(|(a, b)| a * b).sum::<f32>()
    }

    fn max_links(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.params.m
        } else {
            self.params.m
        }
    }

    fn insert(&mut self, id: u32, level: usize) {
        self.links.push(vec![Vec::new(); level + 1]);
        let Some(entry) = self.entry else {
            self.entry = Some(id);
            return;
        };
        let q = self.vector(id as usize).to_vec();
        let top = self.top_layer();
        let mut eps = vec![Scored {
            dist: self.dist(&q, entry),
            id: entry,
        }];
        for layer in (level + 1..=top).rev() {
            eps = self.search_layer(&q, &eps, 1, layer);
        }
        for layer in (0..=level.min(top)).rev() {
            let found = self.search_layer(&q, &eps, self.params.ef_construction, layer);
            let neighbors = self.select_neighbors(&found, self.params.m);
            self.links[id as usize][layer] = neighbors.iter().map(|s| s.id).collect();
            for s in &neighbors {
                self.connect(s.id, id, layer);
            }
            eps = found;
        }
        if level > top {
            self.entry = Some(id);
        }
    }

    fn connect(&mut self, from: u32, to: u32, layer: usize) {
        let cap = self.max_links(layer);
        self.links[from as usize][layer].push(to);
        if self.links[from as usize][layer].len() <= cap {
            return;
        }
        let base = self.vector(from as usize).to_vec();
        let mut cands: Vec<Scored> = self.links[from as usize][layer]
            .iter()
            .map(|&n| Scored {
                dist: self.dist(&base, n),
                id: n,
            })
            .collect();
        cands.sort();
        let kept = self.select_neighbors(&cands, cap);
        self.links[from as usize][layer] = kept.iter().map(|s| s.id).collect();
    }

    /// Diversity heuristic: keep a candidate only if it is closer to the base
    /// than to every already kept neighbor, then top up with the closest
    /// discarded ones. `cands` must be sorted by distance.
    fn select_neighbors(&self, cands: &[Scored], m: usize) -> Vec<Scored> {
        let mut kept: Vec<Scored> = Vec::with_capacity(m);
        let mut discarded = Vec::new();
        for &c in cands {
            if kept.len() >= m {
                break;
            }
            let cv = self.vector(c.id as usize);
            if kept.iter().all(|k| self.dist(cv, k.id) > c.dist) {
                kept.push(c);
            } else {
                discarded.push(c);
            }
        }
        for c in discarded {
            if kept.len() >= m {
                break;
            }
            kept.push(c);
        }
        kept.sort();
        kept
    }

    /// Beam search on one layer; returns up to `ef` nodes sorted by distance.
    fn search_layer(&self, q: &[f32], entry_points: &[Scored], ef: usize, layer: usize) -> Vec<Scored> {
        let mut visited: HashSet<u32, FnvBuildHasher> = HashSet::default();
        let mut candidates: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        let mut best: BinaryHeap<Scored> = BinaryHeap::new();
        for &ep in entry_points {
            if visited.insert(ep.id) {
                candidates.push(Reverse(ep));
                best.push(ep);
            }
        }
        while best.len() > ef {
            best.pop();
        }
        while let Some(Reverse(c)) = candidates.pop() {
            if best.len() >= ef && best.peek().is_some_and(|w| c.dist > w.dist) {
                break;
            }
            for &n in &self.links[c.id as usize][layer] {
                if !visited.insert(n) {
                    continue;
                }
                let s = Scored {
                    dist: self.dist(q, n),
                    id: n,
                };
                if best.len() < ef || best.peek().is_some_and(|w| s < *w) {
                    candidates.push(Reverse(s));
                    best.push(s);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    /// Approximate `k` nearest nodes to `query` as `(node, dot product)`,
    /// best first. `ef` is raised to at least `k`.
    pub fn search(&self, query: &[f32], k: usize, ef: usize) -> Vec<(usize, f32)> {
        let Some(entry) = self.entry else {
            return Vec::new();
        };
        let mut eps = vec![Scored {
            dist: self.dist(query, entry),
            id: entry,
        }];
        for layer in (1..=self.top_layer()).rev() {
            eps = self.search_layer(query, &eps, 1, layer);
        }
        let mut found = self.search_layer(query, &eps, ef.max(k), 0);
        found.truncate(k);
        found.into_iter().map(|s| (s.id as usize, 1.0 - s.dist)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn random_unit_vectors(n: usize, dim: usize, seed: u64) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n * dim);
        for _ in 0..n {
            let mut v: Vec<f32> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            crate::mapping::embed::normalize(&mut v);
            out.extend(v);
        }
        out
    }

    fn brute_top1(vectors: &[f32], dim: usize, q: &[f32]) -> usize {
        vectors
            .chunks(dim)
            .enumerate()
            .map(|(i, v)| (i, crate::mapping::embed::cosine(q, v)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .unwrap()
            .0
    }

    #[test]
    fn small_graph_recall() {
        let dim = 16;
        let data = random_unit_vectors(500, dim, 1);
        let g = Hnsw::build(dim, HnswParams::default(), data.clone());
        let probes = random_unit_vectors(100, dim, 2);
        let hits = probes
            .chunks(dim)
            .filter(|q| g.search(q, 1, 64)[0].0 == brute_top1(&data, dim, q))
            .count();
        assert!(hits >= 98, "{hits}/100");
    }

    #[test]
    fn build_is_deterministic_and_degree_bounded() {
        let dim = 8;
        let data = random_unit_vectors(300, dim, 3);
        let a = Hnsw::build(dim, HnswParams::default(), data.clone());
        let b = Hnsw::build(dim, HnswParams::default(), data);
        assert_eq!(a, b);
        for (node, layers) in a.links.iter().enumerate() {
            for (layer, ns) in layers.iter().enumerate() {
                assert!(ns.len() <= a.max_links(layer));
                assert!(!ns.contains(&(node as u32)));
            }
        }
    }

    #[test]
    fn empty_and_single() {
        let g = Hnsw::build(4, HnswParams::default(), vec![]);
        assert!(g.search(&[1.0, 0.0, 0.0, 0.0], 3, 10).is_empty());
        let g = Hnsw::build(4, HnswParams::default(), vec![0.0, 1.0, 0.0, 0.0]);
        let r = g.search(&[0.0, 1.0, 0.0, 0.0], 3, 10);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].0, 0);
    }
}
