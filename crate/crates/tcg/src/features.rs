//! Topological metrics and the fixed 15-dimensional window embedding.
//!
//! Windows with fewer than two events embed as the zero vector (keeping only
//! the node count) so that idle periods never stall a stream.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{EventRecord, OperationKind};
use crate::graph::{weak_components, NodeKey, TemporalCorrelationGraph};
use crate::scalar::Scalar;

/// Bump when the feature layout below changes; persisted documents carry it.
pub const FEATURE_LAYOUT_VERSION: u32 = 1;
pub const FEATURE_COUNT: usize = 15;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "node_count",
    "edge_count",
    "edge_density",
    "global_clustering",
    "mean_local_clustering",
    "diameter",
    "max_out_strength",
    "top3_pagerank_mass",
    "mean_edge_weight",
    "write_read_ratio",
    "high_entropy_write_fraction",
    "rename_rate",
    "burstiness",
    "rare_transition_score",
    "unique_targets_per_second",
];

/// Floor applied to standard deviations to keep z-scoring finite.
pub const SIGMA_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("insufficient data: need at least {need}, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("transition model has an empty vocabulary")]
    UnfittedModel,
    #[error("smoothing alpha must be >= 0, got {0}")]
    InvalidSmoothing(f64),
}

/// Fixed-layout per-window embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureVector<S: Scalar> {
    pub node_count: S,
    pub edge_count: S,
    pub edge_density: S,
    pub global_clustering: S,
    pub mean_local_clustering: S,
    pub diameter: S,
    pub max_out_strength: S,
    pub top3_pagerank_mass: S,
    pub mean_edge_weight: S,
    pub write_read_ratio: S,
    pub high_entropy_write_fraction: S,
    pub rename_rate: S,
    pub burstiness: S,
    pub rare_transition_score: S,
    pub unique_targets_per_second: S,
}

impl<S: Scalar> FeatureVector<S> {
    pub fn zero() -> Self {
        Self::from_array([S::zero(); FEATURE_COUNT])
    }

    pub fn as_array(&self) -> [S; FEATURE_COUNT] {
        [
            self.node_count,
            self.edge_count,
            self.edge_density,
            self.global_clustering,
            self.mean_local_clustering,
            self.diameter,
            self.max_out_strength,
            self.top3_pagerank_mass,
            self.mean_edge_weight,
            self.write_read_ratio,
            self.high_entropy_write_fraction,
            self.rename_rate,
            self.burstiness,
            self.rare_transition_score,
            self.unique_targets_per_second,
        ]
    }

    pub fn from_array(a: [S; FEATURE_COUNT]) -> Self {
        FeatureVector {
            node_count: a[0],
            edge_count: a[1],
            edge_density: a[2],
            global_clustering: a[3],
            mean_local_clustering: a[4],
            diameter: a[5],
            max_out_strength: a[6],
            top3_pagerank_mass: a[7],
            mean_edge_weight: a[8],
            write_read_ratio: a[9],
            high_entropy_write_fraction: a[10],
            rename_rate: a[11],
            burstiness: a[12],
            rare_transition_score: a[13],
            unique_targets_per_second: a[14],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// E / (N * (N - 1)) for a directed simple graph; 0 when N < 2.
pub fn edge_density<S: Scalar>(graph: &TemporalCorrelationGraph<S>) -> S {
    let n = graph.node_count() as u64;
    if n < 2 {
        return S::zero();
    }
    S::of_u64(graph.edge_count() as u64) / S::of_u64(n * (n - 1))
}

fn simple_undirected<S: Scalar>(
    graph: &TemporalCorrelationGraph<S>,
) -> BTreeMap<NodeKey, BTreeSet<NodeKey>> {
    let mut adj: BTreeMap<NodeKey, BTreeSet<NodeKey>> = BTreeMap::new();
    for key in graph.nodes().keys() {
        adj.entry(*key).or_default();
    }
    for (from, to) in graph.edges().keys() {
        adj.get_mut(from).unwrap().insert(*to);
        adj.get_mut(to).unwrap().insert(*from);
    }
    adj
}

/// (global, mean local) clustering coefficients on the undirected projection.
///
/// Global is 3 * triangles / connected triples; nodes of degree < 2
/// contribute a local coefficient of 0.
pub fn clustering<S: Scalar>(graph: &TemporalCorrelationGraph<S>) -> (S, S) {
    let adj = simple_undirected(graph);
    if adj.is_empty() {
        return (S::zero(), S::zero());
    }
    let mut closed_triples: u64 = 0; // sum over nodes of triangles through them
    let mut triples: u64 = 0;
    let mut local_sum = S::zero();
    for neighbors in adj.values() {
        let deg = neighbors.len() as u64;
        let node_triples = deg * deg.saturating_sub(1) / 2;
        triples += node_triples;
        let mut node_closed: u64 = 0;
        let ns: Vec<&NodeKey> = neighbors.iter().collect();
        for i in 0..ns.len() {
            for j in (i + 1)..ns.len() {
                if adj[ns[i]].contains(ns[j]) {
                    node_closed += 1;
                }
            }
        }
        closed_triples += node_closed;
        if node_triples > 0 {
            local_sum = local_sum + S::of_u64(node_closed) / S::of_u64(node_triples);
        }
    }
    let global = if triples == 0 {
        S::zero()
    } else {
        S::of_u64(closed_triples) / S::of_u64(triples)
    };
    (global, local_sum / S::of_usize(adj.len()))
}

/// Hop-count diameter of the largest weakly connected component (undirected
/// projection); size ties break toward the component with the smallest key.
pub fn diameter<S: Scalar>(graph: &TemporalCorrelationGraph<S>) -> usize {
    if graph.node_count() <= 1 {
        return 0;
    }
    let components = weak_components(graph);
    let Some(component) = components.first() else {
        return 0;
    };
    let adj = simple_undirected(graph);
    let mut best = 0;
    for start in component {
        // BFS within the component.
        let mut dist: BTreeMap<NodeKey, usize> = BTreeMap::new();
        dist.insert(*start, 0);
        let mut queue = std::collections::VecDeque::from([*start]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            for v in &adj[&u] {
                if !dist.contains_key(v) {
                    dist.insert(*v, du + 1);
                    queue.push_back(*v);
                }
            }
        }
        best = best.max(dist.values().copied().max().unwrap_or(0));
    }
    best
}

/// Result of the weighted PageRank iteration.
#[derive(Debug, Clone)]
pub struct PageRank<S: Scalar> {
    pub scores: BTreeMap<NodeKey, S>,
    pub iterations: usize,
    /// False when max_iter was reached with L1 change still >= 1e-6; the last
    /// iterate is still returned.
    pub converged: bool,
}

pub const PAGERANK_DAMPING: f64 = 0.85;
pub const PAGERANK_TOL: f64 = 1e-9;
pub const PAGERANK_MAX_ITER: usize = 200;

/// Weighted PageRank: transition mass proportional to edge weight, dangling
/// nodes redistribute uniformly.
pub fn pagerank<S: Scalar>(
    graph: &TemporalCorrelationGraph<S>,
    damping: S,
    tol: S,
    max_iter: usize,
) -> PageRank<S> {
    let keys: Vec<NodeKey> = graph.nodes().keys().copied().collect();
    let n = keys.len();
    if n == 0 {
        return PageRank { scores: BTreeMap::new(), iterations: 0, converged: true };
    }
    let index: BTreeMap<NodeKey, usize> = keys
        .iter()
        .enumerate()
        .map(|(i, k)| (*k, i))
        .collect();
    let mut out_weight = vec![S::zero(); n];
    let mut edges = Vec::with_capacity(graph.edge_count());
    for ((from, to), attr) in graph.edges() {
        let (u, v) = (index[from], index[to]);
        out_weight[u] = out_weight[u] + attr.weight;
        edges.push((u, v, attr.weight));
    }
    let n_s = S::of_usize(n);
    let uniform = S::one() / n_s;
    let base = (S::one() - damping) / n_s;
    let mut scores = vec![uniform; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let dangling: S = (0..n)
            .filter(|&u| out_weight[u] == S::zero())
            .map(|u| scores[u])
            .sum();
        let mut next = vec![base + damping * dangling / n_s; n];
        for &(u, v, w) in &edges {
            next[v] = next[v] + damping * scores[u] * w / out_weight[u];
        }
        let l1: S = next
            .iter()
            .zip(scores.iter())
            .map(|(a, b)| (*a - *b).abs())
            .sum();
        scores = next;
        if l1 < tol {
            converged = true;
            break;
        }
        if iterations == max_iter {
            converged = l1 < S::of(1e-6);
        }
    }
    PageRank {
        scores: keys.into_iter().zip(scores).collect(),
        iterations,
        converged,
    }
}

/// Largest fraction of total edge weight leaving a single node; 0 without edges.
pub fn max_out_strength<S: Scalar>(graph: &TemporalCorrelationGraph<S>) -> S {
    let total = graph.total_edge_weight();
    if !(total > S::zero()) {
        return S::zero();
    }
    let mut per_node: BTreeMap<NodeKey, S> = BTreeMap::new();
    for ((from, _), attr) in graph.edges() {
        let entry = per_node.entry(*from).or_insert_with(S::zero);
        *entry = *entry + attr.weight;
    }
    per_node
        .values()
        .fold(S::zero(), |acc, w| acc.max(*w / total))
}

/// Global successor-count model fitted on benign training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TransitionModel<S: Scalar> {
    counts: BTreeMap<NodeKey, BTreeMap<NodeKey, u64>>,
    alpha: S,
    vocab_size: u64,
}

impl<S: Scalar> TransitionModel<S> {
    /// Aggregate edge counts over training windows. The vocabulary size is
    /// the number of distinct node keys observed (at least 1).
    pub fn fit<'a, I>(graphs: I, alpha: S) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = &'a TemporalCorrelationGraph<S>>,
        S: 'a,
    {
        if alpha < S::zero() || !alpha.is_finite() {
            return Err(FeatureError::InvalidSmoothing(alpha.to64()));
        }
        let mut counts: BTreeMap<NodeKey, BTreeMap<NodeKey, u64>> = BTreeMap::new();
        let mut vocab: BTreeSet<NodeKey> = BTreeSet::new();
        for graph in graphs {
            vocab.extend(graph.nodes().keys().copied());
            for ((from, to), attr) in graph.edges() {
                *counts.entry(*from).or_default().entry(*to).or_insert(0) +=
                    attr.count;
            }
        }
        Ok(TransitionModel {
            counts,
            alpha,
            vocab_size: (vocab.len() as u64).max(1),
        })
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    pub fn vocab_size(&self) -> u64 {
        self.vocab_size
    }

    pub fn is_fitted(&self) -> bool {
        self.vocab_size >= 1
    }

    /// Smoothed p(v|u). Unseen successors get the per-key share of the OOV
    /// mass; a fully unseen source yields the uniform 1/K.
    pub fn prob(&self, u: &NodeKey, v: &NodeKey) -> S {
        let row = self.counts.get(u);
        let total: u64 = row
            .map(|r| r.values().sum())
            .unwrap_or(0);
        let count = row.and_then(|r| r.get(v)).copied().unwrap_or(0);
        let denom = S::of_u64(total) + self.alpha * S::of_u64(self.vocab_size);
        if !(denom > S::zero()) {
            return S::zero();
        }
        (S::of_u64(count) + self.alpha) / denom
    }

    /// -log2 p(v|u), floored so alpha = 0 cannot produce infinities.
    pub fn surprisal(&self, u: &NodeKey, v: &NodeKey) -> S {
        let p = self.prob(u, v).max(S::min_positive_value());
        -p.log2()
    }

    fn mean_edge_surprisal(&self, graph: &TemporalCorrelationGraph<S>) -> S {
        if graph.edge_count() == 0 {
            return S::zero();
        }
        let sum: S = graph
            .edges()
            .keys()
            .map(|(u, v)| self.surprisal(u, v))
            .sum();
        sum / S::of_usize(graph.edge_count())
    }
}

/// Mean surprisal of the window's edges under the benign transition model;
/// 0 for an edgeless graph.
pub fn rare_transition_score<S: Scalar>(
    graph: &TemporalCorrelationGraph<S>,
    model: &TransitionModel<S>,
) -> Result<S, FeatureError> {
    if !model.is_fitted() {
        return Err(FeatureError::UnfittedModel);
    }
    Ok(model.mean_edge_surprisal(graph))
}

/// Assemble the 15-feature embedding of one window.
///
/// `slice` must be the window's aligned event slice; `entropy_threshold` is
/// the bits/byte cutoff for "high entropy" writes.
pub fn feature_vector<S: Scalar>(
    graph: &TemporalCorrelationGraph<S>,
    slice: &[EventRecord<S>],
    model: &TransitionModel<S>,
    entropy_threshold: S,
) -> FeatureVector<S> {
    let mut fv = FeatureVector::zero();
    fv.node_count = S::of_usize(graph.node_count());
    if slice.len() <= 1 {
        return fv;
    }
    let span = graph.window_end() - graph.window_start();
    fv.edge_count = S::of_usize(graph.edge_count());
    fv.edge_density = edge_density(graph);
    let (global, local) = clustering(graph);
    fv.global_clustering = global;
    fv.mean_local_clustering = local;
    fv.diameter = S::of_usize(diameter(graph));
    fv.max_out_strength = max_out_strength(graph);
    let pr = pagerank(
        graph,
        S::of(PAGERANK_DAMPING),
        S::of(PAGERANK_TOL),
        PAGERANK_MAX_ITER,
    );
    let mut ranked: Vec<S> = pr.scores.values().copied().collect();
    ranked.sort_by(|a, b| b.partial_cmp(a).expect("finite pagerank scores"));
    fv.top3_pagerank_mass = ranked.iter().take(3).copied().sum();
    if graph.edge_count() > 0 {
        fv.mean_edge_weight =
            graph.total_edge_weight() / S::of_usize(graph.edge_count());
    }

    let mut writes: u64 = 0;
    let mut reads: u64 = 0;
    let mut renames: u64 = 0;
    let mut high_entropy_writes: u64 = 0;
    let mut targets: BTreeSet<&str> = BTreeSet::new();
    for event in slice {
        match event.op {
            OperationKind::FileWrite => {
                writes += 1;
                if event.entropy >= entropy_threshold {
                    high_entropy_writes += 1;
                }
            }
            OperationKind::FileRead => reads += 1,
            OperationKind::FileRename => renames += 1,
            _ => {}
        }
        targets.insert(event.target.as_str());
    }
    fv.write_read_ratio = S::of_u64(writes) / S::of_u64(reads.max(1));
    if writes > 0 {
        fv.high_entropy_write_fraction =
            S::of_u64(high_entropy_writes) / S::of_u64(writes);
    }
    fv.rename_rate = S::of_u64(renames) / span;
    fv.unique_targets_per_second = S::of_usize(targets.len()) / span;

    if slice.len() >= 3 {
        let gaps: Vec<S> = slice
            .windows(2)
            .map(|pair| pair[1].ts - pair[0].ts)
            .collect();
        let n = S::of_usize(gaps.len());
        let mean = gaps.iter().copied().sum::<S>() / n;
        if mean > S::zero() {
            let var = gaps
                .iter()
                .map(|g| (*g - mean) * (*g - mean))
                .sum::<S>()
                / n;
            fv.burstiness = var.sqrt() / mean;
        }
    }
    fv.rare_transition_score = model.mean_edge_surprisal(graph);
    fv
}

/// Per-feature z-scoring parameters fitted on training windows.
///
/// Uses the population (1/n) standard deviation, floored at [`SIGMA_FLOOR`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Normalizer<S: Scalar> {
    pub mean: [S; FEATURE_COUNT],
    pub std: [S; FEATURE_COUNT],
}

pub fn fit_normalizer<S: Scalar>(
    vectors: &[FeatureVector<S>],
) -> Result<Normalizer<S>, FeatureError> {
    if vectors.len() < 2 {
        return Err(FeatureError::InsufficientData { need: 2, got: vectors.len() });
    }
    let n = S::of_usize(vectors.len());
    let mut mean = [S::zero(); FEATURE_COUNT];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v.as_array()) {
            *m = *m + x;
        }
    }
    for m in mean.iter_mut() {
        *m = *m / n;
    }
    let mut std = [S::zero(); FEATURE_COUNT];
    for v in vectors {
        for ((s, m), x) in std.iter_mut().zip(mean).zip(v.as_array()) {
            let d = x - m;
            *s = *s + d * d;
        }
    }
    let floor = S::of(SIGMA_FLOOR);
    for s in std.iter_mut() {
        *s = (*s / n).sqrt().max(floor);
    }
    Ok(Normalizer { mean, std })
}

pub fn apply_normalizer<S: Scalar>(
    norm: &Normalizer<S>,
    vector: &FeatureVector<S>,
) -> FeatureVector<S> {
    let mut out = vector.as_array();
    for ((x, m), s) in out.iter_mut().zip(norm.mean).zip(norm.std) {
        *x = (*x - m) / s;
    }
    FeatureVector::from_array(out)
}

/// CSV export with the fixed 15-column header.
pub fn write_features_csv<S: Scalar, W: Write>(
    mut out: W,
    vectors: &[FeatureVector<S>],
) -> std::io::Result<()> {
    writeln!(out, "{}", FEATURE_NAMES.join(","))?;
    for v in vectors {
        let row: Vec<String> = v.as_array().iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
