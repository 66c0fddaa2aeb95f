//! Temporal-correlation graphs over sliding windows of aligned events.
//!
//! Events aggregate into nodes keyed by (pid, operation, target class); a
//! directed edge u -> v accumulates whenever an event of key v follows a
//! correlated event of key u (same pid or same target string) within the
//! correlation horizon. Edge strength decays exponentially with the
//! inter-event gap, so tight behavioral chains weigh more than loose
//! coincidence.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::event::{EventRecord, OperationKind, TargetClass};
use crate::scalar::Scalar;

pub const GRAPH_SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid graph parameters: {0}")]
    InvalidParams(String),
    #[error("event at ts={ts} outside window [{start}, {end})")]
    WindowMismatch { ts: f64, start: f64, end: f64 },
    #[error("out-of-order event: ts={ts} precedes last inserted ts={last}")]
    OutOfOrderEvent { ts: f64, last: f64 },
    #[error("smoothing alpha must be >= 0, got {0}")]
    InvalidSmoothing(f64),
    #[error("vocabulary size {vocab} invalid: must be >= 1 and >= {nodes} graph nodes")]
    InvalidVocab { vocab: u64, nodes: u64 },
    #[error("node {0} not present in graph")]
    UnknownNode(String),
    #[error("malformed graph snapshot: {0}")]
    MalformedSnapshot(String),
}

/// Aggregation key for graph nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeKey {
    pub pid: u32,
    pub op: OperationKind,
    pub target_class: TargetClass,
}

impl NodeKey {
    pub fn of<S: Scalar>(event: &EventRecord<S>) -> Self {
        NodeKey {
            pid: event.pid,
            op: event.op,
            target_class: event.target_class(),
        }
    }
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.pid, self.op, self.target_class)
    }
}

impl FromStr for NodeKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(3, '/');
        let pid = parts
            .next()
            .and_then(|p| p.parse::<u32>().ok())
            .ok_or_else(|| format!("bad node key `{s}`"))?;
        let op = parts
            .next()
            .ok_or_else(|| format!("bad node key `{s}`"))?
            .parse::<OperationKind>()?;
        let class = parts
            .next()
            .ok_or_else(|| format!("bad node key `{s}`"))?
            .parse::<TargetClass>()?;
        Ok(NodeKey { pid, op, target_class: class })
    }
}

// Node keys serialize as "pid/OP/CLASS" so they can act as JSON map keys.
impl Serialize for NodeKey {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Per-node aggregates for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NodeAttr<S: Scalar> {
    pub count: u64,
    pub first_ts: S,
    pub last_ts: S,
    pub total_bytes: u64,
    /// FILE_WRITE occurrences feeding the entropy mean.
    pub write_count: u64,
    /// Sum of FILE_WRITE entropies; kept raw so merges stay exact.
    pub entropy_sum: S,
}

impl<S: Scalar> NodeAttr<S> {
    fn new(event: &EventRecord<S>) -> Self {
        let mut attr = NodeAttr {
            count: 0,
            first_ts: event.ts,
            last_ts: event.ts,
            total_bytes: 0,
            write_count: 0,
            entropy_sum: S::zero(),
        };
        attr.absorb(event);
        attr
    }

    fn absorb(&mut self, event: &EventRecord<S>) {
        self.count += 1;
        self.first_ts = self.first_ts.min(event.ts);
        self.last_ts = self.last_ts.max(event.ts);
        self.total_bytes += event.bytes;
        if event.op == OperationKind::FileWrite {
            self.write_count += 1;
            self.entropy_sum = self.entropy_sum + event.entropy;
        }
    }

    /// Mean entropy over the node's FILE_WRITE events; 0 if it has none.
    pub fn mean_entropy(&self) -> S {
        if self.write_count == 0 {
            S::zero()
        } else {
            self.entropy_sum / S::of_u64(self.write_count)
        }
    }
}

/// Per-edge aggregates for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EdgeAttr<S: Scalar> {
    /// Accumulated exp(-gap/tau) over correlated pairs; each increment <= 1.
    pub weight: S,
    pub count: u64,
    /// Sum of inter-event gaps; kept raw so merges stay exact.
    pub gap_sum: S,
    pub min_gap: S,
}

impl<S: Scalar> EdgeAttr<S> {
    fn new(gap: S, kernel: S) -> Self {
        EdgeAttr { weight: kernel, count: 1, gap_sum: gap, min_gap: gap }
    }

    fn absorb(&mut self, gap: S, kernel: S) {
        self.weight = self.weight + kernel;
        self.count += 1;
        self.gap_sum = self.gap_sum + gap;
        self.min_gap = self.min_gap.min(gap);
    }

    pub fn mean_gap(&self) -> S {
        self.gap_sum / S::of_u64(self.count)
    }
}

/// Construction parameters for window graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "")]
pub struct GraphParams<S: Scalar> {
    /// Correlation horizon in seconds: the largest gap that still creates an edge.
    pub delta: S,
    /// Decay constant of the edge-strength kernel exp(-gap/tau).
    pub tau: S,
    /// Window length in seconds.
    pub window: S,
    /// Window advance step in seconds.
    pub stride: S,
}

impl<S: Scalar> Default for GraphParams<S> {
    fn default() -> Self {
        GraphParams {
            delta: S::of(2.0),
            tau: S::of(1.0),
            window: S::of(40.0),
            stride: S::of(20.0),
        }
    }
}

impl<S: Scalar> GraphParams<S> {
    pub fn with_window(window: S) -> Self {
        GraphParams {
            window,
            stride: window / S::of(2.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.delta > S::zero()) || !self.delta.is_finite() {
            return Err(GraphError::InvalidParams("delta must be > 0".into()));
        }
        if !(self.tau > S::zero()) || !self.tau.is_finite() {
            return Err(GraphError::InvalidParams("tau must be > 0".into()));
        }
        if !(self.window > S::zero()) || !self.window.is_finite() {
            return Err(GraphError::InvalidParams("window must be > 0".into()));
        }
        if !(self.stride > S::zero()) || self.stride > self.window {
            return Err(GraphError::InvalidParams(
                "stride must satisfy 0 < stride <= window".into(),
            ));
        }
        Ok(())
    }

    /// Start of the k-th window on the stride grid.
    pub fn window_start(&self, k: usize) -> S {
        S::of_usize(k) * self.stride
    }

    /// Index of the last grid window whose start does not exceed `ts`.
    pub fn last_window_index(&self, ts: S) -> usize {
        (ts / self.stride).floor().to64() as usize
    }
}

/// A directed, weighted, aggregated event graph for one time window.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalCorrelationGraph<S: Scalar> {
    window_start: S,
    window_end: S,
    params: GraphParams<S>,
    nodes: BTreeMap<NodeKey, NodeAttr<S>>,
    edges: BTreeMap<(NodeKey, NodeKey), EdgeAttr<S>>,
    event_count: u64,
}

impl<S: Scalar> TemporalCorrelationGraph<S> {
    fn empty(start: S, end: S, params: GraphParams<S>) -> Self {
        TemporalCorrelationGraph {
            window_start: start,
            window_end: end,
            params,
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            event_count: 0,
        }
    }

    pub fn window_start(&self) -> S {
        self.window_start
    }

    pub fn window_end(&self) -> S {
        self.window_end
    }

    pub fn params(&self) -> &GraphParams<S> {
        &self.params
    }

    pub fn nodes(&self) -> &BTreeMap<NodeKey, NodeAttr<S>> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeMap<(NodeKey, NodeKey), EdgeAttr<S>> {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn event_count(&self) -> u64 {
        self.event_count
    }

    pub fn total_edge_weight(&self) -> S {
        self.edges.values().map(|e| e.weight).sum()
    }

    fn ingest(&mut self, event: &EventRecord<S>, recent: &VecDeque<EventRecord<S>>) {
        let key = NodeKey::of(event);
        for prior in recent.iter() {
            let gap = event.ts - prior.ts;
            if !(gap > S::zero()) || gap > self.params.delta {
                continue;
            }
            if prior.pid != event.pid && prior.target != event.target {
                continue;
            }
            let prior_key = NodeKey::of(prior);
            if prior_key == key {
                continue;
            }
            let kernel = (-(gap / self.params.tau)).exp();
            self.edges
                .entry((prior_key, key))
                .and_modify(|attr| attr.absorb(gap, kernel))
                .or_insert_with(|| EdgeAttr::new(gap, kernel));
        }
        self.nodes
            .entry(key)
            .and_modify(|attr| attr.absorb(event))
            .or_insert_with(|| NodeAttr::new(event));
        self.event_count += 1;
    }

    pub fn to_snapshot(&self) -> GraphSnapshot<S> {
        GraphSnapshot {
            format_version: GRAPH_SNAPSHOT_VERSION,
            window_start: self.window_start,
            window_end: self.window_end,
            params: self.params,
            event_count: self.event_count,
            nodes: self
                .nodes
                .iter()
                .map(|(key, attr)| NodeSnapshot { key: *key, attr: attr.clone() })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|((from, to), attr)| EdgeSnapshot {
                    from: *from,
                    to: *to,
                    attr: attr.clone(),
                })
                .collect(),
        }
    }
}

/// One sliding window over an aligned event sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSlice<'a, S: Scalar> {
    pub start: S,
    pub end: S,
    pub events: &'a [EventRecord<S>],
}

/// Window bounds plus the contiguous index range of events inside each.
pub fn window_ranges<S: Scalar>(
    events: &[EventRecord<S>],
    params: &GraphParams<S>,
) -> Vec<(S, S, std::ops::Range<usize>)> {
    let Some(last) = events.last() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for k in 0..=params.last_window_index(last.ts) {
        let start = params.window_start(k);
        let end = start + params.window;
        let lo = events.partition_point(|e| e.ts < start);
        let hi = events.partition_point(|e| e.ts < end);
        out.push((start, end, lo..hi));
    }
    out
}

/// Enumerate half-open windows [k*stride, k*stride + window) covering
/// [0, last ts], each with the contiguous event slice falling inside it.
pub fn windows<'a, S: Scalar>(
    events: &'a [EventRecord<S>],
    params: &GraphParams<S>,
) -> Vec<WindowSlice<'a, S>> {
    window_ranges(events, params)
        .into_iter()
        .map(|(start, end, range)| WindowSlice { start, end, events: &events[range] })
        .collect()
}

/// Build a window graph from its aligned event slice in one pass.
///
/// Cost is O(n * b) where b is the number of events inside the correlation
/// horizon at any time.
pub fn build_graph<S: Scalar>(
    slice: &[EventRecord<S>],
    start: S,
    end: S,
    params: &GraphParams<S>,
) -> Result<TemporalCorrelationGraph<S>, GraphError> {
    let mut graph = TemporalCorrelationGraph::empty(start, end, *params);
    let mut recent: VecDeque<EventRecord<S>> = VecDeque::new();
    for event in slice {
        if event.ts < start || event.ts >= end {
            return Err(GraphError::WindowMismatch {
                ts: event.ts.to64(),
                start: start.to64(),
                end: end.to64(),
            });
        }
        while let Some(front) = recent.front() {
            if event.ts - front.ts > params.delta {
                recent.pop_front();
            } else {
                break;
            }
        }
        graph.ingest(event, &recent);
        recent.push_back(event.clone());
    }
    Ok(graph)
}

/// Incremental construction of a single window graph from an event stream.
///
/// Feeding a builder one event at a time yields exactly the graph
/// [`build_graph`] produces for the same slice.
#[derive(Debug, Clone)]
pub struct GraphBuilder<S: Scalar> {
    graph: TemporalCorrelationGraph<S>,
    recent: VecDeque<EventRecord<S>>,
    last_ts: Option<S>,
}

impl<S: Scalar> GraphBuilder<S> {
    pub fn new(start: S, end: S, params: GraphParams<S>) -> Self {
        GraphBuilder {
            graph: TemporalCorrelationGraph::empty(start, end, params),
            recent: VecDeque::new(),
            last_ts: None,
        }
    }

    /// Insert the next event in stream order.
    pub fn push(&mut self, event: &EventRecord<S>) -> Result<(), GraphError> {
        if let Some(last) = self.last_ts {
            if event.ts < last {
                return Err(GraphError::OutOfOrderEvent {
                    ts: event.ts.to64(),
                    last: last.to64(),
                });
            }
        }
        if event.ts < self.graph.window_start || event.ts >= self.graph.window_end {
            return Err(GraphError::WindowMismatch {
                ts: event.ts.to64(),
                start: self.graph.window_start.to64(),
                end: self.graph.window_end.to64(),
            });
        }
        while let Some(front) = self.recent.front() {
            if event.ts - front.ts > self.graph.params.delta {
                self.recent.pop_front();
            } else {
                break;
            }
        }
        self.graph.ingest(event, &self.recent);
        self.recent.push_back(event.clone());
        self.last_ts = Some(event.ts);
        Ok(())
    }

    pub fn graph(&self) -> &TemporalCorrelationGraph<S> {
        &self.graph
    }

    pub fn into_graph(self) -> TemporalCorrelationGraph<S> {
        self.graph
    }
}

/// Smoothed successor distribution of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorDistribution<S: Scalar> {
    pub probs: BTreeMap<NodeKey, S>,
    /// Mass reserved for the unlisted remainder of the vocabulary.
    pub oov: S,
}

/// Additive-smoothed transition probabilities from edge counts:
/// p(v|u) = (count(u->v) + alpha) / (sum_x count(u->x) + alpha * K).
pub fn transition_probabilities<S: Scalar>(
    graph: &TemporalCorrelationGraph<S>,
    alpha: S,
    vocab_size: u64,
) -> Result<BTreeMap<NodeKey, SuccessorDistribution<S>>, GraphError> {
    if alpha < S::zero() || !alpha.is_finite() {
        return Err(GraphError::InvalidSmoothing(alpha.to64()));
    }
    let nodes = graph.node_count() as u64;
    if vocab_size < 1 || vocab_size < nodes {
        return Err(GraphError::InvalidVocab { vocab: vocab_size, nodes });
    }
    let k = S::of_u64(vocab_size);
    let mut successors: BTreeMap<NodeKey, Vec<(NodeKey, u64)>> = BTreeMap::new();
    for ((from, to), attr) in &graph.edges {
        successors.entry(*from).or_default().push((*to, attr.count));
    }
    let mut out = BTreeMap::new();
    for u in graph.nodes.keys() {
        let succ = successors.get(u).map(Vec::as_slice).unwrap_or(&[]);
        let total: u64 = succ.iter().map(|(_, c)| c).sum();
        let denom = S::of_u64(total) + alpha * k;
        let mut probs = BTreeMap::new();
        for (v, count) in succ {
            probs.insert(*v, (S::of_u64(*count) + alpha) / denom);
        }
        let unlisted = S::of_u64(vocab_size - succ.len() as u64);
        let oov = if denom > S::zero() { unlisted * alpha / denom } else { S::one() };
        out.insert(*u, SuccessorDistribution { probs, oov });
    }
    Ok(out)
}

fn undirected_adjacency<S: Scalar>(
    graph: &TemporalCorrelationGraph<S>,
) -> BTreeMap<NodeKey, BTreeSet<NodeKey>> {
    let mut adj: BTreeMap<NodeKey, BTreeSet<NodeKey>> = BTreeMap::new();
    for key in graph.nodes.keys() {
        adj.entry(*key).or_default();
    }
    for (from, to) in graph.edges.keys() {
        adj.entry(*from).or_default().insert(*to);
        adj.entry(*to).or_default().insert(*from);
    }
    adj
}

/// Induced subgraph on the weakly connected component containing `seed`.
pub fn extract_component<S: Scalar>(
    graph: &TemporalCorrelationGraph<S>,
    seed: &NodeKey,
) -> Result<TemporalCorrelationGraph<S>, GraphError> {
    if !graph.nodes.contains_key(seed) {
        return Err(GraphError::UnknownNode(seed.to_string()));
    }
    let adj = undirected_adjacency(graph);
    let mut member: BTreeSet<NodeKey> = BTreeSet::new();
    let mut queue = VecDeque::from([*seed]);
    member.insert(*seed);
    while let Some(u) = queue.pop_front() {
        for v in &adj[&u] {
            if member.insert(*v) {
                queue.push_back(*v);
            }
        }
    }
    let nodes: BTreeMap<NodeKey, NodeAttr<S>> = graph
        .nodes
        .iter()
        .filter(|(k, _)| member.contains(k))
        .map(|(k, a)| (*k, a.clone()))
        .collect();
    let edges: BTreeMap<(NodeKey, NodeKey), EdgeAttr<S>> = graph
        .edges
        .iter()
        .filter(|((f, t), _)| member.contains(f) && member.contains(t))
        .map(|(k, a)| (*k, a.clone()))
        .collect();
    let event_count = nodes.values().map(|a| a.count).sum();
    Ok(TemporalCorrelationGraph {
        window_start: graph.window_start,
        window_end: graph.window_end,
        params: graph.params,
        nodes,
        edges,
        event_count,
    })
}

/// Weakly connected components, each a sorted node set, ordered by
/// (descending size, smallest contained key).
pub fn weak_components<S: Scalar>(
    graph: &TemporalCorrelationGraph<S>,
) -> Vec<BTreeSet<NodeKey>> {
    let adj = undirected_adjacency(graph);
    let mut seen: BTreeSet<NodeKey> = BTreeSet::new();
    let mut components = Vec::new();
    for start in graph.nodes.keys() {
        if seen.contains(start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([*start]);
        comp.insert(*start);
        while let Some(u) = queue.pop_front() {
            for v in &adj[&u] {
                if comp.insert(*v) {
                    queue.push_back(*v);
                }
            }
        }
        seen.extend(comp.iter().copied());
        components.push(comp);
    }
    components.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then_with(|| a.first().cmp(&b.first()))
    });
    components
}

/// Deterministic DOT export. Nodes appear in sorted key order; edge labels
/// carry the accumulated weight to three decimals.
pub fn to_dot<S: Scalar>(graph: &TemporalCorrelationGraph<S>) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "// temporal correlation graph: window [{}, {}), {} events",
        graph.window_start, graph.window_end, graph.event_count
    )
    .unwrap();
    if graph.nodes.is_empty() {
        out.push_str("digraph tcg {}\n");
        return out;
    }
    out.push_str("digraph tcg {\n");
    for (key, attr) in &graph.nodes {
        writeln!(
            out,
            "  \"{key}\" [label=\"pid={} {} {} n={}\"];",
            key.pid, key.op, key.target_class, attr.count
        )
        .unwrap();
    }
    for ((from, to), attr) in &graph.edges {
        writeln!(
            out,
            "  \"{from}\" -> \"{to}\" [label=\"{:.3}\"];",
            attr.weight.to64()
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NodeSnapshot<S: Scalar> {
    pub key: NodeKey,
    #[serde(flatten)]
    pub attr: NodeAttr<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EdgeSnapshot<S: Scalar> {
    pub from: NodeKey,
    pub to: NodeKey,
    #[serde(flatten)]
    pub attr: EdgeAttr<S>,
}

/// Serializable form of a window graph for retrospective analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GraphSnapshot<S: Scalar> {
    pub format_version: u32,
    pub window_start: S,
    pub window_end: S,
    pub params: GraphParams<S>,
    pub event_count: u64,
    pub nodes: Vec<NodeSnapshot<S>>,
    pub edges: Vec<EdgeSnapshot<S>>,
}

impl<S: Scalar> TryFrom<GraphSnapshot<S>> for TemporalCorrelationGraph<S> {
    type Error = GraphError;

    fn try_from(snap: GraphSnapshot<S>) -> Result<Self, GraphError> {
        if snap.format_version != GRAPH_SNAPSHOT_VERSION {
            return Err(GraphError::MalformedSnapshot(format!(
                "unsupported snapshot version {}",
                snap.format_version
            )));
        }
        let mut nodes = BTreeMap::new();
        for node in snap.nodes {
            if nodes.insert(node.key, node.attr).is_some() {
                return Err(GraphError::MalformedSnapshot(format!(
                    "duplicate node {}",
                    node.key
                )));
            }
        }
        let mut edges = BTreeMap::new();
        for edge in snap.edges {
            if !nodes.contains_key(&edge.from) || !nodes.contains_key(&edge.to) {
                return Err(GraphError::MalformedSnapshot(format!(
                    "edge {} -> {} references a missing node",
                    edge.from, edge.to
                )));
            }
            if edge.from == edge.to {
                return Err(GraphError::MalformedSnapshot("self-loop".into()));
            }
            edges.insert((edge.from, edge.to), edge.attr);
        }
        Ok(TemporalCorrelationGraph {
            window_start: snap.window_start,
            window_end: snap.window_end,
            params: snap.params,
            nodes,
            edges,
            event_count: snap.event_count,
        })
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::classify_target;

    type Ev = EventRecord<f64>;

    fn ev(ts: f64, seq: u64, pid: u32, op: OperationKind, target: &str) -> Ev {
        EventRecord {
            ts,
            seq,
            pid,
            proc: "p".into(),
            op,
            target: target.into(),
            bytes: 10,
            entropy: if op == OperationKind::FileWrite { 5.0 } else { 0.0 },
        }
    }

    fn params() -> GraphParams<f64> {
        GraphParams::default()
    }

    #[test]
    fn windows_empty_trace() {
        assert!(windows::<f64>(&[], &params()).is_empty());
    }

    #[test]
    fn windows_grid_arithmetic() {
        let events: Vec<Ev> = [0.0, 10.0, 50.0]
            .iter()
            .enumerate()
            .map(|(i, &ts)| ev(ts, i as u64, 1, OperationKind::FileRead, "a"))
            .collect();
        let ws = windows(&events, &params());
        let starts: Vec<f64> = ws.iter().map(|w| w.start).collect();
        assert_eq!(starts, vec![0.0, 20.0, 40.0]);
        assert_eq!(ws[0].events.len(), 2);
        assert_eq!(ws[2].events.len(), 1);
    }

    #[test]
    fn windows_cover_every_event_bounded_multiplicity() {
        // Brute-force membership check against the emitted slices.
        let p = params();
        let events: Vec<Ev> = (0..500)
            .map(|i| ev((i as f64 * 0.37) % 173.0, i as u64, 1, OperationKind::FileRead, "a"))
            .collect();
        let events = crate::event::align_events(events).unwrap();
        let ws = windows(&events, &p);
        let max_windows = (p.window / p.stride).ceil() as usize;
        for e in &events {
            let member = ws
                .iter()
                .filter(|w| {
                    w.events.iter().any(|x| x.seq == e.seq && x.ts == e.ts)
                })
                .count();
            let by_bounds = ws
                .iter()
                .filter(|w| e.ts >= w.start && e.ts < w.end)
                .count();
            assert_eq!(member, by_bounds);
            assert!(member >= 1, "event at {} uncovered", e.ts);
            assert!(member <= max_windows);
        }
    }

    #[test]
    fn single_event_graph() {
        let slice = [ev(1.0, 0, 1, OperationKind::FileRead, "a")];
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.event_count(), 1);
    }

    #[test]
    fn edge_weight_closed_form() {
        let slice = [
            ev(1.0, 0, 1, OperationKind::FileRead, "a"),
            ev(2.0, 1, 1, OperationKind::FileWrite, "b"),
        ];
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        assert_eq!(g.edge_count(), 1);
        let attr = g.edges().values().next().unwrap();
        assert_eq!(attr.weight, (-1.0_f64).exp());
        assert_eq!(attr.count, 1);
        assert_eq!(attr.min_gap, 1.0);
        assert_eq!(attr.mean_gap(), 1.0);
    }

    #[test]
    fn horizon_cutoff_and_ties() {
        let slice = [
            ev(1.0, 0, 1, OperationKind::FileRead, "a"),
            ev(3.5, 1, 1, OperationKind::FileWrite, "b"),
        ];
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        assert_eq!(g.edge_count(), 0, "gap 2.5 exceeds delta");

        let slice = [
            ev(1.0, 0, 1, OperationKind::FileRead, "a"),
            ev(1.0, 1, 1, OperationKind::FileWrite, "b"),
        ];
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        assert_eq!(g.edge_count(), 0, "simultaneous events are not causal");
    }

    #[test]
    fn uncorrelated_events_make_no_edge() {
        let slice = [
            ev(1.0, 0, 1, OperationKind::FileRead, "a"),
            ev(1.5, 1, 2, OperationKind::FileWrite, "b"),
        ];
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        assert_eq!(g.edge_count(), 0);

        // Same target correlates across pids.
        let slice = [
            ev(1.0, 0, 1, OperationKind::FileRead, "a"),
            ev(1.5, 1, 2, OperationKind::FileWrite, "a"),
        ];
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn window_mismatch_detected() {
        let slice = [ev(41.0, 0, 1, OperationKind::FileRead, "a")];
        assert!(matches!(
            build_graph(&slice, 0.0, 40.0, &params()),
            Err(GraphError::WindowMismatch { .. })
        ));
    }

    fn seeded_slice(seed: u64, n: usize, span: f64) -> Vec<Ev> {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let ops = [
            OperationKind::FileRead,
            OperationKind::FileWrite,
            OperationKind::FileRename,
            OperationKind::NetConnect,
            OperationKind::RegSet,
        ];
        let targets = ["a.docx", "b.txt", "/tmp/x", "10.0.0.1:80", "HKLM/r", "c.bin"];
        let mut events: Vec<Ev> = (0..n)
            .map(|i| {
                let op = ops[rng.random_range(0..ops.len())];
                EventRecord {
                    ts: rng.random_range(0.0..span),
                    seq: i as u64,
                    pid: rng.random_range(1..4),
                    proc: "p".into(),
                    op,
                    target: targets[rng.random_range(0..targets.len())].into(),
                    bytes: rng.random_range(0..4096),
                    entropy: if op == OperationKind::FileWrite {
                        rng.random_range(0.0..8.0)
                    } else {
                        0.0
                    },
                }
            })
            .collect();
        events = crate::event::align_events(events).unwrap();
        events
    }

    /// O(n^2) pairwise oracle mirroring the construction contract.
    fn quadratic_graph(slice: &[Ev], start: f64, end: f64, p: &GraphParams<f64>) -> TemporalCorrelationGraph<f64> {
        let mut g = TemporalCorrelationGraph::empty(start, end, *p);
        for (j, v) in slice.iter().enumerate() {
            let vk = NodeKey::of(v);
            for u in slice.iter().take(j) {
                let gap = v.ts - u.ts;
                if !(gap > 0.0) || gap > p.delta {
                    continue;
                }
                if u.pid != v.pid && u.target != v.target {
                    continue;
                }
                let uk = NodeKey::of(u);
                if uk == vk {
                    continue;
                }
                let kernel = (-(gap / p.tau)).exp();
                g.edges
                    .entry((uk, vk))
                    .and_modify(|a| a.absorb(gap, kernel))
                    .or_insert_with(|| EdgeAttr::new(gap, kernel));
            }
            g.nodes
                .entry(vk)
                .and_modify(|a| a.absorb(v))
                .or_insert_with(|| NodeAttr::new(v));
            g.event_count += 1;
        }
        g
    }

    #[test]
    fn build_matches_quadratic_oracle() {
        for seed in 0..10 {
            let slice = seeded_slice(seed, 50, 39.9);
            let got = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
            let want = quadratic_graph(&slice, 0.0, 40.0, &params());
            assert_eq!(got, want, "seed {seed}");
        }
    }

    #[test]
    fn streaming_equals_batch() {
        let slice = seeded_slice(42, 1000, 39.9);
        let batch = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        let mut builder = GraphBuilder::new(0.0, 40.0, params());
        for e in &slice {
            builder.push(e).unwrap();
        }
        assert_eq!(builder.into_graph(), batch);
    }

    #[test]
    fn out_of_order_rejected() {
        let mut builder = GraphBuilder::new(0.0, 40.0, params());
        builder.push(&ev(5.0, 0, 1, OperationKind::FileRead, "a")).unwrap();
        assert!(matches!(
            builder.push(&ev(4.0, 1, 1, OperationKind::FileRead, "a")),
            Err(GraphError::OutOfOrderEvent { .. })
        ));
    }

    #[test]
    fn monotone_growth_under_insertion() {
        let slice = seeded_slice(7, 200, 39.9);
        let mut builder = GraphBuilder::new(0.0, 40.0, params());
        let mut prev_nodes = 0;
        let mut prev_edges = 0;
        for e in &slice {
            builder.push(e).unwrap();
            let g = builder.graph();
            assert!(g.node_count() >= prev_nodes);
            assert!(g.edge_count() >= prev_edges);
            prev_nodes = g.node_count();
            prev_edges = g.edge_count();
        }
    }

    #[test]
    fn edge_invariants_hold() {
        let slice = seeded_slice(3, 400, 39.9);
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        for attr in g.edges().values() {
            assert!(attr.weight > 0.0);
            assert!(attr.weight <= attr.count as f64 + 1e-12);
            assert!(attr.min_gap > 0.0);
            assert!(attr.min_gap <= attr.mean_gap());
            assert!(attr.mean_gap() <= g.params().delta);
        }
        for ((f, t), _) in g.edges() {
            assert_ne!(f, t, "self-loop");
            assert!(g.nodes().contains_key(f));
            assert!(g.nodes().contains_key(t));
        }
    }

    #[test]
    fn transition_probability_arithmetic() {
        // counts {A->B:3, A->C:1}, alpha=1, K=3 -> 4/7, 2/7, OOV 1/7.
        let a = ev(0.1, 0, 1, OperationKind::FileRead, "x.docx");
        let b = ev(0.4, 99, 1, OperationKind::FileWrite, "x.docx");
        let c = ev(0.6, 100, 1, OperationKind::RegSet, "HKLM/k");
        let mut slice = Vec::new();
        for i in 0..3u64 {
            let mut a2 = a.clone();
            a2.ts += i as f64 * 10.0;
            a2.seq = i * 10;
            let mut b2 = b.clone();
            b2.ts += i as f64 * 10.0;
            b2.seq = i * 10 + 1;
            slice.push(a2);
            slice.push(b2);
        }
        let mut a3 = a.clone();
        a3.ts = 30.0;
        a3.seq = 50;
        let mut c3 = c.clone();
        c3.ts = 30.4;
        c3.seq = 51;
        slice.push(a3);
        slice.push(c3);
        let slice = crate::event::align_events(slice).unwrap();
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        let a_key = NodeKey::of(&a);
        let dist = transition_probabilities(&g, 1.0, 3).unwrap();
        let row = &dist[&a_key];
        assert_eq!(row.probs[&NodeKey::of(&b)], 4.0 / 7.0);
        assert_eq!(row.probs[&NodeKey::of(&c)], 2.0 / 7.0);
        assert_eq!(row.oov, 1.0 / 7.0);
    }

    #[test]
    fn transition_no_out_edges_all_oov() {
        let slice = [ev(1.0, 0, 1, OperationKind::FileRead, "a")];
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        let dist = transition_probabilities(&g, 1.0, 5).unwrap();
        let row = dist.values().next().unwrap();
        assert!(row.probs.is_empty());
        assert_eq!(row.oov, 1.0);
    }

    #[test]
    fn transition_rows_sum_to_one() {
        let slice = seeded_slice(9, 300, 39.9);
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        let dist = transition_probabilities(&g, 0.7, 64).unwrap();
        for row in dist.values() {
            let total: f64 = row.probs.values().sum::<f64>() + row.oov;
            assert!((total - 1.0).abs() < 1e-9, "row sums to {total}");
        }
    }

    #[test]
    fn transition_validates_inputs() {
        let slice = [ev(1.0, 0, 1, OperationKind::FileRead, "a")];
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        assert!(matches!(
            transition_probabilities(&g, -0.1, 5),
            Err(GraphError::InvalidSmoothing(_))
        ));
        assert!(matches!(
            transition_probabilities(&g, 1.0, 0),
            Err(GraphError::InvalidVocab { .. })
        ));
    }

    #[test]
    fn component_extraction_partitions_nodes() {
        let slice = seeded_slice(21, 120, 39.9);
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        let comps = weak_components(&g);
        let mut seen = BTreeSet::new();
        for comp in &comps {
            for k in comp {
                assert!(seen.insert(*k), "component overlap at {k}");
            }
            let sub = extract_component(&g, comp.first().unwrap()).unwrap();
            assert_eq!(&sub.nodes().keys().copied().collect::<BTreeSet<_>>(), comp);
            for (key, attr) in sub.nodes() {
                assert_eq!(attr, &g.nodes()[key]);
            }
        }
        assert_eq!(seen.len(), g.node_count());

        let missing = NodeKey {
            pid: 999_999,
            op: OperationKind::CryptoApi,
            target_class: TargetClass::Other,
        };
        assert!(matches!(
            extract_component(&g, &missing),
            Err(GraphError::UnknownNode(_))
        ));
    }

    #[test]
    fn dot_export_shapes() {
        let g = build_graph::<f64>(&[], 0.0, 40.0, &params()).unwrap();
        let dot = to_dot(&g);
        assert!(dot.contains("digraph tcg {}"));
        assert!(dot.starts_with("//"));

        let slice = [
            ev(1.0, 0, 1, OperationKind::FileRead, "a"),
            ev(2.0, 1, 1, OperationKind::FileWrite, "b"),
        ];
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        let dot = to_dot(&g);
        assert_eq!(dot.matches("->").count(), 1);
        assert_eq!(dot, to_dot(&g), "byte-identical on repeat");
    }

    #[test]
    fn snapshot_round_trip() {
        let slice = seeded_slice(5, 200, 39.9);
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        let json = serde_json::to_string(&g.to_snapshot()).unwrap();
        let snap: GraphSnapshot<f64> = serde_json::from_str(&json).unwrap();
        let back = TemporalCorrelationGraph::try_from(snap).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn node_key_string_form_round_trips() {
        let key = NodeKey {
            pid: 42,
            op: OperationKind::FileWrite,
            target_class: TargetClass::UserDoc,
        };
        assert_eq!(key.to_string(), "42/FILE_WRITE/USER_DOC");
        assert_eq!("42/FILE_WRITE/USER_DOC".parse::<NodeKey>().unwrap(), key);
        assert!("x/FILE_WRITE/USER_DOC".parse::<NodeKey>().is_err());
    }

    #[test]
    fn node_keys_match_event_aggregation() {
        let slice = seeded_slice(13, 300, 39.9);
        let g = build_graph(&slice, 0.0, 40.0, &params()).unwrap();
        let expected: BTreeSet<NodeKey> = slice
            .iter()
            .map(|e| NodeKey {
                pid: e.pid,
                op: e.op,
                target_class: classify_target(e.op, &e.target),
            })
            .collect();
        assert_eq!(g.nodes().keys().copied().collect::<BTreeSet<_>>(), expected);
        assert_eq!(g.event_count() as usize, slice.len());
    }

    #[test]
    fn build_cost_scales_near_linearly() {
        // Rate-bounded streams keep the horizon buffer constant, so doubling
        // the event count should roughly double the work, not quadruple it.
        use std::time::Instant;
        let p = GraphParams { window: 1e9, stride: 1e9, ..params() };
        let small = seeded_slice(1, 20_000, 800.0);
        let large = seeded_slice(1, 80_000, 3200.0);
        let t0 = Instant::now();
        let g1 = build_graph(&small, 0.0, 1e9, &p).unwrap();
        let t_small = t0.elapsed();
        let t1 = Instant::now();
        let g2 = build_graph(&large, 0.0, 1e9, &p).unwrap();
        let t_large = t1.elapsed();
        assert!(g1.event_count() > 0 && g2.event_count() > 0);
        let ratio = t_large.as_secs_f64() / t_small.as_secs_f64().max(1e-9);
        assert!(
            ratio < 16.0,
            "4x events took {ratio:.1}x time; construction is not near-linear"
        );
    }
}
