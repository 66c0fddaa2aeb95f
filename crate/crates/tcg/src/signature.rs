//! Declarative subgraph signatures and a backtracking matcher.
//!
//! A signature is a small labeled digraph describing a behavior chain, e.g.
//! read -> high-entropy write -> rename over user documents. Matching is a
//! non-induced injective monomorphism: extra graph edges are allowed, since
//! malicious chains superimpose on benign background activity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::event::{OperationKind, TargetClass};
use crate::graph::{NodeKey, TemporalCorrelationGraph};
use crate::scalar::Scalar;

pub const SIGNATURE_FORMAT_VERSION: u32 = 1;

/// Upper bound on matches returned per (graph, pattern); detection needs
/// existence, not exhaustiveness.
pub const DEFAULT_MATCH_LIMIT: usize = 64;

#[derive(Debug, Error)]
pub enum SignatureError {
    #[error("malformed signature: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Target-class constraint on a pattern node; `WILDCARD` matches any class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassConstraint {
    #[default]
    Wildcard,
    Is(TargetClass),
}

impl ClassConstraint {
    pub fn matches(&self, class: TargetClass) -> bool {
        match self {
            ClassConstraint::Wildcard => true,
            ClassConstraint::Is(c) => *c == class,
        }
    }
}

impl fmt::Display for ClassConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassConstraint::Wildcard => f.write_str("WILDCARD"),
            ClassConstraint::Is(c) => f.write_str(c.token()),
        }
    }
}

impl Serialize for ClassConstraint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClassConstraint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s == "WILDCARD" {
            return Ok(ClassConstraint::Wildcard);
        }
        s.parse::<TargetClass>()
            .map(ClassConstraint::Is)
            .map_err(D::Error::custom)
    }
}

fn default_min_count() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PatternNode<S: Scalar> {
    pub id: String,
    pub op: OperationKind,
    #[serde(default)]
    pub class: ClassConstraint,
    #[serde(default = "default_min_count")]
    pub min_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_entropy: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PatternEdge<S: Scalar> {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mean_gap: Option<S>,
}

/// A named behavior-chain pattern over aggregated graph nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SignaturePattern<S: Scalar> {
    pub format_version: u32,
    pub name: String,
    pub nodes: Vec<PatternNode<S>>,
    pub edges: Vec<PatternEdge<S>>,
}

impl<S: Scalar> SignaturePattern<S> {
    pub fn validate(&self) -> Result<(), SignatureError> {
        if self.format_version != SIGNATURE_FORMAT_VERSION {
            return Err(SignatureError::Malformed(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        if self.name.is_empty() {
            return Err(SignatureError::Malformed("empty name".into()));
        }
        if self.nodes.is_empty() {
            return Err(SignatureError::Malformed("pattern has no nodes".into()));
        }
        let mut ids = BTreeSet::new();
        for node in &self.nodes {
            if !ids.insert(node.id.as_str()) {
                return Err(SignatureError::Malformed(format!(
                    "duplicate node id `{}`",
                    node.id
                )));
            }
            if node.min_count < 1 {
                return Err(SignatureError::Malformed(format!(
                    "node `{}`: min_count must be >= 1",
                    node.id
                )));
            }
            if let Some(e) = node.min_entropy {
                if !e.is_finite() || e < S::zero() || e > S::of(8.0) {
                    return Err(SignatureError::Malformed(format!(
                        "node `{}`: min_entropy out of [0, 8]",
                        node.id
                    )));
                }
            }
        }
        for edge in &self.edges {
            if !ids.contains(edge.from.as_str()) || !ids.contains(edge.to.as_str()) {
                return Err(SignatureError::Malformed(format!(
                    "edge {} -> {} references an unknown id",
                    edge.from, edge.to
                )));
            }
            if edge.from == edge.to {
                return Err(SignatureError::Malformed(format!(
                    "self-edge on `{}`",
                    edge.from
                )));
            }
            if let Some(g) = edge.max_mean_gap {
                if !g.is_finite() || g <= S::zero() {
                    return Err(SignatureError::Malformed(
                        "max_mean_gap must be > 0".into(),
                    ));
                }
            }
        }
        // Weak connectivity over the undirected projection of pattern edges.
        if self.nodes.len() > 1 {
            let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
            for edge in &self.edges {
                adj.entry(&edge.from).or_default().push(&edge.to);
                adj.entry(&edge.to).or_default().push(&edge.from);
            }
            let start = self.nodes[0].id.as_str();
            let mut seen = BTreeSet::from([start]);
            let mut queue = vec![start];
            while let Some(u) = queue.pop() {
                for v in adj.get(u).into_iter().flatten() {
                    if seen.insert(v) {
                        queue.push(v);
                    }
                }
            }
            if seen.len() != self.nodes.len() {
                return Err(SignatureError::Malformed("pattern is disconnected".into()));
            }
        }
        Ok(())
    }
}

/// Parse and validate one signature document.
pub fn parse_signature<S: Scalar>(document: &str) -> Result<SignaturePattern<S>, SignatureError> {
    let pattern: SignaturePattern<S> = serde_json::from_str(document)
        .map_err(|e| SignatureError::Malformed(e.to_string()))?;
    pattern.validate()?;
    Ok(pattern)
}

pub fn serialize_signature<S: Scalar>(pattern: &SignaturePattern<S>) -> String {
    serde_json::to_string_pretty(pattern).expect("signature serialization cannot fail")
}

/// One injective assignment of pattern ids to graph node keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub signature: String,
    pub assignment: BTreeMap<String, NodeKey>,
}

fn node_satisfies<S: Scalar>(
    graph: &TemporalCorrelationGraph<S>,
    key: &NodeKey,
    node: &PatternNode<S>,
) -> bool {
    if key.op != node.op || !node.class.matches(key.target_class) {
        return false;
    }
    let attr = &graph.nodes()[key];
    if attr.count < node.min_count {
        return false;
    }
    if let Some(min_entropy) = node.min_entropy {
        if attr.mean_entropy() < min_entropy {
            return false;
        }
    }
    true
}

fn edge_satisfies<S: Scalar>(
    graph: &TemporalCorrelationGraph<S>,
    from: &NodeKey,
    to: &NodeKey,
    constraint: Option<S>,
) -> bool {
    match graph.edges().get(&(*from, *to)) {
        Some(attr) => constraint.map_or(true, |max| attr.mean_gap() <= max),
        None => false,
    }
}

/// Enumerate up to `limit` injective monomorphisms of `pattern` into `graph`.
///
/// Candidates are tried in sorted key order with most-constrained pattern
/// nodes first, so the result list is deterministic.
pub fn match_signature<S: Scalar>(
    graph: &TemporalCorrelationGraph<S>,
    pattern: &SignaturePattern<S>,
    limit: usize,
) -> Vec<Match> {
    let k = pattern.nodes.len();
    if k == 0 || k > graph.node_count() || limit == 0 {
        return Vec::new();
    }
    let candidates: Vec<Vec<NodeKey>> = pattern
        .nodes
        .iter()
        .map(|node| {
            graph
                .nodes()
                .keys()
                .filter(|key| node_satisfies(graph, key, node))
                .copied()
                .collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    // Most-constrained-variable ordering, ties by declaration order.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&i| (candidates[i].len(), i));

    // Pattern edges indexed by the later of their endpoints in `order`.
    let position: BTreeMap<usize, usize> = order
        .iter()
        .enumerate()
        .map(|(pos, &i)| (i, pos))
        .collect();
    let id_index: BTreeMap<&str, usize> = pattern
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    // (earlier node index, is_outgoing_from_new, constraint) per position.
    let mut checks: Vec<Vec<(usize, bool, Option<S>)>> = vec![Vec::new(); k];
    for edge in &pattern.edges {
        let from = id_index[edge.from.as_str()];
        let to = id_index[edge.to.as_str()];
        let (pf, pt) = (position[&from], position[&to]);
        if pf < pt {
            checks[pt].push((from, false, edge.max_mean_gap));
        } else {
            checks[pf].push((to, true, edge.max_mean_gap));
        }
    }

    let mut matches = Vec::new();
    let mut assigned: Vec<Option<NodeKey>> = vec![None; k];
    let mut used: BTreeSet<NodeKey> = BTreeSet::new();

    fn dfs<S: Scalar>(
        pos: usize,
        graph: &TemporalCorrelationGraph<S>,
        pattern: &SignaturePattern<S>,
        order: &[usize],
        candidates: &[Vec<NodeKey>],
        checks: &[Vec<(usize, bool, Option<S>)>],
        assigned: &mut Vec<Option<NodeKey>>,
        used: &mut BTreeSet<NodeKey>,
        matches: &mut Vec<Match>,
        limit: usize,
    ) {
        if matches.len() >= limit {
            return;
        }
        if pos == order.len() {
            let assignment = pattern
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| (n.id.clone(), assigned[i].expect("complete assignment")))
                .collect();
            matches.push(Match { signature: pattern.name.clone(), assignment });
            return;
        }
        let var = order[pos];
        for key in &candidates[var] {
            if used.contains(key) {
                continue;
            }
            let ok = checks[pos].iter().all(|&(other, outgoing, constraint)| {
                let other_key = assigned[other].expect("earlier variable assigned");
                if outgoing {
                    edge_satisfies(graph, key, &other_key, constraint)
                } else {
                    edge_satisfies(graph, &other_key, key, constraint)
                }
            });
            if !ok {
                continue;
            }
            assigned[var] = Some(*key);
            used.insert(*key);
            dfs(
                pos + 1, graph, pattern, order, candidates, checks, assigned, used,
                matches, limit,
            );
            used.remove(key);
            assigned[var] = None;
            if matches.len() >= limit {
                return;
            }
        }
    }

    dfs(
        0, graph, pattern, &order, &candidates, &checks, &mut assigned, &mut used,
        &mut matches, limit,
    );
    matches
}

/// Re-verify a match against every pattern constraint; used by tests and by
/// callers that want defense in depth on loaded signature files.
pub fn verify_match<S: Scalar>(
    graph: &TemporalCorrelationGraph<S>,
    pattern: &SignaturePattern<S>,
    m: &Match,
) -> bool {
    if m.assignment.len() != pattern.nodes.len() {
        return false;
    }
    let values: BTreeSet<&NodeKey> = m.assignment.values().collect();
    if values.len() != m.assignment.len() {
        return false; // not injective
    }
    for node in &pattern.nodes {
        let Some(key) = m.assignment.get(&node.id) else {
            return false;
        };
        if !graph.nodes().contains_key(key) || !node_satisfies(graph, key, node) {
            return false;
        }
    }
    pattern.edges.iter().all(|edge| {
        edge_satisfies(
            graph,
            &m.assignment[&edge.from],
            &m.assignment[&edge.to],
            edge.max_mean_gap,
        )
    })
}

const ENCRYPT_CHAIN: &str = include_str!("../signatures/encrypt_chain.json");
const BEACON_THEN_BURST: &str = include_str!("../signatures/beacon_then_burst.json");

/// The signatures shipped with the engine: the user-document encryption chain
/// and the beacon-then-burst pattern.
pub fn builtin_signatures<S: Scalar>() -> Vec<SignaturePattern<S>> {
    [ENCRYPT_CHAIN, BEACON_THEN_BURST]
        .iter()
        .map(|doc| parse_signature(doc).expect("builtin signatures are valid"))
        .collect()
}

/// Load every `*.json` signature in a directory (sorted by file name).
/// Malformed files are reported back but do not abort the scan.
pub fn load_signature_dir<S: Scalar>(
    dir: &Path,
) -> Result<(Vec<SignaturePattern<S>>, Vec<(PathBuf, SignatureError)>), SignatureError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    let mut patterns = Vec::new();
    let mut failures = Vec::new();
    for path in paths {
        let text = match std::fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) => {
                failures.push((path, SignatureError::Io(e)));
                continue;
            }
        };
        match parse_signature(&text) {
            Ok(p) => patterns.push(p),
            Err(e) => failures.push((path, e)),
        }
    }
    Ok((patterns, failures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::EventRecord;
    use crate::graph::{build_graph, GraphParams};

    fn ev(ts: f64, seq: u64, pid: u32, op: OperationKind, target: &str, entropy: f64) -> EventRecord<f64> {
        EventRecord {
            ts,
            seq,
            pid,
            proc: "p".into(),
            op,
            target: target.into(),
            bytes: 64,
            entropy,
        }
    }

    fn chain_graph() -> TemporalCorrelationGraph<f64> {
        // read -> write -> rename over the same document, plus noise.
        let slice = vec![
            ev(1.0, 0, 7, OperationKind::FileRead, "a.docx", 0.0),
            ev(1.4, 1, 7, OperationKind::FileWrite, "a.docx", 7.8),
            ev(1.9, 2, 7, OperationKind::FileRename, "a.docx", 0.0),
            ev(2.2, 3, 3, OperationKind::RegSet, "HKLM/r", 0.0),
        ];
        build_graph(&slice, 0.0, 40.0, &GraphParams::default()).unwrap()
    }

    #[test]
    fn builtin_fixture_shapes() {
        let sigs = builtin_signatures::<f64>();
        assert_eq!(sigs.len(), 2);
        let chain = &sigs[0];
        assert_eq!(chain.name, "encrypt_chain");
        assert_eq!(chain.nodes.len(), 3);
        assert_eq!(chain.edges.len(), 2);
        assert_eq!(sigs[1].name, "beacon_then_burst");
    }

    #[test]
    fn parse_rejects_dangling_edge() {
        let doc = r#"{
            "format_version": 1,
            "name": "x",
            "nodes": [{"id": "a", "op": "FILE_READ"}],
            "edges": [{"from": "a", "to": "ghost"}]
        }"#;
        let err = parse_signature::<f64>(doc).unwrap_err();
        assert!(err.to_string().contains("unknown id"), "{err}");
    }

    #[test]
    fn parse_rejects_duplicates_and_disconnection() {
        let doc = r#"{
            "format_version": 1,
            "name": "x",
            "nodes": [{"id": "a", "op": "FILE_READ"}, {"id": "a", "op": "FILE_WRITE"}],
            "edges": []
        }"#;
        assert!(parse_signature::<f64>(doc).is_err());

        let doc = r#"{
            "format_version": 1,
            "name": "x",
            "nodes": [{"id": "a", "op": "FILE_READ"}, {"id": "b", "op": "FILE_WRITE"}],
            "edges": []
        }"#;
        let err = parse_signature::<f64>(doc).unwrap_err();
        assert!(err.to_string().contains("disconnected"), "{err}");
    }

    #[test]
    fn signature_round_trip() {
        for sig in builtin_signatures::<f64>() {
            let text = serialize_signature(&sig);
            let back = parse_signature::<f64>(&text).unwrap();
            assert_eq!(back, sig);
        }
    }

    #[test]
    fn encrypt_chain_matches_planted_chain() {
        let graph = chain_graph();
        let sigs = builtin_signatures::<f64>();
        let matches = match_signature(&graph, &sigs[0], DEFAULT_MATCH_LIMIT);
        assert_eq!(matches.len(), 1);
        assert!(verify_match(&graph, &sigs[0], &matches[0]));
        let m = &matches[0];
        assert_eq!(m.assignment["read"].op, OperationKind::FileRead);
        assert_eq!(m.assignment["write"].op, OperationKind::FileWrite);
    }

    #[test]
    fn low_entropy_chain_does_not_match() {
        let slice = vec![
            ev(1.0, 0, 7, OperationKind::FileRead, "a.docx", 0.0),
            ev(1.4, 1, 7, OperationKind::FileWrite, "a.docx", 4.0),
            ev(1.9, 2, 7, OperationKind::FileRename, "a.docx", 0.0),
        ];
        let graph = build_graph(&slice, 0.0, 40.0, &GraphParams::default()).unwrap();
        let sigs = builtin_signatures::<f64>();
        assert!(match_signature(&graph, &sigs[0], DEFAULT_MATCH_LIMIT).is_empty());
    }

    #[test]
    fn pattern_larger_than_graph_is_empty() {
        let slice = vec![ev(1.0, 0, 7, OperationKind::FileRead, "a.docx", 0.0)];
        let graph = build_graph(&slice, 0.0, 40.0, &GraphParams::default()).unwrap();
        let sigs = builtin_signatures::<f64>();
        assert!(match_signature(&graph, &sigs[0], DEFAULT_MATCH_LIMIT).is_empty());

        let empty = build_graph::<f64>(&[], 0.0, 40.0, &GraphParams::default()).unwrap();
        assert!(match_signature(&empty, &sigs[0], DEFAULT_MATCH_LIMIT).is_empty());
    }

    #[test]
    fn single_node_wildcard_pattern() {
        let graph = chain_graph();
        let pattern: SignaturePattern<f64> = parse_signature(
            r#"{
                "format_version": 1,
                "name": "any_write",
                "nodes": [{"id": "w", "op": "FILE_WRITE", "class": "WILDCARD"}],
                "edges": []
            }"#,
        )
        .unwrap();
        let matches = match_signature(&graph, &pattern, DEFAULT_MATCH_LIMIT);
        assert!(!matches.is_empty());
    }

    /// Exhaustive oracle: try every injective assignment of pattern nodes to
    /// graph nodes and keep the ones satisfying all constraints.
    fn exhaustive_matches(
        graph: &TemporalCorrelationGraph<f64>,
        pattern: &SignaturePattern<f64>,
    ) -> BTreeSet<Vec<(String, NodeKey)>> {
        let keys: Vec<NodeKey> = graph.nodes().keys().copied().collect();
        let k = pattern.nodes.len();
        let mut out = BTreeSet::new();
        let mut stack: Vec<usize> = Vec::new();
        fn rec(
            keys: &[NodeKey],
            k: usize,
            stack: &mut Vec<usize>,
            all: &mut Vec<Vec<usize>>,
        ) {
            if stack.len() == k {
                all.push(stack.clone());
                return;
            }
            for i in 0..keys.len() {
                if !stack.contains(&i) {
                    stack.push(i);
                    rec(keys, k, stack, all);
                    stack.pop();
                }
            }
        }
        let mut all = Vec::new();
        rec(&keys, k, &mut stack, &mut all);
        for combo in all {
            let m = Match {
                signature: pattern.name.clone(),
                assignment: pattern
                    .nodes
                    .iter()
                    .zip(&combo)
                    .map(|(n, &i)| (n.id.clone(), keys[i]))
                    .collect(),
            };
            if verify_match(graph, pattern, &m) {
                out.insert(m.assignment.into_iter().collect());
            }
        }
        out
    }

    fn seeded_graph(seed: u64) -> TemporalCorrelationGraph<f64> {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let ops = [
            OperationKind::FileRead,
            OperationKind::FileWrite,
            OperationKind::FileRename,
            OperationKind::NetConnect,
        ];
        let targets = ["a.docx", "b.docx", "9.9.9.9:1", "c.txt"];
        let n = rng.random_range(4..30);
        let mut events = Vec::new();
        for i in 0..n {
            let op = ops[rng.random_range(0..ops.len())];
            events.push(ev(
                rng.random_range(0.0..20.0),
                i,
                rng.random_range(1..3),
                op,
                targets[rng.random_range(0..targets.len())],
                if op == OperationKind::FileWrite {
                    rng.random_range(3.0..8.0)
                } else {
                    0.0
                },
            ));
        }
        let events = crate::event::align_events(events).unwrap();
        build_graph(&events, 0.0, 40.0, &GraphParams::default()).unwrap()
    }

    #[test]
    fn matcher_equals_exhaustive_enumeration() {
        let patterns = builtin_signatures::<f64>();
        let wild: SignaturePattern<f64> = parse_signature(
            r#"{
                "format_version": 1,
                "name": "pair",
                "nodes": [
                    {"id": "a", "op": "FILE_READ", "class": "WILDCARD"},
                    {"id": "b", "op": "FILE_WRITE", "class": "WILDCARD"}
                ],
                "edges": [{"from": "a", "to": "b", "max_mean_gap": 1.5}]
            }"#,
        )
        .unwrap();
        for seed in 0..40u64 {
            let graph = seeded_graph(seed);
            if graph.node_count() > 8 {
                continue;
            }
            for pattern in patterns.iter().chain([&wild]) {
                let got: BTreeSet<Vec<(String, NodeKey)>> =
                    match_signature(&graph, pattern, usize::MAX)
                        .into_iter()
                        .map(|m| m.assignment.into_iter().collect())
                        .collect();
                let want = exhaustive_matches(&graph, pattern);
                assert_eq!(got, want, "seed {seed}, pattern {}", pattern.name);
            }
        }
    }

    #[test]
    fn matcher_is_deterministic_and_sound() {
        let patterns = builtin_signatures::<f64>();
        for seed in 0..20u64 {
            let graph = seeded_graph(seed);
            for pattern in &patterns {
                let a = match_signature(&graph, pattern, DEFAULT_MATCH_LIMIT);
                let b = match_signature(&graph, pattern, DEFAULT_MATCH_LIMIT);
                assert_eq!(a, b);
                for m in &a {
                    assert!(verify_match(&graph, pattern, m));
                }
            }
        }
    }

    #[test]
    fn limit_caps_enumeration() {
        let graph = seeded_graph(1);
        let pattern: SignaturePattern<f64> = parse_signature(
            r#"{
                "format_version": 1,
                "name": "one",
                "nodes": [{"id": "n", "op": "FILE_READ", "class": "WILDCARD"}],
                "edges": []
            }"#,
        )
        .unwrap();
        let unlimited = match_signature(&graph, &pattern, usize::MAX);
        if unlimited.len() > 1 {
            assert_eq!(match_signature(&graph, &pattern, 1).len(), 1);
        }
    }

    #[test]
    fn load_dir_reports_and_skips_malformed() {
        let dir = std::env::temp_dir().join(format!("tcg_sig_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("a_good.json"), ENCRYPT_CHAIN).unwrap();
        std::fs::write(dir.join("b_bad.json"), "{ not json").unwrap();
        std::fs::write(dir.join("ignored.txt"), "junk").unwrap();
        let (patterns, failures) = load_signature_dir::<f64>(&dir).unwrap();
        assert_eq!(patterns.len(), 1);
        assert_eq!(failures.len(), 1);
        assert!(failures[0].0.ends_with("b_bad.json"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
