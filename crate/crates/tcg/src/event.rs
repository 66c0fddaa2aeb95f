//! Event schema, trace parsing and target classification.
//!
//! A trace is UTF-8 text with one JSON record per line. Lines starting with
//! `#` are comments. `bytes` and `entropy` are optional and default to zero;
//! unknown fields are ignored for forward compatibility. Timestamps are
//! trace-relative seconds, not wall clock, so seeded runs reproduce exactly.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EventError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate event key (ts={ts}, seq={seq})")]
    DuplicateKey { ts: f64, seq: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The closed set of system operations a trace may contain.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OperationKind {
    FileRead,
    FileWrite,
    FileRename,
    FileDelete,
    ProcSpawn,
    NetConnect,
    NetSend,
    RegSet,
    CryptoApi,
}

impl OperationKind {
    pub const ALL: [OperationKind; 9] = [
        OperationKind::FileRead,
        OperationKind::FileWrite,
        OperationKind::FileRename,
        OperationKind::FileDelete,
        OperationKind::ProcSpawn,
        OperationKind::NetConnect,
        OperationKind::NetSend,
        OperationKind::RegSet,
        OperationKind::CryptoApi,
    ];

    pub fn token(self) -> &'static str {
        match self {
            OperationKind::FileRead => "FILE_READ",
            OperationKind::FileWrite => "FILE_WRITE",
            OperationKind::FileRename => "FILE_RENAME",
            OperationKind::FileDelete => "FILE_DELETE",
            OperationKind::ProcSpawn => "PROC_SPAWN",
            OperationKind::NetConnect => "NET_CONNECT",
            OperationKind::NetSend => "NET_SEND",
            OperationKind::RegSet => "REG_SET",
            OperationKind::CryptoApi => "CRYPTO_API",
        }
    }
}

impl fmt::Display for OperationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for OperationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|op| op.token() == s)
            .ok_or_else(|| format!("unknown operation token `{s}`"))
    }
}

/// Coarse resource class a target string aggregates into.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TargetClass {
    UserDoc,
    SystemFile,
    Temp,
    NetworkHost,
    Registry,
    Other,
}

impl TargetClass {
    pub fn token(self) -> &'static str {
        match self {
            TargetClass::UserDoc => "USER_DOC",
            TargetClass::SystemFile => "SYSTEM_FILE",
            TargetClass::Temp => "TEMP",
            TargetClass::NetworkHost => "NETWORK_HOST",
            TargetClass::Registry => "REGISTRY",
            TargetClass::Other => "OTHER",
        }
    }

    pub const ALL: [TargetClass; 6] = [
        TargetClass::UserDoc,
        TargetClass::SystemFile,
        TargetClass::Temp,
        TargetClass::NetworkHost,
        TargetClass::Registry,
        TargetClass::Other,
    ];
}

impl fmt::Display for TargetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for TargetClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.token() == s)
            .ok_or_else(|| format!("unknown target class `{s}`"))
    }
}

/// One timestamped system event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EventRecord<S: Scalar> {
    /// Seconds since trace epoch.
    pub ts: S,
    /// Monotone tie-breaker; (ts, seq) is unique within an aligned trace.
    pub seq: u64,
    pub pid: u32,
    pub proc: String,
    pub op: OperationKind,
    /// File path, host:port, or registry key.
    pub target: String,
    #[serde(default)]
    pub bytes: u64,
    /// Shannon entropy of the written payload in bits/byte; meaningful only
    /// for FILE_WRITE.
    #[serde(default)]
    pub entropy: S,
}

impl<S: Scalar> EventRecord<S> {
    pub fn validate(&self) -> Result<(), String> {
        if !self.ts.is_finite() || self.ts < S::zero() {
            return Err(format!("ts out of range: {}", self.ts));
        }
        if !self.entropy.is_finite()
            || self.entropy < S::zero()
            || self.entropy > S::of(8.0)
        {
            return Err(format!("entropy out of [0, 8]: {}", self.entropy));
        }
        if self.proc.is_empty() {
            return Err("empty process name".to_string());
        }
        Ok(())
    }

    pub fn target_class(&self) -> TargetClass {
        classify_target(self.op, &self.target)
    }
}

/// Parse a single trace line into an event record.
///
/// `line_no` is carried into the error for diagnostics; use 1-based numbers
/// when reading files.
pub fn parse_event_line<S: Scalar>(
    line: &str,
    line_no: usize,
) -> Result<EventRecord<S>, EventError> {
    let record: EventRecord<S> =
        serde_json::from_str(line).map_err(|e| EventError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
    record
        .validate()
        .map_err(|reason| EventError::MalformedRecord { line: line_no, reason })?;
    Ok(record)
}

/// Serialize one event as a single trace line (no trailing newline).
pub fn serialize_event<S: Scalar>(event: &EventRecord<S>) -> String {
    serde_json::to_string(event).expect("event serialization cannot fail")
}

fn cmp_key<S: Scalar>(a: &EventRecord<S>, b: &EventRecord<S>) -> Ordering {
    a.ts.partial_cmp(&b.ts)
        .expect("event timestamps are finite")
        .then(a.seq.cmp(&b.seq))
}

/// Stable sort by (ts, seq). Fails if two records share the same key.
pub fn align_events<S: Scalar>(
    mut events: Vec<EventRecord<S>>,
) -> Result<Vec<EventRecord<S>>, EventError> {
    events.sort_by(cmp_key);
    for pair in events.windows(2) {
        if pair[0].ts == pair[1].ts && pair[0].seq == pair[1].seq {
            return Err(EventError::DuplicateKey {
                ts: pair[0].ts.to64(),
                seq: pair[0].seq,
            });
        }
    }
    Ok(events)
}

const USER_DOC_EXTENSIONS: [&str; 10] = [
    "docx", "xlsx", "pptx", "pdf", "txt", "jpg", "png", "csv", "doc", "xls",
];

const SYSTEM_PREFIXES: [&str; 4] = ["c:/windows", "/usr", "/bin", "/etc"];

/// Map an operation and its raw target string to a resource class.
///
/// Rules, in order: network ops are NETWORK_HOST; registry ops are REGISTRY;
/// paths with a temp segment are TEMP; known document extensions are
/// USER_DOC; system prefixes are SYSTEM_FILE; anything else is OTHER.
/// Matching is case-insensitive and treats `\` and `/` alike.
pub fn classify_target(op: OperationKind, target: &str) -> TargetClass {
    match op {
        OperationKind::NetConnect | OperationKind::NetSend => {
            return TargetClass::NetworkHost
        }
        OperationKind::RegSet => return TargetClass::Registry,
        _ => {}
    }
    let norm = target.to_lowercase().replace('\\', "/");
    if norm.contains("/tmp") || norm.contains("/temp/") {
        return TargetClass::Temp;
    }
    if let Some(ext) = norm.rsplit_once('.').map(|(_, ext)| ext) {
        if USER_DOC_EXTENSIONS.contains(&ext) {
            return TargetClass::UserDoc;
        }
    }
    if SYSTEM_PREFIXES.iter().any(|p| norm.starts_with(p)) {
        return TargetClass::SystemFile;
    }
    TargetClass::Other
}

/// Shannon entropy of a byte buffer in bits/byte. Empty input scores 0.
pub fn shannon_entropy<S: Scalar>(buffer: &[u8]) -> S {
    if buffer.is_empty() {
        return S::zero();
    }
    let mut counts = [0u64; 256];
    for &b in buffer {
        counts[b as usize] += 1;
    }
    let len = S::of_usize(buffer.len());
    let mut entropy = S::zero();
    for &count in counts.iter() {
        if count > 0 {
            let p = S::of_u64(count) / len;
            entropy = entropy - p * p.log2();
        }
    }
    entropy.max(S::zero()).min(S::of(8.0))
}

fn is_content_line(line: &str) -> bool {
    let trimmed = line.trim_start();
    !trimmed.is_empty() && !trimmed.starts_with('#')
}

/// Read a trace, failing on the first malformed line.
pub fn read_trace<S: Scalar>(path: &Path) -> Result<Vec<EventRecord<S>>, EventError> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if is_content_line(&line) {
            events.push(parse_event_line(&line, idx + 1)?);
        }
    }
    Ok(events)
}

/// Lenient scan used by the detection pipeline: malformed lines are skipped
/// and returned alongside the good records.
pub fn scan_trace<S: Scalar, R: Read>(
    input: R,
) -> Result<(Vec<EventRecord<S>>, Vec<EventError>), EventError> {
    let reader = BufReader::new(input);
    let mut events = Vec::new();
    let mut skipped = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if !is_content_line(&line) {
            continue;
        }
        match parse_event_line(&line, idx + 1) {
            Ok(ev) => events.push(ev),
            Err(err) => skipped.push(err),
        }
    }
    Ok((events, skipped))
}

pub fn write_trace<S: Scalar>(
    path: &Path,
    events: &[EventRecord<S>],
) -> Result<(), EventError> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for event in events {
        writeln!(out, "{}", serialize_event(event))?;
    }
    Ok(())
}

/// Interval label carried by the ground-truth sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceLabel {
    Benign,
    Ransomware,
}

/// One labeled interval of the trace timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LabelInterval<S: Scalar> {
    pub start: S,
    pub end: S,
    pub label: TraceLabel,
    pub family: String,
}

impl<S: Scalar> LabelInterval<S> {
    pub fn contains(&self, ts: S) -> bool {
        ts >= self.start && ts <= self.end
    }

    pub fn overlaps(&self, start: S, end: S) -> bool {
        // [start, end) against the closed interval [self.start, self.end].
        self.start < end && start <= self.end
    }
}

/// Ground-truth sidecar: the labeled intervals of one trace.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GroundTruth<S: Scalar> {
    pub intervals: Vec<LabelInterval<S>>,
}

impl<S: Scalar> GroundTruth<S> {
    pub fn ransomware_intervals(&self) -> impl Iterator<Item = &LabelInterval<S>> {
        self.intervals
            .iter()
            .filter(|iv| iv.label == TraceLabel::Ransomware)
    }
}

/// Sidecar files hold one interval record per line.
pub fn read_ground_truth<S: Scalar>(path: &Path) -> Result<GroundTruth<S>, EventError> {
    let reader = BufReader::new(File::open(path)?);
    let mut intervals = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if !is_content_line(&line) {
            continue;
        }
        let interval: LabelInterval<S> =
            serde_json::from_str(&line).map_err(|e| EventError::MalformedRecord {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        intervals.push(interval);
    }
    Ok(GroundTruth { intervals })
}

pub fn write_ground_truth<S: Scalar>(
    path: &Path,
    truth: &GroundTruth<S>,
) -> Result<(), EventError> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for interval in &truth.intervals {
        let line = serde_json::to_string(interval).expect("interval serialization");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type Ev = EventRecord<f64>;

    fn ev(ts: f64, seq: u64) -> Ev {
        EventRecord {
            ts,
            seq,
            pid: 1,
            proc: "p".into(),
            op: OperationKind::FileRead,
            target: "t".into(),
            bytes: 0,
            entropy: 0.0,
        }
    }

    #[test]
    fn parse_applies_defaults() {
        let line = r#"{"ts":1.5,"seq":7,"pid":42,"proc":"winword","op":"FILE_READ","target":"C:/Users/a/doc1.docx"}"#;
        let rec: Ev = parse_event_line(line, 1).unwrap();
        assert_eq!(rec.ts, 1.5);
        assert_eq!(rec.seq, 7);
        assert_eq!(rec.pid, 42);
        assert_eq!(rec.op, OperationKind::FileRead);
        assert_eq!(rec.bytes, 0);
        assert_eq!(rec.entropy, 0.0);
    }

    #[test]
    fn parse_rejects_out_of_range_entropy() {
        let line = r#"{"ts":1.0,"seq":1,"pid":1,"proc":"a","op":"FILE_WRITE","target":"x","entropy":9.1}"#;
        let err = parse_event_line::<f64>(line, 3).unwrap_err();
        match err {
            EventError::MalformedRecord { line, reason } => {
                assert_eq!(line, 3);
                assert!(reason.contains("entropy"), "{reason}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_unknown_op() {
        let line = r#"{"ts":1.0,"seq":1,"pid":1,"proc":"a","op":"FILE_ENCRYPT","target":"x"}"#;
        assert!(matches!(
            parse_event_line::<f64>(line, 1),
            Err(EventError::MalformedRecord { .. })
        ));
    }

    #[test]
    fn parse_ignores_unknown_fields() {
        let line = r#"{"ts":1.0,"seq":1,"pid":1,"proc":"a","op":"FILE_READ","target":"x","vendor_tag":"zzz"}"#;
        assert!(parse_event_line::<f64>(line, 1).is_ok());
    }

    #[test]
    fn align_sorts_by_ts_then_seq() {
        let out = align_events(vec![ev(2.0, 1), ev(1.0, 5)]).unwrap();
        assert_eq!(
            out.iter().map(|e| (e.ts, e.seq)).collect::<Vec<_>>(),
            vec![(1.0, 5), (2.0, 1)]
        );
        assert!(align_events::<f64>(vec![]).unwrap().is_empty());
    }

    #[test]
    fn align_rejects_duplicates() {
        assert!(matches!(
            align_events(vec![ev(1.0, 3), ev(1.0, 3)]),
            Err(EventError::DuplicateKey { .. })
        ));
    }

    /// Independent oracle: selection sort on (ts, seq).
    fn selection_sorted(mut events: Vec<Ev>) -> Vec<Ev> {
        let mut out = Vec::with_capacity(events.len());
        while !events.is_empty() {
            let mut best = 0;
            for i in 1..events.len() {
                if cmp_key(&events[i], &events[best]) == Ordering::Less {
                    best = i;
                }
            }
            out.push(events.remove(best));
        }
        out
    }

    #[test]
    fn align_matches_selection_sort_oracle() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut events: Vec<Ev> = (0..1000)
            .map(|i| ev(((i * 37) % 251) as f64 * 0.5, i as u64))
            .collect();
        events.shuffle(&mut rng);
        let expected = selection_sorted(events.clone());
        let got = align_events(events).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify_target(OperationKind::NetConnect, "10.0.0.5:443"),
            TargetClass::NetworkHost
        );
        assert_eq!(
            classify_target(OperationKind::FileWrite, "C:/Users/a/report.xlsx"),
            TargetClass::UserDoc
        );
        assert_eq!(
            classify_target(OperationKind::RegSet, "HKLM/Software/Run"),
            TargetClass::Registry
        );
        assert_eq!(
            classify_target(OperationKind::FileWrite, "C:\\Users\\a\\AppData\\Temp\\x.bin"),
            TargetClass::Temp
        );
        assert_eq!(
            classify_target(OperationKind::FileRead, "/tmp/scratch.dat"),
            TargetClass::Temp
        );
        assert_eq!(
            classify_target(OperationKind::FileRead, "C:/Windows/system32/k.dll"),
            TargetClass::SystemFile
        );
        assert_eq!(
            classify_target(OperationKind::FileRead, "/opt/data.bin"),
            TargetClass::Other
        );
        // Temp segment wins over the document extension.
        assert_eq!(
            classify_target(OperationKind::FileWrite, "C:/Users/a/Temp/notes.txt"),
            TargetClass::Temp
        );
    }

    #[test]
    fn entropy_known_values() {
        assert_eq!(shannon_entropy::<f64>(&[0u8; 1024]), 0.0);
        let mut uniform = Vec::with_capacity(1024);
        for b in 0..=255u8 {
            uniform.extend_from_slice(&[b; 4]);
        }
        assert_eq!(shannon_entropy::<f64>(&uniform), 8.0);
        assert_eq!(shannon_entropy::<f64>(b"abab"), 1.0);
        assert_eq!(shannon_entropy::<f64>(&[]), 0.0);
    }

    #[test]
    fn entropy_generic_over_f32() {
        let e: f32 = shannon_entropy(b"abab");
        assert!((e - 1.0).abs() < 1e-6);
    }

    fn arb_event() -> impl Strategy<Value = Ev> {
        (
            0.0_f64..1e6,
            any::<u64>(),
            any::<u32>(),
            "[a-z]{1,8}",
            0usize..OperationKind::ALL.len(),
            "[ -~]{0,40}",
            any::<u32>(),
            0.0_f64..=8.0,
        )
            .prop_map(|(ts, seq, pid, proc, op, target, bytes, entropy)| EventRecord {
                ts,
                seq,
                pid,
                proc,
                op: OperationKind::ALL[op],
                target,
                bytes: bytes as u64,
                entropy,
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(event in arb_event()) {
            let line = serialize_event(&event);
            let back: Ev = parse_event_line(&line, 1).unwrap();
            prop_assert_eq!(back, event);
        }

        #[test]
        fn align_is_idempotent_permutation(mut seqs in proptest::collection::vec((0.0_f64..100.0, 0u64..10_000), 0..100)) {
            seqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            seqs.dedup();
            let events: Vec<Ev> = seqs.iter().map(|&(ts, seq)| ev(ts, seq)).collect();
            let aligned = align_events(events.clone()).unwrap();
            // Permutation: same multiset.
            let mut a = events.iter().map(|e| (e.ts.to_bits(), e.seq)).collect::<Vec<_>>();
            let mut b = aligned.iter().map(|e| (e.ts.to_bits(), e.seq)).collect::<Vec<_>>();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
            // Idempotent.
            let again = align_events(aligned.clone()).unwrap();
            prop_assert_eq!(again, aligned);
        }

        #[test]
        fn entropy_bounded_and_permutation_invariant(mut buf in proptest::collection::vec(any::<u8>(), 0..512)) {
            let e: f64 = shannon_entropy(&buf);
            prop_assert!((0.0..=8.0).contains(&e));
            buf.reverse();
            prop_assert_eq!(shannon_entropy::<f64>(&buf), e);
        }
    }
}
