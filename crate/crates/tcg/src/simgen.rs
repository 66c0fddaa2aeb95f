//! Deterministic synthetic trace generation: benign workloads plus
//! parametric ransomware episodes.
//!
//! All randomness flows from ChaCha8 seeded with a caller-supplied 64-bit
//! seed (substreams derive through a splitmix64 mix), so identical profiles
//! and seeds reproduce byte-identical traces. The generator algorithm and
//! its reference outputs are documented in `docs/formats.md`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{
    EventRecord, GroundTruth, LabelInterval, OperationKind, TraceLabel,
};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

/// Spread of benign write entropy around the profile mean (bits/byte).
pub const BENIGN_ENTROPY_SIGMA: f64 = 0.8;
/// Spread of encrypted write entropy (bits/byte).
pub const ENCRYPTED_ENTROPY_SIGMA: f64 = 0.05;
/// Multiplicative lognormal jitter applied to the per-file cadence.
pub const CADENCE_JITTER_SIGMA: f64 = 0.1;
/// Megabyte as used for encryption throughput arithmetic.
pub const MB: f64 = 1_000_000.0;

fn default_mean_entropy<S: Scalar>() -> S {
    S::of(4.2)
}

fn default_mean_file_size<S: Scalar>() -> S {
    S::of(1.0)
}

fn default_entropy_encrypted<S: Scalar>() -> S {
    S::of(7.9)
}

fn default_beacon() -> bool {
    true
}

/// Parameters of the benign background workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BenignProfile<S: Scalar> {
    pub n_processes: u32,
    /// Mean events per second per process (Poisson arrivals).
    pub event_rate: S,
    /// Scales the FILE_WRITE share of the operation mixture.
    pub write_fraction: S,
    /// Mean entropy of benign writes in bits/byte.
    #[serde(default = "default_mean_entropy")]
    pub mean_entropy_benign: S,
    /// NET_CONNECT / NET_SEND events per second over the whole trace.
    pub net_rate: S,
    pub duration: S,
}

impl<S: Scalar> BenignProfile<S> {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_processes < 1 {
            return Err(SimError::InvalidProfile("n_processes must be >= 1".into()));
        }
        for (name, v) in [("event_rate", self.event_rate), ("net_rate", self.net_rate)] {
            if !v.is_finite() || v < S::zero() {
                return Err(SimError::InvalidProfile(format!("{name} must be >= 0")));
            }
        }
        if !(self.duration > S::zero()) || !self.duration.is_finite() {
            return Err(SimError::InvalidProfile("duration must be > 0".into()));
        }
        if self.write_fraction < S::zero() || self.write_fraction > S::one() {
            return Err(SimError::InvalidProfile("write_fraction must be in [0, 1]".into()));
        }
        if self.mean_entropy_benign < S::zero() || self.mean_entropy_benign > S::of(8.0) {
            return Err(SimError::InvalidProfile("mean_entropy_benign must be in [0, 8]".into()));
        }
        Ok(())
    }
}

/// Parameters of one ransomware episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RansomwareProfile<S: Scalar> {
    /// Encryption throughput in MB/s; with `mean_file_size` it sets the
    /// per-file cadence mean_file_size / encryption_speed.
    pub encryption_speed: S,
    #[serde(default = "default_mean_file_size")]
    pub mean_file_size: S,
    #[serde(default = "default_entropy_encrypted")]
    pub entropy_encrypted: S,
    /// Seconds from trace start.
    pub onset: S,
    pub target_count: u32,
    /// Emit a NET_CONNECT beacon at onset.
    #[serde(default = "default_beacon")]
    pub beacon: bool,
    pub family_label: String,
}

impl<S: Scalar> RansomwareProfile<S> {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.encryption_speed > S::zero()) || !self.encryption_speed.is_finite() {
            return Err(SimError::InvalidProfile("encryption_speed must be > 0".into()));
        }
        if !(self.mean_file_size > S::zero()) || !self.mean_file_size.is_finite() {
            return Err(SimError::InvalidProfile("mean_file_size must be > 0".into()));
        }
        if self.entropy_encrypted < S::zero() || self.entropy_encrypted > S::of(8.0) {
            return Err(SimError::InvalidProfile("entropy_encrypted must be in [0, 8]".into()));
        }
        if self.onset < S::zero() || !self.onset.is_finite() {
            return Err(SimError::InvalidProfile("onset must be >= 0".into()));
        }
        if self.family_label.is_empty() {
            return Err(SimError::InvalidProfile("family_label must be non-empty".into()));
        }
        Ok(())
    }
}

/// Derive an independent substream seed (splitmix64 over seed xor stream id).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const PROC_NAMES: [&str; 8] = [
    "explorer", "winword", "excel", "chrome", "outlook", "svchost", "backupd",
    "python",
];

const USER_EXTENSIONS: [&str; 7] = ["docx", "xlsx", "pdf", "txt", "jpg", "png", "csv"];

/// Fixed synthetic file tree: 500 paths, 70% user documents, 20% system
/// files, 10% temp files.
fn synthetic_file_tree() -> Vec<String> {
    let mut paths = Vec::with_capacity(500);
    for i in 0..350 {
        let ext = USER_EXTENSIONS[i % USER_EXTENSIONS.len()];
        paths.push(format!("C:/Users/u{}/docs/file{:03}.{}", i % 5, i, ext));
    }
    for i in 0..100 {
        paths.push(format!("C:/Windows/system32/lib{:03}.dll", i));
    }
    for i in 0..50 {
        paths.push(format!("C:/Users/u{}/AppData/Local/Temp/tmp{:03}.dat", i % 5, i));
    }
    paths
}

fn registry_keys() -> Vec<String> {
    (0..40)
        .map(|i| format!("HKLM/Software/App{:02}/Setting", i))
        .collect()
}

fn network_hosts() -> Vec<String> {
    (0..30)
        .map(|i| format!("10.0.{}.{}:{}", i / 8, 10 + i, 440 + (i % 4)))
        .collect()
}

struct PendingEvent<S: Scalar> {
    ts: f64,
    order: u64,
    pid: u32,
    proc: String,
    op: OperationKind,
    target: String,
    bytes: u64,
    entropy: S,
}

fn finalize<S: Scalar>(mut pending: Vec<PendingEvent<S>>) -> Vec<EventRecord<S>> {
    pending.sort_by(|a, b| {
        a.ts.partial_cmp(&b.ts)
            .expect("finite timestamps")
            .then(a.order.cmp(&b.order))
    });
    pending
        .into_iter()
        .enumerate()
        .map(|(i, p)| EventRecord {
            ts: S::of(p.ts),
            seq: i as u64,
            pid: p.pid,
            proc: p.proc,
            op: p.op,
            target: p.target,
            bytes: p.bytes,
            entropy: p.entropy,
        })
        .collect()
}

/// Generate the benign background workload for one trace.
pub fn gen_benign<S: Scalar>(
    profile: &BenignProfile<S>,
    seed: u64,
) -> Result<Vec<EventRecord<S>>, SimError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x0b11));
    let duration = profile.duration.to64();
    let paths = synthetic_file_tree();
    let regs = registry_keys();
    let hosts = network_hosts();
    let entropy_dist = Normal::new(
        profile.mean_entropy_benign.to64(),
        BENIGN_ENTROPY_SIGMA,
    )
    .expect("valid normal");
    let mut pending: Vec<PendingEvent<S>> = Vec::new();
    let mut order: u64 = 0;

    // Operation mixture: FILE_READ 45%, FILE_WRITE 20% scaled by
    // write_fraction, PROC_SPAWN 3%, REG_SET 2%, remainder FILE_READ.
    let p_write = 0.20 * profile.write_fraction.to64();
    let p_spawn = 0.03;
    let p_reg = 0.02;

    let rate = profile.event_rate.to64();
    if rate > 0.0 {
        let arrival = Exp::new(rate).expect("positive rate");
        for pid in 0..profile.n_processes {
            let proc = PROC_NAMES[pid as usize % PROC_NAMES.len()];
            let mut t = 0.0;
            loop {
                t += arrival.sample(&mut rng);
                if t >= duration {
                    break;
                }
                let u: f64 = rng.random();
                let (op, target, bytes, entropy) = if u < p_write {
                    let target = paths[rng.random_range(0..paths.len())].clone();
                    let bytes = rng.random_range(512..262_144);
                    let e = entropy_dist.sample(&mut rng).clamp(0.0, 8.0);
                    (OperationKind::FileWrite, target, bytes, e)
                } else if u < p_write + p_spawn {
                    let name = PROC_NAMES[rng.random_range(0..PROC_NAMES.len())];
                    (OperationKind::ProcSpawn, name.to_string(), 0, 0.0)
                } else if u < p_write + p_spawn + p_reg {
                    let target = regs[rng.random_range(0..regs.len())].clone();
                    (OperationKind::RegSet, target, 0, 0.0)
                } else {
                    let target = paths[rng.random_range(0..paths.len())].clone();
                    let bytes = rng.random_range(512..262_144);
                    (OperationKind::FileRead, target, bytes, 0.0)
                };
                pending.push(PendingEvent {
                    ts: t,
                    order,
                    pid,
                    proc: proc.to_string(),
                    op,
                    target,
                    bytes,
                    entropy: S::of(entropy),
                });
                order += 1;
            }
        }
    }

    let net_rate = profile.net_rate.to64();
    if net_rate > 0.0 {
        let arrival = Exp::new(net_rate).expect("positive rate");
        let mut t = 0.0;
        loop {
            t += arrival.sample(&mut rng);
            if t >= duration {
                break;
            }
            let pid = rng.random_range(0..profile.n_processes);
            let op = if rng.random::<f64>() < 0.5 {
                OperationKind::NetConnect
            } else {
                OperationKind::NetSend
            };
            pending.push(PendingEvent {
                ts: t,
                order,
                pid,
                proc: PROC_NAMES[pid as usize % PROC_NAMES.len()].to_string(),
                op,
                target: hosts[rng.random_range(0..hosts.len())].clone(),
                bytes: rng.random_range(64..4096),
                entropy: S::zero(),
            });
            order += 1;
        }
    }

    Ok(finalize(pending))
}

fn fnv1a(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Process id used for a ransomware episode; derived from the family label
/// so distinct families never collide with benign pids.
pub fn ransomware_pid(family_label: &str) -> u32 {
    9000 + (fnv1a(family_label) % 1000) as u32
}

/// Generate one ransomware episode: per target file the chain
/// FILE_READ -> FILE_WRITE(high entropy) -> FILE_RENAME at a cadence of
/// mean_file_size / encryption_speed seconds, starting at onset.
pub fn gen_ransomware<S: Scalar>(
    profile: &RansomwareProfile<S>,
    seed: u64,
) -> Result<Vec<EventRecord<S>>, SimError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xda5c));
    let jitter = LogNormal::new(0.0, CADENCE_JITTER_SIGMA).expect("valid lognormal");
    let entropy_dist = Normal::new(
        profile.entropy_encrypted.to64(),
        ENCRYPTED_ENTROPY_SIGMA,
    )
    .expect("valid normal");
    let pid = ransomware_pid(&profile.family_label);
    let proc = profile.family_label.clone();
    let onset = profile.onset.to64();
    let speed = profile.encryption_speed.to64();
    let mean_size = profile.mean_file_size.to64();

    let mut pending: Vec<PendingEvent<S>> = Vec::new();
    let mut order: u64 = 0;
    if profile.beacon {
        pending.push(PendingEvent {
            ts: onset,
            order,
            pid,
            proc: proc.clone(),
            op: OperationKind::NetConnect,
            target: format!("198.51.100.{}:443", 1 + pid % 200),
            bytes: 256,
            entropy: S::zero(),
        });
        order += 1;
    }

    let mut slot = onset;
    for i in 0..profile.target_count {
        let ext = USER_EXTENSIONS[i as usize % USER_EXTENSIONS.len()];
        let target = format!("C:/Users/victim/docs/file{:05}.{}", i, ext);
        let size_mb = mean_size * jitter.sample(&mut rng);
        let interval = size_mb / speed;
        let bytes = (size_mb * MB) as u64;
        let entropy = entropy_dist.sample(&mut rng).clamp(0.0, 8.0);
        for (frac, op, bytes, entropy) in [
            (0.0, OperationKind::FileRead, bytes, 0.0),
            (0.45, OperationKind::FileWrite, bytes, entropy),
            (0.9, OperationKind::FileRename, 0, 0.0),
        ] {
            pending.push(PendingEvent {
                ts: slot + frac * interval,
                order,
                pid,
                proc: proc.clone(),
                op,
                target: target.clone(),
                bytes,
                entropy: S::of(entropy),
            });
            order += 1;
        }
        slot += interval;
    }

    Ok(finalize(pending))
}

/// Labeled interval covering a benign background part.
pub fn benign_interval<S: Scalar>(profile: &BenignProfile<S>) -> LabelInterval<S> {
    LabelInterval {
        start: S::zero(),
        end: profile.duration,
        label: TraceLabel::Benign,
        family: "benign".to_string(),
    }
}

/// Labeled interval covering one generated ransomware episode.
pub fn ransomware_interval<S: Scalar>(
    profile: &RansomwareProfile<S>,
    events: &[EventRecord<S>],
) -> LabelInterval<S> {
    let end = events
        .iter()
        .map(|e| e.ts)
        .fold(profile.onset, |acc, ts| acc.max(ts));
    LabelInterval {
        start: profile.onset,
        end,
        label: TraceLabel::Ransomware,
        family: profile.family_label.clone(),
    }
}

/// Merge independently generated parts into one aligned trace with globally
/// unique seq values, concatenating the parts' labeled intervals.
pub fn merge_traces<S: Scalar>(
    parts: Vec<(Vec<EventRecord<S>>, Vec<LabelInterval<S>>)>,
) -> (Vec<EventRecord<S>>, GroundTruth<S>) {
    let mut intervals = Vec::new();
    let mut tagged: Vec<(usize, EventRecord<S>)> = Vec::new();
    for (part_idx, (events, part_intervals)) in parts.into_iter().enumerate() {
        intervals.extend(part_intervals);
        tagged.extend(events.into_iter().map(|e| (part_idx, e)));
    }
    tagged.sort_by(|(pa, a), (pb, b)| {
        a.ts.partial_cmp(&b.ts)
            .expect("finite timestamps")
            .then(pa.cmp(pb))
            .then(a.seq.cmp(&b.seq))
    });
    let events = tagged
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut e))| {
            e.seq = i as u64;
            e
        })
        .collect();
    (events, GroundTruth { intervals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{serialize_event, TargetClass};
    use std::collections::BTreeMap;

    fn benign(rate: f64, duration: f64) -> BenignProfile<f64> {
        BenignProfile {
            n_processes: 1,
            event_rate: rate,
            write_fraction: 1.0,
            mean_entropy_benign: 4.2,
            net_rate: 0.0,
            duration,
        }
    }

    fn ransomware(speed: f64, count: u32) -> RansomwareProfile<f64> {
        RansomwareProfile {
            encryption_speed: speed,
            mean_file_size: 1.0,
            entropy_encrypted: 7.9,
            onset: 5.0,
            target_count: count,
            beacon: true,
            family_label: "testfam".into(),
        }
    }

    #[test]
    fn zero_rate_yields_empty_trace() {
        let events = gen_benign(&benign(0.0, 10.0), 3).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let profile = benign(5.0, 60.0);
        let a = gen_benign(&profile, 17).unwrap();
        let b = gen_benign(&profile, 17).unwrap();
        let line = |evs: &[EventRecord<f64>]| {
            evs.iter().map(serialize_event).collect::<Vec<_>>().join("\n")
        };
        assert_eq!(line(&a), line(&b), "byte-identical serialized output");
        let c = gen_benign(&profile, 18).unwrap();
        assert_ne!(line(&a), line(&c), "different seed, different trace");
    }

    #[test]
    fn poisson_event_count_near_expectation() {
        // rate 5/s for 600 s: expect about 3000 events per seed; the mean
        // over 20 seeds must sit within 3 sigma of the Poisson expectation.
        let profile = benign(5.0, 600.0);
        let mut total = 0usize;
        for seed in 0..20 {
            total += gen_benign(&profile, seed).unwrap().len();
        }
        let mean = total as f64 / 20.0;
        let sigma = (3000.0_f64).sqrt() / (20.0_f64).sqrt();
        assert!(
            (mean - 3000.0).abs() <= 3.0 * sigma,
            "mean event count {mean} too far from 3000"
        );
    }

    #[test]
    fn events_satisfy_schema_invariants() {
        let profile = BenignProfile { net_rate: 0.5, ..benign(8.0, 120.0) };
        let events = gen_benign(&profile, 9).unwrap();
        assert!(!events.is_empty());
        for e in &events {
            e.validate().unwrap();
        }
        // Aligned by construction.
        let aligned = crate::event::align_events(events.clone()).unwrap();
        assert_eq!(aligned, events);
    }

    #[test]
    fn benign_write_entropy_stays_moderate() {
        let events = gen_benign(&benign(10.0, 300.0), 4).unwrap();
        let writes: Vec<f64> = events
            .iter()
            .filter(|e| e.op == OperationKind::FileWrite)
            .map(|e| e.entropy)
            .collect();
        assert!(writes.len() > 100);
        let mean = writes.iter().sum::<f64>() / writes.len() as f64;
        assert!(mean <= 6.0, "benign mean write entropy {mean}");
    }

    #[test]
    fn cadence_matches_speed_over_file_size() {
        // 5.2 MB/s over 1.0 MB files: cadence ~ 0.1923 s.
        let profile = ransomware(5.2, 200);
        let events = gen_ransomware(&profile, 2).unwrap();
        let reads: Vec<f64> = events
            .iter()
            .filter(|e| e.op == OperationKind::FileRead)
            .map(|e| e.ts)
            .collect();
        assert_eq!(reads.len(), 200);
        let gaps: Vec<f64> = reads.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!(
            (mean - 1.0 / 5.2).abs() < 0.01,
            "mean cadence {mean} vs expected {:.4}",
            1.0 / 5.2
        );
    }

    #[test]
    fn last_rename_follows_closed_form_schedule() {
        // 100 files at 4.5 MB/s: the run should take about 100/4.5 s; the
        // lognormal jitter (sigma 0.1) keeps each seed within a few percent.
        let expected = 5.0 + 100.0 / 4.5;
        for seed in 0..5 {
            let profile = RansomwareProfile { encryption_speed: 4.5, ..ransomware(4.5, 100) };
            let events = gen_ransomware(&profile, seed).unwrap();
            let last_rename = events
                .iter()
                .filter(|e| e.op == OperationKind::FileRename)
                .map(|e| e.ts)
                .fold(0.0_f64, f64::max);
            assert!(
                (last_rename - expected).abs() < 0.05 * expected,
                "seed {seed}: last rename {last_rename} vs {expected}"
            );
        }
    }

    #[test]
    fn chain_order_read_write_rename_per_target() {
        let events = gen_ransomware(&ransomware(5.0, 50), 7).unwrap();
        let mut per_target: BTreeMap<&str, Vec<(OperationKind, f64)>> = BTreeMap::new();
        for e in &events {
            if e.op != OperationKind::NetConnect {
                per_target.entry(e.target.as_str()).or_default().push((e.op, e.ts));
            }
        }
        assert_eq!(per_target.len(), 50);
        for (target, chain) in per_target {
            assert_eq!(chain.len(), 3, "{target}");
            assert_eq!(chain[0].0, OperationKind::FileRead);
            assert_eq!(chain[1].0, OperationKind::FileWrite);
            assert_eq!(chain[2].0, OperationKind::FileRename);
            assert!(chain[0].1 < chain[1].1 && chain[1].1 < chain[2].1);
            assert_eq!(
                crate::event::classify_target(OperationKind::FileWrite, target),
                TargetClass::UserDoc
            );
        }
    }

    #[test]
    fn encrypted_write_entropy_is_high() {
        let events = gen_ransomware(&ransomware(5.0, 100), 11).unwrap();
        let writes: Vec<f64> = events
            .iter()
            .filter(|e| e.op == OperationKind::FileWrite)
            .map(|e| e.entropy)
            .collect();
        let mean = writes.iter().sum::<f64>() / writes.len() as f64;
        assert!(mean >= 7.5, "encrypted mean write entropy {mean}");
        for e in &events {
            e.validate().unwrap();
        }
    }

    #[test]
    fn beacon_only_when_no_targets() {
        let profile = ransomware(5.0, 0);
        let events = gen_ransomware(&profile, 1).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].op, OperationKind::NetConnect);
        assert_eq!(events[0].ts, 5.0);

        let silent = RansomwareProfile { beacon: false, ..profile };
        assert!(gen_ransomware(&silent, 1).unwrap().is_empty());
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(matches!(
            gen_benign(&BenignProfile { duration: 0.0, ..benign(1.0, 1.0) }, 0),
            Err(SimError::InvalidProfile(_))
        ));
        assert!(matches!(
            gen_ransomware(&RansomwareProfile { encryption_speed: 0.0, ..ransomware(1.0, 1) }, 0),
            Err(SimError::InvalidProfile(_))
        ));
        assert!(matches!(
            gen_benign(&BenignProfile { write_fraction: 1.5, ..benign(1.0, 1.0) }, 0),
            Err(SimError::InvalidProfile(_))
        ));
    }

    #[test]
    fn merge_single_benign_part_is_identity() {
        let profile = benign(4.0, 30.0);
        let events = gen_benign(&profile, 5).unwrap();
        let interval = benign_interval(&profile);
        let (merged, truth) = merge_traces(vec![(events.clone(), vec![interval.clone()])]);
        assert_eq!(merged, events);
        assert_eq!(truth.intervals, vec![interval]);
    }

    #[test]
    fn merge_interval_bookkeeping() {
        let bp = benign(4.0, 60.0);
        let bg = gen_benign(&bp, 1).unwrap();
        let rp = RansomwareProfile { onset: 30.0, ..ransomware(5.0, 100) };
        let rw = gen_ransomware(&rp, 1).unwrap();
        let rw_interval = ransomware_interval(&rp, &rw);
        assert_eq!(rw_interval.start, 30.0);
        assert!(rw_interval.end > 30.0);
        let (merged, truth) = merge_traces(vec![
            (bg, vec![benign_interval(&bp)]),
            (rw, vec![rw_interval]),
        ]);
        assert_eq!(truth.intervals.len(), 2);
        assert_eq!(truth.intervals[0].label, TraceLabel::Benign);
        assert_eq!(truth.intervals[1].label, TraceLabel::Ransomware);
        // Unique, dense seq assignment after merge.
        for (i, e) in merged.iter().enumerate() {
            assert_eq!(e.seq, i as u64);
        }
        crate::event::align_events(merged).unwrap();
    }

    #[test]
    fn merge_preserves_event_multiset() {
        let mut parts = Vec::new();
        let mut expected: Vec<(u64, String)> = Vec::new();
        for seed in 0..10u64 {
            let profile = benign(2.0, 20.0);
            let events = gen_benign(&profile, seed).unwrap();
            expected.extend(events.iter().map(|e| (e.ts.to_bits(), e.target.clone())));
            parts.push((events, vec![benign_interval(&profile)]));
        }
        let (merged, _) = merge_traces(parts);
        let mut got: Vec<(u64, String)> = merged
            .iter()
            .map(|e| (e.ts.to_bits(), e.target.clone()))
            .collect();
        expected.sort();
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn substream_seeds_are_documented_mix() {
        // Freeze the splitmix64 derivation so seeds stay portable.
        assert_eq!(derive_seed(0, 0), 16294208416658607535);
        assert_eq!(derive_seed(1, 0), 10451216379200822465);
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
    }
}
