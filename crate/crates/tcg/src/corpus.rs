//! Seeded experiment corpora: labeled windows pooled from generated traces.
//!
//! A corpus interleaves benign-only traces with per-family traces (benign
//! background plus one ransomware episode each), windows them, labels every
//! window from the merged ground truth, and balances the pool to the
//! requested benign/ransomware quotas by round-robin over sources.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::window_truth;
use crate::event::{EventRecord, GroundTruth};
use crate::graph::{window_ranges, GraphParams};
use crate::scalar::Scalar;
use crate::simgen::{
    benign_interval, derive_seed, gen_benign, gen_ransomware, merge_traces,
    ransomware_interval, BenignProfile, RansomwareProfile, SimError,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("corpus labeling failed: {0}")]
    Label(String),
}

/// Everything needed to rebuild a corpus deterministically from a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CorpusSpec<S: Scalar> {
    pub benign: BenignProfile<S>,
    /// One episode profile per simulated family; each family contributes
    /// `traces_per_family` traces with staggered onsets.
    pub families: Vec<RansomwareProfile<S>>,
    pub benign_traces: u32,
    pub traces_per_family: u32,
    pub benign_windows: usize,
    pub ransomware_windows: usize,
}

/// Background workload shared by the demo corpus and the default configs.
pub fn demo_benign_profile<S: Scalar>() -> BenignProfile<S> {
    BenignProfile {
        n_processes: 3,
        event_rate: S::of(2.0),
        write_fraction: S::one(),
        mean_entropy_benign: S::of(4.2),
        net_rate: S::of(0.3),
        duration: S::of(400.0),
    }
}

/// Five episode profiles spanning fast bulk encryption to slow-burn
/// behavior; the spread in per-file cadence is what makes short analysis
/// windows genuinely harder than long ones.
pub fn demo_families<S: Scalar>() -> Vec<RansomwareProfile<S>> {
    let family = |speed: f64, size: f64, count: u32, label: &str| RansomwareProfile {
        encryption_speed: S::of(speed),
        mean_file_size: S::of(size),
        entropy_encrypted: S::of(7.9),
        onset: S::of(45.0),
        target_count: count,
        beacon: true,
        family_label: label.to_string(),
    };
    vec![
        family(5.2, 1.0, 1500, "lockbit"),
        family(4.8, 4.0, 360, "blackmatter"),
        family(6.0, 12.0, 150, "hive"),
        family(4.5, 140.0, 10, "clop"),
        family(5.7, 240.0, 8, "revil"),
    ]
}

/// The corpus used by the acceptance runs: 300 benign plus 300 ransomware
/// windows over five families.
pub fn acceptance_spec<S: Scalar>() -> CorpusSpec<S> {
    CorpusSpec {
        benign: demo_benign_profile(),
        families: demo_families(),
        benign_traces: 10,
        traces_per_family: 4,
        benign_windows: 300,
        ransomware_windows: 300,
    }
}

/// Reduced corpus for parameter sweeps (each cell retrains from scratch).
pub fn sweep_spec<S: Scalar>() -> CorpusSpec<S> {
    CorpusSpec {
        benign_traces: 5,
        traces_per_family: 2,
        benign_windows: 150,
        ransomware_windows: 150,
        ..acceptance_spec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceData<S: Scalar> {
    pub events: Vec<EventRecord<S>>,
    pub truth: GroundTruth<S>,
}

/// One labeled window of one corpus trace.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusWindow<S: Scalar> {
    pub trace: usize,
    pub start: S,
    pub end: S,
    pub range: Range<usize>,
    pub label: bool,
    pub family: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus<S: Scalar> {
    pub traces: Vec<TraceData<S>>,
    pub windows: Vec<CorpusWindow<S>>,
}

impl<S: Scalar> Corpus<S> {
    pub fn slice(&self, window: &CorpusWindow<S>) -> &[EventRecord<S>] {
        &self.traces[window.trace].events[window.range.clone()]
    }

    pub fn label_counts(&self) -> (usize, usize) {
        let positives = self.windows.iter().filter(|w| w.label).count();
        (self.windows.len() - positives, positives)
    }
}

/// Window and label a set of already-generated traces, keeping every window.
pub fn corpus_from_traces<S: Scalar>(
    traces: Vec<TraceData<S>>,
    params: &GraphParams<S>,
) -> Result<Corpus<S>, CorpusError> {
    let mut windows = Vec::new();
    for (trace_idx, trace) in traces.iter().enumerate() {
        for (start, end, range) in window_ranges(&trace.events, params) {
            let slice = &trace.events[range.clone()];
            let truth = window_truth(slice, start, end, &trace.truth)
                .map_err(|e| CorpusError::Label(e.to_string()))?;
            windows.push(CorpusWindow {
                trace: trace_idx,
                start,
                end,
                range,
                label: truth.positive,
                family: truth.family,
            });
        }
    }
    Ok(Corpus { traces, windows })
}

/// Generate, window, label and quota-balance a corpus from its spec.
pub fn build_corpus<S: Scalar>(
    spec: &CorpusSpec<S>,
    params: &GraphParams<S>,
    seed: u64,
) -> Result<Corpus<S>, CorpusError> {
    let mut traces = Vec::new();
    for (family_idx, family) in spec.families.iter().enumerate() {
        for t in 0..spec.traces_per_family {
            let stream = 1000 + (family_idx as u64) * 100 + t as u64;
            let trace_seed = derive_seed(seed, stream);
            let bg = gen_benign(&spec.benign, derive_seed(trace_seed, 1))?;
            // Stagger onsets across traces so episode boundaries land at
            // varied window-grid offsets.
            let onset = family.onset + S::of((t as f64 * 13.0) % 37.0);
            let profile = RansomwareProfile { onset, ..family.clone() };
            let episode = gen_ransomware(&profile, derive_seed(trace_seed, 2))?;
            let interval = ransomware_interval(&profile, &episode);
            let (events, truth) = merge_traces(vec![
                (bg, vec![benign_interval(&spec.benign)]),
                (episode, vec![interval]),
            ]);
            traces.push(TraceData { events, truth });
        }
    }
    for b in 0..spec.benign_traces {
        let trace_seed = derive_seed(seed, 5000 + b as u64);
        let events = gen_benign(&spec.benign, trace_seed)?;
        let truth = GroundTruth { intervals: vec![benign_interval(&spec.benign)] };
        traces.push(TraceData { events, truth });
    }

    let full = corpus_from_traces(traces, params)?;
    let windows = balance(full.windows, spec.benign_windows, spec.ransomware_windows);
    Ok(Corpus { traces: full.traces, windows })
}

/// Round-robin across sources (family for positives, trace for negatives)
/// until each quota is met, then restore (trace, start) order.
fn balance<S: Scalar>(
    windows: Vec<CorpusWindow<S>>,
    benign_quota: usize,
    ransomware_quota: usize,
) -> Vec<CorpusWindow<S>> {
    let mut benign_groups: BTreeMap<String, Vec<CorpusWindow<S>>> = BTreeMap::new();
    let mut rw_groups: BTreeMap<String, Vec<CorpusWindow<S>>> = BTreeMap::new();
    for w in windows {
        if w.label {
            let family = w.family.clone().unwrap_or_default();
            rw_groups.entry(family).or_default().push(w);
        } else {
            benign_groups.entry(format!("t{:06}", w.trace)).or_default().push(w);
        }
    }
    let take = |groups: &mut BTreeMap<String, Vec<CorpusWindow<S>>>, quota: usize| {
        for g in groups.values_mut() {
            g.reverse(); // pop from the chronological front
        }
        let mut out = Vec::with_capacity(quota);
        while out.len() < quota {
            let mut any = false;
            for g in groups.values_mut() {
                if out.len() >= quota {
                    break;
                }
                if let Some(w) = g.pop() {
                    out.push(w);
                    any = true;
                }
            }
            if !any {
                break;
            }
        }
        out
    };
    let mut selected = take(&mut benign_groups, benign_quota);
    selected.extend(take(&mut rw_groups, ransomware_quota));
    selected.sort_by(|a, b| {
        a.trace
            .cmp(&b.trace)
            .then(a.start.partial_cmp(&b.start).expect("finite window starts"))
    });
    selected
}
