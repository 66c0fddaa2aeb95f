//! Classification metrics, detection-latency accounting and the two
//! parameter sweeps (window size, encryption speed).
//!
//! Window ground truth: a window is positive iff it contains at least one
//! event whose timestamp falls inside a ransomware interval. Pure interval
//! overlap would mark near-empty boundary windows positive and distort
//! recall. Accuracy throughout is window-level.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{build_corpus, CorpusSpec};
use crate::detect::Verdict;
use crate::event::{EventRecord, GroundTruth};
use crate::pipeline::{detect_verdicts, fit_on_corpus, AnalysisConfig, PipelineError};
use crate::scalar::Scalar;
use crate::simgen::{
    benign_interval, gen_benign, gen_ransomware, merge_traces, ransomware_interval,
    BenignProfile, RansomwareProfile,
};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("window [{start}, {end}) is not covered by any ground-truth interval")]
    CoverageGap { start: f64, end: f64 },
    #[error("got {verdicts} verdicts but {truths} truth labels")]
    LengthMismatch { verdicts: usize, truths: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.true_pos += 1,
            (true, false) => self.false_pos += 1,
            (false, false) => self.true_neg += 1,
            (false, true) => self.false_neg += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut counts = ConfusionCounts::default();
        for (predicted, actual) in pairs {
            counts.record(predicted, actual);
        }
        counts
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// 0-denominator cases return 0 so sweeps never abort on empty cells.
pub fn precision(c: &ConfusionCounts) -> f64 {
    ratio(c.true_pos, c.true_pos + c.false_pos)
}

pub fn recall(c: &ConfusionCounts) -> f64 {
    ratio(c.true_pos, c.true_pos + c.false_neg)
}

pub fn f1(c: &ConfusionCounts) -> f64 {
    let p = precision(c);
    let r = recall(c);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn accuracy(c: &ConfusionCounts) -> f64 {
    ratio(c.true_pos + c.true_neg, c.total())
}

/// Ground-truth label of one window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowTruth {
    pub positive: bool,
    /// Family of the interval that made the window positive, if any.
    pub family: Option<String>,
}

/// Label a window from its event slice: positive iff some event falls inside
/// a ransomware interval; otherwise negative when the window overlaps any
/// labeled interval at all; otherwise a coverage gap.
pub fn window_truth<S: Scalar>(
    slice: &[EventRecord<S>],
    start: S,
    end: S,
    truth: &GroundTruth<S>,
) -> Result<WindowTruth, EvalError> {
    for event in slice {
        for interval in truth.ransomware_intervals() {
            if interval.contains(event.ts) {
                return Ok(WindowTruth {
                    positive: true,
                    family: Some(interval.family.clone()),
                });
            }
        }
    }
    if truth.intervals.iter().any(|iv| iv.overlaps(start, end)) {
        Ok(WindowTruth { positive: false, family: None })
    } else {
        Err(EvalError::CoverageGap { start: start.to64(), end: end.to64() })
    }
}

/// Confusion counts for verdicts over one aligned trace and its sidecar.
pub fn confusion<S: Scalar>(
    verdicts: &[Verdict<S>],
    events: &[EventRecord<S>],
    truth: &GroundTruth<S>,
) -> Result<ConfusionCounts, EvalError> {
    let truths = label_verdict_windows(verdicts, events, truth)?;
    Ok(ConfusionCounts::from_pairs(
        verdicts
            .iter()
            .zip(&truths)
            .map(|(v, t)| (v.is_ransomware(), t.positive)),
    ))
}

/// Recompute each verdict window's truth label from the trace and sidecar.
pub fn label_verdict_windows<S: Scalar>(
    verdicts: &[Verdict<S>],
    events: &[EventRecord<S>],
    truth: &GroundTruth<S>,
) -> Result<Vec<WindowTruth>, EvalError> {
    verdicts
        .iter()
        .map(|v| {
            let lo = events.partition_point(|e| e.ts < v.window_start);
            let hi = events.partition_point(|e| e.ts < v.window_end);
            window_truth(&events[lo..hi], v.window_start, v.window_end, truth)
        })
        .collect()
}

/// One ransomware episode taken from the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Episode<S: Scalar> {
    pub onset: S,
    pub family: String,
}

pub fn episodes_from_truth<S: Scalar>(truth: &GroundTruth<S>) -> Vec<Episode<S>> {
    truth
        .ransomware_intervals()
        .map(|iv| Episode { onset: iv.start, family: iv.family.clone() })
        .collect()
}

/// Detection-latency accounting. Latencies cover detected episodes only;
/// undetected episodes are counted, never averaged in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LatencyStats<S: Scalar> {
    pub latencies: Vec<S>,
    pub mean: S,
    pub median: S,
    pub max: S,
    pub undetected: usize,
}

/// Latency of an episode: end of the first ransomware-labeled verdict window
/// with start >= onset - window, minus the onset.
pub fn detection_latency<S: Scalar>(
    verdicts: &[Verdict<S>],
    episodes: &[Episode<S>],
    window: S,
) -> LatencyStats<S> {
    let mut latencies = Vec::new();
    let mut undetected = 0usize;
    for episode in episodes {
        let hit = verdicts.iter().find(|v| {
            v.is_ransomware() && v.window_start >= episode.onset - window
        });
        match hit {
            Some(v) => latencies.push(v.window_end - episode.onset),
            None => undetected += 1,
        }
    }
    let n = latencies.len();
    let (mean, median, max) = if n == 0 {
        (S::zero(), S::zero(), S::zero())
    } else {
        let mean = latencies.iter().copied().sum::<S>() / S::of_usize(n);
        let mut sorted = latencies.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite latencies"));
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / S::of(2.0)
        };
        (mean, median, sorted[n - 1])
    };
    LatencyStats { latencies, mean, median, max, undetected }
}

/// Per-family detection metrics: each family is scored against the shared
/// benign negatives plus its own positives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMetrics {
    pub family: String,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

pub fn family_metrics<S: Scalar>(
    verdicts: &[Verdict<S>],
    truths: &[WindowTruth],
) -> Result<Vec<FamilyMetrics>, EvalError> {
    if verdicts.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            verdicts: verdicts.len(),
            truths: truths.len(),
        });
    }
    let mut families: Vec<String> = truths
        .iter()
        .filter_map(|t| t.family.clone())
        .collect();
    families.sort();
    families.dedup();
    let rows = families
        .into_iter()
        .map(|family| {
            let counts = ConfusionCounts::from_pairs(
                verdicts
                    .iter()
                    .zip(truths)
                    .filter(|(_, t)| !t.positive || t.family.as_deref() == Some(&family))
                    .map(|(v, t)| (v.is_ransomware(), t.positive)),
            );
            FamilyMetrics {
                family,
                precision: precision(&counts),
                recall: recall(&counts),
                accuracy: accuracy(&counts),
            }
        })
        .collect();
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean_s: f64,
    pub median_s: f64,
    pub max_s: f64,
    pub detected: usize,
    pub undetected: usize,
}

/// The structured evaluation report written by `eval` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    /// Accuracy and friends are window-level throughout.
    pub metric_granularity: String,
    pub windows: usize,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub per_family: Vec<FamilyMetrics>,
    pub latency: LatencySummary,
}

pub fn build_report<S: Scalar>(
    verdicts: &[Verdict<S>],
    truths: &[WindowTruth],
    latency: &LatencyStats<S>,
) -> Result<EvalReport, EvalError> {
    if verdicts.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            verdicts: verdicts.len(),
            truths: truths.len(),
        });
    }
    let counts = ConfusionCounts::from_pairs(
        verdicts
            .iter()
            .zip(truths)
            .map(|(v, t)| (v.is_ransomware(), t.positive)),
    );
    Ok(EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        metric_granularity: "window-level".to_string(),
        windows: verdicts.len(),
        counts,
        precision: precision(&counts),
        recall: recall(&counts),
        f1: f1(&counts),
        accuracy: accuracy(&counts),
        per_family: family_metrics(verdicts, truths)?,
        latency: LatencySummary {
            mean_s: latency.mean.to64(),
            median_s: latency.median.to64(),
            max_s: latency.max.to64(),
            detected: latency.latencies.len(),
            undetected: latency.undetected,
        },
    })
}

/// Anomaly-timeline export: one (window start, anomaly score, label) row per
/// verdict, the data behind an anomaly-over-time plot.
pub fn write_timeline_csv<S: Scalar, W: Write>(
    mut out: W,
    verdicts: &[Verdict<S>],
) -> std::io::Result<()> {
    writeln!(out, "window_start,anomaly_score,label")?;
    for v in verdicts {
        writeln!(
            out,
            "{},{},{}",
            v.window_start,
            v.anomaly_score,
            if v.is_ransomware() { "ransomware" } else { "benign" }
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSweepRow {
    pub window_s: f64,
    pub accuracy: f64,
    pub stddev: f64,
}

/// Full train/calibrate/test cycle per window size, seed-averaged.
pub fn sweep_windows(
    spec: &CorpusSpec<f64>,
    cfg: &AnalysisConfig,
    sizes: &[f64],
    seeds: &[u64],
) -> Result<Vec<WindowSweepRow>, PipelineError> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut accs = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut cell_cfg = cfg.clone();
            cell_cfg.graph.window = size;
            cell_cfg.graph.stride = size / 2.0;
            let corpus = build_corpus(spec, &cell_cfg.graph, seed)?;
            let outcome = fit_on_corpus(&corpus, &cell_cfg, seed)?;
            accs.push(accuracy(&outcome.test.counts));
        }
        let n = accs.len() as f64;
        let mean = accs.iter().sum::<f64>() / n;
        let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        rows.push(WindowSweepRow { window_s: size, accuracy: mean, stddev: var.sqrt() });
    }
    Ok(rows)
}

pub fn write_window_sweep_csv<W: Write>(
    mut out: W,
    rows: &[WindowSweepRow],
) -> std::io::Result<()> {
    writeln!(out, "window_s,accuracy,stddev")?;
    for row in rows {
        writeln!(out, "{},{},{}", row.window_s, row.accuracy, row.stddev)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedSweepRow {
    pub speed_mbps: f64,
    pub detection_rate: f64,
    pub episodes: usize,
    pub detected: usize,
    pub mean_latency_s: f64,
}

/// Number of episodes injected per generated trace during speed sweeps.
const EPISODES_PER_TRACE: u32 = 5;
const EPISODE_SPACING_S: f64 = 200.0;

/// Detection success per encryption speed under a fixed model: one
/// ransomware profile per speed against a shared benign background.
pub fn sweep_speeds(
    benign: &BenignProfile<f64>,
    model: &crate::DetectionModel,
    cfg: &AnalysisConfig,
    speeds: &[f64],
    episodes_per_speed: u32,
    seed: u64,
) -> Result<Vec<SpeedSweepRow>, PipelineError> {
    let mut rows = Vec::with_capacity(speeds.len());
    for (speed_idx, &speed) in speeds.iter().enumerate() {
        let traces = episodes_per_speed.div_ceil(EPISODES_PER_TRACE);
        let mut episodes_total = 0usize;
        let mut detected = 0usize;
        let mut latency_sum = 0.0;
        let mut latency_n = 0usize;
        for trace_idx in 0..traces {
            let remaining = episodes_per_speed - trace_idx * EPISODES_PER_TRACE;
            let in_trace = remaining.min(EPISODES_PER_TRACE);
            let duration = 120.0 + in_trace as f64 * EPISODE_SPACING_S;
            let bg_profile = BenignProfile { duration, ..benign.clone() };
            let trace_seed = crate::simgen::derive_seed(
                seed,
                0x5eed_0000 + ((speed_idx as u64) << 8) + trace_idx as u64,
            );
            let mut parts = vec![(
                gen_benign(&bg_profile, trace_seed)?,
                vec![benign_interval(&bg_profile)],
            )];
            for ep in 0..in_trace {
                let profile = RansomwareProfile {
                    encryption_speed: speed,
                    mean_file_size: 10.0,
                    entropy_encrypted: 7.9,
                    onset: 60.0 + ep as f64 * EPISODE_SPACING_S,
                    target_count: 40,
                    beacon: true,
                    family_label: format!("speed_{speed:.1}"),
                };
                let events = gen_ransomware(
                    &profile,
                    crate::simgen::derive_seed(trace_seed, 100 + ep as u64),
                )?;
                let interval = ransomware_interval(&profile, &events);
                parts.push((events, vec![interval]));
            }
            let (events, truth) = merge_traces(parts);
            let verdicts = detect_verdicts(model, cfg, &events)?;
            let episodes = episodes_from_truth(&truth);
            let stats =
                detection_latency(&verdicts, &episodes, model.graph_params.window);
            episodes_total += episodes.len();
            detected += episodes.len() - stats.undetected;
            latency_sum += stats.latencies.iter().sum::<f64>();
            latency_n += stats.latencies.len();
        }
        rows.push(SpeedSweepRow {
            speed_mbps: speed,
            detection_rate: ratio(detected as u64, episodes_total as u64),
            episodes: episodes_total,
            detected,
            mean_latency_s: if latency_n == 0 { 0.0 } else { latency_sum / latency_n as f64 },
        });
    }
    Ok(rows)
}

pub fn write_speed_sweep_csv<W: Write>(
    mut out: W,
    rows: &[SpeedSweepRow],
) -> std::io::Result<()> {
    writeln!(out, "speed_mbps,detection_rate,episodes,detected,mean_latency_s")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.speed_mbps, row.detection_rate, row.episodes, row.detected, row.mean_latency_s
        )?;
    }
    Ok(())
}
