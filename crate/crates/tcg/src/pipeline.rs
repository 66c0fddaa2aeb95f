//! Orchestration: configuration, training runs, streaming/batch detection,
//! alert persistence, reports and parameter sweeps.
//!
//! Everything here is pinned to the `f64` instantiation of the core, since
//! this layer owns the on-disk formats. All outputs are fully determined by
//! (config, seed, inputs); log lines carrying wall-clock timings go to
//! stderr, never into output files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    build_corpus, corpus_from_traces, demo_benign_profile, demo_families, sweep_spec,
    Corpus, CorpusError, CorpusSpec, TraceData,
};
use crate::detect::{
    calibrate_threshold, decide, fit_baseline, train_classifier, DetectError,
    DetectionModel, TrainHyper, Verdict, MODEL_FORMAT_VERSION,
};
use crate::eval::{
    accuracy, build_report, detection_latency, episodes_from_truth,
    label_verdict_windows, precision, recall, write_speed_sweep_csv,
    write_timeline_csv, write_window_sweep_csv, ConfusionCounts, EvalReport,
    SpeedSweepRow, WindowSweepRow, WindowTruth,
};
use crate::event::{
    align_events, read_ground_truth, read_trace, scan_trace, write_ground_truth,
    write_trace, EventError, EventRecord,
};
use crate::features::{
    apply_normalizer, feature_vector, fit_normalizer, FeatureError, FeatureVector,
    TransitionModel, FEATURE_LAYOUT_VERSION,
};
use crate::graph::{
    build_graph, to_dot, window_ranges, GraphBuilder, GraphError, GraphParams,
    TemporalCorrelationGraph,
};
use crate::signature::{
    builtin_signatures, load_signature_dir, match_signature, SignatureError,
    SignaturePattern,
};
use crate::simgen::{
    benign_interval, derive_seed, gen_benign, gen_ransomware, merge_traces,
    ransomware_interval, BenignProfile, RansomwareProfile, SimError,
};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Signature(#[from] SignatureError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unreadable input: {0}")]
    UnreadableInput(String),
    #[error("assertion failed: {0}")]
    AssertionFailed(String),
}

impl PipelineError {
    /// Process exit code: 3 for assertion failures, 2 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::AssertionFailed(_) => 3,
            _ => 2,
        }
    }
}

/// Analysis knobs shared by training, detection and the sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub graph: GraphParams<f64>,
    /// Additive smoothing of the transition model.
    pub alpha: f64,
    /// Bits/byte cutoff for "high entropy" writes; must match between
    /// training and detection for features to stay comparable.
    pub entropy_threshold: f64,
    /// Classifier probability needed to flag a window.
    pub p_thresh: f64,
    /// Benign false-positive budget used when calibrating the anomaly
    /// threshold.
    pub target_fpr: f64,
    pub hyper: TrainHyper<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            graph: GraphParams::default(),
            alpha: 1.0,
            entropy_threshold: 6.0,
            p_thresh: 0.5,
            target_fpr: 0.05,
            hyper: TrainHyper::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Stream,
    #[default]
    Batch,
}

/// Simulation section of the config: one benign background plus any number
/// of ransomware episodes merged into a single trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub benign: BenignProfile<f64>,
    #[serde(default)]
    pub ransomware: Vec<RansomwareProfile<f64>>,
}

/// Demo simulation: background workload with a fast episode and a slow one.
pub fn default_sim_config() -> SimConfig {
    let families = demo_families::<f64>();
    let fast = RansomwareProfile {
        onset: 60.0,
        target_count: 600,
        ..families[0].clone()
    };
    let slow = RansomwareProfile {
        onset: 240.0,
        target_count: 30,
        ..families[2].clone()
    };
    SimConfig {
        benign: demo_benign_profile(),
        ransomware: vec![fast, slow],
    }
}

/// Corpus sizing for sweeps (each sweep cell regenerates and retrains).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusScale {
    pub benign_traces: u32,
    pub traces_per_family: u32,
    pub benign_windows: usize,
    pub ransomware_windows: usize,
}

impl Default for CorpusScale {
    fn default() -> Self {
        let spec = sweep_spec::<f64>();
        CorpusScale {
            benign_traces: spec.benign_traces,
            traces_per_family: spec.traces_per_family,
            benign_windows: spec.benign_windows,
            ransomware_windows: spec.ransomware_windows,
        }
    }
}

fn default_sizes() -> Vec<f64> {
    vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0]
}

fn default_speeds() -> Vec<f64> {
    vec![4.5, 4.8, 5.2, 5.7, 6.0]
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_episodes_per_speed() -> u32 {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub sizes: Vec<f64>,
    pub speeds: Vec<f64>,
    pub seeds: Vec<u64>,
    pub episodes_per_speed: u32,
    pub corpus: CorpusScale,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            sizes: default_sizes(),
            speeds: default_speeds(),
            seeds: default_seeds(),
            episodes_per_speed: default_episodes_per_speed(),
            corpus: CorpusScale::default(),
        }
    }
}

/// Thresholds enforced by `--assert` runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssertThresholds {
    pub min_precision: f64,
    pub min_recall: f64,
    pub min_detection_rate: f64,
    pub max_rate_spread: f64,
    /// Required accuracy(40 s) - accuracy(10 s) gain in window sweeps.
    pub min_accuracy_gain: f64,
    /// Largest tolerated adjacent-size accuracy inversion.
    pub max_inversion: f64,
}

impl Default for AssertThresholds {
    fn default() -> Self {
        AssertThresholds {
            min_precision: 0.90,
            min_recall: 0.88,
            min_detection_rate: 0.85,
            max_rate_spread: 0.08,
            min_accuracy_gain: 0.03,
            max_inversion: 0.02,
        }
    }
}

fn default_format_version() -> u32 {
    CONFIG_FORMAT_VERSION
}

fn default_seed() -> u64 {
    1
}

/// Top-level configuration document. Unknown keys are rejected; every field
/// defaults to the module-level default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    #[serde(default)]
    pub graph: GraphParams<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_entropy_threshold")]
    pub entropy_threshold: f64,
    #[serde(default = "default_p_thresh")]
    pub p_thresh: f64,
    #[serde(default = "default_target_fpr")]
    pub target_fpr: f64,
    #[serde(default)]
    pub signature_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Run the stream pipeline on bounded inter-stage queues with one thread
    /// per stage; single-threaded execution produces identical outputs.
    #[serde(default)]
    pub threaded: bool,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub truth: Option<PathBuf>,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub assert_thresholds: AssertThresholds,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_entropy_threshold() -> f64 {
    6.0
}

fn default_p_thresh() -> f64 {
    0.5
}

fn default_target_fpr() -> f64 {
    0.05
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(PipelineError::InvalidConfig(format!(
                "unsupported config format version {}",
                self.format_version
            )));
        }
        self.graph
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(PipelineError::InvalidConfig("alpha must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.p_thresh) {
            return Err(PipelineError::InvalidConfig("p_thresh must be in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.target_fpr) {
            return Err(PipelineError::InvalidConfig("target_fpr must be in [0, 1)".into()));
        }
        if !(0.0..=8.0).contains(&self.entropy_threshold) {
            return Err(PipelineError::InvalidConfig(
                "entropy_threshold must be in [0, 8]".into(),
            ));
        }
        Ok(())
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            graph: self.graph,
            alpha: self.alpha,
            entropy_threshold: self.entropy_threshold,
            p_thresh: self.p_thresh,
            target_fpr: self.target_fpr,
            hyper: TrainHyper::default(),
        }
    }

    fn corpus_spec(&self) -> CorpusSpec<f64> {
        let scale = self.sweep.corpus;
        let (benign, families) = match &self.sim {
            Some(sim) if !sim.ransomware.is_empty() => {
                (sim.benign.clone(), sim.ransomware.clone())
            }
            Some(sim) => (sim.benign.clone(), demo_families()),
            None => (demo_benign_profile(), demo_families()),
        };
        CorpusSpec {
            benign,
            families,
            benign_traces: scale.benign_traces,
            traces_per_family: scale.traces_per_family,
            benign_windows: scale.benign_windows,
            ransomware_windows: scale.ransomware_windows,
        }
    }
}

/// One structured JSON log line per pipeline stage, on stderr.
fn log_stage(stage: &str, counts: &[(&str, u64)], wall_ms: f64) {
    let mut fields: Vec<String> = vec![format!("\"stage\":\"{stage}\"")];
    for (k, v) in counts {
        fields.push(format!("\"{k}\":{v}"));
    }
    fields.push(format!("\"wall_ms\":{wall_ms:.3}"));
    eprintln!("{{{}}}", fields.join(","));
}

/// A verdict stamped with its emission order and trace-time emission stamp.
///
/// `emit_ts` is the trace timestamp at which the window's watermark
/// (window end + delta) passed, so batch and stream runs write identical
/// files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub seq: u64,
    pub emit_ts: f64,
    #[serde(flatten)]
    pub verdict: Verdict<f64>,
}

pub fn write_alerts(path: &Path, alerts: &[Alert]) -> Result<(), PipelineError> {
    let mut out = BufWriter::new(File::create(path)?);
    for alert in alerts {
        let line = serde_json::to_string(alert).expect("alert serialization");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_alerts(path: &Path) -> Result<Vec<Alert>, PipelineError> {
    let reader = BufReader::new(File::open(path)?);
    let mut alerts = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let alert: Alert = serde_json::from_str(trimmed).map_err(|e| {
            PipelineError::UnreadableInput(format!("alerts line {}: {}", idx + 1, e))
        })?;
        alerts.push(alert);
    }
    Ok(alerts)
}

/// Cumulative per-stage wall time, reported once per run.
#[derive(Debug, Default, Clone, Copy)]
struct StageTimers {
    build_s: f64,
    features_s: f64,
    decide_s: f64,
}

/// Graph, features, signature matching and fused decision for one closed
/// window.
fn process_window(
    graph: TemporalCorrelationGraph<f64>,
    slice: &[EventRecord<f64>],
    model: &DetectionModel<f64>,
    cfg: &AnalysisConfig,
    patterns: &[SignaturePattern<f64>],
    timers: &mut StageTimers,
) -> Verdict<f64> {
    let t0 = Instant::now();
    let raw = feature_vector(&graph, slice, &model.transition_model, cfg.entropy_threshold);
    let z = apply_normalizer(&model.normalizer, &raw);
    timers.features_s += t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let hits: Vec<String> = patterns
        .iter()
        .filter(|p| !match_signature(&graph, p, 1).is_empty())
        .map(|p| p.name.clone())
        .collect();
    let verdict = decide(
        &z,
        &model.baseline,
        model.threshold,
        &model.classifier,
        cfg.p_thresh,
        graph.window_start(),
        graph.window_end(),
        hits,
    );
    timers.decide_s += t1.elapsed().as_secs_f64();
    verdict
}

/// Trace-time emission stamp for a window: the first event timestamp at or
/// past the watermark (window end + delta), or the last event of the trace.
fn batch_emit_ts(events: &[EventRecord<f64>], end: f64, delta: f64) -> f64 {
    let idx = events.partition_point(|e| e.ts < end + delta);
    if idx < events.len() {
        events[idx].ts
    } else {
        events.last().map(|e| e.ts).unwrap_or(end)
    }
}

/// Batch detection over an aligned trace: one alert per grid window.
pub fn batch_alerts(
    model: &DetectionModel<f64>,
    cfg: &AnalysisConfig,
    patterns: &[SignaturePattern<f64>],
    events: &[EventRecord<f64>],
) -> Result<Vec<Alert>, PipelineError> {
    let params = model.graph_params;
    let mut timers = StageTimers::default();
    let mut alerts = Vec::new();
    let t_build = Instant::now();
    for (seq, (start, end, range)) in window_ranges(events, &params).into_iter().enumerate() {
        let slice = &events[range];
        let t0 = Instant::now();
        let graph = build_graph(slice, start, end, &params)?;
        timers.build_s += t0.elapsed().as_secs_f64();
        let verdict = process_window(graph, slice, model, cfg, patterns, &mut timers);
        alerts.push(Alert {
            seq: seq as u64,
            emit_ts: batch_emit_ts(events, end, params.delta),
            verdict,
        });
    }
    let _ = t_build;
    log_stage("build", &[("windows", alerts.len() as u64)], timers.build_s * 1e3);
    log_stage("features", &[("windows", alerts.len() as u64)], timers.features_s * 1e3);
    log_stage(
        "decide",
        &[(
            "alerts",
            alerts.iter().filter(|a| a.verdict.is_ransomware()).count() as u64,
        )],
        timers.decide_s * 1e3,
    );
    Ok(alerts)
}

/// Batch verdicts without signature matching; used by sweeps and tests.
pub fn detect_verdicts(
    model: &DetectionModel<f64>,
    cfg: &AnalysisConfig,
    events: &[EventRecord<f64>],
) -> Result<Vec<Verdict<f64>>, PipelineError> {
    Ok(batch_alerts(model, cfg, &[], events)?
        .into_iter()
        .map(|a| a.verdict)
        .collect())
}

struct OpenWindow {
    builder: GraphBuilder<f64>,
    events: Vec<EventRecord<f64>>,
}

/// Incremental window detection over an in-order event stream.
///
/// Windows close once the stream time passes their watermark
/// (window end + delta); an event arriving earlier can still create edges
/// inside the window, so closing sooner would break stream/batch
/// equivalence.
pub struct StreamDetector<'a> {
    model: &'a DetectionModel<f64>,
    cfg: AnalysisConfig,
    patterns: &'a [SignaturePattern<f64>],
    open: BTreeMap<usize, OpenWindow>,
    next_k: usize,
    last_ts: Option<f64>,
    seq: u64,
    out_of_order: u64,
    timers: StageTimers,
    build_s: f64,
}

impl<'a> StreamDetector<'a> {
    pub fn new(
        model: &'a DetectionModel<f64>,
        cfg: AnalysisConfig,
        patterns: &'a [SignaturePattern<f64>],
    ) -> Self {
        StreamDetector {
            model,
            cfg,
            patterns,
            open: BTreeMap::new(),
            next_k: 0,
            last_ts: None,
            seq: 0,
            out_of_order: 0,
            timers: StageTimers::default(),
            build_s: 0.0,
        }
    }

    /// Records skipped for violating arrival order.
    pub fn out_of_order(&self) -> u64 {
        self.out_of_order
    }

    fn finalize(&mut self, window: OpenWindow, emit_ts: f64) -> Alert {
        let graph = window.builder.into_graph();
        let verdict = process_window(
            graph,
            &window.events,
            self.model,
            &self.cfg,
            self.patterns,
            &mut self.timers,
        );
        let alert = Alert { seq: self.seq, emit_ts, verdict };
        self.seq += 1;
        alert
    }

    /// Feed the next event; returns alerts for any windows its arrival
    /// closed.
    pub fn push(&mut self, event: EventRecord<f64>) -> Vec<Alert> {
        if let Some(last) = self.last_ts {
            if event.ts < last {
                self.out_of_order += 1;
                return Vec::new();
            }
        }
        self.last_ts = Some(event.ts);
        let params = self.model.graph_params;

        // Open every grid window whose start the stream has reached.
        let k_max = params.last_window_index(event.ts);
        while self.next_k <= k_max {
            let start = params.window_start(self.next_k);
            let end = start + params.window;
            self.open.insert(
                self.next_k,
                OpenWindow {
                    builder: GraphBuilder::new(start, end, params),
                    events: Vec::new(),
                },
            );
            self.next_k += 1;
        }

        // Close windows whose watermark has passed.
        let mut alerts = Vec::new();
        loop {
            let Some((&k, window)) = self.open.first_key_value() else {
                break;
            };
            if window.builder.graph().window_end() + params.delta <= event.ts {
                let window = self.open.remove(&k).expect("window present");
                alerts.push(self.finalize(window, event.ts));
            } else {
                break;
            }
        }

        // Insert into the remaining windows that contain the event.
        let t0 = Instant::now();
        for window in self.open.values_mut() {
            let g = window.builder.graph();
            if event.ts >= g.window_start() && event.ts < g.window_end() {
                window
                    .builder
                    .push(&event)
                    .expect("in-order event within window bounds");
                window.events.push(event.clone());
            }
        }
        self.build_s += t0.elapsed().as_secs_f64();
        alerts
    }

    /// Close all remaining windows at end of stream.
    pub fn finish(mut self) -> (Vec<Alert>, u64) {
        let emit_ts = self.last_ts.unwrap_or(0.0);
        let mut alerts = Vec::new();
        while let Some((&k, _)) = self.open.first_key_value() {
            let window = self.open.remove(&k).expect("window present");
            alerts.push(self.finalize(window, emit_ts));
        }
        log_stage("build", &[("windows", self.seq)], self.build_s * 1e3);
        log_stage("features", &[("windows", self.seq)], self.timers.features_s * 1e3);
        log_stage("decide", &[("windows", self.seq)], self.timers.decide_s * 1e3);
        (alerts, self.out_of_order)
    }
}

/// Outcome of the held-out test evaluation attached to a training run.
#[derive(Debug, Clone)]
pub struct TestOutcome {
    /// Corpus window indices of the test fold, ascending.
    pub indices: Vec<usize>,
    pub verdicts: Vec<Verdict<f64>>,
    pub truths: Vec<WindowTruth>,
    pub counts: ConfusionCounts,
    /// Per-epoch training loss (epochs + 1 entries).
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: DetectionModel<f64>,
    pub test: TestOutcome,
    pub split: (usize, usize, usize),
}

const SPLIT_STREAM: u64 = 0x517e;

/// Fit the full detection stack on a labeled corpus with a seeded 60/20/20
/// train/validation/test split by window.
pub fn fit_on_corpus(
    corpus: &Corpus<f64>,
    cfg: &AnalysisConfig,
    seed: u64,
) -> Result<FitOutcome, PipelineError> {
    cfg.graph.validate()?;
    let n = corpus.windows.len();
    if n < 10 {
        return Err(DetectError::InsufficientData { need: 10, got: n }.into());
    }

    let mut graphs = Vec::with_capacity(n);
    for w in &corpus.windows {
        graphs.push(build_graph(corpus.slice(w), w.start, w.end, &cfg.graph)?);
    }

    let mut shuffled: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SPLIT_STREAM));
    shuffled.shuffle(&mut rng);
    let n_train = n * 6 / 10;
    let n_val = n * 2 / 10;
    let mut train: Vec<usize> = shuffled[..n_train].to_vec();
    let mut val: Vec<usize> = shuffled[n_train..n_train + n_val].to_vec();
    let mut test: Vec<usize> = shuffled[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    let label = |i: &usize| corpus.windows[*i].label;
    if train.iter().all(label) || !train.iter().any(label) {
        return Err(DetectError::DegenerateLabels.into());
    }

    let transition_model = TransitionModel::fit(
        train
            .iter()
            .filter(|i| !corpus.windows[**i].label)
            .map(|i| &graphs[*i]),
        cfg.alpha,
    )?;

    let raw: Vec<FeatureVector<f64>> = corpus
        .windows
        .iter()
        .zip(&graphs)
        .map(|(w, g)| {
            feature_vector(g, corpus.slice(w), &transition_model, cfg.entropy_threshold)
        })
        .collect();

    let train_raw: Vec<FeatureVector<f64>> = train.iter().map(|&i| raw[i]).collect();
    let normalizer = fit_normalizer(&train_raw)?;
    let z: Vec<FeatureVector<f64>> =
        raw.iter().map(|v| apply_normalizer(&normalizer, v)).collect();

    let benign_train: Vec<FeatureVector<f64>> = train
        .iter()
        .filter(|i| !corpus.windows[**i].label)
        .map(|&i| z[i])
        .collect();
    let baseline = fit_baseline(&benign_train)?;

    let benign_val: Vec<FeatureVector<f64>> = val
        .iter()
        .filter(|i| !corpus.windows[**i].label)
        .map(|&i| z[i])
        .collect();
    let threshold = calibrate_threshold(&baseline, &benign_val, cfg.target_fpr)?;

    let train_z: Vec<FeatureVector<f64>> = train.iter().map(|&i| z[i]).collect();
    let train_y: Vec<bool> = train.iter().map(label).collect();
    let (classifier, losses) = train_classifier(&train_z, &train_y, cfg.hyper)?;

    let model = DetectionModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_layout_version: FEATURE_LAYOUT_VERSION,
        graph_params: cfg.graph,
        normalizer,
        baseline,
        threshold,
        classifier,
        transition_model,
    };

    let mut verdicts = Vec::with_capacity(test.len());
    let mut truths = Vec::with_capacity(test.len());
    for &i in &test {
        let w = &corpus.windows[i];
        verdicts.push(decide(
            &z[i],
            &model.baseline,
            model.threshold,
            &model.classifier,
            cfg.p_thresh,
            w.start,
            w.end,
            Vec::new(),
        ));
        truths.push(WindowTruth { positive: w.label, family: w.family.clone() });
    }
    let counts = ConfusionCounts::from_pairs(
        verdicts
            .iter()
            .zip(&truths)
            .map(|(v, t)| (v.is_ransomware(), t.positive)),
    );

    Ok(FitOutcome {
        model,
        test: TestOutcome { indices: test, verdicts, truths, counts, losses },
        split: (n_train, n_val, n - n_train - n_val),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub events: usize,
    pub episodes: usize,
    pub trace_path: PathBuf,
    pub truth_path: PathBuf,
}

/// Derived sidecar path: `trace.jsonl` -> `trace.truth.jsonl`.
pub fn default_truth_path(trace: &Path) -> PathBuf {
    trace.with_extension("truth.jsonl")
}

pub fn run_simulate(
    cfg: &PipelineConfig,
    trace_out: &Path,
    truth_out: Option<&Path>,
) -> Result<SimulateSummary, PipelineError> {
    let sim = cfg.sim.clone().unwrap_or_else(default_sim_config);
    let t0 = Instant::now();
    let mut parts = vec![(
        gen_benign(&sim.benign, derive_seed(cfg.seed, 0xb6))?,
        vec![benign_interval(&sim.benign)],
    )];
    for (i, profile) in sim.ransomware.iter().enumerate() {
        let events = gen_ransomware(profile, derive_seed(cfg.seed, 0xff00 + i as u64))?;
        let interval = ransomware_interval(profile, &events);
        parts.push((events, vec![interval]));
    }
    let (events, truth) = merge_traces(parts);
    let truth_path = truth_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_truth_path(trace_out));
    write_trace(trace_out, &events)?;
    write_ground_truth(&truth_path, &truth)?;
    log_stage("emit", &[("events", events.len() as u64)], t0.elapsed().as_secs_f64() * 1e3);
    Ok(SimulateSummary {
        events: events.len(),
        episodes: truth.ransomware_intervals().count(),
        trace_path: trace_out.to_path_buf(),
        truth_path,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub windows: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub threshold: f64,
    pub model_path: PathBuf,
    pub test_alerts_path: PathBuf,
}

/// Sidecar holding the held-out test verdicts of a training run.
pub fn test_alerts_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("test_alerts.jsonl")
}

pub fn run_train(
    cfg: &PipelineConfig,
    input: &Path,
    truth_path: &Path,
    model_out: &Path,
) -> Result<TrainSummary, PipelineError> {
    let t0 = Instant::now();
    let events = align_events(read_trace(input)?)?;
    let truth = read_ground_truth(truth_path)?;
    log_stage("ingest", &[("events", events.len() as u64)], t0.elapsed().as_secs_f64() * 1e3);

    let corpus = corpus_from_traces(
        vec![TraceData { events: events.clone(), truth }],
        &cfg.graph,
    )?;
    let outcome = fit_on_corpus(&corpus, &cfg.analysis(), cfg.seed)?;

    std::fs::write(model_out, outcome.model.to_json())?;
    let alerts: Vec<Alert> = outcome
        .test
        .verdicts
        .iter()
        .enumerate()
        .map(|(i, v)| Alert {
            seq: i as u64,
            emit_ts: batch_emit_ts(&events, v.window_end, cfg.graph.delta),
            verdict: v.clone(),
        })
        .collect();
    let alerts_path = test_alerts_path(model_out);
    write_alerts(&alerts_path, &alerts)?;
    log_stage("emit", &[("alerts", alerts.len() as u64)], t0.elapsed().as_secs_f64() * 1e3);

    let counts = &outcome.test.counts;
    Ok(TrainSummary {
        windows: corpus.windows.len(),
        train: outcome.split.0,
        val: outcome.split.1,
        test: outcome.split.2,
        precision: precision(counts),
        recall: recall(counts),
        f1: crate::eval::f1(counts),
        accuracy: accuracy(counts),
        threshold: outcome.model.threshold,
        model_path: model_out.to_path_buf(),
        test_alerts_path: alerts_path,
    })
}

/// Load the signature set: builtins first, then any configured directory
/// (sorted); malformed files are reported on stderr and skipped.
pub fn load_signatures(
    cfg: &PipelineConfig,
) -> Result<Vec<SignaturePattern<f64>>, PipelineError> {
    let mut patterns = builtin_signatures::<f64>();
    if let Some(dir) = &cfg.signature_dir {
        let (extra, failures) = load_signature_dir::<f64>(dir)?;
        for (path, err) in &failures {
            eprintln!("{{\"stage\":\"signatures\",\"skipped\":\"{}\",\"reason\":\"{}\"}}",
                path.display(), err);
        }
        patterns.extend(extra);
    }
    Ok(patterns)
}

pub fn load_model(path: &Path) -> Result<DetectionModel<f64>, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    Ok(DetectionModel::from_json(&text)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectSummary {
    pub windows: usize,
    pub flagged: usize,
    pub skipped_lines: u64,
    pub alerts_path: PathBuf,
}

pub fn run_detect(
    cfg: &PipelineConfig,
    model_path: &Path,
    input: &Path,
    output: &Path,
) -> Result<DetectSummary, PipelineError> {
    let model = load_model(model_path)?;
    let patterns = load_signatures(cfg)?;
    let analysis = AnalysisConfig { graph: model.graph_params, ..cfg.analysis() };

    let t_ingest = Instant::now();
    let (events, parse_errors) = scan_trace::<f64, _>(File::open(input)?)?;
    let mut skipped = parse_errors.len() as u64;
    for err in parse_errors.iter().take(5) {
        eprintln!("{{\"stage\":\"ingest\",\"skipped_line\":\"{err}\"}}");
    }
    log_stage(
        "ingest",
        &[("events", events.len() as u64), ("skipped", skipped)],
        t_ingest.elapsed().as_secs_f64() * 1e3,
    );

    let alerts = match cfg.mode {
        Mode::Batch => {
            let aligned = align_events(events)?;
            batch_alerts(&model, &analysis, &patterns, &aligned)?
        }
        Mode::Stream => {
            let (alerts, out_of_order) = if cfg.threaded {
                stream_threaded(&model, &analysis, &patterns, events)
            } else {
                let mut detector = StreamDetector::new(&model, analysis.clone(), &patterns);
                let mut alerts = Vec::new();
                for event in events {
                    alerts.extend(detector.push(event));
                }
                let (rest, out_of_order) = detector.finish();
                alerts.extend(rest);
                (alerts, out_of_order)
            };
            skipped += out_of_order;
            alerts
        }
    };

    let t_emit = Instant::now();
    write_alerts(output, &alerts)?;
    log_stage("emit", &[("alerts", alerts.len() as u64)], t_emit.elapsed().as_secs_f64() * 1e3);

    Ok(DetectSummary {
        windows: alerts.len(),
        flagged: alerts.iter().filter(|a| a.verdict.is_ransomware()).count(),
        skipped_lines: skipped,
        alerts_path: output.to_path_buf(),
    })
}

/// Stream pipeline on bounded queues: ingest -> analyze -> emit, one thread
/// per stage. Ordering is preserved end to end, so output is byte-identical
/// to the single-threaded run.
fn stream_threaded(
    model: &DetectionModel<f64>,
    cfg: &AnalysisConfig,
    patterns: &[SignaturePattern<f64>],
    events: Vec<EventRecord<f64>>,
) -> (Vec<Alert>, u64) {
    const QUEUE_DEPTH: usize = 4096;
    std::thread::scope(|scope| {
        let (event_tx, event_rx) = mpsc::sync_channel::<EventRecord<f64>>(QUEUE_DEPTH);
        let (alert_tx, alert_rx) = mpsc::sync_channel::<Alert>(QUEUE_DEPTH);

        scope.spawn(move || {
            for event in events {
                if event_tx.send(event).is_err() {
                    break;
                }
            }
        });

        let analyze = scope.spawn(move || {
            let mut detector = StreamDetector::new(model, cfg.clone(), patterns);
            for event in event_rx {
                for alert in detector.push(event) {
                    if alert_tx.send(alert).is_err() {
                        return 0;
                    }
                }
            }
            let (rest, out_of_order) = detector.finish();
            for alert in rest {
                if alert_tx.send(alert).is_err() {
                    break;
                }
            }
            out_of_order
        });

        let alerts: Vec<Alert> = alert_rx.iter().collect();
        let out_of_order = analyze.join().expect("analysis thread panicked");
        (alerts, out_of_order)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub report: EvalReport,
    pub report_path: PathBuf,
    pub timeline_path: PathBuf,
}

#[allow(clippy::too_many_arguments)]
pub fn run_eval(
    cfg: &PipelineConfig,
    model_path: Option<&Path>,
    input: &Path,
    truth_path: &Path,
    alerts_path: &Path,
    out_dir: &Path,
    do_assert: bool,
) -> Result<EvalSummary, PipelineError> {
    let window = match model_path {
        Some(path) => load_model(path)?.graph_params.window,
        None => cfg.graph.window,
    };
    let (raw_events, _) = scan_trace::<f64, _>(File::open(input)?)?;
    let events = align_events(raw_events)?;
    let truth = read_ground_truth::<f64>(truth_path)?;
    let alerts = read_alerts(alerts_path)?;
    let verdicts: Vec<Verdict<f64>> = alerts.into_iter().map(|a| a.verdict).collect();

    let truths = label_verdict_windows(&verdicts, &events, &truth)?;
    let episodes = episodes_from_truth(&truth);
    let latency = detection_latency(&verdicts, &episodes, window);
    let report = build_report(&verdicts, &truths, &latency)?;

    std::fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join("report.json");
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&report).expect("report serialization"),
    )?;
    let timeline_path = out_dir.join("timeline.csv");
    let mut timeline = BufWriter::new(File::create(&timeline_path)?);
    write_timeline_csv(&mut timeline, &verdicts)?;
    timeline.flush()?;

    if do_assert {
        let t = cfg.assert_thresholds;
        if report.precision < t.min_precision {
            return Err(PipelineError::AssertionFailed(format!(
                "precision {:.4} below {:.2}",
                report.precision, t.min_precision
            )));
        }
        if report.recall < t.min_recall {
            return Err(PipelineError::AssertionFailed(format!(
                "recall {:.4} below {:.2}",
                report.recall, t.min_recall
            )));
        }
    }
    Ok(EvalSummary { report, report_path, timeline_path })
}

pub fn run_sweep_windows(
    cfg: &PipelineConfig,
    out_dir: &Path,
    do_assert: bool,
) -> Result<Vec<WindowSweepRow>, PipelineError> {
    let spec = cfg.corpus_spec();
    let rows = crate::eval::sweep_windows(
        &spec,
        &cfg.analysis(),
        &cfg.sweep.sizes,
        &cfg.sweep.seeds,
    )?;
    std::fs::create_dir_all(out_dir)?;
    let mut out = BufWriter::new(File::create(out_dir.join("window_sweep.csv"))?);
    write_window_sweep_csv(&mut out, &rows)?;
    out.flush()?;

    if do_assert {
        let t = cfg.assert_thresholds;
        let find = |size: f64| rows.iter().find(|r| (r.window_s - size).abs() < 1e-9);
        if let (Some(short), Some(long)) = (find(10.0), find(40.0)) {
            if long.accuracy < short.accuracy + t.min_accuracy_gain {
                return Err(PipelineError::AssertionFailed(format!(
                    "accuracy(40s) {:.4} does not exceed accuracy(10s) {:.4} by {:.2}",
                    long.accuracy, short.accuracy, t.min_accuracy_gain
                )));
            }
        }
        let inversions = rows
            .windows(2)
            .filter(|pair| pair[1].accuracy < pair[0].accuracy - t.max_inversion)
            .count();
        if inversions > 1 {
            return Err(PipelineError::AssertionFailed(format!(
                "{inversions} adjacent accuracy inversions exceed {:.2}",
                t.max_inversion
            )));
        }
    }
    Ok(rows)
}

pub fn run_sweep_speeds(
    cfg: &PipelineConfig,
    model_path: Option<&Path>,
    out_dir: &Path,
    do_assert: bool,
) -> Result<Vec<SpeedSweepRow>, PipelineError> {
    let spec = cfg.corpus_spec();
    let model = match model_path {
        Some(path) => load_model(path)?,
        None => {
            // No fixed model supplied: fit one on the sweep corpus.
            let corpus = build_corpus(&spec, &cfg.graph, cfg.seed)?;
            fit_on_corpus(&corpus, &cfg.analysis(), cfg.seed)?.model
        }
    };
    let rows = crate::eval::sweep_speeds(
        &spec.benign,
        &model,
        &cfg.analysis(),
        &cfg.sweep.speeds,
        cfg.sweep.episodes_per_speed,
        cfg.seed,
    )?;
    std::fs::create_dir_all(out_dir)?;
    let mut out = BufWriter::new(File::create(out_dir.join("speed_sweep.csv"))?);
    write_speed_sweep_csv(&mut out, &rows)?;
    out.flush()?;

    if do_assert {
        let t = cfg.assert_thresholds;
        for row in &rows {
            if row.detection_rate < t.min_detection_rate {
                return Err(PipelineError::AssertionFailed(format!(
                    "detection rate {:.4} at {} MB/s below {:.2}",
                    row.detection_rate, row.speed_mbps, t.min_detection_rate
                )));
            }
        }
        let max = rows.iter().map(|r| r.detection_rate).fold(0.0, f64::max);
        let min = rows.iter().map(|r| r.detection_rate).fold(1.0, f64::min);
        if !rows.is_empty() && max - min > t.max_rate_spread {
            return Err(PipelineError::AssertionFailed(format!(
                "detection-rate spread {:.4} exceeds {:.2}",
                max - min,
                t.max_rate_spread
            )));
        }
    }
    Ok(rows)
}

/// Export one window of a trace as DOT (and optionally a JSON snapshot).
/// Without an explicit start, the busiest window is chosen.
pub fn run_export_dot(
    cfg: &PipelineConfig,
    input: &Path,
    output: &Path,
    window_start: Option<f64>,
    snapshot: Option<&Path>,
) -> Result<(), PipelineError> {
    let events = align_events(read_trace::<f64>(input)?)?;
    let ranges = window_ranges(&events, &cfg.graph);
    let chosen = match window_start {
        Some(start) => ranges
            .iter()
            .find(|(s, _, _)| (s - start).abs() < 1e-9)
            .ok_or_else(|| {
                PipelineError::UnreadableInput(format!(
                    "no window starts at {start} (stride {})",
                    cfg.graph.stride
                ))
            })?,
        None => ranges
            .iter()
            .max_by_key(|(_, _, range)| range.len())
            .ok_or_else(|| PipelineError::UnreadableInput("empty trace".into()))?,
    };
    let (start, end, range) = (chosen.0, chosen.1, chosen.2.clone());
    let graph = build_graph(&events[range], start, end, &cfg.graph)?;
    std::fs::write(output, to_dot(&graph))?;
    if let Some(snapshot_path) = snapshot {
        let snap = graph.to_snapshot();
        std::fs::write(
            snapshot_path,
            serde_json::to_string_pretty(&snap).expect("snapshot serialization"),
        )?;
    }
    Ok(())
}
