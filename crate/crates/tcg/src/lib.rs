//! Behavioral ransomware detection over temporal-correlation graphs.
//!
//! The engine turns system-event traces into sliding-window graphs, embeds
//! each window as a fixed 15-feature vector, and fuses a benign baseline, a
//! linear classifier and subgraph-signature matching into per-window
//! verdicts. A deterministic trace generator keeps every experiment
//! reproducible from a seed.
//!
//! The analytical core is generic over the floating-point [`Scalar`] type;
//! the aliases below pin the `f64` instantiation used by the pipeline, the
//! command-line tool and all on-disk formats.

pub mod corpus;
pub mod detect;
pub mod eval;
pub mod event;
pub mod features;
pub mod graph;
pub mod pipeline;
pub mod scalar;
pub mod signature;
pub mod simgen;

pub use scalar::Scalar;

/// f64 instantiations used by the pipeline and the CLI.
pub type EventRecord = event::EventRecord<f64>;
pub type LabelInterval = event::LabelInterval<f64>;
pub type GroundTruth = event::GroundTruth<f64>;
pub type GraphParams = graph::GraphParams<f64>;
pub type TemporalCorrelationGraph = graph::TemporalCorrelationGraph<f64>;
pub type GraphSnapshot = graph::GraphSnapshot<f64>;
pub type FeatureVector = features::FeatureVector<f64>;
pub type Normalizer = features::Normalizer<f64>;
pub type TransitionModel = features::TransitionModel<f64>;
pub type BaselineModel = detect::BaselineModel<f64>;
pub type LinearClassifier = detect::LinearClassifier<f64>;
pub type DetectionModel = detect::DetectionModel<f64>;
pub type Verdict = detect::Verdict<f64>;
pub type SignaturePattern = signature::SignaturePattern<f64>;
pub type BenignProfile = simgen::BenignProfile<f64>;
pub type RansomwareProfile = simgen::RansomwareProfile<f64>;
