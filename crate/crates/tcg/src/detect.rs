//! Baseline anomaly scoring, logistic classification and verdict fusion.
//!
//! A window is flagged when either the classifier probability crosses
//! `p_thresh` or the RMS z-distance from the benign baseline crosses the
//! calibrated threshold. Signature hits escalate severity but never flip a
//! benign label on their own: coarse node keys can coincide with legitimate
//! bulk-write software, so signatures alone would inflate false positives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    FeatureVector, Normalizer, TransitionModel, FEATURE_COUNT, FEATURE_LAYOUT_VERSION,
    SIGMA_FLOOR,
};
use crate::graph::GraphParams;
use crate::scalar::Scalar;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("insufficient data: need at least {need}, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("incompatible model: {0}")]
    IncompatibleModel(String),
}

/// Per-feature mean and deviation of normalized benign training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BaselineModel<S: Scalar> {
    pub mean: [S; FEATURE_COUNT],
    pub std: [S; FEATURE_COUNT],
}

/// Fit the benign baseline (population sigma, floored).
pub fn fit_baseline<S: Scalar>(
    vectors: &[FeatureVector<S>],
) -> Result<BaselineModel<S>, DetectError> {
    if vectors.len() < 10 {
        return Err(DetectError::InsufficientData { need: 10, got: vectors.len() });
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
    Ok(BaselineModel { mean, std })
}

/// RMS z-distance from the baseline: sqrt((1/d) * sum ((x - mu) / sigma)^2).
pub fn anomaly_score<S: Scalar>(model: &BaselineModel<S>, x: &FeatureVector<S>) -> S {
    let mut acc = S::zero();
    for ((x, m), s) in x.as_array().iter().zip(model.mean).zip(model.std) {
        let z = (*x - m) / s;
        acc = acc + z * z;
    }
    (acc / S::of_usize(FEATURE_COUNT)).sqrt()
}

/// Smallest benign-score quantile keeping the empirical false-positive rate
/// at or below `target_fpr` (higher interpolation). With `target_fpr` 0 the
/// threshold lands just above the largest benign score.
pub fn calibrate_threshold<S: Scalar>(
    model: &BaselineModel<S>,
    benign_vectors: &[FeatureVector<S>],
    target_fpr: S,
) -> Result<S, DetectError> {
    if benign_vectors.len() < 20 {
        return Err(DetectError::InsufficientData { need: 20, got: benign_vectors.len() });
    }
    let mut scores: Vec<S> = benign_vectors
        .iter()
        .map(|v| anomaly_score(model, v))
        .collect();
    scores.sort_by(|a, b| a.partial_cmp(b).expect("finite anomaly scores"));
    let n = scores.len();
    let allowed = (target_fpr.to64() * n as f64).floor() as usize;
    // Scores at or above the threshold count as positives, so ties at the
    // candidate value all spill over; scan distinct values from above.
    let mut candidate = None;
    for i in (0..n).rev() {
        let theta = scores[i];
        let positives = n - scores.partition_point(|s| *s < theta);
        if positives <= allowed {
            candidate = Some(theta);
        } else {
            break;
        }
    }
    Ok(candidate.unwrap_or_else(|| S::just_above(scores[n - 1])))
}

/// Training hyperparameters, kept with the model for provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainHyper<S: Scalar> {
    pub learning_rate: S,
    pub epochs: u32,
    pub l2: S,
}

impl<S: Scalar> Default for TrainHyper<S> {
    fn default() -> Self {
        TrainHyper {
            learning_rate: S::of(0.1),
            epochs: 500,
            l2: S::of(1e-4),
        }
    }
}

/// Logistic-loss linear classifier over the 15-feature embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LinearClassifier<S: Scalar> {
    pub weights: [S; FEATURE_COUNT],
    pub bias: S,
    pub hyper: TrainHyper<S>,
}

/// Numerically stable logistic function.
fn logistic<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}

impl<S: Scalar> LinearClassifier<S> {
    pub fn zeroed(hyper: TrainHyper<S>) -> Self {
        LinearClassifier {
            weights: [S::zero(); FEATURE_COUNT],
            bias: S::zero(),
            hyper,
        }
    }

    fn raw_score(&self, x: &FeatureVector<S>) -> S {
        let mut z = self.bias;
        for (w, x) in self.weights.iter().zip(x.as_array()) {
            z = z + *w * x;
        }
        z
    }
}

/// Classifier probability in the open interval (0, 1); saturating inputs
/// clamp instead of overflowing.
pub fn predict<S: Scalar>(model: &LinearClassifier<S>, x: &FeatureVector<S>) -> S {
    let p = logistic(model.raw_score(x));
    let hi = S::one() - S::epsilon() * S::of(0.5);
    p.max(S::min_positive_value()).min(hi)
}

/// Mean logistic loss plus L2 penalty (bias unregularized).
pub fn logistic_loss<S: Scalar>(
    model: &LinearClassifier<S>,
    xs: &[FeatureVector<S>],
    ys: &[bool],
) -> S {
    let n = S::of_usize(xs.len());
    let mut loss = S::zero();
    for (x, &y) in xs.iter().zip(ys) {
        let z = model.raw_score(x);
        // log(1 + exp(-margin)) with the stable softplus form.
        let margin = if y { z } else { -z };
        let softplus = if margin > S::zero() {
            (S::one() + (-margin).exp()).ln()
        } else {
            -margin + (S::one() + margin.exp()).ln()
        };
        loss = loss + softplus;
    }
    loss = loss / n;
    let mut penalty = S::zero();
    for w in &model.weights {
        penalty = penalty + *w * *w;
    }
    loss + model.hyper.l2 * penalty / S::of(2.0)
}

/// Analytic gradient of [`logistic_loss`]: (d/dw, d/db).
pub fn loss_gradient<S: Scalar>(
    model: &LinearClassifier<S>,
    xs: &[FeatureVector<S>],
    ys: &[bool],
) -> ([S; FEATURE_COUNT], S) {
    let n = S::of_usize(xs.len());
    let mut grad_w = [S::zero(); FEATURE_COUNT];
    let mut grad_b = S::zero();
    for (x, &y) in xs.iter().zip(ys) {
        let p = logistic(model.raw_score(x));
        let err = p - if y { S::one() } else { S::zero() };
        for (g, xi) in grad_w.iter_mut().zip(x.as_array()) {
            *g = *g + err * xi;
        }
        grad_b = grad_b + err;
    }
    for (g, w) in grad_w.iter_mut().zip(model.weights) {
        *g = *g / n + model.hyper.l2 * w;
    }
    (grad_w, grad_b / n)
}

/// Deterministic full-batch gradient descent from zero initialization.
///
/// Returns the fitted classifier and the per-epoch loss trace (epochs + 1
/// entries, starting at the zero-weight loss).
pub fn train_classifier<S: Scalar>(
    xs: &[FeatureVector<S>],
    ys: &[bool],
    hyper: TrainHyper<S>,
) -> Result<(LinearClassifier<S>, Vec<S>), DetectError> {
    if xs.len() != ys.len() {
        return Err(DetectError::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 2 {
        return Err(DetectError::InsufficientData { need: 2, got: xs.len() });
    }
    if ys.iter().all(|&y| y) || ys.iter().all(|&y| !y) {
        return Err(DetectError::DegenerateLabels);
    }
    let mut model = LinearClassifier::zeroed(hyper);
    let mut losses = Vec::with_capacity(hyper.epochs as usize + 1);
    losses.push(logistic_loss(&model, xs, ys));
    for _ in 0..hyper.epochs {
        let (grad_w, grad_b) = loss_gradient(&model, xs, ys);
        for (w, g) in model.weights.iter_mut().zip(grad_w) {
            *w = *w - hyper.learning_rate * g;
        }
        model.bias = model.bias - hyper.learning_rate * grad_b;
        losses.push(logistic_loss(&model, xs, ys));
    }
    Ok((model, losses))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictLabel {
    Benign,
    Ransomware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    High,
}

/// Fused per-window decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Verdict<S: Scalar> {
    pub window_start: S,
    pub window_end: S,
    pub anomaly_score: S,
    pub prob: S,
    pub signature_hits: Vec<String>,
    pub label: VerdictLabel,
    pub severity: Severity,
}

impl<S: Scalar> Verdict<S> {
    pub fn is_ransomware(&self) -> bool {
        self.label == VerdictLabel::Ransomware
    }
}

/// Disjunctive fusion: ransomware iff prob >= p_thresh or score >= theta.
/// Signature hits raise severity on flagged windows only.
#[allow(clippy::too_many_arguments)]
pub fn decide<S: Scalar>(
    x: &FeatureVector<S>,
    baseline: &BaselineModel<S>,
    theta: S,
    classifier: &LinearClassifier<S>,
    p_thresh: S,
    window_start: S,
    window_end: S,
    signature_hits: Vec<String>,
) -> Verdict<S> {
    let score = anomaly_score(baseline, x);
    let prob = predict(classifier, x);
    let label = if prob >= p_thresh || score >= theta {
        VerdictLabel::Ransomware
    } else {
        VerdictLabel::Benign
    };
    let severity = if label == VerdictLabel::Ransomware && !signature_hits.is_empty() {
        Severity::High
    } else {
        Severity::Low
    };
    Verdict {
        window_start,
        window_end,
        anomaly_score: score,
        prob,
        signature_hits,
        label,
        severity,
    }
}

/// The persisted detection model: everything needed to score new traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DetectionModel<S: Scalar> {
    pub format_version: u32,
    pub feature_layout_version: u32,
    pub graph_params: GraphParams<S>,
    pub normalizer: Normalizer<S>,
    pub baseline: BaselineModel<S>,
    pub threshold: S,
    pub classifier: LinearClassifier<S>,
    pub transition_model: TransitionModel<S>,
}

impl<S: Scalar> DetectionModel<S> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, DetectError> {
        let model: DetectionModel<S> = serde_json::from_str(text)
            .map_err(|e| DetectError::IncompatibleModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(DetectError::IncompatibleModel(format!(
                "model format version {} unsupported (expected {})",
                self.format_version, MODEL_FORMAT_VERSION
            )));
        }
        if self.feature_layout_version != FEATURE_LAYOUT_VERSION {
            return Err(DetectError::IncompatibleModel(format!(
                "feature layout version {} unsupported (expected {})",
                self.feature_layout_version, FEATURE_LAYOUT_VERSION
            )));
        }
        if !self.transition_model.is_fitted() {
            return Err(DetectError::IncompatibleModel(
                "transition model has an empty vocabulary".into(),
            ));
        }
        self.graph_params
            .validate()
            .map_err(|e| DetectError::IncompatibleModel(e.to_string()))?;
        if !self.threshold.is_finite() {
            return Err(DetectError::IncompatibleModel("non-finite threshold".into()));
        }
        Ok(())
    }
}
