//! Exemplar-memory model of a person forward-simulating an AI with or
//! without explanations.
//!
//! Memory holds one trace per feedback trial. A trace's activation decays
//! with the number of trials since it was stored, `A = -lambda ln(dt)`, with
//! `dt = now - stored + 1` so a trace stored on the current trial has
//! `A = 0`. Traces with `A < rho` cannot be recalled. Recalled traces vote
//! for their AI label with weight `exp(-alpha d + A)` where `d` is the mean
//! squared difference over the attended features, and the label
//! probabilities are the normalized vote totals.

mod strategies;

use std::hash::{Hash, Hasher};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

pub use strategies::{
    decide, decide_attribution_sum, decide_importance_cat, decide_random, decide_salient, decide_sensitive,
    encode_trial, Participant, ATTRIBUTION_SUM_RECALL_ALPHA,
};

/// Memory decay rate used for every participant.
pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    SensitiveFeatures,
    SalientFeatures,
    AttributionSum,
    ImportanceCategorization,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::SensitiveFeatures,
        Strategy::SalientFeatures,
        Strategy::AttributionSum,
        Strategy::ImportanceCategorization,
        Strategy::Random,
    ];

    /// Number of fitted parameters.
    pub fn n_free_params(self) -> usize {
        match self {
            Strategy::Random => 0,
            _ => 3,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Strategy::SensitiveFeatures => "sensitive",
            Strategy::SalientFeatures => "salient",
            Strategy::AttributionSum => "attribution-sum",
            Strategy::ImportanceCategorization => "importance-cat",
            Strategy::Random => "random",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.short_name() == s || format!("{st:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

/// One virtual or fitted participant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CognitiveParams {
    /// Distance sensitivity.
    pub alpha: f64,
    /// Retrieval threshold on activation.
    pub rho: f64,
    /// Number of attended features.
    pub k: usize,
    /// Feature-class sensitivity of the attribution sum.
    pub zeta: f64,
    /// Memory decay rate.
    pub lambda: f64,
    pub strategy: Strategy,
}

impl CognitiveParams {
    /// Middle of the fitting box.
    pub fn mid(strategy: Strategy) -> Self {
        Self {
            alpha: 20.5,
            rho: -2.15,
            k: 2,
            zeta: 2.55,
            lambda: DEFAULT_LAMBDA,
            strategy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Validation(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::Validation(format!("zeta must be > 0, got {}", self.zeta)));
        }
        if self.k == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        if !(self.lambda > 0.0) || self.rho.is_nan() {
            return Err(Error::Validation("lambda must be positive and rho a number".into()));
        }
        Ok(())
    }
}

/// Explanation as presented to the participant on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "kebab-case")]
pub enum ExplanationCue {
    /// Non-negative bars.
    Importance(Vec<f64>),
    /// Signed bars; positive supports label 1.
    Attribution(Vec<f64>),
}

impl ExplanationCue {
    /// Bar lengths, whatever their direction.
    pub fn salience(&self) -> Vec<f64> {
        match self {
            ExplanationCue::Importance(v) => v.clone(),
            ExplanationCue::Attribution(v) => v.iter().map(|a| a.abs()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ExplanationCue::Importance(v) | ExplanationCue::Attribution(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// What a participant perceives on a trial.
#[derive(Debug, Clone, Copy)]
pub struct Stimulus<'a> {
    /// Normalized attribute values.
    pub features: &'a [f64],
    pub cue: Option<&'a ExplanationCue>,
}

impl<'a> Stimulus<'a> {
    pub fn new(features: &'a [f64], cue: Option<&'a ExplanationCue>) -> Self {
        Self { features, cue }
    }
}

/// One stored exemplar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarTrace {
    /// Attended feature indices, ascending.
    pub attended: Vec<usize>,
    /// Values for `attended`, same order.
    pub values: Vec<f64>,
    pub cue: Option<ExplanationCue>,
    pub ai_label: Label,
    /// Trial index at storage.
    pub t_stored: usize,
}

impl ExemplarTrace {
    pub fn value(&self, feature: usize) -> Option<f64> {
        self.attended.binary_search(&feature).ok().map(|i| self.values[i])
    }

    pub fn has_all(&self, n_features: usize) -> bool {
        self.attended.len() == n_features
    }
}

/// Append-only exemplar memory of one participant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Memory {
    pub traces: Vec<ExemplarTrace>,
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn push(&mut self, trace: ExemplarTrace) -> Result<()> {
        if trace.attended.is_empty() {
            return Err(Error::Contract("a trace must attend at least one feature".into()));
        }
        if trace.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Contract("stored feature values must lie in [0, 1]".into()));
        }
        self.traces.push(trace);
        Ok(())
    }

    /// Content hash, used to assert that test trials leave memory untouched.
    pub fn digest(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for t in &self.traces {
            t.attended.hash(&mut h);
            for v in &t.values {
                v.to_bits().hash(&mut h);
            }
            t.ai_label.hash(&mut h);
            t.t_stored.hash(&mut h);
            if let Some(c) = &t.cue {
                for v in c.salience() {
                    v.to_bits().hash(&mut h);
                }
            }
        }
        h.finish()
    }
}

/// `A = -lambda ln(dt)` for `dt >= 1` trials.
pub fn activation(delta_t: f64, lambda: f64) -> Result<f64> {
    if !(delta_t >= 1.0) {
        return Err(Error::Contract(format!("elapsed trials must be >= 1, got {delta_t}")));
    }
    Ok(-lambda * delta_t.ln())
}

/// `S = exp(-alpha d + A)`.
pub fn similarity(distance: f64, alpha: f64, activation: f64) -> f64 {
    (-alpha * distance + activation).exp()
}

/// Mean squared difference over `features`; `None` when the set is empty.
pub fn mean_squared_distance(x: &[f64], trace: &ExemplarTrace, features: &[usize]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for &r in features {
        if let Some(v) = trace.value(r) {
            sum += (x[r] - v).powi(2);
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// A recallable trace and its activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Retrieved {
    pub index: usize,
    pub activation: f64,
}

/// Traces whose activation at trial `now` is at least `rho`.
pub fn retrieve(memory: &Memory, now: usize, rho: f64, lambda: f64) -> Result<Vec<Retrieved>> {
    let mut out = Vec::with_capacity(memory.len());
    for (index, t) in memory.traces.iter().enumerate() {
        if t.t_stored > now {
            return Err(Error::Contract(format!(
                "trace stored at trial {} is in the future of trial {now}",
                t.t_stored
            )));
        }
        let a = activation((now - t.t_stored + 1) as f64, lambda)?;
        if a >= rho {
            out.push(Retrieved { index, activation: a });
        }
    }
    Ok(out)
}

/// Similarity-weighted label probability, `P(label 1)`; `None` without evidence.
pub fn gcm_predict(evidence: &[(Label, f64)]) -> Option<f64> {
    let total: f64 = evidence.iter().map(|(_, s)| s).sum();
    if !(total > 0.0) {
        return None;
    }
    let ones: f64 = evidence.iter().filter(|(l, _)| *l == Label::One).map(|(_, s)| s).sum();
    Some(ones / total)
}

/// Welch-style separation of one feature between the two label groups.
/// Sample standard deviations (`n - 1`); a single-member group has zero spread.
pub fn t_statistic(group1: &[f64], group2: &[f64]) -> f64 {
    let stats = |g: &[f64]| {
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        let var = if g.len() > 1 {
            g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, var, n)
    };
    let (m1, v1, n1) = stats(group1);
    let (m2, v2, n2) = stats(group2);
    let denom = (v1 / n1 + v2 / n2).sqrt();
    let diff = (m1 - m2).abs();
    if denom > 0.0 {
        diff / denom
    } else if diff > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// Feature indices, most discriminative first.
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
    /// Set when one label group was missing and spread was used instead.
    pub fallback: bool,
}

/// Ranks features by the t statistic between label groups, ties broken by
/// index. With a single label group present, features are ranked by mean
/// absolute deviation from the grand mean instead.
pub fn rank_features(samples: &[(&[f64], Label)], n_features: usize) -> FeatureRanking {
    let has = |l: Label| samples.iter().any(|(_, s)| *s == l);
    let fallback = !(has(Label::One) && has(Label::Two));
    let scores: Vec<f64> = (0..n_features)
        .map(|r| {
            if fallback {
                if samples.is_empty() {
                    return 0.0;
                }
                let n = samples.len() as f64;
                let mean = samples.iter().map(|(v, _)| v[r]).sum::<f64>() / n;
                samples.iter().map(|(v, _)| (v[r] - mean).abs()).sum::<f64>() / n
            } else {
                let g1: Vec<f64> = samples
                    .iter()
                    .filter(|(_, l)| *l == Label::One)
                    .map(|(v, _)| v[r])
                    .collect();
                let g2: Vec<f64> = samples
                    .iter()
                    .filter(|(_, l)| *l == Label::Two)
                    .map(|(v, _)| v[r])
                    .collect();
                t_statistic(&g1, &g2)
            }
        })
        .collect();
    FeatureRanking {
        order: descending_order(&scores),
        scores,
        fallback,
    }
}

/// Ranking over full-feature traces in memory.
pub fn sensitive_feature_rank(memory: &Memory, n_features: usize) -> FeatureRanking {
    let samples: Vec<(&[f64], Label)> = memory
        .traces
        .iter()
        .filter(|t| t.has_all(n_features))
        .map(|t| (t.values.as_slice(), t.ai_label))
        .collect();
    rank_features(&samples, n_features)
}

/// Indices sorted by value descending, ties by index ascending.
pub fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// The `k` largest entries' indices, ascending.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut out: Vec<usize> = descending_order(values).into_iter().take(k).collect();
    out.sort_unstable();
    out
}

/// Diagnostic flags raised while deciding.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecisionFlags {
    /// Nothing usable was recalled; the decision is a coin flip.
    pub uniform_fallback: bool,
    /// Feature ranking fell back to spread because a label group was missing.
    pub rank_fallback: bool,
    /// Features that cast no vote in an attribution sum.
    pub abstained: Vec<usize>,
}

/// Why a decision came out the way it did.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub attended: Vec<usize>,
    pub retrieved: Vec<usize>,
    pub similarities: Vec<f64>,
    /// Per-feature signed vote (`a+_r * y_r`) for the attribution sum.
    pub feature_votes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub proba_label1: f64,
    pub label: Label,
    pub flags: DecisionFlags,
    pub trace: DecisionTrace,
}

impl Decision {
    /// Most probable label; exact ties are settled by a coin flip from `rng`.
    pub fn resolve(proba_label1: f64, flags: DecisionFlags, trace: DecisionTrace, rng: &mut dyn RngCore) -> Self {
        let label = if proba_label1 > 0.5 {
            Label::One
        } else if proba_label1 < 0.5 {
            Label::Two
        } else if rng.random_bool(0.5) {
            Label::One
        } else {
            Label::Two
        };
        Self {
            proba_label1,
            label,
            flags,
            trace,
        }
    }

    pub fn proba_of(&self, label: Label) -> f64 {
        match label {
            Label::One => self.proba_label1,
            Label::Two => 1.0 - self.proba_label1,
        }
    }

    /// Probability-matching response: label 1 with probability `proba_label1`.
    pub fn sample_response(&self, rng: &mut dyn RngCore) -> Label {
        if rng.random::<f64>() < self.proba_label1 {
            Label::One
        } else {
            Label::Two
        }
    }
}

/// Line-delimited export row for decision diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub participant_id: String,
    pub trial_index: usize,
    pub strategy: Strategy,
    pub proba_label1: f64,
    pub label: Label,
    pub flags: DecisionFlags,
    pub trace: DecisionTrace,
}

#[cfg(test)]
mod tests;
