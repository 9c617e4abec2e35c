use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{
    gcm_predict, mean_squared_distance, rank_features, retrieve, sensitive_feature_rank, similarity, top_k,
    CognitiveParams, Decision, DecisionFlags, DecisionTrace, ExemplarTrace, ExplanationCue, Memory, Retrieved,
    Stimulus, Strategy,
};
use crate::model::sigmoid;
use crate::{Error, Label, Result};

/// Distance sensitivity of the single-feature recall used by the attribution
/// sum when the label direction of a feature is not shown. The attribution
/// sum fits `zeta` in place of `alpha`, so this stays fixed.
pub const ATTRIBUTION_SUM_RECALL_ALPHA: f64 = 10.0;

fn check_dims(features: &[f64], cue: Option<&ExplanationCue>) -> Result<()> {
    if let Some(c) = cue {
        if c.len() != features.len() {
            return Err(Error::Shape {
                expected: features.len(),
                actual: c.len(),
            });
        }
    }
    Ok(())
}

fn require(params: &CognitiveParams, strategy: Strategy) -> Result<()> {
    if params.strategy != strategy {
        return Err(Error::Contract(format!(
            "parameters are for {} but {} was requested",
            params.strategy, strategy
        )));
    }
    Ok(())
}

/// Similarity-weighted vote of recalled traces over `features` of `x`, using
/// `view` to read the stored vector of each trace.
fn gcm_over<'m, F>(
    x: &[f64],
    memory: &'m Memory,
    recalled: &[Retrieved],
    features: &[usize],
    alpha: f64,
    view: F,
) -> (Option<f64>, DecisionTrace)
where
    F: Fn(&'m ExemplarTrace) -> Option<ExemplarTrace>,
{
    let mut trace = DecisionTrace {
        attended: features.to_vec(),
        ..Default::default()
    };
    let mut evidence = Vec::with_capacity(recalled.len());
    for r in recalled {
        let stored = &memory.traces[r.index];
        let Some(view) = view(stored) else { continue };
        let Some(d) = mean_squared_distance(x, &view, features) else {
            continue;
        };
        let s = similarity(d, alpha, r.activation);
        trace.retrieved.push(r.index);
        trace.similarities.push(s);
        evidence.push((stored.ai_label, s));
    }
    (gcm_predict(&evidence), trace)
}

fn finish(p1: Option<f64>, mut flags: DecisionFlags, trace: DecisionTrace, rng: &mut dyn RngCore) -> Decision {
    let p = match p1 {
        Some(p) => p,
        None => {
            flags.uniform_fallback = true;
            0.5
        }
    };
    Decision::resolve(p, flags, trace, rng)
}

/// Fixed top-k features by t statistic over memory, then similarity over those.
pub fn decide_sensitive(
    stimulus: Stimulus<'_>,
    memory: &Memory,
    now: usize,
    params: &CognitiveParams,
    rng: &mut dyn RngCore,
) -> Result<Decision> {
    require(params, Strategy::SensitiveFeatures)?;
    let x = stimulus.features;
    let n = x.len();
    let ranking = sensitive_feature_rank(memory, n);
    let mut features: Vec<usize> = ranking.order.iter().copied().take(params.k.min(n)).collect();
    features.sort_unstable();
    let recalled = retrieve(memory, now, params.rho, params.lambda)?;
    let (p1, trace) = gcm_over(x, memory, &recalled, &features, params.alpha, |t| Some(t.clone()));
    let flags = DecisionFlags {
        rank_fallback: ranking.fallback,
        ..Default::default()
    };
    Ok(finish(p1, flags, trace, rng))
}

/// Top-k features of the shown explanation (all features without one),
/// compared against whatever subset each exemplar stored.
pub fn decide_salient(
    stimulus: Stimulus<'_>,
    memory: &Memory,
    now: usize,
    params: &CognitiveParams,
    rng: &mut dyn RngCore,
) -> Result<Decision> {
    require(params, Strategy::SalientFeatures)?;
    let x = stimulus.features;
    check_dims(x, stimulus.cue)?;
    let features = match stimulus.cue {
        Some(cue) => top_k(&cue.salience(), params.k.min(x.len())),
        None => (0..x.len()).collect(),
    };
    let recalled = retrieve(memory, now, params.rho, params.lambda)?;
    let (p1, trace) = gcm_over(x, memory, &recalled, &features, params.alpha, |t| Some(t.clone()));
    Ok(finish(p1, DecisionFlags::default(), trace, rng))
}

/// Per-feature recalled direction and weight for the attribution sum.
struct FeatureRecall {
    direction: f64,
    weight: f64,
}

fn recall_feature(
    x: &[f64],
    r: usize,
    memory: &Memory,
    recalled: &[Retrieved],
    use_attribution: bool,
) -> Option<FeatureRecall> {
    let mut total = 0.0;
    let mut vote = 0.0;
    let mut magnitude = 0.0;
    let mut signed = 0.0;
    let mut signed_total = 0.0;
    for rec in recalled {
        let t = &memory.traces[rec.index];
        let Some(v) = t.value(r) else { continue };
        let s = similarity((x[r] - v).powi(2), ATTRIBUTION_SUM_RECALL_ALPHA, rec.activation);
        total += s;
        vote += s * t.ai_label.sign();
        magnitude += s * match &t.cue {
            Some(c) => c.salience()[r],
            None => 1.0,
        };
        if let Some(ExplanationCue::Attribution(a)) = &t.cue {
            signed += s * a[r];
            signed_total += s;
        }
    }
    if !(total > 0.0) {
        return None;
    }
    if use_attribution && signed_total > 0.0 {
        let m = signed / signed_total;
        Some(FeatureRecall {
            direction: sign(m),
            weight: m.abs(),
        })
    } else {
        Some(FeatureRecall {
            direction: sign(vote),
            weight: magnitude / total,
        })
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `P(label 1) = sigmoid(zeta * sum_r a+_r y_r)` over the k heaviest features.
///
/// With signed bars shown, `y_r` and `a+_r` are read off the explanation.
/// With importance bars, `a+_r` is shown and `y_r` is the sign of a
/// similarity-weighted label vote of exemplars recalled on feature `r` alone.
/// Without an explanation both are recalled: the signed mean of remembered
/// attributions when memory holds them, otherwise the label vote and the mean
/// remembered importance (1 when nothing was shown in training).
pub fn decide_attribution_sum(
    stimulus: Stimulus<'_>,
    memory: &Memory,
    now: usize,
    params: &CognitiveParams,
    rng: &mut dyn RngCore,
) -> Result<Decision> {
    require(params, Strategy::AttributionSum)?;
    let x = stimulus.features;
    let n = x.len();
    check_dims(x, stimulus.cue)?;
    let mut flags = DecisionFlags::default();
    let mut trace = DecisionTrace::default();

    let (weights, directions): (Vec<f64>, Vec<f64>) = match stimulus.cue {
        Some(ExplanationCue::Attribution(a)) => (
            a.iter().map(|v| v.abs()).collect(),
            a.iter().map(|&v| sign(v)).collect(),
        ),
        cue => {
            let recalled = retrieve(memory, now, params.rho, params.lambda)?;
            trace.retrieved = recalled.iter().map(|r| r.index).collect();
            let mut w = vec![0.0; n];
            let mut y = vec![0.0; n];
            for r in 0..n {
                match recall_feature(x, r, memory, &recalled, cue.is_none()) {
                    Some(fr) => {
                        y[r] = fr.direction;
                        w[r] = match cue {
                            Some(ExplanationCue::Importance(imp)) => imp[r],
                            _ => fr.weight,
                        };
                    }
                    None => flags.abstained.push(r),
                }
            }
            (w, y)
        }
    };

    let attended = top_k(&weights, params.k.min(n));
    let mut votes = vec![0.0; n];
    for &r in &attended {
        votes[r] = weights[r] * directions[r];
    }
    let total: f64 = votes.iter().sum();
    trace.attended = attended;
    trace.feature_votes = votes;
    if flags.abstained.len() == n {
        flags.uniform_fallback = true;
    }
    let p1 = sigmoid(params.zeta * total);
    Ok(Decision::resolve(p1, flags, trace, rng))
}

/// Sensitive-feature categorization carried out on importance patterns
/// instead of attribute values.
pub fn decide_importance_cat(
    stimulus: Stimulus<'_>,
    memory: &Memory,
    now: usize,
    params: &CognitiveParams,
    rng: &mut dyn RngCore,
) -> Result<Decision> {
    require(params, Strategy::ImportanceCategorization)?;
    let Some(cue) = stimulus.cue else {
        return Ok(finish(None, DecisionFlags::default(), DecisionTrace::default(), rng));
    };
    let pattern = cue.salience();
    let n = pattern.len();
    let stored: Vec<(Vec<f64>, Label)> = memory
        .traces
        .iter()
        .filter_map(|t| t.cue.as_ref().map(|c| (c.salience(), t.ai_label)))
        .collect();
    let samples: Vec<(&[f64], Label)> = stored.iter().map(|(v, l)| (v.as_slice(), *l)).collect();
    let ranking = rank_features(&samples, n);
    let mut features: Vec<usize> = ranking.order.iter().copied().take(params.k.min(n)).collect();
    features.sort_unstable();
    let recalled = retrieve(memory, now, params.rho, params.lambda)?;
    let all: Vec<usize> = (0..n).collect();
    let (p1, trace) = gcm_over(&pattern, memory, &recalled, &features, params.alpha, |t| {
        t.cue.as_ref().map(|c| ExemplarTrace {
            attended: all.clone(),
            values: c.salience(),
            cue: None,
            ai_label: t.ai_label,
            t_stored: t.t_stored,
        })
    });
    let flags = DecisionFlags {
        rank_fallback: ranking.fallback,
        ..Default::default()
    };
    Ok(finish(p1, flags, trace, rng))
}

/// Coin flip.
pub fn decide_random(rng: &mut dyn RngCore) -> Decision {
    Decision::resolve(0.5, DecisionFlags::default(), DecisionTrace::default(), rng)
}

pub fn decide(
    stimulus: Stimulus<'_>,
    memory: &Memory,
    now: usize,
    params: &CognitiveParams,
    rng: &mut dyn RngCore,
) -> Result<Decision> {
    match params.strategy {
        Strategy::SensitiveFeatures => decide_sensitive(stimulus, memory, now, params, rng),
        Strategy::SalientFeatures => decide_salient(stimulus, memory, now, params, rng),
        Strategy::AttributionSum => decide_attribution_sum(stimulus, memory, now, params, rng),
        Strategy::ImportanceCategorization => decide_importance_cat(stimulus, memory, now, params, rng),
        Strategy::Random => Ok(decide_random(rng)),
    }
}

/// Stores a feedback trial. What is kept depends on the strategy: salient
/// features keep only the explanation's current top-k attributes (all of
/// them when no explanation was shown); every other strategy keeps all
/// attribute values along with the explanation.
pub fn encode_trial(
    memory: &mut Memory,
    stimulus: Stimulus<'_>,
    ai_label: Label,
    trial_index: usize,
    params: &CognitiveParams,
) -> Result<()> {
    let x = stimulus.features;
    check_dims(x, stimulus.cue)?;
    let attended: Vec<usize> = match (params.strategy, stimulus.cue) {
        (Strategy::SalientFeatures, Some(cue)) => top_k(&cue.salience(), params.k.min(x.len())),
        _ => (0..x.len()).collect(),
    };
    let values = attended.iter().map(|&r| x[r]).collect();
    memory.push(ExemplarTrace {
        attended,
        values,
        cue: stimulus.cue.cloned(),
        ai_label,
        t_stored: trial_index,
    })
}

/// A participant: parameters plus the memory they accumulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub params: CognitiveParams,
    pub memory: Memory,
}

impl Participant {
    pub fn new(params: CognitiveParams) -> Self {
        Self {
            params,
            memory: Memory::new(),
        }
    }

    pub fn decide(&self, stimulus: Stimulus<'_>, now: usize, rng: &mut dyn RngCore) -> Result<Decision> {
        decide(stimulus, &self.memory, now, &self.params, rng)
    }

    pub fn observe_feedback(&mut self, stimulus: Stimulus<'_>, ai_label: Label, now: usize) -> Result<()> {
        encode_trial(&mut self.memory, stimulus, ai_label, now, &self.params)
    }
}
