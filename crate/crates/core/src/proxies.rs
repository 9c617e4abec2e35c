//! Machine-learning decision proxies: small models trained on the AI labels
//! of a session's training trials, with hyperparameters and a smoothing
//! factor tuned on the participant's test decisions.

use serde::{Deserialize, Serialize};

use crate::cognitive::ExplanationCue;
use crate::experiment::{SessionRecord, TestCondition};
use crate::fitting::{mean_nll, select_strategy_detailed, SessionFit, StrategySelection};
use crate::model::{Differentiable, Mlp, Optimizer, TrainConfig};
use crate::{Error, Label, Result};

pub const MAX_DEPTH: (usize, usize) = (1, 5);
pub const NEIGHBORS: (usize, usize) = (1, 8);
pub const HIDDEN: (usize, usize) = (1, 50);
pub const SMOOTHING_MAX: f64 = 5.0;
/// Smoothing values tried during tuning: 0, 0.5, ..., 5.
pub const SMOOTHING_GRID: usize = 11;

const MLP_EPOCHS: usize = 300;
const MLP_LEARNING_RATE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxyFamily {
    #[serde(rename = "dt")]
    DecisionTree,
    #[serde(rename = "knn")]
    Knn,
    #[serde(rename = "mlp")]
    Mlp,
}

impl ProxyFamily {
    pub const ALL: [ProxyFamily; 3] = [ProxyFamily::DecisionTree, ProxyFamily::Knn, ProxyFamily::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            ProxyFamily::DecisionTree => "dt",
            ProxyFamily::Knn => "knn",
            ProxyFamily::Mlp => "mlp",
        }
    }

    /// Inclusive hyperparameter range.
    pub fn range(self) -> (usize, usize) {
        match self {
            ProxyFamily::DecisionTree => MAX_DEPTH,
            ProxyFamily::Knn => NEIGHBORS,
            ProxyFamily::Mlp => HIDDEN,
        }
    }
}

impl std::fmt::Display for ProxyFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Smoothed probability `(p + s/2) / (1 + s)`.
pub fn smooth(p: f64, s: f64) -> f64 {
    (p + s / 2.0) / (1.0 + s)
}

/// Proxy input: attributes, followed by the shown explanation bars when
/// `with_xai` is set.
pub fn proxy_input(features: &[f64], cue: Option<&ExplanationCue>, with_xai: bool) -> Result<Vec<f64>> {
    if !with_xai {
        return Ok(features.to_vec());
    }
    let cue = cue.ok_or_else(|| Error::Contract("with-XAI proxy needs the explanation".into()))?;
    let bars = match cue {
        ExplanationCue::Importance(v) | ExplanationCue::Attribution(v) => v,
    };
    if bars.len() != features.len() {
        return Err(Error::Shape {
            expected: features.len(),
            actual: bars.len(),
        });
    }
    Ok(features.iter().chain(bars).copied().collect())
}

#[derive(Debug, Clone, PartialEq)]
enum Tree {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Tree>,
        right: Box<Tree>,
    },
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Tree::Leaf(p) => *p,
            Tree::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

fn gini(rows: &[&(Vec<f64>, Label)]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let p = share_of_one(rows);
    2.0 * p * (1.0 - p)
}

fn share_of_one(rows: &[&(Vec<f64>, Label)]) -> f64 {
    rows.iter().filter(|(_, l)| *l == Label::One).count() as f64 / rows.len() as f64
}

/// Greedy Gini tree; thresholds are midpoints between adjacent distinct values.
fn grow(rows: &[&(Vec<f64>, Label)], depth: usize) -> Tree {
    let parent = gini(rows);
    if depth == 0 || parent == 0.0 {
        return Tree::Leaf(share_of_one(rows));
    }
    let n = rows.len() as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    for feature in 0..rows[0].0.len() {
        let mut values: Vec<f64> = rows.iter().map(|(x, _)| x[feature]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let threshold = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<_>, Vec<_>) = rows.iter().partition(|(x, _)| x[feature] <= threshold);
            let impurity = (l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r)) / n;
            if best.is_none_or(|(b, _, _)| impurity < b - 1e-12) {
                best = Some((impurity, feature, threshold));
            }
        }
    }
    match best {
        Some((impurity, feature, threshold)) if impurity < parent - 1e-12 => {
            let (l, r): (Vec<_>, Vec<_>) = rows.iter().partition(|(x, _)| x[feature] <= threshold);
            Tree::Split {
                feature,
                threshold,
                left: Box::new(grow(&l, depth - 1)),
                right: Box::new(grow(&r, depth - 1)),
            }
        }
        _ => Tree::Leaf(share_of_one(rows)),
    }
}

#[derive(Debug, Clone)]
enum Fitted {
    Tree(Tree),
    Knn(Vec<(Vec<f64>, Label)>),
    Mlp(Box<Mlp>),
    Constant(f64),
}

/// A trained proxy. Probabilities are of label 1.
#[derive(Debug, Clone)]
pub struct ProxyModel {
    pub family: ProxyFamily,
    pub hyper: usize,
    pub smoothing: f64,
    pub with_xai: bool,
    /// Training data held one class only; the model predicts it everywhere.
    pub single_class: bool,
    n_inputs: usize,
    fitted: Fitted,
}

/// Trains a proxy on `(input, AI label)` rows.
pub fn train_proxy(
    family: ProxyFamily,
    hyper: usize,
    rows: &[(Vec<f64>, Label)],
    with_xai: bool,
    seed: u64,
) -> Result<ProxyModel> {
    let (lo, hi) = family.range();
    if !(lo..=hi).contains(&hyper) {
        return Err(Error::Config(format!(
            "{family} hyperparameter {hyper} outside {lo}..={hi}"
        )));
    }
    let Some(n_inputs) = rows.first().map(|(x, _)| x.len()) else {
        return Err(Error::Training("proxy needs at least one training row".into()));
    };
    if let Some((x, _)) = rows.iter().find(|(x, _)| x.len() != n_inputs) {
        return Err(Error::Shape {
            expected: n_inputs,
            actual: x.len(),
        });
    }
    let first = rows[0].1;
    let single_class = rows.iter().all(|(_, l)| *l == first);
    let fitted = if single_class {
        Fitted::Constant(if first == Label::One { 1.0 } else { 0.0 })
    } else {
        match family {
            ProxyFamily::DecisionTree => Fitted::Tree(grow(&rows.iter().collect::<Vec<_>>(), hyper)),
            ProxyFamily::Knn => Fitted::Knn(rows.to_vec()),
            ProxyFamily::Mlp => {
                let xs: Vec<Vec<f64>> = rows.iter().map(|(x, _)| x.clone()).collect();
                let labels: Vec<Label> = rows.iter().map(|(_, l)| *l).collect();
                let cfg = TrainConfig {
                    hidden: vec![hyper],
                    learning_rate: MLP_LEARNING_RATE,
                    epochs: MLP_EPOCHS,
                    seed,
                    optimizer: Optimizer::Adam,
                };
                Fitted::Mlp(Box::new(Mlp::fit(&xs, &labels, &cfg)?))
            }
        }
    };
    Ok(ProxyModel {
        family,
        hyper,
        smoothing: 0.0,
        with_xai,
        single_class,
        n_inputs,
        fitted,
    })
}

impl ProxyModel {
    pub fn with_smoothing(mut self, s: f64) -> Result<Self> {
        if !(0.0..=SMOOTHING_MAX).contains(&s) {
            return Err(Error::Config(format!("smoothing {s} outside [0, {SMOOTHING_MAX}]")));
        }
        self.smoothing = s;
        Ok(self)
    }

    /// Unsmoothed probability of label 1 for a prepared input.
    pub fn raw_proba(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.n_inputs {
            return Err(Error::Shape {
                expected: self.n_inputs,
                actual: input.len(),
            });
        }
        Ok(match &self.fitted {
            Fitted::Constant(p) => *p,
            Fitted::Tree(t) => t.predict(input),
            Fitted::Knn(points) => {
                let mut d: Vec<(f64, Label)> = points
                    .iter()
                    .map(|(x, l)| (x.iter().zip(input).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), *l))
                    .collect();
                // Stable sort keeps training order among equal distances.
                d.sort_by(|a, b| a.0.total_cmp(&b.0));
                let k = self.hyper.min(d.len());
                d[..k].iter().filter(|(_, l)| *l == Label::One).count() as f64 / k as f64
            }
            Fitted::Mlp(m) => 1.0 - m.proba(input),
        })
    }

    /// Smoothed probability of label 1.
    pub fn proba(&self, features: &[f64], cue: Option<&ExplanationCue>) -> Result<f64> {
        let input = proxy_input(features, cue, self.with_xai)?;
        Ok(smooth(self.raw_proba(&input)?, self.smoothing))
    }
}

/// Tuning result for one proxy family on one session block.
#[derive(Debug, Clone)]
pub struct ProxyFit {
    pub model: ProxyModel,
    pub nll: f64,
}

/// Exported summary of a proxy fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyFitRecord {
    pub session_id: String,
    pub family: ProxyFamily,
    pub hyper: usize,
    pub smoothing: f64,
    pub with_xai: bool,
    pub single_class: bool,
    pub nll: f64,
    pub n_trials: usize,
}

impl ProxyFit {
    pub fn record(&self, session: &SessionRecord) -> ProxyFitRecord {
        ProxyFitRecord {
            session_id: session.session_id.clone(),
            family: self.model.family,
            hyper: self.model.hyper,
            smoothing: self.model.smoothing,
            with_xai: self.model.with_xai,
            single_class: self.model.single_class,
            nll: self.nll,
            n_trials: session.test.len(),
        }
    }
}

/// The single test condition of `session`; mixed blocks are rejected.
fn block_condition(session: &SessionRecord) -> Result<TestCondition> {
    let first = session
        .test
        .first()
        .ok_or_else(|| Error::Contract("session has no test trials to score".into()))?
        .condition;
    if session.test.iter().any(|t| t.condition != first) {
        return Err(Error::Contract(
            "proxies are tuned on one test condition at a time".into(),
        ));
    }
    Ok(first)
}

/// Exhaustive search over the family's hyperparameter range and the
/// smoothing grid, minimizing test-decision nll. Training uses the session's
/// training trials labelled by the AI; explanation bars are appended to the
/// input when the block was shown with explanations.
pub fn tune_proxy(family: ProxyFamily, session: &SessionRecord, seed: u64) -> Result<ProxyFit> {
    let with_xai = block_condition(session)? == TestCondition::WithXai;
    let rows = session
        .training
        .iter()
        .map(|t| Ok((proxy_input(&t.features, t.explanation.as_ref(), with_xai)?, t.ai_label)))
        .collect::<Result<Vec<_>>>()?;
    let tests = session
        .test
        .iter()
        .map(|t| Ok((proxy_input(&t.features, t.explanation.as_ref(), with_xai)?, t.decision)))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = family.range();
    let mut best: Option<ProxyFit> = None;
    for hyper in lo..=hi {
        let model = train_proxy(family, hyper, &rows, with_xai, seed)?;
        let raw = tests
            .iter()
            .map(|(x, _)| model.raw_proba(x))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..SMOOTHING_GRID {
            let s = SMOOTHING_MAX * i as f64 / (SMOOTHING_GRID - 1) as f64;
            let observed: Vec<f64> = raw
                .iter()
                .zip(&tests)
                .map(|(p, (_, d))| {
                    let p1 = smooth(*p, s);
                    if *d == Label::One {
                        p1
                    } else {
                        1.0 - p1
                    }
                })
                .collect();
            let nll = mean_nll(&observed);
            if best.as_ref().is_none_or(|b| nll < b.nll) {
                best = Some(ProxyFit {
                    model: model.clone().with_smoothing(s)?,
                    nll,
                });
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}

/// CoAX and tuned proxies side by side on one session block.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub coax: StrategySelection,
    pub proxies: Vec<ProxyFit>,
}

impl Comparison {
    /// Strategy with the lowest nll among the applicable ones.
    pub fn best_fit(&self) -> &SessionFit {
        self.coax
            .candidates
            .iter()
            .min_by(|a, b| a.nll.total_cmp(&b.nll))
            .expect("at least one applicable strategy")
    }

    pub fn proxy_nll(&self, family: ProxyFamily) -> Option<f64> {
        self.proxies.iter().find(|p| p.model.family == family).map(|p| p.nll)
    }
}

pub fn compare_block(session: &SessionRecord, budget: usize, seed: u64) -> Result<Comparison> {
    let coax = select_strategy_detailed(session, budget, seed)?;
    let proxies = ProxyFamily::ALL
        .iter()
        .map(|&f| tune_proxy(f, session, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { coax, proxies })
}
