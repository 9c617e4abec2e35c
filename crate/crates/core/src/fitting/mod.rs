//! Per-session fitting of cognitive parameters and strategy selection.

pub mod bayesopt;
mod population;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use population::{ParamMoments, PopulationConfig, PopulationSpec, PrevalenceCell, StrategyMoments};

use crate::cognitive::{
    decide, encode_trial, CognitiveParams, Memory, Stimulus, Strategy, ATTRIBUTION_SUM_RECALL_ALPHA, DEFAULT_LAMBDA,
};
use crate::experiment::{SessionRecord, TestCondition, XaiType};
use crate::{Error, Result};
use bayesopt::Dim;

/// Probabilities are clamped to `[NLL_CLAMP, 1 - NLL_CLAMP]` before taking logs.
pub const NLL_CLAMP: f64 = 1e-6;
pub const DEFAULT_BUDGET: usize = 60;
pub const MIN_BUDGET: usize = 20;

/// Value given to parameters a strategy does not use.
const UNUSED_ZETA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub alpha: (f64, f64),
    pub k: (usize, usize),
    pub rho: (f64, f64),
    pub zeta: (f64, f64),
}

impl Default for SearchBox {
    fn default() -> Self {
        Self {
            alpha: (1.0, 40.0),
            k: (1, 4),
            rho: (-2.8, -1.5),
            zeta: (0.1, 5.0),
        }
    }
}

impl SearchBox {
    pub fn contains(&self, p: &CognitiveParams) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        let k_ok = p.k >= self.k.0 && p.k <= self.k.1;
        let rho_ok = inside(p.rho, self.rho);
        match p.strategy {
            Strategy::Random => true,
            Strategy::AttributionSum => k_ok && rho_ok && inside(p.zeta, self.zeta),
            _ => k_ok && rho_ok && inside(p.alpha, self.alpha),
        }
    }

    /// Centre of the box for `strategy`.
    pub fn mid(&self, strategy: Strategy) -> CognitiveParams {
        self.params_at(strategy, &[0.5, 0.5, 0.5])
    }

    fn dims(&self) -> [Dim; 3] {
        [
            Dim::Real,
            Dim::Integer {
                levels: self.k.1 - self.k.0 + 1,
            },
            Dim::Real,
        ]
    }

    /// Maps unit coordinates (first coordinate is α, or ζ for the attribution
    /// sum; then k; then ρ) to parameters.
    fn params_at(&self, strategy: Strategy, u: &[f64]) -> CognitiveParams {
        let lerp = |(lo, hi): (f64, f64), t: f64| lo + (hi - lo) * t.clamp(0.0, 1.0);
        let k_span = (self.k.1 - self.k.0) as f64;
        let k = self.k.0 + (u[1].clamp(0.0, 1.0) * k_span).round() as usize;
        let (alpha, zeta) = if strategy == Strategy::AttributionSum {
            (ATTRIBUTION_SUM_RECALL_ALPHA, lerp(self.zeta, u[0]))
        } else {
            (lerp(self.alpha, u[0]), UNUSED_ZETA)
        };
        CognitiveParams {
            alpha,
            rho: lerp(self.rho, u[2]),
            k,
            zeta,
            lambda: DEFAULT_LAMBDA,
            strategy,
        }
    }
}

/// Whether `session` carries the explanation data `strategy` needs.
pub fn applicable(strategy: Strategy, session: &SessionRecord) -> bool {
    let explained = session.xai_type != XaiType::None;
    let tested_with_xai =
        !session.test.is_empty() && session.test.iter().all(|t| t.condition == TestCondition::WithXai);
    match strategy {
        Strategy::SensitiveFeatures | Strategy::Random => true,
        Strategy::SalientFeatures | Strategy::AttributionSum => explained,
        Strategy::ImportanceCategorization => explained && tested_with_xai,
    }
}

/// Probability the model assigns to each observed test decision, after
/// replaying the training phase into memory.
pub fn observed_probabilities(params: &CognitiveParams, session: &SessionRecord) -> Result<Vec<f64>> {
    if session.test.is_empty() {
        return Err(Error::Contract("session has no test trials to score".into()));
    }
    params.validate()?;
    if params.strategy == Strategy::Random {
        return Ok(vec![0.5; session.test.len()]);
    }
    let mut memory = Memory::new();
    for t in &session.training {
        encode_trial(
            &mut memory,
            Stimulus::new(&t.features, t.explanation.as_ref()),
            t.ai_label,
            t.trial_index,
            params,
        )?;
    }
    // Ties resolve with a coin flip that does not affect probabilities.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    session
        .test
        .iter()
        .map(|t| {
            let d = decide(
                Stimulus::new(&t.features, t.explanation.as_ref()),
                &memory,
                t.trial_index,
                params,
                &mut rng,
            )?;
            Ok(d.proba_of(t.decision))
        })
        .collect()
}

/// Mean negative log-likelihood per scored test trial.
pub fn session_nll(params: &CognitiveParams, session: &SessionRecord) -> Result<f64> {
    let probs = observed_probabilities(params, session)?;
    Ok(mean_nll(&probs))
}

/// Mean of `-ln p` with the clamp applied.
pub fn mean_nll(probs: &[f64]) -> f64 {
    probs
        .iter()
        .map(|p| -p.clamp(NLL_CLAMP, 1.0 - NLL_CLAMP).ln())
        .sum::<f64>()
        / probs.len() as f64
}

pub fn bic(nll: f64, n: usize, p: usize) -> f64 {
    2.0 * n as f64 * nll + p as f64 * (n as f64).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFit {
    pub session_id: String,
    pub strategy: Strategy,
    pub params: CognitiveParams,
    pub nll: f64,
    pub bic: f64,
    pub n_trials: usize,
    pub eval_budget: usize,
    /// The surrogate failed and random search finished the budget.
    #[serde(default)]
    pub fallback: bool,
}

impl SessionFit {
    pub fn n_free_params(&self) -> usize {
        self.strategy.n_free_params()
    }
}

/// Fits `strategy` to the scored test trials of `session` within the default box.
pub fn fit_session(session: &SessionRecord, strategy: Strategy, budget: usize, seed: u64) -> Result<SessionFit> {
    fit_session_in(session, strategy, budget, seed, &SearchBox::default())
}

pub fn fit_session_in(
    session: &SessionRecord,
    strategy: Strategy,
    budget: usize,
    seed: u64,
    search: &SearchBox,
) -> Result<SessionFit> {
    if budget < MIN_BUDGET {
        return Err(Error::Config(format!(
            "budget must be at least {MIN_BUDGET}, got {budget}"
        )));
    }
    if session.test.is_empty() {
        return Err(Error::Contract("session has no test trials to score".into()));
    }
    let n = session.test.len();
    if strategy == Strategy::Random {
        let params = CognitiveParams {
            strategy,
            ..search.mid(strategy)
        };
        let nll = std::f64::consts::LN_2;
        return Ok(SessionFit {
            session_id: session.session_id.clone(),
            strategy,
            params,
            nll,
            bic: bic(nll, n, 0),
            n_trials: n,
            eval_budget: 1,
            fallback: false,
        });
    }
    let mut failure = None;
    let outcome = bayesopt::minimize(&search.dims(), budget, seed, |u| {
        match session_nll(&search.params_at(strategy, u), session) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let params = search.params_at(strategy, &outcome.best.point);
    let nll = outcome.best.value;
    Ok(SessionFit {
        session_id: session.session_id.clone(),
        strategy,
        params,
        nll,
        bic: bic(nll, n, strategy.n_free_params()),
        n_trials: n,
        eval_budget: outcome.history.len(),
        fallback: outcome.fallback,
    })
}

/// All candidate fits plus the chosen one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySelection {
    pub best: SessionFit,
    pub candidates: Vec<SessionFit>,
}

/// Fits every applicable strategy and keeps the lowest BIC; ties go to fewer
/// parameters, then to the fixed strategy order.
pub fn select_strategy(session: &SessionRecord, budget: usize, seed: u64) -> Result<SessionFit> {
    Ok(select_strategy_detailed(session, budget, seed)?.best)
}

pub fn select_strategy_detailed(session: &SessionRecord, budget: usize, seed: u64) -> Result<StrategySelection> {
    let candidates = Strategy::ALL
        .iter()
        .filter(|s| applicable(**s, session))
        .enumerate()
        .map(|(i, s)| fit_session(session, *s, budget, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let best = pick_best(&candidates).clone();
    Ok(StrategySelection { best, candidates })
}

fn pick_best(fits: &[SessionFit]) -> &SessionFit {
    let rank = |f: &SessionFit| {
        Strategy::ALL
            .iter()
            .position(|s| *s == f.strategy)
            .unwrap_or(usize::MAX)
    };
    fits.iter()
        .min_by(|a, b| {
            if (a.bic - b.bic).abs() > 1e-9 {
                a.bic.total_cmp(&b.bic)
            } else {
                a.n_free_params().cmp(&b.n_free_params()).then(rank(a).cmp(&rank(b)))
            }
        })
        .expect("Random is always applicable")
}

/// Fits each test block of `session` separately.
pub fn fit_blocks(
    session: &SessionRecord,
    budget: usize,
    seed: u64,
) -> Result<Vec<(usize, TestCondition, StrategySelection)>> {
    session
        .blocks()
        .into_iter()
        .map(|(b, c)| {
            let sel = select_strategy_detailed(&session.only_block(b), budget, seed.wrapping_add(101 * b as u64))?;
            Ok((b, c, sel))
        })
        .collect()
}
