//! Virtual populations drawn from fitted parameter distributions.

use std::collections::BTreeMap;
use std::path::Path;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{SearchBox, UNUSED_ZETA};
use crate::cognitive::{CognitiveParams, Strategy, ATTRIBUTION_SUM_RECALL_ALPHA, DEFAULT_LAMBDA};
use crate::experiment::Cell;
use crate::{Error, Result};

const PRESET: &str = include_str!("../../presets/population.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamMoments {
    pub mean: f64,
    pub sd: f64,
}

impl ParamMoments {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    /// Gaussian truncated to `[lo, hi]`, sampled by inverting the CDF.
    pub fn sample_truncated<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> f64 {
        if self.sd == 0.0 {
            return self.mean.clamp(lo, hi);
        }
        let n = Normal::new(self.mean, self.sd).expect("validated moments");
        let (a, b) = (n.cdf(lo), n.cdf(hi));
        if b - a < 1e-12 {
            // All mass lies beyond one bound.
            return if self.mean < lo { lo } else { hi };
        }
        let u = a + (b - a) * rng.random::<f64>();
        n.inverse_cdf(u).clamp(lo, hi)
    }
}

/// Fitted moments for one strategy; absent entries are unused parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyMoments {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<ParamMoments>,
    pub k: ParamMoments,
    pub rho: ParamMoments,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<ParamMoments>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub prevalence: BTreeMap<Strategy, f64>,
    pub moments: BTreeMap<Strategy, StrategyMoments>,
    #[serde(default)]
    pub search_box: SearchBox,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.prevalence.values().sum();
        if self.prevalence.values().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "prevalence weights must be >= 0 and sum to 1, got {total}"
            )));
        }
        for (s, w) in &self.prevalence {
            if *w > 0.0 && *s != Strategy::Random && !self.moments.contains_key(s) {
                return Err(Error::Validation(format!("no parameter moments for {s}")));
            }
        }
        for (s, m) in &self.moments {
            let all = [m.alpha, Some(m.k), Some(m.rho), m.zeta];
            if all.iter().flatten().any(|p| !(p.sd >= 0.0) || !p.mean.is_finite()) {
                return Err(Error::Validation(format!("{s}: standard deviations must be >= 0")));
            }
            let needs = if *s == Strategy::AttributionSum {
                m.zeta.is_some()
            } else {
                m.alpha.is_some()
            };
            if !needs {
                return Err(Error::Validation(format!(
                    "{s}: missing {}",
                    if *s == Strategy::AttributionSum {
                        "zeta"
                    } else {
                        "alpha"
                    }
                )));
            }
        }
        Ok(())
    }

    /// Same moments with all weight on one strategy.
    pub fn only(&self, strategy: Strategy) -> Self {
        Self {
            prevalence: BTreeMap::from([(strategy, 1.0)]),
            ..self.clone()
        }
    }

    /// Draws one participant's parameters for `strategy`.
    pub fn sample_params<R: Rng + ?Sized>(&self, strategy: Strategy, rng: &mut R) -> CognitiveParams {
        let b = &self.search_box;
        let Some(m) = self.moments.get(&strategy) else {
            return CognitiveParams {
                strategy,
                ..b.mid(strategy)
            };
        };
        // k is drawn on the widened interval so both end values keep their share after rounding.
        let k_cont = m.k.sample_truncated(b.k.0 as f64 - 0.5, b.k.1 as f64 + 0.5, rng);
        let k = (k_cont.round() as usize).clamp(b.k.0, b.k.1);
        let rho = m.rho.sample_truncated(b.rho.0, b.rho.1, rng);
        let (alpha, zeta) = if strategy == Strategy::AttributionSum {
            let z = m.zeta.expect("validated").sample_truncated(b.zeta.0, b.zeta.1, rng);
            (ATTRIBUTION_SUM_RECALL_ALPHA, z)
        } else {
            let a = m.alpha.expect("validated").sample_truncated(b.alpha.0, b.alpha.1, rng);
            (a, UNUSED_ZETA)
        };
        CognitiveParams {
            alpha,
            rho,
            k,
            zeta,
            lambda: DEFAULT_LAMBDA,
            strategy,
        }
    }

    /// `size` participants; strategies by prevalence, parameters by truncated Gaussians.
    pub fn sample_population(&self, size: usize, seed: u64) -> Result<Vec<CognitiveParams>> {
        self.validate()?;
        let strategies: Vec<Strategy> = self.prevalence.keys().copied().collect();
        let weights: Vec<f64> = self.prevalence.values().copied().collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| Error::Validation(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..size)
            .map(|_| {
                let s = strategies[pick.sample(&mut rng)];
                self.sample_params(s, &mut rng)
            })
            .collect())
    }
}

/// Prevalence weights for one study condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceCell {
    pub cell: Cell,
    pub prevalence: BTreeMap<Strategy, f64>,
}

/// Population configuration file: shared moments plus per-condition prevalence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub moments: BTreeMap<Strategy, StrategyMoments>,
    pub cells: Vec<PrevalenceCell>,
    #[serde(default)]
    pub search_box: SearchBox,
}

impl PopulationConfig {
    /// Configuration preloaded with the bundled fitted moments and prevalences.
    pub fn preset() -> Self {
        serde_json::from_str(PRESET).expect("bundled preset parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        for c in &cfg.cells {
            cfg.spec_for(c.cell)?;
        }
        Ok(cfg)
    }

    pub fn spec_for(&self, cell: Cell) -> Result<PopulationSpec> {
        let entry = self
            .cells
            .iter()
            .find(|c| c.cell == cell)
            .ok_or_else(|| Error::Lookup(format!("no prevalence for condition {cell}")))?;
        let spec = PopulationSpec {
            prevalence: entry.prevalence.clone(),
            moments: self.moments.clone(),
            search_box: self.search_box,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Moments for `strategy` with every weight on it.
    pub fn spec_only(&self, strategy: Strategy) -> PopulationSpec {
        PopulationSpec {
            prevalence: BTreeMap::from([(strategy, 1.0)]),
            moments: self.moments.clone(),
            search_box: self.search_box,
        }
    }
}
