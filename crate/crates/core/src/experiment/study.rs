//! Population simulations: condition comparisons, parameter trends and the
//! hypothesis sweeps over training length, attribute count and explainer.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::domain::{Domain, DomainConfig, ExplainedPool};
use super::protocol::{run_virtual_session, XaiConfig};
use super::record::{Cell, SessionRecord, XaiType};
use super::stats::{ci95, spearman, tukey_hsd, TukeyResult};
use crate::cognitive::{CognitiveParams, Strategy};
use crate::data::{DatasetName, SplitSizes};
use crate::fitting::{PopulationConfig, PopulationSpec};
use crate::xai::Explainer;
use crate::{Error, Result};

/// Deterministic child seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &p in path {
        h = splitmix(h ^ p.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mean correctness of one simulated group with its 95% CI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub dataset: String,
    pub cell: Cell,
    /// Value of the swept variable, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explainer: Option<String>,
    pub n: usize,
    pub mean: f64,
    pub half_width: f64,
    /// Per-participant correctness.
    pub values: Vec<f64>,
}

impl CellSummary {
    pub fn new(dataset: &str, cell: Cell, values: Vec<f64>) -> Result<Self> {
        let (mean, half_width) = ci95(&values)?;
        Ok(Self {
            dataset: dataset.to_string(),
            cell,
            x: None,
            explainer: None,
            n: values.len(),
            mean,
            half_width,
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedStat {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub title: String,
    pub cells: Vec<CellSummary>,
    /// Tukey groupings, one per dataset, over that dataset's cells in order.
    #[serde(default)]
    pub tukey: Vec<(String, TukeyResult)>,
    #[serde(default)]
    pub stats: Vec<NamedStat>,
}

impl ExperimentReport {
    pub fn stat(&self, name: &str) -> Option<f64> {
        self.stats.iter().find(|s| s.name == name).map(|s| s.value)
    }

    /// Summary rows as comma-separated text.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("dataset,xai_type,condition,explainer,x,n,mean,ci95_half_width,letters\n");
        for c in &self.cells {
            let letters = self
                .tukey
                .iter()
                .find(|(d, _)| *d == c.dataset)
                .and_then(|(_, t)| {
                    let i = self
                        .cells
                        .iter()
                        .filter(|o| o.dataset == c.dataset)
                        .position(|o| o == c)?;
                    t.letters.get(i).cloned()
                })
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.6},{:.6},{}\n",
                c.dataset,
                c.cell.xai_type,
                c.cell.condition,
                c.explainer.clone().unwrap_or_default(),
                c.x.map(|v| v.to_string()).unwrap_or_default(),
                c.n,
                c.mean,
                c.half_width,
                letters
            ));
        }
        out
    }
}

/// Participants of one condition replaying the protocol on `pool`.
pub fn simulate_cell(
    pool: &ExplainedPool,
    cell: Cell,
    population: &PopulationSpec,
    participants: usize,
    sizes: SplitSizes,
    seed: u64,
) -> Result<Vec<SessionRecord>> {
    let people = population.sample_population(participants, seed)?;
    simulate_participants(pool, cell, &people, sizes, seed)
}

pub fn simulate_participants(
    pool: &ExplainedPool,
    cell: Cell,
    people: &[CognitiveParams],
    sizes: SplitSizes,
    seed: u64,
) -> Result<Vec<SessionRecord>> {
    let xai = XaiConfig::new(cell.xai_type);
    people
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let s = derive_seed(seed, &[i as u64]);
            let materials = pool.materials(sizes, s)?;
            run_virtual_session(&format!("{}-{cell}-{i}", pool.dataset), p, &materials, &xai, s)
        })
        .collect()
}

fn correctness_in(records: &[SessionRecord], cell: Cell) -> Vec<f64> {
    records
        .iter()
        .filter_map(|r| r.correctness(Some(cell.condition)))
        .collect()
}

/// Mean correctness per condition on each pool, with Tukey groupings per dataset.
pub fn run_condition_study(
    pools: &[ExplainedPool],
    population: &PopulationConfig,
    participants: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let mut cells = Vec::new();
    let mut tukey = Vec::new();
    for (d, pool) in pools.iter().enumerate() {
        let mut groups = Vec::new();
        for (c, cell) in Cell::ALL.iter().enumerate() {
            let spec = population.spec_for(*cell)?;
            let s = derive_seed(seed, &[d as u64, c as u64]);
            let recs = simulate_cell(pool, *cell, &spec, participants, SplitSizes::default(), s)?;
            let values = correctness_in(&recs, *cell);
            groups.push(values.clone());
            cells.push(CellSummary::new(&pool.dataset, *cell, values)?);
        }
        tukey.push((pool.dataset.clone(), tukey_hsd(&groups, 0.05)?));
    }
    Ok(ExperimentReport {
        title: "correctness by condition".into(),
        cells,
        tukey,
        stats: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrendParam {
    Alpha,
    Zeta,
    Rho,
    K,
}

impl TrendParam {
    pub fn uses(self, s: Strategy) -> bool {
        match self {
            TrendParam::Alpha => !matches!(s, Strategy::AttributionSum | Strategy::Random),
            TrendParam::Zeta => s == Strategy::AttributionSum,
            TrendParam::Rho | TrendParam::K => s != Strategy::Random,
        }
    }

    pub fn set(self, p: &mut CognitiveParams, v: f64) {
        match self {
            TrendParam::Alpha => p.alpha = v,
            TrendParam::Zeta => p.zeta = v,
            TrendParam::Rho => p.rho = v,
            TrendParam::K => p.k = v.round().max(1.0) as usize,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrendParam::Alpha => "alpha",
            TrendParam::Zeta => "zeta",
            TrendParam::Rho => "rho",
            TrendParam::K => "k",
        }
    }

    /// Evenly spaced values across the search range.
    pub fn bins(self, n: usize) -> Vec<f64> {
        let (lo, hi) = match self {
            TrendParam::Alpha => (1.0, 40.0),
            TrendParam::Zeta => (0.1, 5.0),
            TrendParam::Rho => (-2.8, -1.5),
            TrendParam::K => (1.0, 4.0),
        };
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendResult {
    pub param: TrendParam,
    /// `(parameter value, participant correctness)` pairs.
    pub points: Vec<(f64, f64)>,
    pub bin_means: Vec<(f64, f64)>,
    pub spearman: f64,
}

/// Correctness as one parameter is swept while the others follow the
/// population. Participants rotate through the conditions whose prevalence
/// includes a strategy that uses the parameter; only those strategies are drawn.
pub fn run_parameter_trend(
    pool: &ExplainedPool,
    population: &PopulationConfig,
    param: TrendParam,
    bins: &[f64],
    per_bin: usize,
    seed: u64,
) -> Result<TrendResult> {
    let mut eligible: Vec<(Cell, PopulationSpec, Vec<Strategy>, Vec<f64>)> = Vec::new();
    for cell in Cell::ALL {
        let spec = population.spec_for(cell)?;
        let (s, w): (Vec<Strategy>, Vec<f64>) = spec
            .prevalence
            .iter()
            .filter(|(s, w)| param.uses(**s) && **w > 0.0)
            .map(|(s, w)| (*s, *w))
            .unzip();
        if !s.is_empty() {
            eligible.push((cell, spec, s, w));
        }
    }
    if eligible.is_empty() {
        return Err(Error::Config(format!("no strategy uses {}", param.name())));
    }
    let jobs: Vec<(usize, usize)> = (0..bins.len())
        .flat_map(|b| (0..per_bin).map(move |i| (b, i)))
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(b, i)| {
            let s = derive_seed(seed, &[b as u64, i as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let (cell, spec, strategies, weights) = &eligible[i % eligible.len()];
            let pick = WeightedIndex::new(weights).map_err(|e| Error::Validation(e.to_string()))?;
            let mut p = spec.sample_params(strategies[pick.sample(&mut rng)], &mut rng);
            param.set(&mut p, bins[b]);
            let materials = pool.materials(SplitSizes::default(), s)?;
            let rec = run_virtual_session(
                &format!("trend-{b}-{i}"),
                &p,
                &materials,
                &XaiConfig::new(cell.xai_type),
                s,
            )?;
            let c = rec.correctness(Some(cell.condition)).unwrap_or(0.0);
            Ok((bins[b], c))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let bin_means = bins
        .iter()
        .map(|&v| {
            let sel: Vec<f64> = points.iter().filter(|p| p.0 == v).map(|p| p.1).collect();
            (v, sel.iter().sum::<f64>() / sel.len().max(1) as f64)
        })
        .collect();
    Ok(TrendResult {
        param,
        spearman: spearman(&xs, &ys)?,
        points,
        bin_means,
    })
}

/// Secondary independent variable of a hypothesis study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variable", content = "levels", rename_all = "kebab-case")]
pub enum IvGrid {
    TrainingInstances(Vec<usize>),
    Attributes(Vec<usize>),
    Explainers(Vec<Explainer>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSetup {
    pub dataset: DatasetName,
    pub participants: usize,
    pub population: PopulationConfig,
    /// Explainer for the training-length and attribute sweeps.
    pub explainer: Explainer,
}

impl HypothesisSetup {
    pub fn new(dataset: DatasetName) -> Self {
        Self {
            dataset,
            participants: 100,
            population: PopulationConfig::preset(),
            explainer: Explainer::Shapley,
        }
    }
}

/// Runs every condition at every level of `grid`.
pub fn run_hypothesis_study(grid: &IvGrid, setup: &HypothesisSetup, seed: u64) -> Result<ExperimentReport> {
    let mut cells = Vec::new();
    let run_level = |pool: &ExplainedPool,
                     sizes: SplitSizes,
                     level: usize,
                     x: Option<f64>,
                     cells: &mut Vec<CellSummary>|
     -> Result<()> {
        for (c, cell) in Cell::ALL.iter().enumerate() {
            let spec = setup.population.spec_for(*cell)?;
            let s = derive_seed(seed, &[level as u64, c as u64]);
            let recs = simulate_cell(pool, *cell, &spec, setup.participants, sizes, s)?;
            let mut summary = CellSummary::new(&pool.dataset, *cell, correctness_in(&recs, *cell))?;
            summary.x = x;
            summary.explainer = Some(format!("{:?}", pool.method).to_lowercase());
            cells.push(summary);
        }
        Ok(())
    };
    let title;
    match grid {
        IvGrid::TrainingInstances(levels) => {
            title = "correctness by number of training instances";
            let domain = Domain::prepare(&DomainConfig::new(setup.dataset, seed))?;
            let pool = domain.explain(&setup.explainer)?;
            for (l, &n) in levels.iter().enumerate() {
                let sizes = SplitSizes {
                    training: n,
                    testing: SplitSizes::default().testing,
                };
                run_level(&pool, sizes, l, Some(n as f64), &mut cells)?;
            }
        }
        IvGrid::Attributes(levels) => {
            title = "correctness by number of attributes";
            for (l, &n) in levels.iter().enumerate() {
                let domain = Domain::prepare(&DomainConfig::synthetic(n, derive_seed(seed, &[n as u64])))?;
                let pool = domain.explain(&setup.explainer)?;
                run_level(&pool, SplitSizes::default(), l, Some(n as f64), &mut cells)?;
            }
        }
        IvGrid::Explainers(explainers) => {
            title = "correctness by explainer";
            let domain = Domain::prepare(&DomainConfig::new(setup.dataset, seed))?;
            for (l, e) in explainers.iter().enumerate() {
                let pool = domain.explain(e)?;
                // Same participants and splits for every explainer.
                run_level(&pool, SplitSizes::default(), 0, Some(l as f64), &mut cells)?;
            }
        }
    }
    Ok(ExperimentReport {
        title: title.into(),
        cells,
        tukey: Vec::new(),
        stats: Vec::new(),
    })
}

/// Mean over participants of all cells matching `filter` at each x level.
pub fn pooled_curve(report: &ExperimentReport, filter: impl Fn(Cell) -> bool) -> Vec<(f64, f64)> {
    let mut xs: Vec<f64> = report.cells.iter().filter_map(|c| c.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.into_iter()
        .map(|x| {
            let vals: Vec<f64> = report
                .cells
                .iter()
                .filter(|c| c.x == Some(x) && filter(c.cell))
                .flat_map(|c| c.values.iter().copied())
                .collect();
            (x, vals.iter().sum::<f64>() / vals.len().max(1) as f64)
        })
        .collect()
}

/// The without-XAI conditions.
pub fn without_xai(cell: Cell) -> bool {
    cell.condition == super::record::TestCondition::WithoutXai
}

/// Explainer-level mean correctness over the four explained conditions.
pub fn explained_mean(report: &ExperimentReport, x: f64) -> f64 {
    let vals: Vec<f64> = report
        .cells
        .iter()
        .filter(|c| c.x == Some(x) && c.cell.xai_type != XaiType::None)
        .map(|c| c.mean)
        .collect();
    vals.iter().sum::<f64>() / vals.len().max(1) as f64
}
