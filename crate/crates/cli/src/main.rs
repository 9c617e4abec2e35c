mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use coax::data::{load_dataset, DatasetName, SplitSizes};
use coax::experiment::{
    derive_seed, run_hypothesis_study, run_parameter_trend, simulate_cell, tukey_hsd, Cell, CellSummary, Domain,
    DomainConfig, ExperimentReport, ExplainedPool, HypothesisSetup, IvGrid, SessionRecord, TestCondition, TrendParam,
    TrendResult, XaiType,
};
use coax::fitting::{fit_blocks, PopulationConfig, SessionFit, StrategySelection};
use coax::proxies::{compare_block, ProxyFamily, ProxyFitRecord};
use coax::xai::Explainer;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "coax",
    version,
    about = "Simulate, fit and report cognitive models of XAI users"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DomainArgs {
    /// wine-quality, adult-income, forest-cover or synthetic.
    #[arg(long, default_value = "wine-quality")]
    dataset: DatasetName,
    /// Attribute count for the synthetic dataset.
    #[arg(long)]
    n_attributes: Option<usize>,
    /// Seed of the data source and AI model.
    #[arg(long, default_value_t = 1)]
    domain_seed: u64,
    /// CSV of the real dataset; the seeded synthetic source is used otherwise.
    #[arg(long)]
    data: Option<PathBuf>,
    /// shapley, lime, ig or input-gradients.
    #[arg(long, default_value = "shapley")]
    explainer: Explainer,
}

#[derive(Args, Clone)]
struct Common {
    /// Population file (JSON); the built-in fitted-means preset otherwise.
    #[arg(long)]
    population: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short, default_value = "coax-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variable {
    TrainingInstances,
    Attributes,
    Explainers,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Alpha,
    Zeta,
    Rho,
    K,
}

impl From<Param> for TrendParam {
    fn from(p: Param) -> Self {
        match p {
            Param::Alpha => TrendParam::Alpha,
            Param::Zeta => TrendParam::Zeta,
            Param::Rho => TrendParam::Rho,
            Param::K => TrendParam::K,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate virtual participants in every study condition.
    Simulate {
        #[command(flatten)]
        domain: DomainArgs,
        /// Restrict to one XAI type.
        #[arg(long)]
        xai_type: Option<XaiType>,
        #[arg(long, default_value_t = 100)]
        participants: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Fit every strategy to each test block of recorded sessions.
    Fit {
        /// Line-delimited session records.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 60)]
        budget: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Compare CoAX fits with tuned DT/KNN/MLP proxies per test block.
    CompareProxies {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 60)]
        budget: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep training length, attribute count or explainer.
    Hypothesis {
        #[arg(long, value_enum)]
        variable: Variable,
        /// Comma-separated levels: counts, or explainer names.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<String>,
        #[arg(long, default_value = "wine-quality")]
        dataset: DatasetName,
        /// Explainer for the count sweeps.
        #[arg(long, default_value = "shapley")]
        explainer: Explainer,
        #[arg(long, default_value_t = 100)]
        participants: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Correctness as one cognitive parameter is swept.
    Trend {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, value_enum)]
        param: Param,
        #[arg(long, default_value_t = 5)]
        bins: usize,
        #[arg(long, default_value_t = 100)]
        per_bin: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Re-render tables and figures from a saved report or trend.
    Report {
        /// `report.json` or `trend.json` written by another subcommand.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, short, default_value = "coax-out")]
        out: PathBuf,
    },
}

fn build_pool(d: &DomainArgs) -> Result<ExplainedPool> {
    let cfg = DomainConfig {
        n_attributes: d.n_attributes,
        ..DomainConfig::new(d.dataset, d.domain_seed)
    };
    let domain = match &d.data {
        None => Domain::prepare(&cfg)?,
        Some(path) => {
            let spec = cfg.spec();
            let mut rows = load_dataset(path, &spec).with_context(|| format!("loading {}", path.display()))?;
            let need = cfg.model_rows + cfg.background_rows + cfg.pool_rows;
            if rows.len() < need {
                bail!("{} has {} rows; {need} are needed", path.display(), rows.len());
            }
            rows.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
            let (train, rest) = rows.split_at(cfg.model_rows);
            let (background, rest) = rest.split_at(cfg.background_rows);
            let pool = rest[..cfg.pool_rows].to_vec();
            Domain::from_parts(cfg.label(), spec, train, background.to_vec(), pool, &cfg.train)?
        }
    };
    eprintln!("{}: AI accuracy {:.3} on the study pool", domain.name, domain.accuracy);
    Ok(domain.explain(&d.explainer)?)
}

fn population(path: Option<&Path>) -> Result<PopulationConfig> {
    Ok(match path {
        Some(p) => PopulationConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => PopulationConfig::preset(),
    })
}

fn write(out: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(out)?;
    let path = out.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn read_sessions(path: &Path) -> Result<Vec<SessionRecord>> {
    let records: Vec<SessionRecord> = coax::jsonl::load(path).with_context(|| format!("reading {}", path.display()))?;
    for r in &records {
        r.validate().with_context(|| format!("session {}", r.session_id))?;
    }
    Ok(records)
}

fn save_report(report: &ExperimentReport, out: &Path, x_desc: Option<&str>) -> Result<()> {
    write(out, "report.json", &serde_json::to_string_pretty(report)?)?;
    write(out, "summary.csv", &report.summary_csv())?;
    match x_desc {
        Some(x) => plot::condition_curves(report, x, &out.join("curves.svg"))?,
        None => plot::correctness_bars(report, &out.join("correctness.svg"))?,
    }
    Ok(())
}

fn simulate(domain: &DomainArgs, xai_type: Option<XaiType>, participants: usize, common: &Common) -> Result<()> {
    let pool = build_pool(domain)?;
    let population = population(common.population.as_deref())?;
    let mut sessions = Vec::new();
    let mut cells = Vec::new();
    for (c, cell) in Cell::ALL.iter().enumerate() {
        if xai_type.is_some_and(|t| t != cell.xai_type) {
            continue;
        }
        let spec = population.spec_for(*cell)?;
        let recs = simulate_cell(
            &pool,
            *cell,
            &spec,
            participants,
            SplitSizes::default(),
            derive_seed(common.seed, &[c as u64]),
        )?;
        let values: Vec<f64> = recs
            .iter()
            .filter_map(|r| r.correctness(Some(cell.condition)))
            .collect();
        cells.push(CellSummary::new(&pool.dataset, *cell, values)?);
        sessions.extend(recs);
    }
    let tukey = if cells.len() >= 2 {
        let groups: Vec<Vec<f64>> = cells.iter().map(|c| c.values.clone()).collect();
        vec![(pool.dataset.clone(), tukey_hsd(&groups, 0.05)?)]
    } else {
        Vec::new()
    };
    let report = ExperimentReport {
        title: format!("correctness by condition ({})", pool.dataset),
        cells,
        tukey,
        stats: Vec::new(),
    };
    write(&common.out, "sessions.jsonl", &coax::jsonl::to_string(&sessions)?)?;
    save_report(&report, &common.out, None)?;
    print!("{}", report.summary_csv());
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct BlockFit {
    session_id: String,
    dataset: String,
    xai_type: XaiType,
    block: usize,
    condition: TestCondition,
    selection: StrategySelection,
}

fn fit(input: &Path, budget: usize, common: &Common) -> Result<()> {
    let sessions = read_sessions(input)?;
    let rows: Vec<BlockFit> = sessions
        .par_iter()
        .enumerate()
        .map(|(i, s)| -> Result<Vec<BlockFit>> {
            Ok(fit_blocks(s, budget, derive_seed(common.seed, &[i as u64]))?
                .into_iter()
                .map(|(block, condition, selection)| BlockFit {
                    session_id: s.session_id.clone(),
                    dataset: s.dataset.clone(),
                    xai_type: s.xai_type,
                    block,
                    condition,
                    selection,
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut counts: std::collections::BTreeMap<(String, String, String, String), usize> = Default::default();
    for r in &rows {
        let key = (
            r.dataset.clone(),
            r.xai_type.to_string(),
            r.condition.to_string(),
            r.selection.best.strategy.to_string(),
        );
        *counts.entry(key).or_default() += 1;
    }
    let mut csv = String::from("dataset,xai_type,condition,strategy,blocks\n");
    for ((d, t, c, s), n) in counts {
        csv.push_str(&format!("{d},{t},{c},{s},{n}\n"));
    }
    write(&common.out, "fits.jsonl", &coax::jsonl::to_string(&rows)?)?;
    write(&common.out, "strategy_counts.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct BlockComparison {
    session_id: String,
    xai_type: XaiType,
    block: usize,
    condition: TestCondition,
    /// Strategy picked by BIC.
    coax_selected: SessionFit,
    /// Lowest nll over all strategies.
    coax_nll: f64,
    proxies: Vec<ProxyFitRecord>,
}

fn compare(input: &Path, budget: usize, common: &Common) -> Result<()> {
    let sessions = read_sessions(input)?;
    let rows: Vec<BlockComparison> = sessions
        .par_iter()
        .enumerate()
        .map(|(i, s)| -> Result<Vec<BlockComparison>> {
            s.blocks()
                .into_iter()
                .map(|(b, condition)| {
                    let block = s.only_block(b);
                    let c = compare_block(&block, budget, derive_seed(common.seed, &[i as u64, b as u64]))?;
                    Ok(BlockComparison {
                        session_id: s.session_id.clone(),
                        xai_type: s.xai_type,
                        block: b,
                        condition,
                        coax_nll: c.best_fit().nll,
                        coax_selected: c.coax.best.clone(),
                        proxies: c.proxies.iter().map(|p| p.record(&block)).collect(),
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut csv = String::from("xai_type,condition,blocks,coax_nll,coax_bic_pick_nll,dt_nll,knn_nll,mlp_nll\n");
    for cell in Cell::ALL {
        let sel: Vec<&BlockComparison> = rows
            .iter()
            .filter(|r| r.xai_type == cell.xai_type && r.condition == cell.condition)
            .collect();
        if sel.is_empty() {
            continue;
        }
        let n = sel.len() as f64;
        let mean = |f: &dyn Fn(&BlockComparison) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / n;
        let family =
            |fam: ProxyFamily| mean(&|r| r.proxies.iter().find(|p| p.family == fam).map_or(f64::NAN, |p| p.nll));
        csv.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            cell.xai_type,
            cell.condition,
            sel.len(),
            mean(&|r| r.coax_nll),
            mean(&|r| r.coax_selected.nll),
            family(ProxyFamily::DecisionTree),
            family(ProxyFamily::Knn),
            family(ProxyFamily::Mlp),
        ));
    }
    write(&common.out, "proxies.jsonl", &coax::jsonl::to_string(&rows)?)?;
    write(&common.out, "proxy_summary.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

fn hypothesis(variable: Variable, levels: &[String], setup: HypothesisSetup, common: &Common) -> Result<()> {
    let counts = || -> Result<Vec<usize>> {
        levels
            .iter()
            .map(|l| {
                l.trim()
                    .parse::<usize>()
                    .with_context(|| format!("level `{l}` is not a count"))
            })
            .collect()
    };
    let (grid, x_desc) = match variable {
        Variable::TrainingInstances => (IvGrid::TrainingInstances(counts()?), "training instances"),
        Variable::Attributes => (IvGrid::Attributes(counts()?), "attributes"),
        Variable::Explainers => (
            IvGrid::Explainers(levels.iter().map(|l| l.trim().parse()).collect::<Result<_, _>>()?),
            "explainer (level index)",
        ),
    };
    let report = run_hypothesis_study(&grid, &setup, common.seed)?;
    save_report(&report, &common.out, Some(x_desc))?;
    print!("{}", report.summary_csv());
    Ok(())
}

fn trend(domain: &DomainArgs, param: TrendParam, bins: usize, per_bin: usize, common: &Common) -> Result<()> {
    let pool = build_pool(domain)?;
    let population = population(common.population.as_deref())?;
    let result = run_parameter_trend(&pool, &population, param, &param.bins(bins), per_bin, common.seed)?;
    write(&common.out, "trend.json", &serde_json::to_string_pretty(&result)?)?;
    let mut csv = format!("{},mean_correctness\n", param.name());
    for (x, y) in &result.bin_means {
        csv.push_str(&format!("{x},{y:.6}\n"));
    }
    write(&common.out, "trend.csv", &csv)?;
    plot::trend_curve(&result, &common.out.join("trend.svg"))?;
    println!("spearman {:+.4}", result.spearman);
    print!("{csv}");
    Ok(())
}

fn report(input: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    fs::create_dir_all(out)?;
    if let Ok(report) = serde_json::from_str::<ExperimentReport>(&text) {
        write(out, "summary.csv", &report.summary_csv())?;
        plot::correctness_bars(&report, &out.join("correctness.svg"))?;
        if report.cells.iter().any(|c| c.x.is_some()) {
            plot::condition_curves(&report, "level", &out.join("curves.svg"))?;
        }
        print!("{}", report.summary_csv());
        return Ok(());
    }
    let trend: TrendResult = serde_json::from_str(&text).context("input is neither a report nor a trend")?;
    plot::trend_curve(&trend, &out.join("trend.svg"))?;
    println!("spearman {:+.4}", trend.spearman);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            domain,
            xai_type,
            participants,
            common,
        } => simulate(&domain, xai_type, participants, &common),
        Command::Fit { input, budget, common } => fit(&input, budget, &common),
        Command::CompareProxies { input, budget, common } => compare(&input, budget, &common),
        Command::Hypothesis {
            variable,
            levels,
            dataset,
            explainer,
            participants,
            common,
        } => {
            let setup = HypothesisSetup {
                participants,
                explainer,
                population: population(common.population.as_deref())?,
                ..HypothesisSetup::new(dataset)
            };
            hypothesis(variable, &levels, setup, &common)
        }
        Command::Trend {
            domain,
            param,
            bins,
            per_bin,
            common,
        } => trend(&domain, param.into(), bins, per_bin, &common),
        Command::Report { input, out } => report(&input, &out),
    }
}
