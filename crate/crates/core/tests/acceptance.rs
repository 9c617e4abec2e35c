//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, then a single
//! assertion over all of them. Criteria run one after another so the wall
//! clock limits are measured without competing work.
//!
//! Run with `cargo test -p coax --test acceptance -- --nocapture`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coax::cognitive::{
    decide, encode_trial, CognitiveParams, ExplanationCue, Memory, Stimulus, Strategy, DEFAULT_LAMBDA,
};
use coax::data::{DatasetName, SplitSizes};
use coax::experiment::stats::{ols_slope, studentized_range_quantile};
use coax::experiment::study::{explained_mean, pooled_curve, without_xai};
use coax::experiment::*;
use coax::fitting::{select_strategy_detailed, session_nll, PopulationConfig, SearchBox};
use coax::proxies::{compare_block, ProxyFamily};
use coax::xai::{integrated_gradients, shapley_values, BackgroundStats, Explainer, LimeConfig};
use coax::Label;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, minutes: u64) -> bool {
    elapsed < Duration::from_secs(60 * minutes)
}

const DATASETS: [DatasetName; 3] = [
    DatasetName::WineQuality,
    DatasetName::AdultIncome,
    DatasetName::ForestCover,
];

// ---------------------------------------------------------------------------
// Explanation soundness

fn explanation_soundness() -> Outcome {
    let start = Instant::now();
    let mut worst_shap = 0.0_f64;
    let mut worst_ig = 0.0_f64;
    let mut worst_dummy = 0.0_f64;
    for ds in DATASETS {
        let domain = Domain::prepare(&DomainConfig::new(ds, 11)).unwrap();
        let f = domain.model.require_differentiable().unwrap();
        let bg: Vec<Vec<f64>> = domain.background.iter().map(|b| b.norm.clone()).collect();
        let base = BackgroundStats::from_instances(&domain.background).unwrap().mean;
        let bg_mean = bg.iter().map(|b| f.proba(b)).sum::<f64>() / bg.len() as f64;
        for inst in domain.pool.iter().take(100) {
            let x = &inst.norm;
            let shap = Explainer::Shapley
                .explain(&domain.model, inst, &domain.background)
                .unwrap();
            let total = shap.oriented_toward(Label::Two).sum();
            worst_shap = worst_shap.max((total - (f.proba(x) - bg_mean)).abs());

            let ig = integrated_gradients(&domain.model, inst, &base, 256).unwrap();
            let total = ig.oriented_toward(Label::Two).sum();
            worst_ig = worst_ig.max((total - (f.proba(x) - f.proba(&base))).abs());

            // The last attribute is made irrelevant by pinning it.
            let last = x.len() - 1;
            let pinned = |z: &[f64]| {
                let mut z = z.to_vec();
                z[last] = 0.5;
                f.proba(&z)
            };
            let phi = shapley_values(pinned, x, &bg).unwrap();
            worst_dummy = worst_dummy.max(phi[last].abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_shap < 1e-6 && worst_ig < 1e-3 && worst_dummy == 0.0 && within(elapsed, 1),
        format!(
            "Shapley residual {worst_shap:.2e} (<1e-6), IG-256 residual {worst_ig:.2e} (<1e-3), dummy |phi| {worst_dummy:e} (=0), {:.1}s (<60s)",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// Model-level oracles: a plain re-derivation from the trial list.

#[derive(Clone)]
struct Trial {
    x: Vec<f64>,
    cue: Option<ExplanationCue>,
    label: Label,
    t: usize,
}

fn bars(c: &ExplanationCue) -> Vec<f64> {
    match c {
        ExplanationCue::Importance(v) => v.clone(),
        ExplanationCue::Attribution(v) => v.iter().map(|a| a.abs()).collect(),
    }
}

/// Indices of the k largest values, ties to the lower index.
fn largest(values: &[f64], k: usize) -> Vec<usize> {
    let mut chosen = Vec::new();
    for _ in 0..k.min(values.len()) {
        let mut best: Option<usize> = None;
        for i in 0..values.len() {
            if chosen.contains(&i) {
                continue;
            }
            if best.is_none_or(|b| values[i] > values[b]) {
                best = Some(i);
            }
        }
        chosen.push(best.unwrap());
    }
    chosen.sort();
    chosen
}

fn t_score(rows: &[(Vec<f64>, Label)], r: usize) -> f64 {
    let ones: Vec<f64> = rows.iter().filter(|x| x.1 == Label::One).map(|x| x.0[r]).collect();
    let twos: Vec<f64> = rows.iter().filter(|x| x.1 == Label::Two).map(|x| x.0[r]).collect();
    if ones.is_empty() || twos.is_empty() {
        let all: Vec<f64> = rows.iter().map(|x| x.0[r]).collect();
        if all.is_empty() {
            return 0.0;
        }
        let m = all.iter().sum::<f64>() / all.len() as f64;
        return all.iter().map(|v| (v - m).abs()).sum::<f64>() / all.len() as f64;
    }
    let mv = |g: &[f64]| {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        let v = if g.len() < 2 {
            0.0
        } else {
            g.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (g.len() - 1) as f64
        };
        (m, v / g.len() as f64)
    };
    let (m1, s1) = mv(&ones);
    let (m2, s2) = mv(&twos);
    let se = (s1 + s2).sqrt();
    let diff = (m1 - m2).abs();
    if se > 0.0 {
        diff / se
    } else if diff > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn act(now: usize, t: usize) -> f64 {
    -DEFAULT_LAMBDA * ((now - t + 1) as f64).ln()
}

fn gcm(votes: &[(Label, f64)]) -> f64 {
    let total: f64 = votes.iter().map(|v| v.1).sum();
    if total > 0.0 {
        votes.iter().filter(|v| v.0 == Label::One).map(|v| v.1).sum::<f64>() / total
    } else {
        0.5
    }
}

fn oracle(p: &CognitiveParams, trials: &[Trial], x: &[f64], cue: Option<&ExplanationCue>, now: usize) -> f64 {
    let n = x.len();
    let alive: Vec<&Trial> = trials.iter().filter(|t| act(now, t.t) >= p.rho).collect();
    let msd = |a: &[f64], b: &[f64], feats: &[usize]| {
        feats.iter().map(|&r| (a[r] - b[r]).powi(2)).sum::<f64>() / feats.len() as f64
    };
    match p.strategy {
        Strategy::Random => 0.5,
        Strategy::SensitiveFeatures => {
            let rows: Vec<(Vec<f64>, Label)> = trials.iter().map(|t| (t.x.clone(), t.label)).collect();
            let scores: Vec<f64> = (0..n).map(|r| t_score(&rows, r)).collect();
            let f = largest(&scores, p.k);
            let votes: Vec<(Label, f64)> = alive
                .iter()
                .map(|t| (t.label, (-p.alpha * msd(x, &t.x, &f) + act(now, t.t)).exp()))
                .collect();
            gcm(&votes)
        }
        Strategy::SalientFeatures => {
            let f: Vec<usize> = match cue {
                Some(c) => largest(&bars(c), p.k),
                None => (0..n).collect(),
            };
            let mut votes = Vec::new();
            for t in &alive {
                let stored: Vec<usize> = match &t.cue {
                    Some(c) => largest(&bars(c), p.k),
                    None => (0..n).collect(),
                };
                let common: Vec<usize> = f.iter().copied().filter(|r| stored.contains(r)).collect();
                if common.is_empty() {
                    continue;
                }
                votes.push((t.label, (-p.alpha * msd(x, &t.x, &common) + act(now, t.t)).exp()));
            }
            gcm(&votes)
        }
        Strategy::ImportanceCategorization => {
            let Some(c) = cue else { return 0.5 };
            let pattern = bars(c);
            let rows: Vec<(Vec<f64>, Label)> = trials
                .iter()
                .filter_map(|t| t.cue.as_ref().map(|c| (bars(c), t.label)))
                .collect();
            let scores: Vec<f64> = (0..n).map(|r| t_score(&rows, r)).collect();
            let f = largest(&scores, p.k);
            let votes: Vec<(Label, f64)> = alive
                .iter()
                .filter_map(|t| {
                    t.cue
                        .as_ref()
                        .map(|c| (t.label, (-p.alpha * msd(&pattern, &bars(c), &f) + act(now, t.t)).exp()))
                })
                .collect();
            gcm(&votes)
        }
        Strategy::AttributionSum => {
            let sgn = |v: f64| {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            };
            let (w, y): (Vec<f64>, Vec<f64>) = match cue {
                Some(ExplanationCue::Attribution(a)) => {
                    (a.iter().map(|v| v.abs()).collect(), a.iter().map(|v| sgn(*v)).collect())
                }
                _ => {
                    let mut w = vec![0.0; n];
                    let mut y = vec![0.0; n];
                    for r in 0..n {
                        let s = |t: &Trial| (-10.0 * (x[r] - t.x[r]).powi(2) + act(now, t.t)).exp();
                        let total: f64 = alive.iter().map(|t| s(t)).sum();
                        if total <= 0.0 || total.is_nan() {
                            continue;
                        }
                        let signed: Vec<(f64, f64)> = alive
                            .iter()
                            .filter_map(|t| match &t.cue {
                                Some(ExplanationCue::Attribution(a)) => Some((s(t), a[r])),
                                _ => None,
                            })
                            .collect();
                        let weight_sum: f64 = signed.iter().map(|v| v.0).sum();
                        if cue.is_none() && weight_sum > 0.0 {
                            let m = signed.iter().map(|v| v.0 * v.1).sum::<f64>() / weight_sum;
                            y[r] = sgn(m);
                            w[r] = m.abs();
                        } else {
                            let vote: f64 = alive
                                .iter()
                                .map(|t| s(t) * if t.label == Label::One { 1.0 } else { -1.0 })
                                .sum();
                            y[r] = sgn(vote);
                            w[r] = match cue {
                                Some(ExplanationCue::Importance(imp)) => imp[r],
                                _ => {
                                    alive
                                        .iter()
                                        .map(|t| s(t) * t.cue.as_ref().map_or(1.0, |c| bars(c)[r]))
                                        .sum::<f64>()
                                        / total
                                }
                            };
                        }
                    }
                    (w, y)
                }
            };
            let f = largest(&w, p.k);
            let z: f64 = f.iter().map(|&r| w[r] * y[r]).sum();
            1.0 / (1.0 + (-p.zeta * z).exp())
        }
    }
}

fn random_cue(rng: &mut ChaCha8Rng, n: usize, xai: XaiType) -> Option<ExplanationCue> {
    match xai {
        XaiType::None => None,
        XaiType::Importance => {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let m = v.iter().cloned().fold(0.0, f64::max);
            v.iter_mut().for_each(|a| *a /= m);
            Some(ExplanationCue::Importance(v))
        }
        XaiType::Attribution => {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = v.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
            v.iter_mut().for_each(|a| *a /= m);
            Some(ExplanationCue::Attribution(v))
        }
    }
}

fn model_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    let mut checked = 0usize;
    for _ in 0..1000 {
        let n = rng.random_range(2..=5);
        let m = rng.random_range(1..=10);
        let xai = XaiType::ALL[rng.random_range(0..3)];
        let trials: Vec<Trial> = (0..m)
            .map(|t| Trial {
                x: (0..n).map(|_| rng.random::<f64>()).collect(),
                cue: random_cue(&mut rng, n, xai),
                label: if rng.random_bool(0.5) { Label::One } else { Label::Two },
                t,
            })
            .collect();
        let now = m + rng.random_range(0..25);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let cue = if rng.random_bool(0.6) {
            random_cue(&mut rng, n, xai)
        } else {
            None
        };
        for strategy in Strategy::ALL {
            let p = CognitiveParams {
                alpha: rng.random_range(1.0..40.0),
                rho: rng.random_range(-2.8..-1.5),
                k: rng.random_range(1..=4),
                zeta: rng.random_range(0.1..5.0),
                lambda: DEFAULT_LAMBDA,
                strategy,
            };
            let mut memory = Memory::new();
            for t in &trials {
                encode_trial(&mut memory, Stimulus::new(&t.x, t.cue.as_ref()), t.label, t.t, &p).unwrap();
            }
            let d = decide(Stimulus::new(&x, cue.as_ref()), &memory, now, &p, &mut rng.clone()).unwrap();
            worst = worst.max((d.proba_label1 - oracle(&p, &trials, &x, cue.as_ref(), now)).abs());
            checked += 1;
        }
    }
    outcome(
        worst < 1e-10,
        format!(
            "{checked} decisions on 1000 fuzzed memories, max |dP| {worst:.2e} (<1e-10), {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// Strategy recovery

fn strategy_recovery() -> Outcome {
    let start = Instant::now();
    let domain = Domain::prepare(&DomainConfig::new(DatasetName::AdultIncome, 2)).unwrap();
    let pool = domain.explain(&Explainer::Shapley).unwrap();
    let search = SearchBox::default();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut worst_gap = f64::NEG_INFINITY;
    for strategy in [
        Strategy::SensitiveFeatures,
        Strategy::SalientFeatures,
        Strategy::AttributionSum,
        Strategy::ImportanceCategorization,
    ] {
        let xai = if strategy == Strategy::AttributionSum {
            XaiType::Attribution
        } else {
            XaiType::Importance
        };
        let cfg = XaiConfig::new(xai).with_response(ResponseRule::Argmax);
        let truth = search.mid(strategy);
        let mut hits = 0;
        for seed in 0..100u64 {
            let m = pool.materials(SplitSizes::default(), seed).unwrap();
            let rec = run_virtual_session("recovery", &truth, &m, &cfg, seed).unwrap();
            let block = rec.only_condition(TestCondition::WithXai);
            let sel = select_strategy_detailed(&block, 60, seed).unwrap();
            hits += (sel.best.strategy == strategy) as usize;
            let own = sel.candidates.iter().find(|c| c.strategy == strategy).unwrap();
            worst_gap = worst_gap.max(own.nll - session_nll(&truth, &block).unwrap());
        }
        pass &= hits >= 80;
        parts.push(format!("{strategy} {hits}/100"));
    }
    let elapsed = start.elapsed();
    pass &= worst_gap <= 0.02 && within(elapsed, 15);
    outcome(
        pass,
        format!(
            "{} (>=80 each); worst fitted-minus-generator nll {worst_gap:+.4} (<=0.02); {:.0}s (<15 min)",
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// Proxy comparison

fn proxy_comparison() -> Outcome {
    let start = Instant::now();
    let domain = Domain::prepare(&DomainConfig::new(DatasetName::WineQuality, 1)).unwrap();
    let pool = domain.explain(&Explainer::Shapley).unwrap();
    let population = PopulationConfig::preset();
    let mut pass = true;
    let mut parts = Vec::new();
    for (xai, spec_cell) in [
        (XaiType::None, Cell::ALL[0]),
        (XaiType::Importance, Cell::ALL[1]),
        (XaiType::Attribution, Cell::ALL[3]),
    ] {
        let spec = population.spec_for(spec_cell).unwrap();
        let cell = Cell {
            xai_type: xai,
            condition: spec_cell.condition,
        };
        let sessions = simulate_cell(&pool, cell, &spec, 100, SplitSizes::default(), 31).unwrap();
        let mut coax = 0.0;
        let mut selected = 0.0;
        let mut proxies = [0.0; 3];
        let mut n = 0.0;
        for (i, s) in sessions.iter().enumerate() {
            for (b, _) in s.blocks() {
                let c = compare_block(&s.only_block(b), 60, i as u64).unwrap();
                coax += c.best_fit().nll;
                selected += c.coax.best.nll;
                for (k, f) in ProxyFamily::ALL.iter().enumerate() {
                    proxies[k] += c.proxy_nll(*f).unwrap();
                }
                n += 1.0;
            }
        }
        let (coax, selected) = (coax / n, selected / n);
        let proxies = proxies.map(|v| v / n);
        pass &= proxies.iter().all(|p| coax < *p);
        parts.push(format!(
            "{xai}: coax {coax:.3} (bic pick {selected:.3}) dt {:.3} knn {:.3} mlp {:.3}",
            proxies[0], proxies[1], proxies[2]
        ));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 20);
    outcome(
        pass,
        format!("{}; {:.0}s (<20 min)", parts.join("; "), elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------------------
// Parameter trends

fn parameter_trends() -> Outcome {
    let start = Instant::now();
    let domain = Domain::prepare(&DomainConfig::new(DatasetName::WineQuality, 1)).unwrap();
    let pool = domain.explain(&Explainer::Shapley).unwrap();
    let population = PopulationConfig::preset();
    let mut pass = true;
    let mut parts = Vec::new();
    for (param, sign) in [
        (TrendParam::Alpha, 1.0),
        (TrendParam::Zeta, 1.0),
        (TrendParam::Rho, -1.0),
    ] {
        let r = run_parameter_trend(&pool, &population, param, &param.bins(5), 100, 77).unwrap();
        pass &= sign * r.spearman > 0.3;
        parts.push(format!("{} rho_s {:+.3}", param.name(), r.spearman));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 10);
    outcome(
        pass,
        format!(
            "{} (alpha, zeta > +0.3; rho < -0.3); {:.0}s (<10 min)",
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// Hypothesis-study trends

fn hypothesis_trends() -> Outcome {
    let start = Instant::now();
    let setup = HypothesisSetup::new(DatasetName::WineQuality);

    let report = run_hypothesis_study(&IvGrid::TrainingInstances((1..=13).collect()), &setup, 5).unwrap();
    let curve = pooled_curve(&report, without_xai);
    let (early, late): (Vec<_>, Vec<_>) = curve.iter().partition(|(x, _)| *x <= 7.0);
    let xs = |v: &[&(f64, f64)]| v.iter().map(|p| p.0).collect::<Vec<_>>();
    let ys = |v: &[&(f64, f64)]| v.iter().map(|p| p.1).collect::<Vec<_>>();
    let rho_early = spearman(&xs(&early), &ys(&early)).unwrap();
    let (slope, se) = ols_slope(&xs(&late), &ys(&late)).unwrap();
    let a = rho_early > 0.0 && slope.abs() < 1.96 * se;

    let report = run_hypothesis_study(&IvGrid::Attributes((1..=9).collect()), &setup, 5).unwrap();
    let curve = pooled_curve(&report, without_xai);
    let rho_attr = spearman(
        &curve.iter().map(|p| p.0).collect::<Vec<_>>(),
        &curve.iter().map(|p| p.1).collect::<Vec<_>>(),
    )
    .unwrap();
    let attribution_with = Cell::ALL[3];
    // Top curve: strictly highest, or tied within noise (never significantly below another cell).
    let sem = |c: &CellSummary| {
        let n = c.values.len() as f64;
        let var = c.values.iter().map(|v| (v - c.mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    let (mut strict_top, mut never_below) = (0, true);
    for level in 1..=9 {
        let at: Vec<&CellSummary> = report.cells.iter().filter(|c| c.x == Some(level as f64)).collect();
        let ours = at.iter().find(|c| c.cell == attribution_with).unwrap();
        let others: Vec<&&CellSummary> = at.iter().filter(|c| c.cell != attribution_with).collect();
        if others.iter().all(|c| ours.mean >= c.mean) {
            strict_top += 1;
        }
        never_below &= others
            .iter()
            .all(|c| c.mean - ours.mean < 1.96 * (sem(ours).powi(2) + sem(c).powi(2)).sqrt());
    }
    let top_everywhere = never_below;
    let b = rho_attr < 0.0 && top_everywhere;

    let explainers = vec![
        Explainer::Shapley,
        Explainer::Lime(LimeConfig::default()),
        Explainer::IntegratedGradients { steps: 64 },
        Explainer::InputGradients,
    ];
    let report = run_hypothesis_study(&IvGrid::Explainers(explainers), &setup, 5).unwrap();
    let ig = explained_mean(&report, 2.0);
    let grad = explained_mean(&report, 3.0);
    let c = grad <= ig;

    let elapsed = start.elapsed();
    outcome(
        a && b && c && within(elapsed, 30),
        format!(
            "(a) rho_s[1-7] {rho_early:+.3} (>0), slope[8-13] {slope:+.4} +/- {se:.4} (|slope|<1.96se) {}; \
             (b) rho_s {rho_attr:+.3} (<0), attribution/with highest at {strict_top}/9 levels, never significantly below: {top_everywhere} {}; \
             (c) input-gradients {grad:.4} <= integrated-gradients {ig:.4} {}; {:.0}s (<30 min)",
            mark(a),
            mark(b),
            mark(c),
            elapsed.as_secs_f64()
        ),
    )
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "MISS"
    }
}

// ---------------------------------------------------------------------------
// Condition ordering

fn condition_ordering() -> Outcome {
    let start = Instant::now();
    let pools: Vec<ExplainedPool> = DATASETS
        .iter()
        .map(|&ds| {
            Domain::prepare(&DomainConfig::new(ds, 3))
                .unwrap()
                .explain(&Explainer::Shapley)
                .unwrap()
        })
        .collect();
    let report = run_condition_study(&pools, &PopulationConfig::preset(), 100, 13).unwrap();
    let attribution_with = Cell::ALL.iter().position(|c| *c == Cell::ALL[3]).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, tukey) in &report.tukey {
        let max = tukey.means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let top = tukey.means[attribution_with] == max;
        let letters = &tukey.letters[attribution_with];
        pass &= top && letters.contains('A');
        parts.push(format!(
            "{name}: {:.3} max={top} letters {letters}",
            tukey.means[attribution_with]
        ));
    }
    outcome(
        pass,
        format!("{}; {:.0}s", parts.join("; "), start.elapsed().as_secs_f64()),
    )
}

// ---------------------------------------------------------------------------
// Statistics oracles

/// Pairwise decisions from a permutation distribution of the largest
/// Tukey-Kramer statistic over all pairs.
fn permutation_tukey(groups: &[Vec<f64>], rng: &mut ChaCha8Rng, draws: usize) -> (Vec<(usize, usize, f64)>, f64) {
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let stats = |values: &[f64]| {
        let mut out = Vec::new();
        let mut means = Vec::new();
        let mut sse = 0.0;
        let mut at = 0;
        for &n in &sizes {
            let g = &values[at..at + n];
            let m = g.iter().sum::<f64>() / n as f64;
            sse += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
            means.push(m);
            at += n;
        }
        let mse = sse / (values.len() - sizes.len()) as f64;
        for a in 0..sizes.len() {
            for b in a + 1..sizes.len() {
                let se = (mse / 2.0 * (1.0 / sizes[a] as f64 + 1.0 / sizes[b] as f64)).sqrt();
                out.push((a, b, (means[a] - means[b]).abs() / se));
            }
        }
        out
    };
    let observed = stats(&pooled);
    let mut shuffled = pooled.clone();
    let mut maxima: Vec<f64> = (0..draws)
        .map(|_| {
            for i in (1..shuffled.len()).rev() {
                let j = rng.random_range(0..=i);
                shuffled.swap(i, j);
            }
            stats(&shuffled).iter().map(|s| s.2).fold(0.0, f64::max)
        })
        .collect();
    maxima.sort_by(f64::total_cmp);
    (observed, maxima[(0.95 * draws as f64) as usize])
}

fn statistics_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut agree = 0;
    let mut compared = 0;
    let mut borderline = 0;
    for _ in 0..20 {
        let n = rng.random_range(15..=30);
        let shifts = [0.0, rng.random_range(0.0..1.5), rng.random_range(0.0..1.5)];
        let groups: Vec<Vec<f64>> = shifts
            .iter()
            .map(|s| {
                (0..n)
                    .map(|_| s + rng.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect()
            })
            .collect();
        let ours = tukey_hsd(&groups, 0.05).unwrap();
        let (observed, critical) = permutation_tukey(&groups, &mut rng, 4000);
        for (a, b, q) in observed {
            // Decisions within Monte Carlo error of either reference are not scored.
            if (q / critical - 1.0).abs() < 0.05 {
                borderline += 1;
                continue;
            }
            compared += 1;
            agree += ((q > critical) == ours.significant(a, b)) as usize;
        }
    }
    let tukey_ok = agree == compared && borderline <= 6;

    let r = pearson_r(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap();
    let r_err = (r - 5.0 / (2.0_f64 * 114.0 / 9.0).sqrt()).abs();
    let (m, h) = ci95(&[0.0, 1.0]).unwrap();
    let ci_err = (m - 0.5)
        .abs()
        .max((h - (0.475 * std::f64::consts::PI).tan() / 2.0).abs());
    // {0.2, 0.4, 0.9}: mean 0.5, sd sqrt(0.13), t(0.975, 2) = 4.302652729749464.
    let (m3, h3) = ci95(&[0.2, 0.4, 0.9]).unwrap();
    let ci3_err = (m3 - 0.5)
        .abs()
        .max((h3 - 4.302_652_729_749_464 * (0.13_f64 / 3.0).sqrt()).abs());
    let q = studentized_range_quantile(3, 60, 0.05);
    let hand_ok = r_err < 1e-10 && ci_err < 1e-10 && ci3_err < 1e-10;
    outcome(
        tukey_ok && hand_ok,
        format!(
            "Tukey vs permutation: {agree}/{compared} pair decisions agree ({borderline} borderline skipped, q(3,60)={q:.3}); \
             pearson err {r_err:.1e}, ci95 err {:.1e} (<1e-10); {:.0}s",
            ci_err.max(ci3_err),
            start.elapsed().as_secs_f64()
        ),
    )
}

#[test]
fn primary_criteria() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("explanation soundness", explanation_soundness),
        ("model-level oracles", model_oracles),
        ("strategy recovery", strategy_recovery),
        ("proxy comparison", proxy_comparison),
        ("parameter trends", parameter_trends),
        ("hypothesis-study trends", hypothesis_trends),
        ("condition ordering", condition_ordering),
        ("statistics oracles", statistics_oracles),
    ];
    let only = std::env::var("COAX_ACCEPTANCE_ONLY").ok();
    let mut failed = Vec::new();
    for (name, run) in criteria {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!(
            "[{}] {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
        if !result.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
