//! Summary statistics for participant-level correctness.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};

use crate::{Error, Result};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance (denominator `n - 1`).
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Quantile `p` of Student's t with `df` degrees of freedom.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    if df == 1.0 {
        return (std::f64::consts::PI * (p - 0.5)).tan();
    }
    if df == 2.0 {
        return (2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt();
    }
    let t = StudentsT::new(0.0, 1.0, df).expect("positive df");
    let mut x = t.inverse_cdf(p);
    // Newton polish on the CDF.
    for _ in 0..4 {
        let step = (t.cdf(x) - p) / t.pdf(x);
        x -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    x
}

/// Mean and half-width of the t-based 95% confidence interval.
pub fn ci95(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Contract(format!(
            "ci95 needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let m = mean(values);
    let sd = variance(values).max(0.0).sqrt();
    Ok((m, t_quantile(0.975, n - 1.0) * sd / n.sqrt()))
}

pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Contract(
            "pearson_r needs two equal-length series of at least 2".into(),
        ));
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Undefined("correlation with a constant series".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Average ranks, ties sharing the mean of their positions (1-based).
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = r;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    pearson_r(&ranks(a), &ranks(b))
}

/// Least-squares slope of `y` on `x` and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Contract("slope needs at least 3 paired points".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Undefined("constant predictor".into()));
    }
    let slope = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let se = (rss / (x.len() as f64 - 2.0) / sxx).sqrt();
    Ok((slope, se))
}

pub const Q_DRAWS: usize = 1_000_000;
const Q_SEED: u64 = 0x7u64 << 40 | 0x5eed;

type QuantileCache = Mutex<HashMap<(usize, usize, u64), f64>>;

/// Upper `1 - alpha` quantile of the studentized range for `k` means and
/// `df` error degrees of freedom, by seeded Monte Carlo.
pub fn studentized_range_quantile(k: usize, df: usize, alpha: f64) -> f64 {
    static CACHE: OnceLock<QuantileCache> = OnceLock::new();
    let key = (k, df, alpha.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(q) = cache.lock().expect("cache lock").get(&key) {
        return *q;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(Q_SEED ^ (k as u64) << 20 ^ df as u64);
    let chi = ChiSquared::new(df as f64).expect("positive df");
    let mut draws: Vec<f64> = (0..Q_DRAWS)
        .map(|_| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for _ in 0..k {
                let z: f64 = StandardNormal.sample(&mut rng);
                lo = lo.min(z);
                hi = hi.max(z);
            }
            let s = (chi.sample(&mut rng) / df as f64).sqrt();
            (hi - lo) / s
        })
        .collect();
    let idx = (((1.0 - alpha) * Q_DRAWS as f64).ceil() as usize).min(Q_DRAWS) - 1;
    let (_, q, _) = draws.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    let q = *q;
    cache.lock().expect("cache lock").insert(key, q);
    q
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: usize,
    pub b: usize,
    pub diff: f64,
    pub q: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub means: Vec<f64>,
    pub q_critical: f64,
    pub mse: f64,
    pub df: usize,
    pub pairs: Vec<PairComparison>,
    /// Compact letter display, one string per group in input order.
    pub letters: Vec<String>,
}

impl TukeyResult {
    pub fn significant(&self, a: usize, b: usize) -> bool {
        self.pairs
            .iter()
            .any(|p| ((p.a == a && p.b == b) || (p.a == b && p.b == a)) && p.significant)
    }
}

/// Tukey HSD on `groups` with the Tukey-Kramer standard error for unequal sizes.
pub fn tukey_hsd(groups: &[Vec<f64>], alpha: f64) -> Result<TukeyResult> {
    if groups.len() < 2 || groups.iter().any(|g| g.len() < 2) {
        return Err(Error::Contract(
            "tukey_hsd needs at least 2 groups of at least 2".into(),
        ));
    }
    let k = groups.len();
    let n_total: usize = groups.iter().map(Vec::len).sum();
    let df = n_total - k;
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let sse: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let mse = sse / df as f64;
    let q_critical = studentized_range_quantile(k, df, alpha);
    let mut pairs = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let diff = means[a] - means[b];
            let (q, significant) = if mse > 0.0 {
                let se = (mse / 2.0 * (1.0 / groups[a].len() as f64 + 1.0 / groups[b].len() as f64)).sqrt();
                let q = diff.abs() / se;
                (q, q > q_critical)
            } else {
                // No within-group spread: groups differ exactly when their means do.
                let d = diff != 0.0;
                (if d { f64::INFINITY } else { 0.0 }, d)
            };
            pairs.push(PairComparison {
                a,
                b,
                diff,
                q,
                significant,
            });
        }
    }
    let sig = |a: usize, b: usize| {
        pairs
            .iter()
            .any(|p| p.significant && ((p.a, p.b) == (a.min(b), a.max(b))))
    };
    let letters = compact_letters(&means, sig);
    Ok(TukeyResult {
        means,
        q_critical,
        mse,
        df,
        pairs,
        letters,
    })
}

/// Letters over groups sorted by descending mean: each letter marks a maximal
/// run of groups with no significant difference inside it; "A" is the top run.
pub fn compact_letters(means: &[f64], significant: impl Fn(usize, usize) -> bool) -> Vec<String> {
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for start in 0..order.len() {
        let mut end = start;
        while end + 1 < order.len() && (start..=end).all(|i| !significant(order[i], order[end + 1])) {
            end += 1;
        }
        if runs.last().is_none_or(|&(_, e)| end > e) {
            runs.push((start, end));
        }
    }
    let mut letters = vec![String::new(); means.len()];
    for (li, (s, e)) in runs.into_iter().enumerate() {
        let letter = letter_name(li);
        for &g in &order[s..=e] {
            letters[g].push_str(&letter);
        }
    }
    letters
}

fn letter_name(i: usize) -> String {
    let base = (b'A' + (i % 26) as u8) as char;
    if i < 26 {
        base.to_string()
    } else {
        format!("{base}{}", i / 26)
    }
}
