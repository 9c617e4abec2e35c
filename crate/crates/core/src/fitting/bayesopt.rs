//! Gaussian-process Bayesian optimisation over the unit cube.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::erf::erf;

/// A search coordinate in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dim {
    Real,
    /// Snapped to `levels` evenly spaced values.
    Integer {
        levels: usize,
    },
}

impl Dim {
    pub fn snap(self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Dim::Real => u,
            Dim::Integer { levels } if levels <= 1 => 0.0,
            Dim::Integer { levels } => {
                let steps = (levels - 1) as f64;
                (u * steps).round() / steps
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoOutcome {
    pub best: Evaluation,
    pub history: Vec<Evaluation>,
    pub n_initial: usize,
    /// The surrogate failed and the rest of the budget was spent on random points.
    pub fallback: bool,
}

const CANDIDATES: usize = 256;
const LOCAL_CANDIDATES: usize = 64;
const LENGTH_SCALES: [f64; 6] = [0.08, 0.15, 0.25, 0.4, 0.7, 1.2];
const NOISE: f64 = 1e-6;
const XI: f64 = 0.01;

/// Latin hypercube sample of `n` points, snapped per dimension.
pub fn latin_hypercube(dims: &[Dim], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dims.len()]; n];
    for (j, dim) in dims.iter().enumerate() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (p, s) in points.iter_mut().zip(strata) {
            p[j] = dim.snap((s as f64 + rng.random::<f64>()) / n as f64);
        }
    }
    points
}

/// Minimises `f` with `budget` evaluations: a Latin hypercube of
/// `ceil(budget / 3)` points, then expected-improvement steps.
pub fn minimize<F: FnMut(&[f64]) -> f64>(dims: &[Dim], budget: usize, seed: u64, mut f: F) -> BoOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_initial = budget.div_ceil(3).min(budget).max(1);
    let mut history: Vec<Evaluation> = latin_hypercube(dims, n_initial, &mut rng)
        .into_iter()
        .map(|point| {
            let value = f(&point);
            Evaluation { point, value }
        })
        .collect();
    let mut fallback = false;
    while history.len() < budget {
        let next = if fallback {
            None
        } else {
            let proposal = Surrogate::fit(&history).map(|gp| propose(&gp, dims, &history, &mut rng));
            if proposal.is_none() {
                fallback = true;
            }
            proposal
        };
        let point = next.unwrap_or_else(|| random_point(dims, &mut rng));
        let value = f(&point);
        history.push(Evaluation { point, value });
    }
    let best = history
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .cloned()
        .expect("at least one evaluation");
    BoOutcome {
        best,
        history,
        n_initial,
        fallback,
    }
}

fn random_point(dims: &[Dim], rng: &mut ChaCha8Rng) -> Vec<f64> {
    dims.iter().map(|d| d.snap(rng.random())).collect()
}

fn propose(gp: &Surrogate, dims: &[Dim], history: &[Evaluation], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let incumbent = history
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("non-empty history");
    let jitter = Normal::new(0.0, 0.1).expect("valid normal");
    let mut candidates: Vec<Vec<f64>> = (0..CANDIDATES)
        .map(|_| (0..dims.len()).map(|_| rng.random()).collect())
        .collect();
    for _ in 0..LOCAL_CANDIDATES {
        candidates.push(
            incumbent
                .point
                .iter()
                .map(|u| (u + jitter.sample(rng)).clamp(0.0, 1.0))
                .collect(),
        );
    }
    let best_y = gp.standardize(incumbent.value);
    let mut scored: Vec<(f64, Vec<f64>)> = candidates
        .into_iter()
        .map(|c| (gp.expected_improvement(&c, best_y), c))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (_, c) in scored {
        let snapped: Vec<f64> = c.iter().zip(dims).map(|(u, d)| d.snap(*u)).collect();
        if !history.iter().any(|e| same_point(&e.point, &snapped)) {
            return snapped;
        }
    }
    random_point(dims, rng)
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
}

/// Zero-mean GP with a squared-exponential kernel on standardized targets.
struct Surrogate {
    points: Vec<Vec<f64>>,
    length_scale: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_sd: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

impl Surrogate {
    fn fit(history: &[Evaluation]) -> Option<Self> {
        let n = history.len();
        let ys: Vec<f64> = history.iter().map(|e| e.value).collect();
        if ys.iter().any(|y| !y.is_finite()) {
            return None;
        }
        let y_mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        let y = DVector::from_iterator(n, ys.iter().map(|v| (v - y_mean) / y_sd));
        let points: Vec<Vec<f64>> = history.iter().map(|e| e.point.clone()).collect();
        let mut best: Option<(f64, Self)> = None;
        for &ls in &LENGTH_SCALES {
            let k = DMatrix::from_fn(n, n, |i, j| {
                (-sq_dist(&points[i], &points[j]) / (2.0 * ls * ls)).exp() + if i == j { NOISE } else { 0.0 }
            });
            let Some(chol) = cholesky_with_jitter(k) else { continue };
            let alpha = chol.solve(&y);
            let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
            let lml = -0.5 * y.dot(&alpha) - log_det;
            if !lml.is_finite() {
                continue;
            }
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((
                    lml,
                    Self {
                        points: points.clone(),
                        length_scale: ls,
                        chol,
                        alpha,
                        y_mean,
                        y_sd,
                    },
                ));
            }
        }
        best.map(|(_, s)| s)
    }

    fn standardize(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_sd
    }

    fn predict(&self, x: &[f64]) -> (f64, f64) {
        let ls2 = 2.0 * self.length_scale * self.length_scale;
        let kx = DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|p| (-sq_dist(p, x) / ls2).exp()),
        );
        let mean = kx.dot(&self.alpha);
        let v = self.chol.solve(&kx);
        let var = (1.0 + NOISE - kx.dot(&v)).max(1e-12);
        (mean, var.sqrt())
    }

    fn expected_improvement(&self, x: &[f64], best: f64) -> f64 {
        let (mu, sigma) = self.predict(x);
        let imp = best - mu - XI;
        let z = imp / sigma;
        let cdf = 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        imp * cdf + sigma * pdf
    }
}

fn cholesky_with_jitter(k: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let mut jitter = 0.0;
    for _ in 0..6 {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            return Some(c);
        }
        jitter = if jitter == 0.0 { 1e-8 } else { jitter * 100.0 };
    }
    None
}
