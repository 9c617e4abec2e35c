//! Explanation generators. Every explainer attributes the label-2 output and
//! then orients the vector toward the model's predicted label, so positive
//! entries always mean "supports the prediction".

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Instance;
use crate::model::{check_dims, AiModel, Differentiable, OutputSpace};
use crate::{Error, Label, Result};

/// Largest feature count accepted by exact Shapley enumeration.
pub const MAX_EXACT_FEATURES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Shapley,
    Lime,
    IntegratedGradients,
    InputGradients,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub method: Method,
    pub target_label: Label,
    pub attribution: Vec<f64>,
    pub importance: Vec<f64>,
}

impl Explanation {
    /// Builds an explanation from label-2 oriented attributions.
    pub fn from_label2(method: Method, label2_attribution: Vec<f64>, target_label: Label) -> Self {
        let attribution: Vec<f64> = match target_label {
            Label::Two => label2_attribution,
            Label::One => label2_attribution.into_iter().map(|v| -v).collect(),
        };
        to_importance(Self {
            method,
            target_label,
            importance: Vec::new(),
            attribution,
        })
    }

    pub fn n_features(&self) -> usize {
        self.attribution.len()
    }

    /// Same explanation oriented toward `label`.
    pub fn oriented_toward(&self, label: Label) -> Self {
        if label == self.target_label {
            return self.clone();
        }
        to_importance(Self {
            method: self.method,
            target_label: label,
            attribution: self.attribution.iter().map(|v| -v).collect(),
            importance: Vec::new(),
        })
    }

    /// Attribution in favour of label 1.
    pub fn toward_label1(&self) -> Vec<f64> {
        self.oriented_toward(Label::One).attribution
    }

    /// Attribution rescaled so the longest bar has length 1.
    pub fn display_attribution(&self) -> Vec<f64> {
        scale_to_unit_max(&self.attribution)
    }

    pub fn display_importance(&self) -> Vec<f64> {
        scale_to_unit_max(&self.importance)
    }

    pub fn sum(&self) -> f64 {
        self.attribution.iter().sum()
    }
}

fn scale_to_unit_max(v: &[f64]) -> Vec<f64> {
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if max > 0.0 {
        v.iter().map(|x| x / max).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// `importance = max(attribution, 0)` elementwise; attribution is untouched.
pub fn to_importance(mut expl: Explanation) -> Explanation {
    expl.importance = expl.attribution.iter().map(|a| a.max(0.0)).collect();
    expl
}

/// Shapley values of `f` at `x` with absent features marginalized over
/// `background` (interventional value function).
pub fn shapley_values<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], background: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = x.len();
    if background.is_empty() {
        return Err(Error::Config("Shapley values need a non-empty background".into()));
    }
    if n > MAX_EXACT_FEATURES {
        return Err(Error::Config(format!(
            "exact Shapley enumeration supports at most {MAX_EXACT_FEATURES} features, got {n}"
        )));
    }
    for b in background {
        check_dims(n, b.len())?;
    }
    let n_masks = 1usize << n;
    let mut value = vec![0.0; n_masks];
    let mut z = vec![0.0; n];
    for (mask, v) in value.iter_mut().enumerate() {
        let mut acc = 0.0;
        for b in background {
            for r in 0..n {
                z[r] = if mask >> r & 1 == 1 { x[r] } else { b[r] };
            }
            acc += f(&z);
        }
        *v = acc / background.len() as f64;
    }
    // weight[s] = s! (n - s - 1)! / n!
    let mut weight = vec![0.0; n.max(1)];
    for (s, w) in weight.iter_mut().enumerate().take(n) {
        *w = 1.0 / (n as f64 * binomial(n - 1, s));
    }
    let mut phi = vec![0.0; n];
    for mask in 0..n_masks {
        let size = (mask as u64).count_ones() as usize;
        for (r, p) in phi.iter_mut().enumerate() {
            if mask >> r & 1 == 0 {
                *p += weight[size] * (value[mask | 1 << r] - value[mask]);
            }
        }
    }
    Ok(phi)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn predicted_label(f: &dyn Differentiable, x: &[f64]) -> Label {
    Label::from_proba_label2(f.proba(x))
}

pub fn shapley_exact(model: &AiModel, instance: &Instance, background: &[Instance]) -> Result<Explanation> {
    shapley_exact_in(model, instance, background, OutputSpace::Probability)
}

pub fn shapley_exact_in(
    model: &AiModel,
    instance: &Instance,
    background: &[Instance],
    space: OutputSpace,
) -> Result<Explanation> {
    let f = model.require_differentiable()?;
    check_dims(f.n_features(), instance.norm.len())?;
    let bg: Vec<Vec<f64>> = background.iter().map(|b| b.norm.clone()).collect();
    let phi = shapley_values(|z| f.output(z, space), &instance.norm, &bg)?;
    Ok(Explanation::from_label2(
        Method::Shapley,
        phi,
        predicted_label(f, &instance.norm),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Kernel width in units of background standard deviations; `None`
    /// means `0.75 * sqrt(n_features)`.
    pub kernel_width: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub space: OutputSpace,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            kernel_width: None,
            seed: 0,
            space: OutputSpace::Probability,
        }
    }
}

/// Per-feature mean and standard deviation of a background sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundStats {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl BackgroundStats {
    pub fn from_instances(background: &[Instance]) -> Result<Self> {
        let first = background
            .first()
            .ok_or_else(|| Error::Config("background must not be empty".into()))?;
        let n = first.norm.len();
        let m = background.len() as f64;
        let mut mean = vec![0.0; n];
        for b in background {
            check_dims(n, b.norm.len())?;
            for (acc, v) in mean.iter_mut().zip(&b.norm) {
                *acc += v / m;
            }
        }
        let sd = (0..n)
            .map(|r| {
                let var = background.iter().map(|b| (b.norm[r] - mean[r]).powi(2)).sum::<f64>() / m;
                var.sqrt().max(1e-3)
            })
            .collect();
        Ok(Self { mean, sd })
    }
}

struct LimeFit {
    /// Intercept followed by one coefficient per feature.
    coef: DVector<f64>,
    sample_mean: Vec<f64>,
}

fn lime_fit(model: &AiModel, instance: &Instance, stats: &BackgroundStats, config: &LimeConfig) -> Result<LimeFit> {
    let f = model.require_differentiable()?;
    let x = &instance.norm;
    let n = x.len();
    check_dims(f.n_features(), n)?;
    check_dims(n, stats.mean.len())?;
    if config.n_samples < 50 {
        return Err(Error::Config("LIME needs at least 50 samples".into()));
    }
    let width = config.kernel_width.unwrap_or(0.75 * (n as f64).sqrt());
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Config("LIME kernel width must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normals: Vec<Normal<f64>> = stats
        .mean
        .iter()
        .zip(&stats.sd)
        .map(|(&m, &s)| Normal::new(m, s).expect("positive sd"))
        .collect();

    let m = config.n_samples;
    let mut design = DMatrix::<f64>::zeros(m, n + 1);
    let mut target = DVector::<f64>::zeros(m);
    let mut weights = DVector::<f64>::zeros(m);
    let mut sample_mean = vec![0.0; n];
    let mut z = vec![0.0; n];
    for i in 0..m {
        for r in 0..n {
            z[r] = normals[r].sample(&mut rng).clamp(0.0, 1.0);
            sample_mean[r] += z[r] / m as f64;
        }
        let d2: f64 = (0..n).map(|r| ((z[r] - x[r]) / stats.sd[r]).powi(2)).sum();
        weights[i] = (-d2 / (width * width)).exp();
        design[(i, 0)] = 1.0;
        for r in 0..n {
            design[(i, r + 1)] = z[r];
        }
        target[i] = f.output(&z, config.space);
    }
    Ok(LimeFit {
        coef: weighted_ridge(&design, &target, &weights, 1e-6),
        sample_mean,
    })
}

/// Locally weighted linear surrogate fit on Gaussian perturbations drawn from
/// the background distribution and clipped to `[0, 1]`. Attribution is
/// `coefficient * (x - mean perturbation)`.
pub fn lime_local(
    model: &AiModel,
    instance: &Instance,
    stats: &BackgroundStats,
    config: &LimeConfig,
) -> Result<Explanation> {
    let fit = lime_fit(model, instance, stats, config)?;
    let x = &instance.norm;
    let label2: Vec<f64> = (0..x.len())
        .map(|r| fit.coef[r + 1] * (x[r] - fit.sample_mean[r]))
        .collect();
    let f = model.require_differentiable()?;
    Ok(Explanation::from_label2(Method::Lime, label2, predicted_label(f, x)))
}

/// Surrogate slopes (without intercept), for diagnostics.
pub fn lime_coefficients(
    model: &AiModel,
    instance: &Instance,
    stats: &BackgroundStats,
    config: &LimeConfig,
) -> Result<Vec<f64>> {
    let fit = lime_fit(model, instance, stats, config)?;
    Ok(fit.coef.iter().skip(1).copied().collect())
}

fn weighted_ridge(design: &DMatrix<f64>, target: &DVector<f64>, weights: &DVector<f64>, ridge: f64) -> DVector<f64> {
    let p = design.ncols();
    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    let mut xtwy = DVector::<f64>::zeros(p);
    for i in 0..design.nrows() {
        let w = weights[i];
        for a in 0..p {
            let xa = design[(i, a)] * w;
            xtwy[a] += xa * target[i];
            for b in 0..p {
                xtwx[(a, b)] += xa * design[(i, b)];
            }
        }
    }
    for a in 0..p {
        xtwx[(a, a)] += ridge;
    }
    match xtwx.clone().cholesky() {
        Some(ch) => ch.solve(&xtwy),
        None => {
            // Weights can underflow to zero everywhere; bump the ridge until solvable.
            let mut eps = ridge.max(1e-12);
            loop {
                eps *= 10.0;
                let mut m = xtwx.clone();
                for a in 0..p {
                    m[(a, a)] += eps;
                }
                if let Some(ch) = m.cholesky() {
                    return ch.solve(&xtwy);
                }
            }
        }
    }
}

/// Path-integrated gradients from `baseline` to the instance, midpoint rule.
pub fn integrated_gradients(
    model: &AiModel,
    instance: &Instance,
    baseline: &[f64],
    steps: usize,
) -> Result<Explanation> {
    integrated_gradients_in(model, instance, baseline, steps, OutputSpace::Probability)
}

pub fn integrated_gradients_in(
    model: &AiModel,
    instance: &Instance,
    baseline: &[f64],
    steps: usize,
    space: OutputSpace,
) -> Result<Explanation> {
    let f = model.require_differentiable()?;
    let x = &instance.norm;
    let n = x.len();
    check_dims(f.n_features(), n)?;
    check_dims(n, baseline.len())?;
    if steps < 16 {
        return Err(Error::Config("integrated gradients needs at least 16 steps".into()));
    }
    let mut avg = vec![0.0; n];
    let mut point = vec![0.0; n];
    for i in 0..steps {
        let t = (i as f64 + 0.5) / steps as f64;
        for r in 0..n {
            point[r] = baseline[r] + t * (x[r] - baseline[r]);
        }
        for (acc, g) in avg.iter_mut().zip(f.output_gradient(&point, space)) {
            *acc += g / steps as f64;
        }
    }
    let label2 = (0..n).map(|r| (x[r] - baseline[r]) * avg[r]).collect();
    Ok(Explanation::from_label2(
        Method::IntegratedGradients,
        label2,
        predicted_label(f, x),
    ))
}

/// Gradient times input at the instance.
pub fn input_gradients(model: &AiModel, instance: &Instance) -> Result<Explanation> {
    let f = model.require_differentiable()?;
    let x = &instance.norm;
    check_dims(f.n_features(), x.len())?;
    let g = f.output_gradient(x, OutputSpace::Probability);
    let label2 = x.iter().zip(&g).map(|(xi, gi)| xi * gi).collect();
    Ok(Explanation::from_label2(
        Method::InputGradients,
        label2,
        predicted_label(f, x),
    ))
}

/// Attribution imported alongside an external model's predictions; the stored
/// vector is read as label-2 oriented.
pub fn external_explanation(model: &AiModel, instance: &Instance) -> Result<Explanation> {
    let AiModel::External(ext) = model else {
        return Err(Error::Unsupported(
            "only external models carry imported attributions".into(),
        ));
    };
    let rec = ext.get(&instance.id)?;
    let attribution = rec
        .attribution
        .clone()
        .ok_or_else(|| Error::Unsupported(format!("record `{}` has no attribution", rec.instance_id)))?;
    Ok(Explanation::from_label2(
        Method::External,
        attribution,
        Label::from_proba_label2(rec.proba),
    ))
}

/// Explainer choice plus its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Explainer {
    Shapley,
    Lime(LimeConfig),
    IntegratedGradients { steps: usize },
    InputGradients,
    External,
}

impl Explainer {
    pub fn method(&self) -> Method {
        match self {
            Explainer::Shapley => Method::Shapley,
            Explainer::Lime(_) => Method::Lime,
            Explainer::IntegratedGradients { .. } => Method::IntegratedGradients,
            Explainer::InputGradients => Method::InputGradients,
            Explainer::External => Method::External,
        }
    }

    /// Explains `instance`; Shapley marginalizes over `background`, LIME samples
    /// from its statistics and integrated gradients starts from its mean.
    pub fn explain(&self, model: &AiModel, instance: &Instance, background: &[Instance]) -> Result<Explanation> {
        match self {
            Explainer::Shapley => shapley_exact(model, instance, background),
            Explainer::Lime(cfg) => {
                let stats = BackgroundStats::from_instances(background)?;
                // Per-instance stream so results do not depend on call order.
                let cfg = LimeConfig {
                    seed: cfg.seed ^ fxhash(&instance.id),
                    ..cfg.clone()
                };
                lime_local(model, instance, &stats, &cfg)
            }
            Explainer::IntegratedGradients { steps } => {
                let stats = BackgroundStats::from_instances(background)?;
                integrated_gradients(model, instance, &stats.mean, *steps)
            }
            Explainer::InputGradients => input_gradients(model, instance),
            Explainer::External => external_explanation(model, instance),
        }
    }
}

impl std::str::FromStr for Explainer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shap" | "shapley" => Ok(Explainer::Shapley),
            "lime" => Ok(Explainer::Lime(LimeConfig::default())),
            "ig" | "integrated-gradients" => Ok(Explainer::IntegratedGradients { steps: 64 }),
            "input-gradients" | "gradient-x-input" => Ok(Explainer::InputGradients),
            "external" => Ok(Explainer::External),
            other => Err(Error::Config(format!("unknown explainer `{other}`"))),
        }
    }
}

fn fxhash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Export row for one explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub instance_id: String,
    pub method: Method,
    pub target_label: Label,
    pub attribution: Vec<f64>,
    pub importance: Vec<f64>,
}

impl ExplanationRecord {
    pub fn new(instance_id: &str, e: &Explanation) -> Self {
        Self {
            instance_id: instance_id.to_string(),
            method: e.method,
            target_label: e.target_label,
            attribution: e.attribution.clone(),
            importance: e.importance.clone(),
        }
    }
}
