//! The AI models whose predictions participants forward-simulate.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Instance;
use crate::{jsonl, Error, Label, Result};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Output scale an explainer attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputSpace {
    /// Probability of label 2.
    #[default]
    Probability,
    /// Log-odds of label 2 (the pre-sigmoid score).
    LogOdds,
}

/// A model that can be evaluated and differentiated at arbitrary normalized inputs.
pub trait Differentiable: Sync {
    fn n_features(&self) -> usize;

    /// Log-odds of label 2.
    fn logit(&self, x: &[f64]) -> f64;

    /// Gradient of the log-odds with respect to `x`.
    fn logit_gradient(&self, x: &[f64]) -> Vec<f64>;

    fn proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    fn output(&self, x: &[f64], space: OutputSpace) -> f64 {
        match space {
            OutputSpace::Probability => self.proba(x),
            OutputSpace::LogOdds => self.logit(x),
        }
    }

    fn output_gradient(&self, x: &[f64], space: OutputSpace) -> Vec<f64> {
        let g = self.logit_gradient(x);
        match space {
            OutputSpace::LogOdds => g,
            OutputSpace::Probability => {
                let p = self.proba(x);
                let scale = p * (1.0 - p);
                g.into_iter().map(|v| v * scale).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }
}

impl Differentiable for LinearModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    fn logit_gradient(&self, _x: &[f64]) -> Vec<f64> {
        self.weights.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    /// `out x in`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
    n_in: usize,
}

impl Dense {
    fn n_out(&self) -> usize {
        self.bias.len()
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (o, b) in self.bias.iter().enumerate() {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            out.push(b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

/// Full-batch update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    #[default]
    GradientDescent,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![50, 50],
            learning_rate: 1e-3,
            epochs: 2000,
            seed: 0,
            optimizer: Optimizer::GradientDescent,
        }
    }
}

/// Feed-forward classifier: ReLU hidden layers, one sigmoid output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    pub config: TrainConfig,
    /// Full-batch cross-entropy after each epoch.
    pub loss_history: Vec<f64>,
}

impl Mlp {
    fn init(n_in: usize, config: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut layers = Vec::new();
        let mut fan_in = n_in;
        for &width in config.hidden.iter().chain(std::iter::once(&1)) {
            let std = (2.0 / fan_in as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            layers.push(Dense {
                weights: (0..width * fan_in).map(|_| normal.sample(&mut rng)).collect(),
                bias: vec![0.0; width],
                n_in: fan_in,
            });
            fan_in = width;
        }
        Self {
            layers,
            config: config.clone(),
            loss_history: Vec::new(),
        }
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }

    /// Pre-activations of every layer for one input.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = x.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.n_out());
            layer.forward(&act, &mut z);
            if li + 1 < self.layers.len() {
                act = z.iter().map(|v| v.max(0.0)).collect();
            }
            pre.push(z);
        }
        pre
    }

    /// Backpropagates `d_out` (derivative w.r.t. the output logit) and returns
    /// the gradient w.r.t. the input, accumulating parameter gradients if given.
    fn backward(&self, x: &[f64], pre: &[Vec<f64>], d_out: f64, mut grads: Option<&mut [Dense]>) -> Vec<f64> {
        let mut delta = vec![d_out];
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input: Vec<f64> = if li == 0 {
                x.to_vec()
            } else {
                pre[li - 1].iter().map(|v| v.max(0.0)).collect()
            };
            if let Some(g) = grads.as_deref_mut() {
                let gl = &mut g[li];
                for (o, d) in delta.iter().enumerate() {
                    gl.bias[o] += d;
                    let row = &mut gl.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    for (w, v) in row.iter_mut().zip(&input) {
                        *w += d * v;
                    }
                }
            }
            let mut back = vec![0.0; layer.n_in];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                for (b, w) in back.iter_mut().zip(row) {
                    *b += d * w;
                }
            }
            if li > 0 {
                for (b, z) in back.iter_mut().zip(&pre[li - 1]) {
                    if *z <= 0.0 {
                        *b = 0.0;
                    }
                }
            }
            delta = back;
        }
        delta
    }

    fn zeros_like(&self) -> Vec<Dense> {
        self.layers
            .iter()
            .map(|l| Dense {
                weights: vec![0.0; l.weights.len()],
                bias: vec![0.0; l.bias.len()],
                n_in: l.n_in,
            })
            .collect()
    }

    fn batch_loss(&self, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| {
                let z = self.logit(x);
                // log(1 + e^z) - y z, stable form
                z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
            })
            .sum::<f64>()
            / xs.len() as f64
    }

    /// Full-batch training on binary cross-entropy. Targets: 1.0 for label 2.
    pub fn fit(xs: &[Vec<f64>], labels: &[Label], config: &TrainConfig) -> Result<Self> {
        if xs.is_empty() || xs.len() != labels.len() {
            return Err(Error::Training("need one label per training row".into()));
        }
        if !(config.learning_rate > 0.0) || config.epochs == 0 {
            return Err(Error::Config("learning rate and epochs must be positive".into()));
        }
        if !labels.contains(&Label::One) || !labels.contains(&Label::Two) {
            return Err(Error::Training("training data contains a single class".into()));
        }
        let n_in = xs[0].len();
        if let Some(bad) = xs.iter().find(|x| x.len() != n_in) {
            return Err(Error::Shape {
                expected: n_in,
                actual: bad.len(),
            });
        }
        let ys: Vec<f64> = labels
            .iter()
            .map(|l| if *l == Label::Two { 1.0 } else { 0.0 })
            .collect();
        let mut model = Self::init(n_in, config);
        let (b1, b2, eps) = (0.9_f64, 0.999_f64, 1e-8);
        let mut m = model.zeros_like();
        let mut v = model.zeros_like();
        let n = xs.len() as f64;
        for epoch in 1..=config.epochs {
            let mut grads = model.zeros_like();
            for (x, &y) in xs.iter().zip(&ys) {
                let pre = model.forward_all(x);
                let p = sigmoid(pre.last().expect("output layer")[0]);
                model.backward(x, &pre, (p - y) / n, Some(&mut grads));
            }
            if config.optimizer == Optimizer::GradientDescent {
                for (layer, g) in model.layers.iter_mut().zip(&grads) {
                    let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
                    for (p, g) in params.zip(g.weights.iter().chain(g.bias.iter())) {
                        *p -= config.learning_rate * g;
                    }
                }
                let loss = model.batch_loss(xs, &ys);
                model.loss_history.push(loss);
                continue;
            }
            let c1 = 1.0 - b1.powi(epoch as i32);
            let c2 = 1.0 - b2.powi(epoch as i32);
            for (li, (layer, (ml, vl))) in model.layers.iter_mut().zip(m.iter_mut().zip(v.iter_mut())).enumerate() {
                let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
                let g = grads[li].weights.iter().chain(grads[li].bias.iter());
                let mm = ml.weights.iter_mut().chain(ml.bias.iter_mut());
                let vv = vl.weights.iter_mut().chain(vl.bias.iter_mut());
                for (((p, g), mi), vi) in params.zip(g).zip(mm).zip(vv) {
                    *mi = b1 * *mi + (1.0 - b1) * g;
                    *vi = b2 * *vi + (1.0 - b2) * g * g;
                    *p -= config.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                }
            }
            let loss = model.batch_loss(xs, &ys);
            model.loss_history.push(loss);
        }
        Ok(model)
    }
}

impl Differentiable for Mlp {
    fn n_features(&self) -> usize {
        self.layers[0].n_in
    }

    fn logit(&self, x: &[f64]) -> f64 {
        let mut act = x.to_vec();
        let mut z = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            layer.forward(&act, &mut z);
            if li + 1 < self.layers.len() {
                act.clear();
                act.extend(z.iter().map(|v| v.max(0.0)));
            }
        }
        z[0]
    }

    fn logit_gradient(&self, x: &[f64]) -> Vec<f64> {
        let pre = self.forward_all(x);
        self.backward(x, &pre, 1.0, None)
    }
}

/// Prediction and optional attribution computed outside this crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalRecord {
    pub instance_id: String,
    pub proba: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribution: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExternalModel {
    records: HashMap<String, ExternalRecord>,
    order: Vec<String>,
}

impl ExternalModel {
    pub fn from_records(records: Vec<ExternalRecord>) -> Result<Self> {
        let mut model = Self::default();
        for (i, r) in records.into_iter().enumerate() {
            if !(r.proba > 0.0 && r.proba < 1.0) {
                return Err(Error::Validation(format!(
                    "record {} (`{}`): probability {} outside (0, 1)",
                    i + 1,
                    r.instance_id,
                    r.proba
                )));
            }
            model.order.push(r.instance_id.clone());
            model.records.insert(r.instance_id.clone(), r);
        }
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&ExternalRecord> {
        self.records.get(id).ok_or_else(|| Error::Lookup(id.to_string()))
    }

    pub fn records(&self) -> impl Iterator<Item = &ExternalRecord> {
        self.order.iter().map(move |id| &self.records[id])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AiModel {
    Mlp(Mlp),
    Linear(LinearModel),
    External(ExternalModel),
}

/// A model's answer for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionBundle {
    pub instance_id: String,
    pub proba_label2: f64,
    pub label: Label,
}

impl AiModel {
    pub fn differentiable(&self) -> Option<&dyn Differentiable> {
        match self {
            AiModel::Mlp(m) => Some(m),
            AiModel::Linear(m) => Some(m),
            AiModel::External(_) => None,
        }
    }

    pub fn require_differentiable(&self) -> Result<&dyn Differentiable> {
        self.differentiable()
            .ok_or_else(|| Error::Unsupported("external models cannot be evaluated at arbitrary inputs".into()))
    }

    /// Probability of label 2.
    pub fn predict_proba(&self, instance: &Instance) -> Result<f64> {
        match self {
            AiModel::External(m) => Ok(m.get(&instance.id)?.proba),
            other => {
                let f = other.require_differentiable()?;
                check_dims(f.n_features(), instance.norm.len())?;
                Ok(f.proba(&instance.norm))
            }
        }
    }

    pub fn predict(&self, instance: &Instance) -> Result<PredictionBundle> {
        let p = self.predict_proba(instance)?;
        Ok(PredictionBundle {
            instance_id: instance.id.clone(),
            proba_label2: p,
            label: Label::from_proba_label2(p),
        })
    }

    /// Gradient of the label-2 probability with respect to the normalized inputs.
    pub fn gradient(&self, instance: &Instance) -> Result<Vec<f64>> {
        let f = self.require_differentiable()?;
        check_dims(f.n_features(), instance.norm.len())?;
        Ok(f.output_gradient(&instance.norm, OutputSpace::Probability))
    }
}

pub(crate) fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape { expected, actual })
    }
}

pub fn train_mlp(train: &[Instance], config: &TrainConfig) -> Result<AiModel> {
    let xs: Vec<Vec<f64>> = train.iter().map(|i| i.norm.clone()).collect();
    let labels = train
        .iter()
        .map(|i| {
            i.label
                .ok_or_else(|| Error::Training(format!("instance `{}` has no label", i.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AiModel::Mlp(Mlp::fit(&xs, &labels, config)?))
}

pub fn read_external<R: Read>(input: R) -> Result<AiModel> {
    let records: Vec<ExternalRecord> = jsonl::read_records(input)?;
    Ok(AiModel::External(ExternalModel::from_records(records)?))
}

pub fn import_external(path: impl AsRef<Path>) -> Result<AiModel> {
    read_external(std::fs::File::open(path)?)
}

pub fn export_external(model: &ExternalModel) -> Result<String> {
    jsonl::to_string(&model.records().cloned().collect::<Vec<_>>())
}
