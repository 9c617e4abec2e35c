//! Study domains: a dataset, the AI model trained on it, and explained instances.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::protocol::{SessionMaterials, TrialItem};
use crate::data::{make_splits_with, synthetic, DatasetName, DatasetSpec, Instance, SplitSizes};
use crate::model::{train_mlp, AiModel, TrainConfig};
use crate::xai::{Explainer, Method};
use crate::{Label, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub dataset: DatasetName,
    /// Attribute count for the synthetic dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_attributes: Option<usize>,
    /// Rows used to train the AI model.
    pub model_rows: usize,
    /// Rows the study instances are drawn from.
    pub pool_rows: usize,
    /// Rows forming the explanation background.
    pub background_rows: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl DomainConfig {
    pub fn new(dataset: DatasetName, seed: u64) -> Self {
        Self {
            dataset,
            n_attributes: None,
            model_rows: 300,
            pool_rows: 300,
            background_rows: 24,
            train: TrainConfig {
                epochs: 1000,
                learning_rate: 5e-2,
                seed,
                ..TrainConfig::default()
            },
            seed,
        }
    }

    pub fn synthetic(n_attributes: usize, seed: u64) -> Self {
        Self {
            n_attributes: Some(n_attributes),
            ..Self::new(DatasetName::Synthetic, seed)
        }
    }

    pub fn spec(&self) -> DatasetSpec {
        match (self.dataset, self.n_attributes) {
            (DatasetName::Synthetic, Some(n)) => DatasetSpec::synthetic(n),
            (d, _) => d.spec(),
        }
    }

    pub fn label(&self) -> String {
        match (self.dataset, self.n_attributes) {
            (DatasetName::Synthetic, Some(n)) => format!("synthetic-{n}"),
            (d, _) => serde_json::to_value(d)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
        }
    }
}

/// A trained AI model with its study pool.
#[derive(Debug, Clone)]
pub struct Domain {
    pub name: String,
    pub spec: DatasetSpec,
    pub model: AiModel,
    /// Study instances; `label` holds the AI's label.
    pub pool: Vec<Instance>,
    pub background: Vec<Instance>,
    /// AI agreement with ground truth on the pool.
    pub accuracy: f64,
}

impl Domain {
    /// Generates data from the seeded synthetic source and trains the MLP.
    pub fn prepare(cfg: &DomainConfig) -> Result<Self> {
        let spec = cfg.spec();
        let total = cfg.model_rows + cfg.pool_rows + cfg.background_rows;
        let rows = synthetic::generate(&spec, total, cfg.seed);
        let (train, rest) = rows.split_at(cfg.model_rows);
        let (background, pool) = rest.split_at(cfg.background_rows);
        Self::from_parts(cfg.label(), spec, train, background.to_vec(), pool.to_vec(), &cfg.train)
    }

    /// Trains on `train` and relabels `pool` with the model's predictions.
    pub fn from_parts(
        name: String,
        spec: DatasetSpec,
        train: &[Instance],
        background: Vec<Instance>,
        pool: Vec<Instance>,
        train_cfg: &TrainConfig,
    ) -> Result<Self> {
        let model = train_mlp(train, train_cfg)?;
        Self::with_model(name, spec, model, background, pool)
    }

    pub fn with_model(
        name: String,
        spec: DatasetSpec,
        model: AiModel,
        background: Vec<Instance>,
        mut pool: Vec<Instance>,
    ) -> Result<Self> {
        let mut agree = 0usize;
        let mut labelled = 0usize;
        for inst in pool.iter_mut() {
            let ai = model.predict(inst)?.label;
            if let Some(truth) = inst.label {
                labelled += 1;
                agree += (truth == ai) as usize;
            }
            inst.label = Some(ai);
        }
        Ok(Self {
            name,
            spec,
            model,
            pool,
            background,
            accuracy: if labelled > 0 {
                agree as f64 / labelled as f64
            } else {
                f64::NAN
            },
        })
    }

    /// Explains every pool instance once.
    pub fn explain(&self, explainer: &Explainer) -> Result<ExplainedPool> {
        let items = self
            .pool
            .par_iter()
            .map(|inst| {
                let e = explainer.explain(&self.model, inst, &self.background)?;
                Ok(TrialItem {
                    instance_id: inst.id.clone(),
                    features: inst.norm.clone(),
                    ai_label: inst.label.unwrap_or(Label::One),
                    explanation: Some(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExplainedPool {
            dataset: self.name.clone(),
            method: explainer.method(),
            instances: self.pool.clone(),
            items: items.into_iter().map(|i| (i.instance_id.clone(), i)).collect(),
        })
    }
}

/// Pool instances with their explanations, indexed by id.
#[derive(Debug, Clone)]
pub struct ExplainedPool {
    pub dataset: String,
    pub method: Method,
    instances: Vec<Instance>,
    items: HashMap<String, TrialItem>,
}

impl ExplainedPool {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn item(&self, id: &str) -> Option<&TrialItem> {
        self.items.get(id)
    }

    /// One session's instances; test instances are balanced on the AI label.
    pub fn materials(&self, sizes: SplitSizes, seed: u64) -> Result<SessionMaterials> {
        let split = make_splits_with(&self.instances, 1, sizes, seed)?
            .pop()
            .expect("one split requested");
        let pick = |v: &[Instance]| v.iter().map(|i| self.items[&i.id].clone()).collect();
        Ok(SessionMaterials {
            dataset: self.dataset.clone(),
            explainer: Some(self.method),
            training: pick(&split.training),
            testing: pick(&split.testing),
        })
    }
}
