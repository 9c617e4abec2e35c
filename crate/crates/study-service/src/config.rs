//! Service configuration: a TOML file with environment overrides.

use std::path::{Path, PathBuf};

use coax::data::DatasetName;
use coax::experiment::XaiType;
use coax::xai::Explainer;
use serde::{Deserialize, Serialize};

use crate::screening::{default_items, ScreeningItem};
use crate::StudyError;

/// Environment variables read by [`StudyConfig::apply_env`].
pub const ENV_PORT: &str = "COAX_STUDY_PORT";
pub const ENV_DATA_DIR: &str = "COAX_STUDY_DATA_DIR";
pub const ENV_SEED: &str = "COAX_STUDY_SEED";
pub const ENV_WEIGHTS: &str = "COAX_STUDY_WEIGHTS";
pub const ENV_ADMIN_TOKEN: &str = "COAX_STUDY_ADMIN_TOKEN";
pub const ENV_STATIC_DIR: &str = "COAX_STUDY_STATIC_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub bind: String,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Directory of UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
    pub seed: u64,
    /// Bearer token for the export endpoint; export is disabled when unset.
    pub admin_token: Option<String>,
    pub datasets: Vec<DatasetEntry>,
    pub explainer: Explainer,
    /// Sessions each dataset can host before creation fails.
    pub splits_per_dataset: usize,
    /// Write a snapshot after this many logged events.
    pub snapshot_every: usize,
    pub assignment: AssignmentConfig,
    pub screening: ScreeningConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("study-data"),
            static_dir: None,
            seed: 0,
            admin_token: None,
            datasets: [
                DatasetName::WineQuality,
                DatasetName::AdultIncome,
                DatasetName::ForestCover,
            ]
            .into_iter()
            .map(DatasetEntry::new)
            .collect(),
            explainer: Explainer::Shapley,
            splits_per_dataset: 200,
            snapshot_every: 100,
            assignment: AssignmentConfig::default(),
            screening: ScreeningConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub dataset: DatasetName,
    #[serde(default)]
    pub n_attributes: Option<usize>,
    /// Seed of the data source and AI model.
    #[serde(default = "default_domain_seed")]
    pub seed: u64,
}

fn default_domain_seed() -> u64 {
    1
}

impl DatasetEntry {
    pub fn new(dataset: DatasetName) -> Self {
        Self {
            dataset,
            n_attributes: None,
            seed: default_domain_seed(),
        }
    }
}

/// Relative XAI-type weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XaiWeights {
    pub none: f64,
    pub importance: f64,
    pub attribution: f64,
}

impl XaiWeights {
    /// 1 : 4 : 2 for None : Importance : Attribution.
    pub fn preset() -> Self {
        let w = coax::experiment::ASSIGNMENT_PRESET;
        Self {
            none: w[0].1,
            importance: w[1].1,
            attribution: w[2].1,
        }
    }

    pub fn get(&self, t: XaiType) -> f64 {
        match t {
            XaiType::None => self.none,
            XaiType::Importance => self.importance,
            XaiType::Attribution => self.attribution,
        }
    }

    /// Parses `none:importance:attribution`, e.g. `1:4:2`.
    pub fn parse(s: &str) -> Result<Self, StudyError> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| StudyError::Config(format!("weights `{s}`: {e}")))?;
        let [none, importance, attribution] = parts[..] else {
            return Err(StudyError::Config(format!("weights `{s}` need three values")));
        };
        let w = Self {
            none,
            importance,
            attribution,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let all = [self.none, self.importance, self.attribution];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) || all.iter().sum::<f64>() <= 0.0 {
            return Err(StudyError::Config(
                "weights must be non-negative with a positive sum".into(),
            ));
        }
        Ok(())
    }
}

impl Default for XaiWeights {
    fn default() -> Self {
        Self::preset()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssignmentConfig {
    pub weights: XaiWeights,
    /// Assign every session this XAI type.
    pub fixed_xai_type: Option<XaiType>,
    /// Assign every session this dataset (by label, e.g. `wine-quality`).
    pub fixed_dataset: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeningConfig {
    pub enabled: bool,
    /// Correct answers needed to pass; all items when unset.
    pub min_correct: Option<usize>,
    pub items: Vec<ScreeningItem>,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            min_correct: None,
            items: default_items(),
        }
    }
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self, StudyError> {
        let cfg: Self = toml::from_str(text).map_err(|e| StudyError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, StudyError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Applies overrides from `lookup` (normally `std::env::var`).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), StudyError> {
        if let Some(v) = lookup(ENV_PORT) {
            self.port = v
                .parse()
                .map_err(|_| StudyError::Config(format!("{ENV_PORT}=`{v}` is not a port")))?;
        }
        if let Some(v) = lookup(ENV_DATA_DIR) {
            self.data_dir = v.into();
        }
        if let Some(v) = lookup(ENV_SEED) {
            self.seed = v
                .parse()
                .map_err(|_| StudyError::Config(format!("{ENV_SEED}=`{v}` is not a seed")))?;
        }
        if let Some(v) = lookup(ENV_WEIGHTS) {
            self.assignment.weights = XaiWeights::parse(&v)?;
        }
        if let Some(v) = lookup(ENV_ADMIN_TOKEN) {
            self.admin_token = Some(v).filter(|t| !t.is_empty());
        }
        if let Some(v) = lookup(ENV_STATIC_DIR) {
            self.static_dir = Some(v.into());
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        self.assignment.weights.validate()?;
        if self.datasets.is_empty() {
            return Err(StudyError::Config("at least one dataset is required".into()));
        }
        if self.snapshot_every == 0 {
            return Err(StudyError::Config("snapshot_every must be positive".into()));
        }
        if let Some(n) = self.screening.min_correct {
            if n > self.screening.items.len() {
                return Err(StudyError::Config(format!(
                    "min_correct {n} exceeds the {} screening items",
                    self.screening.items.len()
                )));
            }
        }
        for item in &self.screening.items {
            item.validate()?;
        }
        Ok(())
    }
}
