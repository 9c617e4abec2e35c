//! Session records shared by human and virtual participants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cognitive::{CognitiveParams, ExplanationCue};
use crate::xai::Method;
use crate::{Error, Label, Result};

/// Trials per test block and training trials in the standard protocol.
pub const PROTOCOL_TRAINING: usize = 10;
pub const PROTOCOL_BLOCK: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XaiType {
    None,
    Importance,
    Attribution,
}

impl XaiType {
    pub const ALL: [XaiType; 3] = [XaiType::None, XaiType::Importance, XaiType::Attribution];

    pub fn name(self) -> &'static str {
        match self {
            XaiType::None => "none",
            XaiType::Importance => "importance",
            XaiType::Attribution => "attribution",
        }
    }
}

impl fmt::Display for XaiType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for XaiType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(XaiType::None),
            "importance" => Ok(XaiType::Importance),
            "attribution" => Ok(XaiType::Attribution),
            other => Err(Error::Config(format!("unknown xai type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestCondition {
    WithXai,
    WithoutXai,
}

impl TestCondition {
    pub fn name(self) -> &'static str {
        match self {
            TestCondition::WithXai => "with-xai",
            TestCondition::WithoutXai => "without-xai",
        }
    }
}

impl fmt::Display for TestCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the five analysed (XAI type, test condition) cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub xai_type: XaiType,
    pub condition: TestCondition,
}

impl Cell {
    pub const ALL: [Cell; 5] = [
        Cell::new(XaiType::None, TestCondition::WithoutXai),
        Cell::new(XaiType::Importance, TestCondition::WithXai),
        Cell::new(XaiType::Importance, TestCondition::WithoutXai),
        Cell::new(XaiType::Attribution, TestCondition::WithXai),
        Cell::new(XaiType::Attribution, TestCondition::WithoutXai),
    ];

    pub const fn new(xai_type: XaiType, condition: TestCondition) -> Self {
        Self { xai_type, condition }
    }

    pub fn is_valid(self) -> bool {
        !(self.xai_type == XaiType::None && self.condition == TestCondition::WithXai)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.xai_type {
            XaiType::None => f.write_str("none"),
            t => write!(f, "{t}/{}", self.condition),
        }
    }
}

impl FromStr for Cell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (t, c) = s.split_once('/').unwrap_or((s, "without-xai"));
        let condition = match c {
            "with-xai" | "with" => TestCondition::WithXai,
            "without-xai" | "without" => TestCondition::WithoutXai,
            other => return Err(Error::Config(format!("unknown test condition `{other}`"))),
        };
        let cell = Cell::new(t.parse()?, condition);
        if !cell.is_valid() {
            return Err(Error::Config(format!("`{s}` is not a study condition")));
        }
        Ok(cell)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrial {
    pub trial_index: usize,
    pub instance_id: String,
    /// Normalized attribute values as displayed.
    pub features: Vec<f64>,
    /// Display-scaled explanation, absent for sessions without XAI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<ExplanationCue>,
    pub ai_label: Label,
    pub decision_without_xai: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_with_xai: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided_at_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestTrial {
    pub trial_index: usize,
    pub instance_id: String,
    pub block: usize,
    pub condition: TestCondition,
    pub features: Vec<f64>,
    /// Present exactly when the condition shows explanations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<ExplanationCue>,
    /// The AI's label, kept for scoring; never shown during testing.
    pub ai_label: Label,
    pub decision: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided_at_ms: Option<u64>,
}

impl TestTrial {
    pub fn correct(&self) -> bool {
        self.decision == self.ai_label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub participant_id: String,
    pub dataset: String,
    pub xai_type: XaiType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explainer: Option<Method>,
    pub training: Vec<TrainingTrial>,
    pub test: Vec<TestTrial>,
    /// Parameters of the virtual participant that produced the record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<CognitiveParams>,
}

impl SessionRecord {
    /// Checks the structural rules every record obeys, whatever the trial counts.
    pub fn validate(&self) -> Result<()> {
        let n = self
            .training
            .first()
            .map(|t| t.features.len())
            .unwrap_or_else(|| self.test.first().map(|t| t.features.len()).unwrap_or(0));
        let mut expected_index = 0;
        for t in &self.training {
            if t.trial_index != expected_index {
                return Err(invalid(format!("training trial {} out of order", t.trial_index)));
            }
            expected_index += 1;
            check_width(&t.features, n, t.trial_index)?;
            self.check_explanation(t.explanation.as_ref(), self.xai_type != XaiType::None, n, t.trial_index)?;
            if t.decision_with_xai.is_some() != (self.xai_type != XaiType::None) {
                return Err(invalid(format!(
                    "training trial {} must {}record a decision with XAI",
                    t.trial_index,
                    if self.xai_type == XaiType::None { "not " } else { "" }
                )));
            }
        }
        for t in &self.test {
            if t.trial_index < expected_index {
                return Err(invalid(format!("test trial {} out of order", t.trial_index)));
            }
            expected_index = t.trial_index + 1;
            check_width(&t.features, n, t.trial_index)?;
            if self.xai_type == XaiType::None && t.condition == TestCondition::WithXai {
                return Err(invalid("sessions without XAI cannot have a with-XAI block".into()));
            }
            self.check_explanation(
                t.explanation.as_ref(),
                t.condition == TestCondition::WithXai,
                n,
                t.trial_index,
            )?;
        }
        for w in self.test.windows(2) {
            if w[1].block < w[0].block {
                return Err(invalid("test blocks must be contiguous".into()));
            }
            if w[1].block == w[0].block && w[1].condition != w[0].condition {
                return Err(invalid(format!("block {} mixes test conditions", w[0].block)));
            }
        }
        Ok(())
    }

    /// Additionally checks the standard protocol: 10 training trials and two
    /// 18-trial test blocks, one per condition (both without XAI when none is shown).
    pub fn validate_protocol(&self) -> Result<()> {
        self.validate()?;
        if self.training.len() != PROTOCOL_TRAINING {
            return Err(invalid(format!(
                "expected {PROTOCOL_TRAINING} training trials, got {}",
                self.training.len()
            )));
        }
        let blocks = self.blocks();
        if blocks.len() != 2 || self.test.len() != 2 * PROTOCOL_BLOCK {
            return Err(invalid(format!("expected two test blocks of {PROTOCOL_BLOCK} trials")));
        }
        if self.block_trials(blocks[0].0).count() != PROTOCOL_BLOCK {
            return Err(invalid("unequal test blocks".into()));
        }
        if self.xai_type != XaiType::None && blocks[0].1 == blocks[1].1 {
            return Err(invalid("sessions with XAI test once with and once without it".into()));
        }
        Ok(())
    }

    fn check_explanation(&self, e: Option<&ExplanationCue>, required: bool, n: usize, index: usize) -> Result<()> {
        match (e, required) {
            (None, false) => Ok(()),
            (Some(_), false) => Err(invalid(format!("trial {index} shows an explanation it should not"))),
            (None, true) => Err(invalid(format!("trial {index} lacks its explanation"))),
            (Some(cue), true) => {
                let kind_ok = matches!(
                    (cue, self.xai_type),
                    (ExplanationCue::Importance(_), XaiType::Importance)
                        | (ExplanationCue::Attribution(_), XaiType::Attribution)
                );
                if !kind_ok {
                    return Err(invalid(format!("trial {index} explanation does not match xai type")));
                }
                if cue.len() != n {
                    return Err(Error::Shape {
                        expected: n,
                        actual: cue.len(),
                    });
                }
                Ok(())
            }
        }
    }

    /// Distinct test blocks with their condition, in order.
    pub fn blocks(&self) -> Vec<(usize, TestCondition)> {
        let mut out: Vec<(usize, TestCondition)> = Vec::new();
        for t in &self.test {
            if out.last().map(|(b, _)| *b) != Some(t.block) {
                out.push((t.block, t.condition));
            }
        }
        out
    }

    pub fn block_trials(&self, block: usize) -> impl Iterator<Item = &TestTrial> {
        self.test.iter().filter(move |t| t.block == block)
    }

    /// Copy keeping only the test trials of `block`; training is kept whole.
    pub fn only_block(&self, block: usize) -> SessionRecord {
        SessionRecord {
            test: self.block_trials(block).cloned().collect(),
            ..self.clone()
        }
    }

    /// Copy keeping only test trials under `condition`.
    pub fn only_condition(&self, condition: TestCondition) -> SessionRecord {
        SessionRecord {
            test: self.test.iter().filter(|t| t.condition == condition).cloned().collect(),
            ..self.clone()
        }
    }

    /// Fraction of test trials where the decision matched the AI.
    pub fn correctness(&self, condition: Option<TestCondition>) -> Option<f64> {
        let (hits, n) = self
            .test
            .iter()
            .filter(|t| condition.is_none_or(|c| t.condition == c))
            .fold((0usize, 0usize), |(h, n), t| (h + t.correct() as usize, n + 1));
        (n > 0).then(|| hits as f64 / n as f64)
    }
}

fn check_width(features: &[f64], n: usize, index: usize) -> Result<()> {
    if features.len() != n {
        return Err(Error::Validation(format!(
            "trial {index} has {} attributes, expected {n}",
            features.len()
        )));
    }
    Ok(())
}

fn invalid(message: String) -> Error {
    Error::Validation(message)
}
