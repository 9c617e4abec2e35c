//! Comprehension screening shown before the first training trial.

use coax::cognitive::ExplanationCue;
use coax::experiment::XaiType;
use serde::{Deserialize, Serialize};

use crate::StudyError;

/// A multiple-choice question, optionally about a pictured set of bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreeningItem {
    pub id: String,
    pub prompt: String,
    pub choices: Vec<String>,
    /// Index of the right answer in `choices`.
    pub correct: usize,
    /// XAI types the item is shown to; every type when empty.
    #[serde(default)]
    pub xai_types: Vec<XaiType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exhibit: Option<Exhibit>,
}

/// Bars pictured next to a screening question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exhibit {
    pub attributes: Vec<String>,
    pub bars: ExplanationCue,
}

impl ScreeningItem {
    pub fn applies_to(&self, xai_type: XaiType) -> bool {
        self.xai_types.is_empty() || self.xai_types.contains(&xai_type)
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        if self.choices.len() < 2 || self.correct >= self.choices.len() {
            return Err(StudyError::Config(format!(
                "screening item `{}` needs two choices and a valid answer",
                self.id
            )));
        }
        if let Some(e) = &self.exhibit {
            if e.attributes.len() != e.bars.len() {
                return Err(StudyError::Config(format!(
                    "screening item `{}` has mismatched bars",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

fn item(id: &str, prompt: &str, choices: &[&str], correct: usize) -> ScreeningItem {
    ScreeningItem {
        id: id.into(),
        prompt: prompt.into(),
        choices: choices.iter().map(|c| c.to_string()).collect(),
        correct,
        xai_types: Vec::new(),
        exhibit: None,
    }
}

fn names() -> Vec<String> {
    ["Attribute A", "Attribute B", "Attribute C"].map(String::from).to_vec()
}

/// Interface questions for everyone plus one reading question per explanation type.
pub fn default_items() -> Vec<ScreeningItem> {
    let mut importance = item(
        "importance-reading",
        "According to the bars, which attribute mattered most to the AI?",
        &["Attribute A", "Attribute B", "Attribute C"],
        1,
    );
    importance.xai_types = vec![XaiType::Importance];
    importance.exhibit = Some(Exhibit {
        attributes: names(),
        bars: ExplanationCue::Importance(vec![0.3, 1.0, 0.55]),
    });
    let mut attribution = item(
        "attribution-reading",
        "According to the bars, which attribute pushed the AI most strongly toward Label 2?",
        &["Attribute A", "Attribute B", "Attribute C"],
        0,
    );
    attribution.xai_types = vec![XaiType::Attribution];
    attribution.exhibit = Some(Exhibit {
        attributes: names(),
        bars: ExplanationCue::Attribution(vec![-1.0, 0.8, -0.2]),
    });
    vec![
        item(
            "task",
            "What are you asked to predict on each trial?",
            &[
                "The true label of the instance",
                "The label the AI gives the instance",
                "Which attribute is largest",
            ],
            1,
        ),
        item(
            "feedback",
            "When do you see the AI's label for an instance?",
            &[
                "After answering a training trial",
                "After answering a test trial",
                "Never",
            ],
            0,
        ),
        importance,
        attribution,
    ]
}

/// Items a session with `xai_type` sees, in configured order.
pub fn items_for(items: &[ScreeningItem], xai_type: XaiType) -> Vec<ScreeningItem> {
    items.iter().filter(|i| i.applies_to(xai_type)).cloned().collect()
}
