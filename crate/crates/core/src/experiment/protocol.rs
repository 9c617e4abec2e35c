//! Replaying the study protocol with a virtual participant.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::record::{SessionRecord, TestCondition, TestTrial, TrainingTrial, XaiType};
use crate::cognitive::{CognitiveParams, Decision, ExplanationCue, Participant, Stimulus};
use crate::xai::{Explanation, Method};
use crate::{Error, Label, Result};

/// One instance ready to be shown: attributes, the AI's label and its explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialItem {
    pub instance_id: String,
    pub features: Vec<f64>,
    pub ai_label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<Explanation>,
}

impl TrialItem {
    /// Explanation as the participant sees it under `xai_type`.
    pub fn cue(&self, xai_type: XaiType) -> Result<Option<ExplanationCue>> {
        if xai_type == XaiType::None {
            return Ok(None);
        }
        let e = self
            .explanation
            .as_ref()
            .ok_or_else(|| Error::Config(format!("instance `{}` has no explanation", self.instance_id)))?;
        Ok(Some(display_cue(e, xai_type)))
    }
}

/// Display-scaled cue: importance toward the AI's label, or attribution
/// signed toward label 1, with the longest bar at length 1.
pub fn display_cue(e: &Explanation, xai_type: XaiType) -> ExplanationCue {
    match xai_type {
        XaiType::Attribution => {
            let toward1 = e.oriented_toward(Label::One);
            ExplanationCue::Attribution(toward1.display_attribution())
        }
        _ => ExplanationCue::Importance(e.display_importance()),
    }
}

/// Instances of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMaterials {
    pub dataset: String,
    pub explainer: Option<Method>,
    pub training: Vec<TrialItem>,
    pub testing: Vec<TrialItem>,
}

/// Order of the two test blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockOrder {
    WithFirst,
    WithoutFirst,
    /// Drawn from the session seed.
    Random,
}

/// How a virtual participant turns a decision into a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseRule {
    /// Label 1 with the model's probability of label 1.
    #[default]
    Sample,
    /// The decision's most probable label.
    Argmax,
}

impl ResponseRule {
    pub fn respond(self, decision: &Decision, rng: &mut dyn RngCore) -> Label {
        match self {
            ResponseRule::Sample => decision.sample_response(rng),
            ResponseRule::Argmax => decision.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XaiConfig {
    pub xai_type: XaiType,
    pub block_order: BlockOrder,
    /// Number of test blocks the test instances are divided into.
    pub blocks: usize,
    #[serde(default)]
    pub response: ResponseRule,
}

impl XaiConfig {
    pub fn new(xai_type: XaiType) -> Self {
        Self {
            xai_type,
            block_order: BlockOrder::Random,
            blocks: 2,
            response: ResponseRule::Sample,
        }
    }

    pub fn with_response(mut self, response: ResponseRule) -> Self {
        self.response = response;
        self
    }

    /// Conditions of the test blocks in order.
    pub fn schedule(&self, rng: &mut impl Rng) -> Vec<TestCondition> {
        if self.xai_type == XaiType::None {
            return vec![TestCondition::WithoutXai; self.blocks];
        }
        let with_first = match self.block_order {
            BlockOrder::WithFirst => true,
            BlockOrder::WithoutFirst => false,
            BlockOrder::Random => rng.random_bool(0.5),
        };
        (0..self.blocks)
            .map(|b| {
                if (b % 2 == 0) == with_first {
                    TestCondition::WithXai
                } else {
                    TestCondition::WithoutXai
                }
            })
            .collect()
    }
}

/// Runs one session: each training trial asks for a label without and then
/// with the explanation and ends with feedback that is encoded into memory;
/// test trials are answered without feedback and never change memory.
/// Responses follow `xai.response`.
pub fn run_virtual_session(
    participant_id: &str,
    params: &CognitiveParams,
    materials: &SessionMaterials,
    xai: &XaiConfig,
    seed: u64,
) -> Result<SessionRecord> {
    Ok(run_traced(participant_id, params, materials, xai, seed)?.record)
}

/// A session together with the participant's final memory.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedSession {
    pub record: SessionRecord,
    pub participant: Participant,
    /// Memory digest when the training phase ended.
    pub digest_after_training: u64,
}

pub fn run_traced(
    participant_id: &str,
    params: &CognitiveParams,
    materials: &SessionMaterials,
    xai: &XaiConfig,
    seed: u64,
) -> Result<TracedSession> {
    params.validate()?;
    if xai.blocks == 0 || !materials.testing.len().is_multiple_of(xai.blocks) {
        return Err(Error::Config(format!(
            "{} test instances cannot be split into {} equal blocks",
            materials.testing.len(),
            xai.blocks
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schedule = xai.schedule(&mut rng);
    let mut participant = Participant::new(*params);
    let mut training = Vec::with_capacity(materials.training.len());
    for (i, item) in materials.training.iter().enumerate() {
        let cue = item.cue(xai.xai_type)?;
        let pre = participant.decide(Stimulus::new(&item.features, None), i, &mut rng)?;
        let decision_without_xai = xai.response.respond(&pre, &mut rng);
        let decision_with_xai = match &cue {
            Some(c) => {
                let d = participant.decide(Stimulus::new(&item.features, Some(c)), i, &mut rng)?;
                Some(xai.response.respond(&d, &mut rng))
            }
            None => None,
        };
        participant.observe_feedback(Stimulus::new(&item.features, cue.as_ref()), item.ai_label, i)?;
        training.push(TrainingTrial {
            trial_index: i,
            instance_id: item.instance_id.clone(),
            features: item.features.clone(),
            explanation: cue,
            ai_label: item.ai_label,
            decision_without_xai,
            decision_with_xai,
            decided_at_ms: None,
        });
    }
    let digest_after_training = participant.memory.digest();
    let per_block = materials.testing.len() / xai.blocks;
    let offset = materials.training.len();
    let mut test = Vec::with_capacity(materials.testing.len());
    for (j, item) in materials.testing.iter().enumerate() {
        let block = j / per_block;
        let condition = schedule[block];
        let cue = match condition {
            TestCondition::WithXai => item.cue(xai.xai_type)?,
            TestCondition::WithoutXai => None,
        };
        let index = offset + j;
        let d = participant.decide(Stimulus::new(&item.features, cue.as_ref()), index, &mut rng)?;
        test.push(TestTrial {
            trial_index: index,
            instance_id: item.instance_id.clone(),
            block,
            condition,
            features: item.features.clone(),
            explanation: cue,
            ai_label: item.ai_label,
            decision: xai.response.respond(&d, &mut rng),
            decided_at_ms: None,
        });
    }
    let record = SessionRecord {
        session_id: format!("{participant_id}-s{seed}"),
        participant_id: participant_id.to_string(),
        dataset: materials.dataset.clone(),
        xai_type: xai.xai_type,
        explainer: if xai.xai_type == XaiType::None {
            None
        } else {
            materials.explainer
        },
        training,
        test,
        generator: Some(*params),
    };
    Ok(TracedSession {
        record,
        participant,
        digest_after_training,
    })
}
