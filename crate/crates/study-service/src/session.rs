//! One participant session as a pure state machine over accepted answers.
//!
//! The session is fully described by its initial state plus the ordered list
//! of accepted answers, which is exactly what the event log stores.

use coax::cognitive::ExplanationCue;
use coax::experiment::{SessionMaterials, SessionRecord, TestCondition, TestTrial, TrainingTrial, TrialItem, XaiType};
use coax::Label;
use serde::{Deserialize, Serialize};

use crate::screening::{Exhibit, ScreeningItem};
use crate::StudyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Screening,
    /// Training decision before the explanation is shown.
    TrainingPre,
    /// Training decision with the explanation.
    TrainingXai,
    Feedback,
    Test,
    Complete,
    /// Failed screening; the session ends without protocol trials.
    Excluded,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Complete | Phase::Excluded)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub dataset: String,
    pub xai_type: XaiType,
    /// Index of the instance split within the dataset.
    pub split: usize,
}

/// What the participant sent for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Answer {
    Label(Label),
    Choice(usize),
    /// Feedback screens are acknowledged without an answer.
    Acknowledge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedAnswer {
    pub answer: Answer,
    pub at_ms: u64,
}

/// A position in the session script.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub phase: Phase,
    /// Screening item, training trial or test trial number within its phase.
    pub index: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttributeBar {
    pub name: String,
    /// Normalized value in [0, 1].
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplanationBars {
    pub kind: XaiType,
    /// Scaled so the longest bar has length 1; attribution is signed toward label 1.
    pub display: Vec<f64>,
    /// Unscaled values, for logging.
    pub raw: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Feedback {
    pub ai_label: Label,
    pub ai_label_name: String,
    pub your_answer: Label,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub your_answer_with_xai: Option<Label>,
}

/// Everything the UI needs to render the current step.
#[derive(Debug, Clone, Serialize)]
pub struct TrialPayload {
    /// Position in the session script; submissions must quote it.
    pub step: usize,
    pub total_steps: usize,
    pub phase: Phase,
    /// Protocol trial index (training then test), absent outside the protocol.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<TestCondition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<AttributeBar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explanation: Option<ExplanationBars>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exhibit: Option<Exhibit>,
    /// Label names, or screening options.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completion_code: Option<String>,
}

/// Static description of a session fixed at creation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    /// Creation order within the study.
    pub seq: u64,
    pub session_id: String,
    pub token: String,
    pub participant_id: String,
    pub assignment: Assignment,
    pub created_ms: u64,
    pub completion_code: String,
    pub attribute_names: Vec<String>,
    pub label_names: [String; 2],
    pub materials: SessionMaterials,
    /// Test condition of each block.
    pub schedule: Vec<TestCondition>,
    pub screening: Vec<ScreeningItem>,
    /// Correct screening answers needed to continue.
    pub screening_pass: usize,
    #[serde(default)]
    pub answers: Vec<AcceptedAnswer>,
}

impl SessionState {
    pub fn xai_type(&self) -> XaiType {
        self.assignment.xai_type
    }

    fn block_len(&self) -> usize {
        self.materials.testing.len() / self.schedule.len().max(1)
    }

    fn condition_of(&self, test_index: usize) -> TestCondition {
        self.schedule[(test_index / self.block_len().max(1)).min(self.schedule.len() - 1)]
    }

    /// The full script of steps, excluding the terminal marker.
    pub fn script(&self) -> Vec<Step> {
        let mut steps: Vec<Step> = (0..self.screening.len())
            .map(|index| Step {
                phase: Phase::Screening,
                index,
            })
            .collect();
        for index in 0..self.materials.training.len() {
            steps.push(Step {
                phase: Phase::TrainingPre,
                index,
            });
            if self.xai_type() != XaiType::None {
                steps.push(Step {
                    phase: Phase::TrainingXai,
                    index,
                });
            }
            steps.push(Step {
                phase: Phase::Feedback,
                index,
            });
        }
        steps.extend((0..self.materials.testing.len()).map(|index| Step {
            phase: Phase::Test,
            index,
        }));
        steps
    }

    pub fn screening_score(&self) -> usize {
        self.answers
            .iter()
            .zip(&self.screening)
            .filter(|(a, item)| a.answer == Answer::Choice(item.correct))
            .count()
    }

    /// True once every screening item is answered and too few were right.
    pub fn is_excluded(&self) -> bool {
        self.answers.len() >= self.screening.len() && self.screening_score() < self.screening_pass
    }

    /// Index of the next step to answer.
    pub fn cursor(&self) -> usize {
        self.answers.len()
    }

    pub fn phase(&self) -> Phase {
        self.current_step().map_or_else(
            || {
                if self.is_excluded() {
                    Phase::Excluded
                } else {
                    Phase::Complete
                }
            },
            |s| s.phase,
        )
    }

    /// The step awaiting an answer, if the session is still running.
    pub fn current_step(&self) -> Option<Step> {
        if self.is_excluded() {
            return None;
        }
        self.script().get(self.cursor()).copied()
    }

    /// Validates and records `answer` for `step`.
    pub fn accept(&mut self, step: usize, answer: Answer, at_ms: u64) -> Result<(), StudyError> {
        self.check(step, answer)?;
        self.answers.push(AcceptedAnswer { answer, at_ms });
        Ok(())
    }

    /// Checks a submission without changing state.
    pub fn check(&self, step: usize, answer: Answer) -> Result<(), StudyError> {
        let Some(current) = self.current_step() else {
            return Err(StudyError::Conflict {
                expected: None,
                got: step,
            });
        };
        if step != self.cursor() {
            return Err(StudyError::Conflict {
                expected: Some(self.cursor()),
                got: step,
            });
        }
        match (current.phase, answer) {
            (Phase::Screening, Answer::Choice(c)) if c < self.screening[current.index].choices.len() => Ok(()),
            (Phase::Screening, _) => Err(StudyError::BadRequest("screening expects a valid `choice`".into())),
            (Phase::Feedback, Answer::Acknowledge) => Ok(()),
            (Phase::Feedback, _) => Err(StudyError::BadRequest(
                "feedback is acknowledged without an answer".into(),
            )),
            (_, Answer::Label(_)) => Ok(()),
            _ => Err(StudyError::BadRequest("this trial expects a `label` of 1 or 2".into())),
        }
    }

    fn answer_at(&self, step: Step) -> Option<&AcceptedAnswer> {
        let pos = self.script().iter().position(|s| *s == step)?;
        self.answers.get(pos)
    }

    fn label_at(&self, phase: Phase, index: usize) -> Option<(Label, u64)> {
        match self.answer_at(Step { phase, index })? {
            AcceptedAnswer {
                answer: Answer::Label(l),
                at_ms,
            } => Some((*l, *at_ms)),
            _ => None,
        }
    }

    fn attributes(&self, item: &TrialItem) -> Vec<AttributeBar> {
        self.attribute_names
            .iter()
            .zip(&item.features)
            .map(|(name, &value)| AttributeBar {
                name: name.clone(),
                value,
            })
            .collect()
    }

    fn explanation(&self, item: &TrialItem) -> Result<Option<ExplanationBars>, StudyError> {
        let Some(cue) = item.cue(self.xai_type())? else {
            return Ok(None);
        };
        let e = item.explanation.as_ref().expect("cue implies an explanation");
        let raw = match cue {
            ExplanationCue::Attribution(_) => e.toward_label1(),
            ExplanationCue::Importance(_) => e.importance.clone(),
        };
        let display = match cue {
            ExplanationCue::Attribution(v) | ExplanationCue::Importance(v) => v,
        };
        Ok(Some(ExplanationBars {
            kind: self.xai_type(),
            display,
            raw,
        }))
    }

    fn label_choices(&self) -> Vec<String> {
        self.label_names.to_vec()
    }

    /// Payload for the current step, or the terminal screen.
    pub fn payload(&self) -> Result<TrialPayload, StudyError> {
        let script = self.script();
        let mut p = TrialPayload {
            step: self.cursor(),
            total_steps: script.len(),
            phase: self.phase(),
            trial_index: None,
            condition: None,
            prompt: None,
            attributes: Vec::new(),
            explanation: None,
            exhibit: None,
            choices: Vec::new(),
            feedback: None,
            completion_code: None,
        };
        let Some(step) = self.current_step() else {
            if p.phase == Phase::Complete {
                p.completion_code = Some(self.completion_code.clone());
            }
            return Ok(p);
        };
        let n_train = self.materials.training.len();
        match step.phase {
            Phase::Screening => {
                let item = &self.screening[step.index];
                p.prompt = Some(item.prompt.clone());
                p.choices = item.choices.clone();
                p.exhibit = item.exhibit.clone();
            }
            Phase::TrainingPre | Phase::TrainingXai | Phase::Feedback => {
                let item = &self.materials.training[step.index];
                p.trial_index = Some(step.index);
                p.attributes = self.attributes(item);
                if step.phase != Phase::TrainingPre {
                    p.explanation = self.explanation(item)?;
                }
                if step.phase == Phase::Feedback {
                    let (your_answer, _) = self
                        .label_at(Phase::TrainingPre, step.index)
                        .expect("feedback follows the training decision");
                    p.feedback = Some(Feedback {
                        ai_label: item.ai_label,
                        ai_label_name: self.label_names[item.ai_label.index()].clone(),
                        your_answer,
                        your_answer_with_xai: self.label_at(Phase::TrainingXai, step.index).map(|(l, _)| l),
                    });
                } else {
                    p.choices = self.label_choices();
                }
            }
            Phase::Test => {
                let item = &self.materials.testing[step.index];
                let condition = self.condition_of(step.index);
                p.trial_index = Some(n_train + step.index);
                p.condition = Some(condition);
                p.attributes = self.attributes(item);
                if condition == TestCondition::WithXai {
                    p.explanation = self.explanation(item)?;
                }
                p.choices = self.label_choices();
            }
            Phase::Complete | Phase::Excluded => unreachable!("terminal phases have no step"),
        }
        Ok(p)
    }

    /// The session as a fitting-ready record holding every finished trial.
    pub fn record(&self) -> Result<SessionRecord, StudyError> {
        let xai = self.xai_type();
        let mut training = Vec::new();
        for (i, item) in self.materials.training.iter().enumerate() {
            let Some((pre, pre_ms)) = self.label_at(Phase::TrainingPre, i) else {
                break;
            };
            let with = self.label_at(Phase::TrainingXai, i);
            if xai != XaiType::None && with.is_none() {
                break;
            }
            training.push(TrainingTrial {
                trial_index: i,
                instance_id: item.instance_id.clone(),
                features: item.features.clone(),
                explanation: item.cue(xai)?,
                ai_label: item.ai_label,
                decision_without_xai: pre,
                decision_with_xai: with.map(|(l, _)| l),
                decided_at_ms: Some(with.map_or(pre_ms, |(_, ms)| ms)),
            });
        }
        let block_len = self.block_len().max(1);
        let mut test = Vec::new();
        for (j, item) in self.materials.testing.iter().enumerate() {
            let Some((decision, at_ms)) = self.label_at(Phase::Test, j) else {
                break;
            };
            let condition = self.condition_of(j);
            test.push(TestTrial {
                trial_index: self.materials.training.len() + j,
                instance_id: item.instance_id.clone(),
                block: j / block_len,
                condition,
                explanation: if condition == TestCondition::WithXai {
                    item.cue(xai)?
                } else {
                    None
                },
                ai_label: item.ai_label,
                decision,
                features: item.features.clone(),
                decided_at_ms: Some(at_ms),
            });
        }
        Ok(SessionRecord {
            session_id: self.session_id.clone(),
            participant_id: self.participant_id.clone(),
            dataset: self.materials.dataset.clone(),
            xai_type: xai,
            explainer: (xai != XaiType::None).then_some(self.materials.explainer).flatten(),
            training,
            test,
            generator: None,
        })
    }
}
