//! Study protocol, virtual participants and the statistics reported on them.

mod domain;
mod protocol;
mod record;
pub mod stats;
pub mod study;

pub use domain::{Domain, DomainConfig, ExplainedPool};
pub use protocol::{
    display_cue, run_traced, run_virtual_session, BlockOrder, ResponseRule, SessionMaterials, TracedSession, TrialItem,
    XaiConfig,
};
pub use record::{
    Cell, SessionRecord, TestCondition, TestTrial, TrainingTrial, XaiType, PROTOCOL_BLOCK, PROTOCOL_TRAINING,
};
pub use stats::{ci95, pearson_r, spearman, tukey_hsd, TukeyResult};
pub use study::{
    derive_seed, run_condition_study, run_hypothesis_study, run_parameter_trend, simulate_cell, simulate_participants,
    CellSummary, ExperimentReport, HypothesisSetup, IvGrid, TrendParam, TrendResult,
};

/// Assignment weights None : Importance : Attribution used when sessions are
/// allocated at random.
pub const ASSIGNMENT_PRESET: [(XaiType, f64); 3] = [
    (XaiType::None, 1.0),
    (XaiType::Importance, 4.0),
    (XaiType::Attribution, 2.0),
];
