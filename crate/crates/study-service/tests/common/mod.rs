#![allow(dead_code)]

use coax::data::{synthetic, DatasetSpec};
use coax::experiment::{Domain, XaiType};
use coax::model::{AiModel, LinearModel};
use coax::xai::Explainer;
use coax::Label;
use coax_study::config::AssignmentConfig;
use coax_study::{Phase, PoolEntry, Study, StudyConfig, SubmitRequest, TrialPayload};

/// A wine-shaped pool labelled by a fixed linear model; fast to build.
pub fn pool(seed: u64) -> PoolEntry {
    let spec = DatasetSpec::wine_quality();
    let rows = synthetic::generate(&spec, 200, seed);
    let model = AiModel::Linear(LinearModel::new(vec![-4.0, -1.0, -0.5, 3.0, 6.0], -1.2));
    let domain = Domain::with_model(
        "wine-quality".into(),
        spec.clone(),
        model,
        rows[..24].to_vec(),
        rows[24..].to_vec(),
    )
    .unwrap();
    PoolEntry {
        spec,
        pool: domain.explain(&Explainer::Shapley).unwrap(),
    }
}

pub fn config(dir: &std::path::Path, xai: Option<XaiType>) -> StudyConfig {
    StudyConfig {
        data_dir: dir.to_path_buf(),
        seed: 7,
        admin_token: Some("secret".into()),
        splits_per_dataset: 50,
        snapshot_every: 1000,
        assignment: AssignmentConfig {
            fixed_xai_type: xai,
            ..AssignmentConfig::default()
        },
        ..StudyConfig::default()
    }
}

pub fn study(dir: &std::path::Path, xai: Option<XaiType>) -> Study {
    Study::open(config(dir, xai), vec![pool(1)]).unwrap()
}

/// The request that answers `p`: right screening answers, labels from `pick`.
pub fn answer(p: &TrialPayload, screening_correct: &[usize], pick: impl Fn(&TrialPayload) -> Label) -> SubmitRequest {
    let mut req = SubmitRequest {
        step: p.step,
        label: None,
        choice: None,
    };
    match p.phase {
        Phase::Screening => req.choice = Some(screening_correct[p.step]),
        Phase::Feedback => {}
        _ => req.label = Some(pick(p)),
    }
    req
}

/// Walks a session to its end, returning every payload seen.
pub fn walk(study: &Study, token: &str, pick: impl Fn(&TrialPayload) -> Label) -> Vec<TrialPayload> {
    let correct: Vec<usize> = study
        .sessions()
        .iter()
        .find(|s| s.token == token)
        .unwrap()
        .screening
        .iter()
        .map(|i| i.correct)
        .collect();
    let mut seen = vec![study.current(token).unwrap()];
    while !seen.last().unwrap().phase.is_terminal() {
        let req = answer(seen.last().unwrap(), &correct, &pick);
        seen.push(study.submit(token, &req).unwrap());
    }
    seen
}

/// Label 1 when the first attribute is low.
pub fn simple_rule(p: &TrialPayload) -> Label {
    if p.attributes[0].value < 0.5 {
        Label::One
    } else {
        Label::Two
    }
}
