use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

fn full_trace(values: &[f64], label: Label, t: usize) -> ExemplarTrace {
    ExemplarTrace {
        attended: (0..values.len()).collect(),
        values: values.to_vec(),
        cue: None,
        ai_label: label,
        t_stored: t,
    }
}

fn params(strategy: Strategy, alpha: f64, k: usize) -> CognitiveParams {
    CognitiveParams {
        alpha,
        rho: -1e9,
        k,
        zeta: 1.0,
        lambda: DEFAULT_LAMBDA,
        strategy,
    }
}

#[test]
fn activation_values() {
    assert_eq!(activation(1.0, 0.5).unwrap(), 0.0);
    assert!((activation(std::f64::consts::E.powi(2), 0.5).unwrap() + 1.0).abs() < 1e-12);
    assert!((activation(20.0, 0.5).unwrap() + 1.4979).abs() < 1e-4);
    assert!(matches!(activation(0.5, 0.5), Err(Error::Contract(_))));
    let mut prev = 0.0;
    for dt in 2..50 {
        let a = activation(dt as f64, 0.5).unwrap();
        assert!(a < prev);
        prev = a;
    }
}

#[test]
fn similarity_values() {
    assert_eq!(similarity(0.0, 7.0, 0.0), 1.0);
    assert!((similarity(1.0, 1.0, 0.0) - 0.367_879_441_171_442_3).abs() < 1e-15);
    assert!(similarity(0.3, 4.0, -0.2) < similarity(0.3, 2.0, -0.2));
}

#[test]
fn retrieval_threshold() {
    let mut m = Memory::new();
    for t in 0..30 {
        m.push(full_trace(&[0.5], Label::One, t)).unwrap();
    }
    assert_eq!(retrieve(&m, 29, -1e9, 0.5).unwrap().len(), 30);
    let only_now = retrieve(&m, 29, 0.0, 0.5).unwrap();
    assert_eq!(only_now.len(), 1);
    assert_eq!(m.traces[only_now[0].index].t_stored, 29);
    // -0.5 ln dt >= -1.5  <=>  dt <= e^3 ~ 20.09
    let got = retrieve(&m, 29, -1.5, 0.5).unwrap();
    for r in &got {
        assert!(29 - m.traces[r.index].t_stored < 20);
    }
    assert_eq!(got.len(), 20);
    let mut future = Memory::new();
    future.push(full_trace(&[0.5], Label::One, 5)).unwrap();
    assert!(retrieve(&future, 4, -1.0, 0.5).is_err());
}

#[test]
fn gcm_cases() {
    assert_eq!(gcm_predict(&[(Label::One, 0.3)]), Some(1.0));
    assert_eq!(gcm_predict(&[(Label::One, 0.4), (Label::Two, 0.4)]), Some(0.5));
    assert_eq!(gcm_predict(&[]), None);
    let ev = [(Label::One, 0.2), (Label::Two, 0.5), (Label::One, 0.1)];
    let hand = (0.2 + 0.1) / (0.2 + 0.5 + 0.1);
    assert!((gcm_predict(&ev).unwrap() - hand).abs() < 1e-15);
}

#[test]
fn t_statistic_cases() {
    assert_eq!(t_statistic(&[0.2, 0.4], &[0.4, 0.2]), 0.0);
    // Four values with mean 0 and sample sd 0.1: +-a with 2a^2 * 2 / 3 = 0.01.
    let a = (0.0075_f64).sqrt();
    let g1 = [a, -a, a, -a];
    let g2: Vec<f64> = g1.iter().map(|v| v + 1.0).collect();
    let t = t_statistic(&g1, &g2);
    assert!((t - 1.0 / (0.0025_f64 + 0.0025).sqrt()).abs() < 1e-9);
    assert!((t - 14.14).abs() < 0.01);
    assert_eq!(t_statistic(&[0.3, 0.3], &[0.6]), f64::INFINITY);
    assert_eq!(t_statistic(&[0.3], &[0.3]), 0.0);
}

#[test]
fn separating_feature_ranks_first() {
    let mut m = Memory::new();
    let mut r = rng();
    for t in 0..10 {
        let label = if t % 2 == 0 { Label::One } else { Label::Two };
        let mut v: Vec<f64> = (0..5).map(|_| r.random::<f64>()).collect();
        v[3] = if label == Label::One { 0.1 } else { 0.9 };
        m.push(full_trace(&v, label, t)).unwrap();
    }
    let rank = sensitive_feature_rank(&m, 5);
    assert_eq!(rank.order[0], 3);
    let p = params(Strategy::SensitiveFeatures, 5.0, 1);
    let d = decide_sensitive(Stimulus::new(&[0.5, 0.5, 0.5, 0.15, 0.5], None), &m, 10, &p, &mut rng()).unwrap();
    assert_eq!(d.trace.attended, vec![3]);
    assert_eq!(d.label, Label::One);
}

#[test]
fn noise_feature_rarely_beats_separating_feature() {
    let mut wins = 0;
    for seed in 0..100 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Memory::new();
        for t in 0..10 {
            let label = if t % 2 == 0 { Label::One } else { Label::Two };
            let sep = if label == Label::One { 0.2 } else { 0.8 } + r.random_range(-0.05..0.05);
            m.push(full_trace(&[sep, r.random::<f64>()], label, t)).unwrap();
        }
        if sensitive_feature_rank(&m, 2).order[0] == 0 {
            wins += 1;
        }
    }
    assert_eq!(wins, 100);
}

#[test]
fn one_label_group_uses_spread_fallback() {
    let mut m = Memory::new();
    m.push(full_trace(&[0.5, 0.1], Label::One, 0)).unwrap();
    m.push(full_trace(&[0.5, 0.9], Label::One, 1)).unwrap();
    let rank = sensitive_feature_rank(&m, 2);
    assert!(rank.fallback);
    assert_eq!(rank.order, vec![1, 0]);
}

#[test]
fn sensitive_with_all_features_is_plain_gcm() {
    let mut m = Memory::new();
    let exemplars = [
        ([0.1, 0.9, 0.3], Label::One),
        ([0.8, 0.2, 0.6], Label::Two),
        ([0.4, 0.4, 0.4], Label::One),
    ];
    for (t, (v, l)) in exemplars.iter().enumerate() {
        m.push(full_trace(v, *l, t)).unwrap();
    }
    let x = [0.3, 0.5, 0.2];
    let p = params(Strategy::SensitiveFeatures, 3.0, 3);
    let got = decide_sensitive(Stimulus::new(&x, None), &m, 3, &p, &mut rng()).unwrap();
    let sims: Vec<(Label, f64)> = exemplars
        .iter()
        .enumerate()
        .map(|(t, (v, l))| {
            let d = v.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 3.0;
            let a = -0.5 * ((3 - t + 1) as f64).ln();
            (*l, (-3.0 * d + a).exp())
        })
        .collect();
    assert!((got.proba_label1 - gcm_predict(&sims).unwrap()).abs() < 1e-15);
    let again = decide_sensitive(Stimulus::new(&x, None), &m, 3, &p, &mut rng()).unwrap();
    assert_eq!(got, again);
}

#[test]
fn empty_retrieval_falls_back_to_half() {
    let mut m = Memory::new();
    m.push(full_trace(&[0.1, 0.2], Label::One, 0)).unwrap();
    let mut p = params(Strategy::SensitiveFeatures, 3.0, 2);
    p.rho = 0.0;
    let d = decide_sensitive(Stimulus::new(&[0.1, 0.2], None), &m, 10, &p, &mut rng()).unwrap();
    assert_eq!(d.proba_label1, 0.5);
    assert!(d.flags.uniform_fallback);
}

#[test]
fn salient_distance_only_uses_top_features() {
    let mut m = Memory::new();
    m.push(full_trace(&[0.9, 0.2, 0.9], Label::One, 0)).unwrap();
    m.push(full_trace(&[0.1, 0.8, 0.1], Label::Two, 1)).unwrap();
    let p = params(Strategy::SalientFeatures, 10.0, 1);
    let cue = ExplanationCue::Importance(vec![0.1, 0.7, 0.3]);
    let a = decide_salient(Stimulus::new(&[0.0, 0.25, 0.0], Some(&cue)), &m, 2, &p, &mut rng()).unwrap();
    let b = decide_salient(Stimulus::new(&[1.0, 0.25, 1.0], Some(&cue)), &m, 2, &p, &mut rng()).unwrap();
    assert_eq!(a.trace.attended, vec![1]);
    assert_eq!(a.proba_label1, b.proba_label1);
    assert_eq!(a.label, Label::One);
}

#[test]
fn salient_hand_distance() {
    // Stored features {0, 1} = (0.2, 0.6); instance (0.2, 0.8, ...); d = (0 + 0.04) / 2 = 0.02.
    let mut m = Memory::new();
    let p = params(Strategy::SalientFeatures, 1.0, 2);
    let shown = ExplanationCue::Importance(vec![0.9, 0.8, 0.1, 0.0, 0.2]);
    encode_trial(
        &mut m,
        Stimulus::new(&[0.2, 0.6, 0.5, 0.5, 0.5], Some(&shown)),
        Label::Two,
        0,
        &p,
    )
    .unwrap();
    assert_eq!(m.traces[0].attended, vec![0, 1]);
    let x = [0.2, 0.8, 0.0, 0.0, 0.0];
    let d = mean_squared_distance(&x, &m.traces[0], &[0, 1]).unwrap();
    assert!((d - 0.02).abs() < 1e-15);
    let got = decide_salient(Stimulus::new(&x, Some(&shown)), &m, 0, &p, &mut rng()).unwrap();
    assert!((got.trace.similarities[0] - (-0.02_f64).exp()).abs() < 1e-15);
}

#[test]
fn salient_without_overlap_falls_back() {
    let mut m = Memory::new();
    let p = params(Strategy::SalientFeatures, 1.0, 1);
    let train = ExplanationCue::Importance(vec![1.0, 0.0, 0.0]);
    encode_trial(&mut m, Stimulus::new(&[0.2, 0.6, 0.5], Some(&train)), Label::One, 0, &p).unwrap();
    let test = ExplanationCue::Importance(vec![0.0, 0.0, 1.0]);
    let d = decide_salient(Stimulus::new(&[0.2, 0.6, 0.5], Some(&test)), &m, 1, &p, &mut rng()).unwrap();
    assert!(d.flags.uniform_fallback);
    assert_eq!(d.proba_label1, 0.5);
}

#[test]
fn salient_with_uniform_importance_and_all_features_equals_sensitive() {
    let mut r = rng();
    for _ in 0..50 {
        let sal = params(Strategy::SalientFeatures, 7.0, 4);
        let sen = params(Strategy::SensitiveFeatures, 7.0, 4);
        let uniform = ExplanationCue::Importance(vec![0.5; 4]);
        let mut m_sal = Memory::new();
        let mut m_sen = Memory::new();
        for t in 0..8 {
            let x: Vec<f64> = (0..4).map(|_| r.random::<f64>()).collect();
            let l = if r.random_bool(0.5) { Label::One } else { Label::Two };
            encode_trial(&mut m_sal, Stimulus::new(&x, Some(&uniform)), l, t, &sal).unwrap();
            encode_trial(&mut m_sen, Stimulus::new(&x, None), l, t, &sen).unwrap();
        }
        let x: Vec<f64> = (0..4).map(|_| r.random::<f64>()).collect();
        let a = decide_salient(Stimulus::new(&x, Some(&uniform)), &m_sal, 9, &sal, &mut rng()).unwrap();
        let b = decide_sensitive(Stimulus::new(&x, None), &m_sen, 9, &sen, &mut rng()).unwrap();
        assert!((a.proba_label1 - b.proba_label1).abs() < 1e-15);
    }
}

#[test]
fn attribution_sum_cases() {
    let m = Memory::new();
    let mut p = params(Strategy::AttributionSum, 0.0, 5);
    let balanced = ExplanationCue::Attribution(vec![0.5, -0.5, 0.0, 0.0, 0.0]);
    let d = decide_attribution_sum(Stimulus::new(&[0.5; 5], Some(&balanced)), &m, 0, &p, &mut rng()).unwrap();
    assert_eq!(d.proba_label1, 0.5);
    let one = ExplanationCue::Attribution(vec![0.5, 0.25, 0.25, 0.0, 0.0]);
    let d = decide_attribution_sum(Stimulus::new(&[0.5; 5], Some(&one)), &m, 0, &p, &mut rng()).unwrap();
    assert!((d.proba_label1 - 0.731_058_578_630_004_9).abs() < 1e-12);
    for zeta in [0.01, 0.5, 3.0, 100.0] {
        p.zeta = zeta;
        let toward_one = ExplanationCue::Attribution(vec![0.1, 0.4, 0.0, 0.2, 0.3]);
        let d = decide_attribution_sum(Stimulus::new(&[0.5; 5], Some(&toward_one)), &m, 0, &p, &mut rng()).unwrap();
        assert!(d.proba_label1 > 0.5);
        assert_eq!(d.label, Label::One);
    }
}

#[test]
fn attribution_sum_zeta_moves_away_from_half() {
    let m = Memory::new();
    let cue = ExplanationCue::Attribution(vec![-0.3, 0.1, -0.2]);
    let mut prev = 0.5;
    for zeta in [0.1, 0.5, 1.0, 2.0, 5.0] {
        let p = CognitiveParams {
            zeta,
            ..params(Strategy::AttributionSum, 0.0, 3)
        };
        let d = decide_attribution_sum(Stimulus::new(&[0.5; 3], Some(&cue)), &m, 0, &p, &mut rng()).unwrap();
        assert!((d.proba_label1 - 0.5).abs() > (prev - 0.5_f64).abs());
        prev = d.proba_label1;
    }
}

#[test]
fn attribution_sum_with_importance_uses_label_votes() {
    let p = params(Strategy::AttributionSum, 0.0, 2);
    let mut m = Memory::new();
    let imp = ExplanationCue::Importance(vec![1.0, 0.5]);
    encode_trial(&mut m, Stimulus::new(&[0.9, 0.1], Some(&imp)), Label::One, 0, &p).unwrap();
    encode_trial(&mut m, Stimulus::new(&[0.1, 0.9], Some(&imp)), Label::Two, 1, &p).unwrap();
    // Feature 0 near the label-1 exemplar, feature 1 near the label-2 one; feature 0 is heavier.
    let shown = ExplanationCue::Importance(vec![0.8, 0.3]);
    let d = decide_attribution_sum(Stimulus::new(&[0.85, 0.85], Some(&shown)), &m, 2, &p, &mut rng()).unwrap();
    assert!((d.trace.feature_votes[0] - 0.8).abs() < 1e-15);
    assert!((d.trace.feature_votes[1] + 0.3).abs() < 1e-15);
    assert!((d.proba_label1 - crate::model::sigmoid(0.5)).abs() < 1e-15);
}

#[test]
fn attribution_sum_abstains_without_recall() {
    let mut p = params(Strategy::AttributionSum, 0.0, 2);
    p.rho = 0.0;
    let mut m = Memory::new();
    let imp = ExplanationCue::Importance(vec![1.0, 0.5]);
    encode_trial(&mut m, Stimulus::new(&[0.9, 0.1], Some(&imp)), Label::One, 0, &p).unwrap();
    let d = decide_attribution_sum(Stimulus::new(&[0.5, 0.5], Some(&imp)), &m, 5, &p, &mut rng()).unwrap();
    assert_eq!(d.flags.abstained, vec![0, 1]);
    assert!(d.flags.uniform_fallback);
    assert_eq!(d.proba_label1, 0.5);
}

#[test]
fn attribution_sum_recalls_signed_attributions_without_cue() {
    let p = params(Strategy::AttributionSum, 0.0, 1);
    let mut m = Memory::new();
    let a = ExplanationCue::Attribution(vec![-0.6, 0.2]);
    encode_trial(&mut m, Stimulus::new(&[0.4, 0.4], Some(&a)), Label::One, 0, &p).unwrap();
    let d = decide_attribution_sum(Stimulus::new(&[0.4, 0.4], None), &m, 1, &p, &mut rng()).unwrap();
    // Only one exemplar: recalled means equal its attributions; top-1 is feature 0, pointing to label 2.
    assert_eq!(d.trace.attended, vec![0]);
    assert!((d.proba_label1 - crate::model::sigmoid(-0.6)).abs() < 1e-15);
}

#[test]
fn importance_cat_ignores_attribute_values() {
    let p = params(Strategy::ImportanceCategorization, 5.0, 2);
    let mut m = Memory::new();
    let pats = [
        ([0.9, 0.1, 0.0], Label::One),
        ([0.8, 0.2, 0.1], Label::One),
        ([0.1, 0.9, 0.2], Label::Two),
        ([0.0, 0.8, 0.3], Label::Two),
    ];
    let mut r = rng();
    for (t, (imp, l)) in pats.iter().enumerate() {
        let cue = ExplanationCue::Importance(imp.to_vec());
        let x: Vec<f64> = (0..3).map(|_| r.random::<f64>()).collect();
        encode_trial(&mut m, Stimulus::new(&x, Some(&cue)), *l, t, &p).unwrap();
    }
    let shown = ExplanationCue::Importance(vec![0.85, 0.15, 0.05]);
    let a = decide_importance_cat(Stimulus::new(&[0.0, 0.0, 0.0], Some(&shown)), &m, 4, &p, &mut rng()).unwrap();
    let b = decide_importance_cat(Stimulus::new(&[1.0, 0.3, 0.7], Some(&shown)), &m, 4, &p, &mut rng()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.label, Label::One);
    assert_eq!(a.trace.attended, vec![0, 1]);
}

#[test]
fn importance_cat_symmetric_memory_is_uninformative() {
    let p = params(Strategy::ImportanceCategorization, 5.0, 2);
    let mut m = Memory::new();
    let cue = ExplanationCue::Importance(vec![0.5, 0.3, 0.2]);
    for (t, l) in [Label::One, Label::Two, Label::One, Label::Two].into_iter().enumerate() {
        encode_trial(&mut m, Stimulus::new(&[0.5; 3], Some(&cue)), l, t, &p).unwrap();
    }
    let d = decide_importance_cat(Stimulus::new(&[0.5; 3], Some(&cue)), &m, 3, &p, &mut rng()).unwrap();
    // Equal-age pairs do not exist, so activations differ; with identical patterns the
    // probability is the activation-weighted label share.
    let w: Vec<f64> = (0..4).map(|t| (-0.5 * ((3 - t + 1) as f64).ln()).exp()).collect();
    let expect = (w[0] + w[2]) / w.iter().sum::<f64>();
    assert!((d.proba_label1 - expect).abs() < 1e-12);
    assert!((d.proba_label1 - 0.5).abs() < 0.15);
}

#[test]
fn importance_cat_without_cue_falls_back() {
    let p = params(Strategy::ImportanceCategorization, 5.0, 2);
    let d = decide_importance_cat(Stimulus::new(&[0.5; 3], None), &Memory::new(), 0, &p, &mut rng()).unwrap();
    assert!(d.flags.uniform_fallback);
}

#[test]
fn random_strategy() {
    let mut ones = 0;
    for seed in 0..10_000u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let d = decide_random(&mut r);
        assert_eq!(d.proba_label1, 0.5);
        if d.label == Label::One {
            ones += 1;
        }
    }
    let share = ones as f64 / 10_000.0;
    assert!((share - 0.5).abs() < 0.02, "{share}");
    let a = decide_random(&mut ChaCha8Rng::seed_from_u64(42));
    let b = decide_random(&mut ChaCha8Rng::seed_from_u64(42));
    assert_eq!(a.label, b.label);
}

#[test]
fn encoding_rules() {
    let cue = ExplanationCue::Attribution(vec![0.3, -0.9, 0.1, 0.0, 0.5]);
    let x = [0.1, 0.2, 0.3, 0.4, 0.5];
    for strategy in Strategy::ALL {
        let p = params(strategy, 1.0, 2);
        let mut m = Memory::new();
        for t in 0..3 {
            encode_trial(&mut m, Stimulus::new(&x, Some(&cue)), Label::One, t, &p).unwrap();
            assert_eq!(m.len(), t + 1);
        }
        let want = if strategy == Strategy::SalientFeatures {
            vec![1, 4]
        } else {
            vec![0, 1, 2, 3, 4]
        };
        assert_eq!(m.traces[0].attended, want);
        assert_eq!(m.traces[2].t_stored, 2);
        assert_eq!(m.traces[0].cue.as_ref(), Some(&cue));
    }
}

#[test]
fn decisions_do_not_touch_memory() {
    let p = params(Strategy::SensitiveFeatures, 3.0, 2);
    let mut part = Participant::new(p);
    part.observe_feedback(Stimulus::new(&[0.1, 0.9], None), Label::One, 0)
        .unwrap();
    let before = part.memory.digest();
    for now in 1..20 {
        part.decide(Stimulus::new(&[0.5, 0.5], None), now, &mut rng()).unwrap();
    }
    assert_eq!(before, part.memory.digest());
}

#[test]
fn strategy_mismatch_is_contract_error() {
    let p = params(Strategy::Random, 1.0, 1);
    assert!(matches!(
        decide_sensitive(Stimulus::new(&[0.5], None), &Memory::new(), 0, &p, &mut rng()),
        Err(Error::Contract(_))
    ));
}

mod properties {
    use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, prop_assume, proptest};

    use super::*;

    fn memory_strategy() -> impl proptest::strategy::Strategy<Value = (Vec<(Vec<f64>, bool)>, Vec<f64>)> {
        (
            prop::collection::vec((prop::collection::vec(0.0..1.0f64, 3), any::<bool>()), 1..10),
            prop::collection::vec(0.0..1.0f64, 3),
        )
    }

    fn build(rows: &[(Vec<f64>, bool)]) -> Memory {
        let mut m = Memory::new();
        for (t, (v, one)) in rows.iter().enumerate() {
            m.push(full_trace(v, if *one { Label::One } else { Label::Two }, t))
                .unwrap();
        }
        m
    }

    proptest! {
        #[test]
        fn gcm_is_a_distribution((rows, x) in memory_strategy(), alpha in 0.0..40.0f64, k in 1usize..4) {
            let m = build(&rows);
            let p = CognitiveParams { alpha, k, ..params(super::Strategy::SensitiveFeatures, alpha, k) };
            let d = decide_sensitive(Stimulus::new(&x, None), &m, rows.len(), &p, &mut rng()).unwrap();
            prop_assert!((0.0..=1.0).contains(&d.proba_label1));
            prop_assert!((d.proba_of(Label::One) + d.proba_of(Label::Two) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn scaling_similarities_keeps_label(sims in prop::collection::vec((any::<bool>(), 1e-6..1.0f64), 1..10), c in 1e-3..1e3f64) {
            let ev: Vec<(Label, f64)> = sims.iter().map(|(o, s)| (if *o { Label::One } else { Label::Two }, *s)).collect();
            let scaled: Vec<(Label, f64)> = ev.iter().map(|(l, s)| (*l, s * c)).collect();
            let a = gcm_predict(&ev).unwrap();
            let b = gcm_predict(&scaled).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            if (a - 0.5).abs() > 1e-9 {
                prop_assert_eq!(a > 0.5, b > 0.5);
            }
        }

        #[test]
        fn recency_raises_similarity(d in 0.0..1.0f64, alpha in 0.0..40.0f64, t_old in 0usize..20, gap in 1usize..20) {
            let now = t_old + gap + 5;
            let a_old = activation((now - t_old + 1) as f64, 0.5).unwrap();
            let a_new = activation((now - (t_old + gap) + 1) as f64, 0.5).unwrap();
            prop_assert!(similarity(d, alpha, a_new) > similarity(d, alpha, a_old));
        }

        #[test]
        fn raising_threshold_shrinks_recall((rows, _x) in memory_strategy(), lo in -5.0..0.0f64, delta in 0.0..3.0f64) {
            let m = build(&rows);
            let now = rows.len() + 3;
            let wide: Vec<usize> = retrieve(&m, now, lo, 0.5).unwrap().into_iter().map(|r| r.index).collect();
            let narrow: Vec<usize> = retrieve(&m, now, lo + delta, 0.5).unwrap().into_iter().map(|r| r.index).collect();
            prop_assert!(narrow.iter().all(|i| wide.contains(i)));
        }

        #[test]
        fn zeta_monotone(votes in prop::collection::vec(-1.0..1.0f64, 3), z1 in 0.1..5.0f64, dz in 0.01..5.0f64) {
            prop_assume!(votes.iter().sum::<f64>().abs() > 1e-6);
            let cue = ExplanationCue::Attribution(votes);
            let at = |zeta: f64| {
                let p = CognitiveParams { zeta, ..params(super::Strategy::AttributionSum, 0.0, 3) };
                decide_attribution_sum(Stimulus::new(&[0.5; 3], Some(&cue)), &Memory::new(), 0, &p, &mut rng()).unwrap().proba_label1
            };
            prop_assert!((at(z1 + dz) - 0.5).abs() > (at(z1) - 0.5).abs());
        }
    }
}
