use std::collections::BTreeSet;

use alsim::dataset::synthetic::gaussian_blobs;
use alsim::dataset::{segment, Dataset, Instance};
use alsim::experiment::*;
use alsim::sampling::PowerSchedule;
use alsim::Error;
use serde_json::{json, Value};

fn blobs() -> Dataset {
    let mut ds = gaussian_blobs(1200, 3, 6, 1.0, 42).unwrap();
    ds.scale_max_abs();
    ds
}

fn config(extra: Value) -> ExperimentConfig {
    let mut base = json!({
        "data": {"kind": "svmlight", "path": "in-memory"},
        "seed_set_size": 60,
        "holdout_size": 200,
        "rounds": 6,
        "batch_size": 30,
        "subset_size": 400,
        "schemes": [{"strategy": {"kind": "passive"}}],
        "base_seed": 5,
        "initial_model": "logistic",
        "rff": {"features": 64, "gamma": 0.5}
    });
    for (k, v) in extra.as_object().unwrap() {
        base[k] = v.clone();
    }
    serde_json::from_value(base).unwrap()
}

fn segmentation_config(extra: Value) -> ExperimentConfig {
    let mut base = json!({
        "data": {"kind": "segmentation", "corpus": {"n_sentences": 1500}},
        "seed_set_size": 200,
        "holdout_size": 300,
        "rounds": 4,
        "batch_size": 50,
        "schemes": [
            {"strategy": {"kind": "passive"}},
            {"strategy": {"kind": "margin_pure", "scorer": "token_tagger"}}
        ],
        "metric": "f1",
        "base_seed": 3
    });
    for (k, v) in extra.as_object().unwrap() {
        base[k] = v.clone();
    }
    serde_json::from_value(base).unwrap()
}

fn no_schedules(cfg: &ExperimentConfig) -> Vec<Option<PowerSchedule>> {
    vec![None; cfg.schemes.len()]
}

#[test]
fn one_passive_round_gives_two_curve_points() {
    let cfg = config(json!({"rounds": 1}));
    let data = PreparedData::Binary(blobs());
    let result = run_trial(&cfg, &data, 0).unwrap();
    let outcome = &result.schemes[0];
    assert_eq!(outcome.scheme, "passive");
    let curve = outcome.curve().unwrap();
    assert_eq!(curve.sizes(), vec![60, 90]);
    assert_eq!(outcome.rounds[1].selections.len(), 30);
    assert!(outcome.rounds[1].selections.iter().all(|s| s.raw_margin.is_none()));
}

#[test]
fn naive_adaptive_matches_pure_scorer_until_the_switch() {
    let cfg = config(json!({
        "schemes": [
            {"strategy": {"kind": "margin_pure", "scorer": "logistic"}},
            {"strategy": {"kind": "margin_naive_adaptive"}}
        ],
        "events": [{"round": 4, "event": {"kind": "model_switch", "to": "kernel_logistic"}}]
    }));
    let data = PreparedData::Binary(blobs());
    let r = run_trial(&cfg, &data, 0).unwrap();
    let (pure, naive) = (&r.schemes[0], &r.schemes[1]);
    for round in 0..4 {
        assert_eq!(pure.selected_ids(round), naive.selected_ids(round), "round {round}");
        assert_eq!(pure.rounds[round].metric, naive.rounds[round].metric);
    }
    assert!((4..=6).any(|round| pure.selected_ids(round) != naive.selected_ids(round)));
    assert_eq!(pure.rounds[4].eval_model, alsim::models::ModelKind::KernelLogistic);
}

#[test]
fn adding_a_scheme_leaves_others_unchanged() {
    let data = PreparedData::Binary(blobs());
    let one = config(json!({"schemes": [{"strategy": {"kind": "margin_pure", "scorer": "logistic"}}]}));
    let two = config(json!({"schemes": [
        {"strategy": {"kind": "passive"}},
        {"strategy": {"kind": "margin_pure", "scorer": "logistic"}}
    ]}));
    let a = run_trial(&one, &data, 2).unwrap();
    let b = run_trial(&two, &data, 2).unwrap();
    assert_eq!(a.schemes[0], b.schemes[1]);
}

#[test]
fn flip_revision_touches_the_target_fraction() {
    let cfg = segmentation_config(json!({
        "events": [{"round": 3, "event": {"kind": "label_revision",
            "rule": {"kind": "flip", "target_fraction": 0.4}}}]
    }));
    let data = prepare_data(&cfg).unwrap();
    let r = run_trial(&cfg, &data, 0).unwrap();
    let revisions: Vec<&EventRecord> = r.events.iter().filter(|e| e.event == "label_revision").collect();
    assert_eq!(revisions.len(), 2);
    for e in revisions {
        assert_eq!(e.round, 3);
        // 200 seed + 2 batches of 50 labeled when the revision fires
        let f = e.touched_fraction.unwrap();
        assert!((f - 0.4).abs() <= 0.5 / 300.0, "{f}");
    }
}

#[test]
fn guideline_revision_relabels_everything_under_the_new_rule() {
    let cfg = segmentation_config(json!({
        "events": [{"round": 2, "event": {"kind": "label_revision",
            "rule": {"kind": "guideline", "rule_version": 2}}}]
    }));
    let PreparedData::Segmentation(corpus) = prepare_data(&cfg).unwrap() else {
        unreachable!()
    };
    let mut state = TrialState::new(&cfg, &corpus, 2, 0, 0, &no_schedules(&cfg)).unwrap();
    state.init().unwrap();
    state.step(1).unwrap();
    state.step(2).unwrap();
    for s in state.holdout() {
        assert_eq!(s.labels, segment(&s.tokens, 2).unwrap());
    }
    for e in state.labeled(1).entries() {
        assert_eq!(e.item.labels, segment(&e.item.tokens, 2).unwrap());
    }
    let touched = state.event_log()[0].touched_fraction.unwrap();
    assert!(touched > 0.2 && touched < 0.6, "{touched}");
}

#[test]
fn experiment_is_reproducible_and_order_independent() {
    let cfg = config(json!({
        "trials": 3,
        "schemes": [
            {"strategy": {"kind": "passive"}},
            {"strategy": {"kind": "margin_pure", "scorer": "kernel_logistic"}}
        ]
    }));
    let data = PreparedData::Binary(blobs());
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_experiment_on(&cfg, &data).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| run_experiment_on(&cfg, &data).unwrap());
    assert_eq!(serial, parallel);
    assert_eq!(serial.trials.len(), 3);
    for (t, trial) in serial.trials.iter().enumerate() {
        assert_eq!(*trial, run_trial(&cfg, &data, t).unwrap());
    }
    assert_ne!(serial.trials[0], serial.trials[1]);
}

#[test]
fn training_sets_never_touch_the_holdout_and_grow_monotonically() {
    let cfg = config(json!({
        "validation_size": 50,
        "best_of_k": 2,
        "schemes": [
            {"strategy": {"kind": "passive"}},
            {"strategy": {"kind": "margin_pure", "scorer": "logistic"}},
            {"strategy": {"kind": "margin_pure", "scorer": "kernel_logistic"}}
        ]
    }));
    let ds = blobs();
    let mut state = TrialState::new(&cfg, &ds.examples, 3, 6, 1, &no_schedules(&cfg)).unwrap();
    let holdout = state.holdout_ids();
    let validation = state.validation_ids();
    assert!(holdout.is_disjoint(&validation));
    state.init().unwrap();
    let ids = |state: &TrialState<alsim::dataset::Example>, i: usize| -> BTreeSet<u64> {
        state.labeled(i).entries().iter().map(|e| e.item.id()).collect()
    };
    let seed_ids = ids(&state, 0);
    let mut previous: Vec<BTreeSet<u64>> = (0..3).map(|i| ids(&state, i)).collect();
    for round in 1..=cfg.rounds {
        state.step(round).unwrap();
        for (i, prev) in previous.iter_mut().enumerate() {
            let now = ids(&state, i);
            assert!(now.is_disjoint(&holdout));
            assert!(now.is_disjoint(&validation));
            assert!(now.is_disjoint(&state.pool_ids(i)));
            assert!(now.is_superset(prev));
            assert!(now.is_superset(&seed_ids));
            assert_eq!(now.len(), prev.len() + cfg.batch_size);
            *prev = now;
        }
    }
    let result = state.finish();
    for s in &result.schemes {
        let sizes: Vec<usize> = s.rounds.iter().map(|r| r.training_size).collect();
        assert_eq!(sizes, (0..=6).map(|r| 60 + 30 * r).collect::<Vec<_>>());
    }
}

#[test]
fn switch_to_current_kind_is_a_logged_no_op() {
    let cfg = config(json!({
        "rounds": 2,
        "events": [{"round": 1, "event": {"kind": "model_switch", "to": "logistic"}}]
    }));
    let data = PreparedData::Binary(blobs());
    let with = run_trial(&cfg, &data, 0).unwrap();
    let without = run_trial(&config(json!({"rounds": 2})), &data, 0).unwrap();
    assert_eq!(with.schemes, without.schemes);
    assert_eq!(with.events.len(), 1);
    assert!(with.events[0].detail.contains("no-op"));
}

#[test]
fn concurrent_switch_and_revision_apply_in_listed_order() {
    let cfg = config(json!({
        "events": [
            {"round": 3, "event": {"kind": "model_switch", "to": "kernel_logistic"}},
            {"round": 3, "event": {"kind": "label_revision", "rule": {"kind": "flip", "target_fraction": 0.2}}}
        ]
    }));
    let data = PreparedData::Binary(blobs());
    let r = run_trial(&cfg, &data, 0).unwrap();
    assert_eq!(r.events[0].event, "model_switch");
    assert_eq!(r.events[1].event, "label_revision");
    assert!(r.events.iter().all(|e| e.round == 3));
    assert_eq!(r.schemes[0].rounds[3].eval_model, alsim::models::ModelKind::KernelLogistic);
}

#[test]
fn expiration_prunes_labels_but_not_the_cumulative_size() {
    let cfg = config(json!({
        "events": [{"round": 4, "event": {"kind": "expiration_policy_change",
            "policy": {"kind": "hard", "max_age": 1}}}]
    }));
    let data = PreparedData::Binary(blobs());
    let r = run_trial(&cfg, &data, 0).unwrap();
    let rounds = &r.schemes[0].rounds;
    // at round 4 only rounds 3 and 4 survive next to the seed
    assert_eq!(rounds[4].retained_size, 60 + 2 * 30);
    assert_eq!(rounds[4].training_size, 60 + 4 * 30);
    assert!(r.events.iter().any(|e| e.event == "expiration" && e.removed == Some(60)));
    r.schemes[0].curve().unwrap();
}

#[test]
fn reseed_can_exhaust_a_tight_pool() {
    let mut ds = blobs();
    ds.examples.truncate(200 + 60 + 6 * 30);
    let cfg = config(json!({
        "schemes": [
            {"strategy": {"kind": "passive"}},
            {"strategy": {"kind": "margin_pure", "scorer": "logistic"}}
        ],
        "events": [{"round": 3, "event": {"kind": "model_switch", "to": "kernel_logistic", "reseed": true}}]
    }));
    let err = run_trial(&cfg, &PreparedData::Binary(ds), 0).unwrap_err();
    match err {
        Error::Trial { round, source, .. } => {
            assert!(round >= 3);
            assert!(matches!(*source, Error::PoolExhausted { .. }));
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn reseed_merges_acquired_labels_into_a_common_seed() {
    let cfg = config(json!({
        "schemes": [
            {"strategy": {"kind": "passive"}},
            {"strategy": {"kind": "margin_pure", "scorer": "logistic"}}
        ],
        "events": [{"round": 3, "event": {"kind": "model_switch", "to": "kernel_logistic", "reseed": true}}]
    }));
    let data = PreparedData::Binary(blobs());
    let r = run_trial(&cfg, &data, 0).unwrap();
    let a = &r.schemes[0].rounds[3];
    let b = &r.schemes[1].rounds[3];
    assert_eq!(a.training_size, b.training_size);
    assert!(a.training_size > 60 + 3 * 30);
    assert!(r.events.iter().any(|e| e.event == "reseed"));
}

#[test]
fn undersized_data_is_a_config_error() {
    let mut ds = blobs();
    ds.examples.truncate(300);
    let cfg = config(json!({}));
    assert!(matches!(
        run_trial(&cfg, &PreparedData::Binary(ds), 0),
        Err(Error::Trial { ref source, .. }) if matches!(**source, Error::Config { .. })
    ));
}

#[test]
fn power_schemes_run_with_fixed_or_fitted_schedules() {
    let cfg = config(json!({
        "rounds": 3,
        "schemes": [
            {"name": "fixed", "strategy": {"kind": "margin_power",
                "schedule": [{"t_start": 0, "a": 1.0, "b": -0.002, "alpha": 1.0}]}},
            {"name": "fitted", "strategy": {"kind": "margin_power",
                "grid": {"t_starts": [0], "candidates": [[[1.0, 0.0, 1.0], [0.0, 0.0, 1.0]]]}}}
        ]
    }));
    let data = PreparedData::Binary(blobs());
    let r = run_experiment_on(&cfg, &data).unwrap();
    let fixed = &r.trials[0].schemes[0];
    // f(t) = 1 - 0.002 t at t = 60 + 30 (r - 1)
    for round in 1..=3 {
        let t = (60 + 30 * (round - 1)) as f64;
        let w = fixed.rounds[round].ensemble_weight.unwrap();
        assert!((w - (1.0 - 0.002 * t)).abs() < 1e-12);
    }
    assert_eq!(r.fitted_schedules.len(), 1);
    assert_eq!(r.fitted_schedules[0].0, "fitted");
    assert!(run_trial(&cfg, &data, 0).is_err());
}
