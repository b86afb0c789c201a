use hda_core::assim::CycleMode;
use hda_core::dynamics::PredictorMode;
use hda_core::experiment::*;
use hda_core::io::{decode_hda, encode_hda, HdaFile};
use hda_core::parallel::Exec;
use serde_json::json;

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.windows.spinup = 20;
    cfg.model.n = 12;
    cfg
}

fn reload(c: hda_core::io::Container) -> hda_core::io::Container {
    match decode_hda(&encode_hda(&HdaFile::Container(c))).unwrap() {
        HdaFile::Container(c) => c,
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn nature_run_is_seeded() {
    let cfg = small();
    let a = gen_truth(&cfg, 5).unwrap();
    let b = gen_truth(&cfg, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.states.len(), 6);
    assert_eq!(a.final_state.len(), 12 * 11);
    let mut other = cfg.clone();
    other.seeds.obs += 1;
    let c = gen_truth(&other, 5).unwrap();
    assert_eq!(a.states, c.states);
    assert_ne!(a.obs, c.obs);
}

#[test]
fn nature_archive_round_trip_is_exact() {
    let cfg = small();
    let nature = gen_truth(&cfg, 4).unwrap();
    let header = json!({"config": cfg, "n_windows": 4});
    let c = reload(nature_to_container(&nature, header.clone()));
    assert_eq!(c.header, header);
    assert_eq!(container_to_nature(&c).unwrap(), nature);
}

#[test]
fn zero_windows_give_an_empty_valid_archive() {
    let cfg = small();
    let nature = gen_truth(&cfg, 0).unwrap();
    assert_eq!(nature.n_windows(), 0);
    assert_eq!(nature.states.len(), 1);
    let back = container_to_nature(&reload(nature_to_container(&nature, json!({})))).unwrap();
    assert_eq!(back, nature);

    let c = reload(records_to_container(&[], json!({"mode": "sc"})));
    assert!(container_to_records(&c).unwrap().is_empty());
}

#[test]
fn cycle_archive_round_trip_keeps_states_and_costs() {
    let cfg = small();
    let nature = gen_truth(&cfg, 4).unwrap();
    let mut state = cycle_state(0, initial_background(&cfg, &nature), CycleMode::Sc, None);
    let records = run_da(&cfg, &nature, 0..4, CycleMode::Sc, None, 0.0, &mut state).unwrap();
    assert_eq!(state.window, 4);
    let back = container_to_records(&reload(records_to_container(&records, json!({})))).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in records.iter().zip(&back) {
        assert_eq!((a.window, &a.background, &a.analysis), (b.window, &b.background, &b.analysis));
        assert_eq!((&a.increment, &a.forcing, &a.obs, &a.params), (&b.increment, &b.forcing, &b.obs, &b.params));
        let costs = |r: &hda_core::assim::CycleRecord| r.trace.iter().map(|t| (t.cost_before, t.cost_after)).collect::<Vec<_>>();
        assert_eq!(costs(a), costs(b));
    }

    // The same run again is bitwise identical.
    let mut again = cycle_state(0, initial_background(&cfg, &nature), CycleMode::Sc, None);
    assert_eq!(run_da(&cfg, &nature, 0..4, CycleMode::Sc, None, 0.0, &mut again).unwrap(), records);
}

#[test]
fn run_must_start_at_the_state_window() {
    let cfg = small();
    let nature = gen_truth(&cfg, 3).unwrap();
    let mut state = cycle_state(1, initial_background(&cfg, &nature), CycleMode::Sc, None);
    assert!(run_da(&cfg, &nature, 0..2, CycleMode::Sc, None, 0.0, &mut state).is_err());
    assert!(run_da(&cfg, &nature, 1..9, CycleMode::Sc, None, 0.0, &mut state).is_err());
}

#[test]
fn network_modes_need_a_network() {
    let cfg = small();
    let nature = gen_truth(&cfg, 2).unwrap();
    let mut state = cycle_state(0, initial_background(&cfg, &nature), CycleMode::Nn4dvar, None);
    assert!(run_da(&cfg, &nature, 0..2, CycleMode::Nn4dvar, None, 1e-3, &mut state).is_err());
}

#[test]
fn scratch_network_starts_a_viable_online_run() {
    let cfg = small();
    let nature = gen_truth(&cfg, 3).unwrap();
    let scratch = scratch_network(&cfg, nature.climatology()).unwrap();
    let mut state = cycle_state(0, initial_background(&cfg, &nature), CycleMode::Nn4dvar, Some(&scratch));
    assert_eq!(state.params.as_ref(), Some(&scratch.net.params));
    let recs = run_da(&cfg, &nature, 0..3, CycleMode::Nn4dvar, Some(&scratch), cfg.online.scratch_p, &mut state).unwrap();
    assert!(recs.iter().all(|r| r.params.is_some()));
    assert_ne!(state.params.as_ref(), Some(&scratch.net.params));
}

#[test]
fn offline_splits_follow_the_day_pattern() {
    let mut cfg = small();
    cfg.dataset.train_fraction = 0.5;
    cfg.dataset.skip_windows = 0;
    let nature = gen_truth(&cfg, 98).unwrap();
    let mut state = cycle_state(0, initial_background(&cfg, &nature), CycleMode::Sc, None);
    let records = run_da(&cfg, &nature, 0..98, CycleMode::Sc, None, 0.0, &mut state).unwrap();
    let data = offline_data(&cfg, &records, PredictorMode::PostProcessing).unwrap();
    // 49 days: 25 train, then 4 discard, 8 valid, 4 discard, 8 test.
    assert_eq!(data.spec.train_days, 25);
    assert_eq!(data.pairs.train.len(), 50);
    assert_eq!(data.pairs.valid.len(), 16);
    assert_eq!(data.pairs.test.len(), 16);
    let last_train = data.pairs.train.iter().map(|p| p.window).max().unwrap();
    assert!(data.pairs.valid.iter().chain(&data.pairs.test).all(|p| p.window > last_train));

    let pred = offline_data(&cfg, &records, PredictorMode::Prediction).unwrap();
    assert!(pred.pairs.train.iter().all(|p| p.mode == PredictorMode::Prediction));

    let (hybrid, report) = train_offline(&cfg, &data, &hda_core::net::TrainConfig { max_epochs: 2, ..cfg.training }, Exec::Sequential).unwrap();
    assert!(report.epochs.len() <= 2);
    let s = score(&cfg, &hybrid, &data.pairs.test, Exec::Sequential).unwrap();
    assert!(s.is_finite() && s >= 0.0);

    let c = reload(dataset_to_container(&data, 2, json!({"kind": "dataset"})));
    assert_eq!(c.header["dataset"]["n_test"], 16);
    assert_eq!(container_to_dataset(&c).unwrap(), data);
}

#[test]
fn ladder_rungs_accept_full() {
    let d: DiagnosticsSpec = serde_json::from_value(json!({"resolution_ladder": [4, "full"]})).unwrap();
    assert_eq!(d.resolution_ladder, vec![Some(4), None]);
    assert_eq!(serde_json::to_value(&d).unwrap()["resolution_ladder"], json!([4, "full"]));
    assert!(serde_json::from_value::<DiagnosticsSpec>(json!({"resolution_ladder": ["half"]})).is_err());
}

#[test]
fn config_rejects_unknown_keys_and_round_trips() {
    let cfg = ExperimentConfig::default();
    cfg.validate().unwrap();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"obs": {"sigma": 0.1, "sigmaa": 1}}"#).is_err());
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    let partial: ExperimentConfig = serde_json::from_str(r#"{"seeds": {"truth": 9}}"#).unwrap();
    assert_eq!(partial.seeds.truth, 9);
    assert_eq!(partial.seeds.obs, cfg.seeds.obs);
}

#[test]
fn final_third_helpers() {
    let v: Vec<f64> = (0..9).map(f64::from).collect();
    assert_eq!(final_third(&v), &[6.0, 7.0, 8.0]);
    assert_eq!(final_third_mean(&v), 7.0);
}
