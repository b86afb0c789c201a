use hda_core::assim::{CycleRecord, WindowObs};
use hda_core::dataset::*;
use hda_core::dynamics::{ColumnInputs, PredictorMode};
use hda_core::net::{ChannelStats, NetParams, NormStats};
use hda_core::parallel::Exec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn record(window: usize, background: Vec<f64>, analysis: Vec<f64>) -> CycleRecord {
    CycleRecord {
        window,
        increment: analysis.iter().zip(&background).map(|(a, b)| a - b).collect(),
        forcing: vec![0.0; background.len()],
        background,
        analysis,
        obs: WindowObs::default(),
        params: None,
        trace: Vec::new(),
    }
}

#[test]
fn pair_counts_and_zero_targets() {
    let recs: Vec<CycleRecord> = (0..2).map(|w| record(w, vec![1.0, 2.0], vec![1.0, 2.0])).collect();
    let pred = make_pairs(&recs, PredictorMode::Prediction).unwrap();
    let post = make_pairs(&recs, PredictorMode::PostProcessing).unwrap();
    assert_eq!((pred.len(), post.len()), (1, 2));
    assert!(pred.iter().chain(&post).all(|p| p.target.iter().all(|&t| t == 0.0)));
    assert!(matches!(
        make_pairs(&recs[..1], PredictorMode::Prediction),
        Err(hda_core::HdaError::EmptyArchive { .. })
    ));
}

#[test]
fn three_window_enumeration() {
    let recs = vec![
        record(5, vec![1.0, 1.0], vec![1.5, 0.0]),
        record(6, vec![2.0, 3.0], vec![2.0, 4.0]),
        record(7, vec![0.0, -1.0], vec![-1.0, -1.0]),
    ];
    let pred = make_pairs(&recs, PredictorMode::Prediction).unwrap();
    assert_eq!(pred.len(), 2);
    assert_eq!((pred[0].window, pred[0].input.clone(), pred[0].target.clone()), (5, vec![1.5, 0.0], vec![0.0, 1.0]));
    assert_eq!((pred[1].window, pred[1].input.clone(), pred[1].target.clone()), (6, vec![2.0, 4.0], vec![-1.0, 0.0]));
    let post = make_pairs(&recs, PredictorMode::PostProcessing).unwrap();
    assert_eq!(post.len(), 3);
    assert_eq!((post[0].input.clone(), post[0].target.clone()), (vec![1.0, 1.0], vec![0.5, -1.0]));
    assert_eq!((post[2].input.clone(), post[2].target.clone()), (vec![0.0, -1.0], vec![-1.0, 0.0]));
}

#[test]
fn reference_partition() {
    let s = partition(1734, 1370).unwrap();
    assert_eq!(s.count(Split::Train), 1370);
    assert_eq!(s.count(Split::Valid), 120);
    assert_eq!(s.count(Split::Test), 120);
    assert_eq!(s.n_batches(), 15);
    assert_eq!(&s.labels[1730..], &[Split::Discard; 4]);
    let last_train = *s.days(Split::Train).last().unwrap();
    assert!(s.days(Split::Valid).iter().chain(&s.days(Split::Test)).all(|&d| d > last_train));
    let one = partition(100 + 24, 100).unwrap();
    assert_eq!((one.count(Split::Valid), one.count(Split::Test)), (8, 8));
}

proptest! {
    #[test]
    fn partition_is_a_chronological_cover(train in 1usize..200, extra in 1usize..200) {
        let s = partition(train + extra, train).unwrap();
        prop_assert_eq!(s.labels.len(), train + extra);
        prop_assert!(s.labels[..train].iter().all(|&l| l == Split::Train));
        prop_assert!(s.labels[train..].iter().all(|&l| l != Split::Train));
        let total = s.count(Split::Train) + s.count(Split::Valid) + s.count(Split::Test) + s.count(Split::Discard);
        prop_assert_eq!(total, train + extra);
        // Pattern position determines the label.
        for (i, &l) in s.labels[train..].iter().enumerate() {
            let pos = i % 24;
            let want = match pos { 0..=3 | 12..=15 => Split::Discard, 4..=11 => Split::Valid, _ => Split::Test };
            prop_assert_eq!(l, want);
        }
    }

    #[test]
    fn relative_wmse_is_nonnegative_and_one_for_zero(seed in 0u64..1000) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<Vec<f64>> = (0..3).map(|_| (0..5).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<Vec<f64>> = (0..3).map(|_| (0..5).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let w: Vec<f64> = (0..5).map(|_| r.random_range(0.1..2.0)).collect();
        prop_assert!(relative_wmse_values(&y, &t, &w).unwrap() >= 0.0);
        let zeros = vec![vec![0.0; 5]; 3];
        prop_assert!((relative_wmse_values(&zeros, &t, &w).unwrap() - 1.0).abs() < 1e-12);
    }
}

fn pairs_with(n: usize, windows: usize, seed: u64) -> Vec<IncrementPair> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..windows)
        .map(|w| IncrementPair {
            window: w,
            mode: PredictorMode::Prediction,
            input: (0..n).map(|_| r.random_range(-5.0..10.0)).collect(),
            target: (0..n).map(|_| r.random_range(-0.3..0.2)).collect(),
        })
        .collect()
}

#[test]
fn norm_stats_use_training_pairs_only() {
    let inputs = ColumnInputs { stencil: 1, cycle_period: 10.0 };
    let mut pairs = pairs_with(6, 32, 1);
    // Sentinel values in the held-out pairs must not leak into the statistics.
    for p in &mut pairs[8..] {
        p.input.iter_mut().for_each(|v| *v = 1e6);
        p.target.iter_mut().for_each(|v| *v = -1e6);
    }
    let spec = partition(32, 8).unwrap();
    let split = assign_splits(&pairs, &spec, 0, 1, None);
    let stats = fit_norm_stats(&split.train, &inputs).unwrap();
    assert_eq!(stats.input.len(), 3);
    assert!(stats.input.iter().all(|s| s.mean.abs() < 100.0));
    assert!(stats.output[0].mean.abs() < 1.0);

    // Normalized training data has zero mean and unit spread.
    let normed: Vec<IncrementPair> = split
        .train
        .iter()
        .map(|p| IncrementPair {
            input: p.input.iter().map(|v| (v - stats.input[1].mean) / stats.input[1].std).collect(),
            target: p.target.iter().map(|v| (v - stats.output[0].mean) / stats.output[0].std).collect(),
            ..p.clone()
        })
        .collect();
    let again = fit_norm_stats(&normed, &inputs).unwrap();
    for s in again.input.iter().chain(&again.output) {
        assert!(s.mean.abs() < 1e-12 && (s.std - 1.0).abs() < 1e-12, "{s:?}");
    }
    let held: Vec<f64> = split.test.iter().flat_map(|p| p.input.iter()).map(|v| (v - stats.input[1].mean) / stats.input[1].std).collect();
    assert_eq!(held.len(), 8 * 6);
    assert!(held.iter().all(|v| *v > 1e4));
}

#[test]
fn constant_channel_is_an_error() {
    let mut pairs = pairs_with(4, 3, 2);
    pairs.iter_mut().for_each(|p| p.target = vec![0.5; 4]);
    assert!(matches!(
        fit_norm_stats(&pairs, &ColumnInputs::default()),
        Err(hda_core::HdaError::ZeroStd { channel: 1 })
    ));
}

#[test]
fn wmse_loss_fixtures_and_gradient() {
    let inputs = ColumnInputs::default();
    let pairs = pairs_with(6, 4, 3);
    let norm = fit_norm_stats(&pairs, &inputs).unwrap();
    let w: Vec<f64> = (0..6).map(|i| 0.5 + i as f64 * 0.1).collect();
    let samples = to_samples(&pairs, &inputs, &norm, &w).unwrap();
    let zero = NetParams::zeros(&[inputs.n_inputs(), 4, 1]);
    let energy: f64 = samples.iter().map(|s| s.weight * s.target[0] * s.target[0]).sum();
    assert!((wmse_loss(&zero, &samples).unwrap() - energy).abs() < 1e-12 * energy);

    let mut net = NetParams::glorot(&[inputs.n_inputs(), 5, 1], &mut ChaCha8Rng::seed_from_u64(4));
    let (loss, grad) = wmse_loss_and_gradient(&net, &samples, Exec::auto());
    assert!((loss - wmse_loss(&net, &samples).unwrap()).abs() < 1e-10 * loss);
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let dir: Vec<f64> = (0..net.n_params()).map(|_| r.random_range(-1.0..1.0)).collect();
    let eps = 1e-6;
    let base = net.params.clone();
    let eval = |net: &mut NetParams, s: f64| {
        net.params = base.iter().zip(&dir).map(|(p, d)| p + s * d).collect();
        wmse_loss(net, &samples).unwrap()
    };
    let fd = (eval(&mut net, eps) - eval(&mut net, -eps)) / (2.0 * eps);
    let an: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
    assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{fd} vs {an}");

    // A one-pair dataset learned exactly by a lookup net: output bias only.
    let single = vec![hda_core::net::ColumnSample { input: vec![0.0; 5], target: vec![0.7], weight: 2.0 }];
    let mut lookup = NetParams::zeros(&[5, 1]);
    *lookup.params.last_mut().unwrap() = 0.7;
    assert_eq!(wmse_loss(&lookup, &single).unwrap(), 0.0);
}

#[test]
fn relative_wmse_anchors() {
    let inputs = ColumnInputs::default();
    let pairs = pairs_with(5, 6, 6);
    let w = ring_weights(5);
    let zero = NetParams::zeros(&[inputs.n_inputs(), 3, 1]);
    assert!((relative_wmse(&zero, &inputs, &pairs, &w, Exec::auto()).unwrap() - 1.0).abs() < 1e-12);
    let targets: Vec<Vec<f64>> = pairs.iter().map(|p| p.target.clone()).collect();
    assert_eq!(relative_wmse_values(&targets, &targets, &w).unwrap(), 0.0);
    let doubled: Vec<Vec<f64>> = targets.iter().map(|t| t.iter().map(|v| 2.0 * v).collect()).collect();
    assert!((relative_wmse_values(&doubled, &targets, &w).unwrap() - 1.0).abs() < 1e-12);
    let zeros = vec![vec![0.0; 5]; 2];
    assert!(matches!(
        relative_wmse_values(&zeros, &zeros, &w),
        Err(hda_core::HdaError::ZeroDenominator(_))
    ));

    // A network with denormalization mean equal to a constant target.
    let mut constant = zero.clone();
    constant = constant
        .with_norm(NormStats { input: vec![], output: vec![ChannelStats { mean: 0.25, std: 1.0 }] })
        .unwrap();
    let flat: Vec<IncrementPair> = pairs.iter().map(|p| IncrementPair { target: vec![0.25; 5], ..p.clone() }).collect();
    assert!(relative_wmse(&constant, &inputs, &flat, &w, Exec::auto()).unwrap() < 1e-24);
}

#[test]
fn size_strategies_front_end() {
    let s = partition(40, 32).unwrap();
    let train = s.days(Split::Train);
    let sel = select_days(&train, 8, SizeStrategy::OldAndNew);
    assert_eq!(sel, vec![0, 4, 8, 12, 16, 20, 24, 28]);
    let pairs = pairs_with(3, 80, 7);
    let split = assign_splits(&pairs, &s, 0, 2, Some(&sel));
    assert_eq!(split.train.len(), 16);
    assert!(split.train.iter().all(|p| sel.contains(&(p.window / 2))));
}
