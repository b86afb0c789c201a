//! The desk-scale OSSE: nature run, cycled archives, offline datasets and
//! training, online runs, and the experiment families built on them.

mod archive;
mod config;
mod families;

pub use archive::{
    container_to_dataset, container_to_nature, container_to_records, dataset_to_container, nature_to_container,
    records_to_container,
};
pub use families::{
    network_spectra, offline_archive, offline_stage, online_run, p_sweep, resolution_ladder, size_sweep, LadderRung,
    OfflineStage, PPoint, SizePoint,
};
pub use config::{
    DatasetSpec, DiagnosticsSpec, ExperimentConfig, NetworkSpec, ObsSpec, OnlineSpec, Seeds, WindowsSpec,
};

use crate::assim::{make_observations, window_rng, BackgroundCov, CycleMode, CycleRecord, CycleSetup, CycleState, WindowObs};
use crate::dataset::{
    assign_splits, fit_norm_stats, make_pairs, partition, relative_wmse, ring_weights, to_samples, IncrementPair,
    SplitPairs, SplitSpec,
};
use crate::dynamics::{rk4_step, HybridConfig, Lorenz96, PredictorMode, TwoScaleLorenz96};
use crate::error::{HdaError, Result};
use crate::net::{train, ChannelStats, NetParams, NormStats, TrainConfig, TrainReport};
use crate::parallel::Exec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeMap;
use std::ops::Range;

/// Truth slow states at window starts plus the observations of every window.
#[derive(Debug, Clone, PartialEq)]
pub struct NatureRun {
    /// `states[w]` is the slow state at the start of window `w`; one more
    /// entry than there are windows.
    pub states: Vec<Vec<f64>>,
    pub obs: Vec<WindowObs>,
    /// Full two-scale state after the last window.
    pub final_state: Vec<f64>,
}

impl NatureRun {
    pub fn n_windows(&self) -> usize {
        self.obs.len()
    }

    pub fn truth_map(&self) -> BTreeMap<usize, Vec<f64>> {
        self.states.iter().cloned().enumerate().collect()
    }

    /// Mean and standard deviation of all truth slow values.
    pub fn climatology(&self) -> ChannelStats {
        let vals: Vec<f64> = self.states.iter().flatten().copied().collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        ChannelStats { mean, std }
    }
}

/// Integrates the two-scale truth for `n_windows` windows after spin-up and
/// draws the observations.
pub fn gen_truth(cfg: &ExperimentConfig, n_windows: usize) -> Result<NatureRun> {
    cfg.validate()?;
    let m = &cfg.model;
    let truth = TwoScaleLorenz96 { cfg: m.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.truth);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut x: Vec<f64> = (0..m.n).map(|_| m.forcing + unit.sample(&mut rng)).collect();
    x.extend((0..m.n * m.j).map(|_| 0.1 * unit.sample(&mut rng)));
    for step in 0..cfg.windows.spinup * m.steps_per_window {
        x = rk4_step(&truth, &x, m.dt);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(HdaError::NonFinite { step });
        }
    }
    let obs_cfg = cfg.obs.to_config(m.n);
    let mut states = vec![x[..m.n].to_vec()];
    let mut obs = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let mut traj = vec![x[..m.n].to_vec()];
        for step in 0..m.steps_per_window {
            x = rk4_step(&truth, &x, m.dt);
            if !x.iter().all(|v| v.is_finite()) {
                return Err(HdaError::WindowFailed {
                    window: w,
                    source: Box::new(HdaError::NonFinite { step: step + 1 }),
                });
            }
            traj.push(x[..m.n].to_vec());
        }
        obs.push(make_observations(&traj, &obs_cfg, &mut window_rng(cfg.seeds.obs, w as u64))?);
        states.push(x[..m.n].to_vec());
    }
    Ok(NatureRun {
        states,
        obs,
        final_state: x,
    })
}

/// First background: truth perturbed by the background-error spread.
pub fn initial_background(cfg: &ExperimentConfig, nature: &NatureRun) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.background);
    let normal = Normal::new(0.0, cfg.cov.b.sigma()).unwrap();
    nature.states[0].iter().map(|v| v + normal.sample(&mut rng)).collect()
}

pub fn background_cov(cfg: &ExperimentConfig) -> Result<BackgroundCov> {
    BackgroundCov::new(&cfg.cov.b, cfg.model.n)
}

/// Cycles over `windows` of the nature run from `state`.
pub fn run_da(
    cfg: &ExperimentConfig,
    nature: &NatureRun,
    windows: Range<usize>,
    mode: CycleMode,
    hybrid: Option<&HybridConfig>,
    p_std: f64,
    state: &mut CycleState,
) -> Result<Vec<CycleRecord>> {
    if windows.end > nature.n_windows() {
        return Err(HdaError::OutOfRange {
            what: "nature-run window",
            index: windows.end,
            len: nature.n_windows(),
        });
    }
    if state.window != windows.start {
        return Err(HdaError::Mismatched(format!(
            "cycle state at window {} but run starts at {}",
            state.window, windows.start
        )));
    }
    let forecast = Lorenz96 {
        n: cfg.model.n,
        forcing: cfg.model.forcing,
    };
    let b = background_cov(cfg)?;
    let setup = CycleSetup {
        dynamics: &forecast,
        dt: cfg.model.dt,
        steps_per_window: cfg.model.steps_per_window,
        b: &b,
        sigma_obs: cfg.obs.sigma,
        minimizer: cfg.minimizer,
        mode,
        hybrid,
        p_std,
    };
    crate::assim::run_cycles(&setup, state, &nature.obs[windows])
}

/// Starting state of a cycling run with the parameters of `hybrid`.
pub fn cycle_state(window: usize, background: Vec<f64>, mode: CycleMode, hybrid: Option<&HybridConfig>) -> CycleState {
    CycleState {
        window,
        background,
        params: hybrid.filter(|_| mode.uses_network()).map(|h| h.net.params.clone()),
    }
}

/// Pairs of an archive split by day.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineData {
    pub mode: PredictorMode,
    pub spec: SplitSpec,
    pub first_window: usize,
    pub pairs: SplitPairs,
}

/// Increment pairs of an archive after the skipped leading windows, split by day.
pub fn offline_data(cfg: &ExperimentConfig, records: &[CycleRecord], mode: PredictorMode) -> Result<OfflineData> {
    let records = &records[cfg.dataset.skip_windows.min(records.len())..];
    let pairs = make_pairs(records, mode)?;
    let first_window = records[0].window;
    let wpd = cfg.dataset.windows_per_day;
    let n_days = (pairs.last().unwrap().window - first_window) / wpd + 1;
    let train_days = ((n_days as f64) * cfg.dataset.train_fraction).round() as usize;
    let spec = partition(n_days, train_days)?;
    let pairs = assign_splits(&pairs, &spec, first_window, wpd, None);
    Ok(OfflineData {
        mode,
        spec,
        first_window,
        pairs,
    })
}

impl OfflineData {
    /// Same data with the training split restricted to the given days.
    pub fn with_train_days(&self, days: &[usize], windows_per_day: usize) -> OfflineData {
        let keep: std::collections::BTreeSet<usize> = days.iter().copied().collect();
        let mut out = self.clone();
        out.pairs.train.retain(|p| keep.contains(&crate::dataset::day_of(p, self.first_window, windows_per_day)));
        out
    }

    /// Same data with every input and target projected onto ring wavenumbers `<= k`.
    pub fn truncated(&self, k: usize) -> OfflineData {
        let tr = |ps: &[IncrementPair]| -> Vec<IncrementPair> {
            ps.iter()
                .map(|p| IncrementPair {
                    input: crate::sphere::ring_truncate(&p.input, k),
                    target: crate::sphere::ring_truncate(&p.target, k),
                    ..p.clone()
                })
                .collect()
        };
        OfflineData {
            pairs: SplitPairs {
                train: tr(&self.pairs.train),
                valid: tr(&self.pairs.valid),
                test: tr(&self.pairs.test),
            },
            ..self.clone()
        }
    }
}

/// Untrained network of the configured architecture with the given statistics.
pub fn network_template(cfg: &ExperimentConfig, norm: NormStats, seed: u64) -> Result<NetParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    NetParams::glorot(&cfg.network.dims(), &mut rng).with_norm(norm)
}

pub fn hybrid_config(cfg: &ExperimentConfig, net: NetParams, mode: PredictorMode) -> Result<HybridConfig> {
    HybridConfig::new(net, mode, cfg.network.inputs, cfg.model.steps_per_window)
}

/// Trains a fresh network on the training split with early stopping on
/// the validation split.
pub fn train_offline(cfg: &ExperimentConfig, data: &OfflineData, training: &TrainConfig, exec: Exec) -> Result<(HybridConfig, TrainReport)> {
    let inputs = &cfg.network.inputs;
    let norm = fit_norm_stats(&data.pairs.train, inputs)?;
    let weights = ring_weights(cfg.model.n);
    let train_set = to_samples(&data.pairs.train, inputs, &norm, &weights)?;
    let valid_set = to_samples(&data.pairs.valid, inputs, &norm, &weights)?;
    let mut net = network_template(cfg, norm, cfg.seeds.init)?;
    let report = train(&mut net, &train_set, &valid_set, training, exec)?;
    Ok((hybrid_config(cfg, net, data.mode)?, report))
}

/// Relative wMSE of a network on a list of pairs.
pub fn score(cfg: &ExperimentConfig, hybrid: &HybridConfig, pairs: &[IncrementPair], exec: Exec) -> Result<f64> {
    relative_wmse(&hybrid.net, &hybrid.inputs, pairs, &ring_weights(cfg.model.n), exec)
}

/// Network with seeded Glorot weights and climatological normalization for
/// online training from scratch.
pub fn scratch_network(cfg: &ExperimentConfig, climatology: ChannelStats) -> Result<HybridConfig> {
    let norm = NormStats {
        input: vec![climatology; cfg.network.inputs.n_state()],
        output: vec![ChannelStats {
            mean: 0.0,
            std: cfg.network.scratch_output_std,
        }],
    };
    hybrid_config(cfg, network_template(cfg, norm, cfg.seeds.init)?, PredictorMode::Prediction)
}

/// Root-mean-square analysis error against truth, one value per record.
pub fn analysis_rmse(records: &[CycleRecord], nature: &NatureRun) -> Vec<f64> {
    records
        .iter()
        .map(|r| {
            let t = &nature.states[r.window];
            (r.analysis.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / t.len() as f64).sqrt()
        })
        .collect()
}

/// Mean of the last third of a series.
pub fn final_third_mean(v: &[f64]) -> f64 {
    let tail = &v[v.len() - v.len() / 3..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// The last third of a series.
pub fn final_third(v: &[f64]) -> &[f64] {
    &v[v.len() - v.len() / 3..]
}
