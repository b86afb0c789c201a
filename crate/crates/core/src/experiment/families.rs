//! Experiment families built on the OSSE pieces: the offline archive, online
//! runs, the training-resolution ladder and the dataset-size and p sweeps.

use super::{
    analysis_rmse, cycle_state, final_third_mean, initial_background, offline_data, run_da, score, train_offline,
    ExperimentConfig, NatureRun, OfflineData,
};
use crate::assim::{CycleMode, CycleRecord, CycleState};
use crate::dataset::{predict_pairs, select_days, IncrementPair, SizeStrategy};
use crate::diag::{error_spectra, sweep, ErrorSpectra, SweepOutcome};
use crate::dynamics::{HybridConfig, PredictorMode};
use crate::error::Result;
use crate::parallel::Exec;
use crate::sphere::SpectralBackend;
use serde::{Deserialize, Serialize};

/// Strong-constraint cycling over the offline period, returning the archive
/// and the state handed on to the online period.
pub fn offline_archive(cfg: &ExperimentConfig, nature: &NatureRun) -> Result<(Vec<CycleRecord>, CycleState)> {
    let mut state = cycle_state(0, initial_background(cfg, nature), CycleMode::Sc, None);
    let records = run_da(cfg, nature, 0..cfg.windows.offline, CycleMode::Sc, None, 0.0, &mut state)?;
    Ok((records, state))
}

/// Cycles the online period from the background left by the offline archive.
pub fn online_run(
    cfg: &ExperimentConfig,
    nature: &NatureRun,
    start: &[f64],
    mode: CycleMode,
    hybrid: Option<&HybridConfig>,
    p_std: f64,
) -> Result<Vec<CycleRecord>> {
    let first = cfg.windows.offline;
    let mut state = cycle_state(first, start.to_vec(), mode, hybrid);
    run_da(cfg, nature, first..first + cfg.windows.online, mode, hybrid, p_std, &mut state)
}

/// Averaged spectra of a network's predictions on `pairs` against their targets.
pub fn network_spectra(cfg: &ExperimentConfig, hybrid: &HybridConfig, pairs: &[IncrementPair], exec: Exec) -> Result<ErrorSpectra> {
    let preds = predict_pairs(&hybrid.net, &hybrid.inputs, pairs, exec)?;
    let inputs: Vec<Vec<f64>> = pairs.iter().map(|p| p.input.clone()).collect();
    let targets: Vec<Vec<f64>> = pairs.iter().map(|p| p.target.clone()).collect();
    error_spectra(&inputs, &targets, &preds, &SpectralBackend::Ring { n: cfg.model.n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    /// Training truncation; `None` is full resolution.
    pub truncation: Option<usize>,
    /// Relative wMSE on the full-resolution test split.
    pub test_score: f64,
    pub spectra: ErrorSpectra,
}

/// Trains one network per truncation on truncated data and evaluates each on
/// the full-resolution test split.
pub fn resolution_ladder(cfg: &ExperimentConfig, data: &OfflineData, jobs: usize, exec: Exec) -> Vec<SweepOutcome<LadderRung>> {
    let points: Vec<(String, Option<usize>)> = cfg
        .diagnostics
        .resolution_ladder
        .iter()
        .map(|k| (k.map_or("full".to_string(), |k| format!("k{k}")), *k))
        .collect();
    sweep(&points, jobs, |k| {
        let train_data = match k {
            Some(k) => data.truncated(*k),
            None => data.clone(),
        };
        let (hybrid, _) = train_offline(cfg, &train_data, &cfg.training, exec)?;
        Ok(LadderRung {
            truncation: *k,
            test_score: score(cfg, &hybrid, &data.pairs.test, exec)?,
            spectra: network_spectra(cfg, &hybrid, &data.pairs.test, exec)?,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePoint {
    pub fraction: f64,
    pub strategy: SizeStrategy,
    pub train_days: usize,
    pub test_score: f64,
}

/// Retrains on a fraction of the training days chosen by `strategy`.
pub fn size_sweep(
    cfg: &ExperimentConfig,
    data: &OfflineData,
    strategy: SizeStrategy,
    jobs: usize,
    exec: Exec,
) -> Vec<SweepOutcome<SizePoint>> {
    let days: Vec<usize> = (0..data.spec.train_days).collect();
    let points: Vec<(String, f64)> = cfg.diagnostics.size_fractions.iter().map(|f| (format!("{f}"), *f)).collect();
    let wpd = cfg.dataset.windows_per_day;
    sweep(&points, jobs, |&fraction| {
        let count = ((fraction * days.len() as f64).round() as usize).max(1);
        let chosen = select_days(&days, count, strategy);
        let (hybrid, _) = train_offline(cfg, &data.with_train_days(&chosen, wpd), &cfg.training, exec)?;
        Ok(SizePoint {
            fraction,
            strategy,
            train_days: chosen.len(),
            test_score: score(cfg, &hybrid, &data.pairs.test, exec)?,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PPoint {
    pub p: f64,
    pub final_third_rmse: f64,
}

/// Online NN 4D-Var runs from `hybrid` for each configured parameter spread.
pub fn p_sweep(
    cfg: &ExperimentConfig,
    nature: &NatureRun,
    start: &[f64],
    hybrid: &HybridConfig,
    jobs: usize,
) -> Vec<SweepOutcome<PPoint>> {
    let points: Vec<(String, f64)> = cfg.diagnostics.p_values.iter().map(|p| (format!("{p}"), *p)).collect();
    sweep(&points, jobs, |&p| {
        let recs = online_run(cfg, nature, start, CycleMode::Nn4dvar, Some(hybrid), p)?;
        Ok(PPoint {
            p,
            final_third_rmse: final_third_mean(&analysis_rmse(&recs, nature)),
        })
    })
}

/// Archive and both offline-trained networks of the default pipeline.
pub struct OfflineStage {
    pub records: Vec<CycleRecord>,
    /// Background at the first online window.
    pub online_start: Vec<f64>,
    pub prediction: (OfflineData, HybridConfig),
    pub post_processing: (OfflineData, HybridConfig),
}

pub fn offline_stage(cfg: &ExperimentConfig, nature: &NatureRun, exec: Exec) -> Result<OfflineStage> {
    let (records, state) = offline_archive(cfg, nature)?;
    let train = |mode| -> Result<(OfflineData, HybridConfig)> {
        let data = offline_data(cfg, &records, mode)?;
        let (h, _) = train_offline(cfg, &data, &cfg.training, exec)?;
        Ok((data, h))
    };
    let prediction = train(PredictorMode::Prediction)?;
    let post_processing = train(PredictorMode::PostProcessing)?;
    Ok(OfflineStage {
        online_start: state.background,
        records,
        prediction,
        post_processing,
    })
}
