//! Offline datasets built from cycling archives: increment pairs, the
//! chronological split, normalization statistics and the weighted losses.

use crate::assim::CycleRecord;
use crate::dynamics::{ColumnInputs, Correction, PredictorMode};
use crate::error::{check_len, HdaError, Result};
use crate::net::{batch_loss_and_gradient, ChannelStats, ColumnSample, NetParams, NormStats};
use crate::parallel::Exec;
use serde::{Deserialize, Serialize};

mod split;
pub use split::{partition, select_days, SizeStrategy, Split, SplitSpec, PATTERN};

/// Predictor state and increment target of one window pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementPair {
    /// Window of the predictor state; also drives the time predictors.
    pub window: usize,
    pub mode: PredictorMode,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Prediction: `x^a(t) -> x^a(t+1) - x^b(t+1)`. Post-processing:
/// `x^b(t) -> x^a(t) - x^b(t)`.
pub fn make_pairs(records: &[CycleRecord], mode: PredictorMode) -> Result<Vec<IncrementPair>> {
    if records.len() < 2 {
        return Err(HdaError::EmptyArchive {
            got: records.len(),
            need: 2,
        });
    }
    Ok(match mode {
        PredictorMode::Prediction => records
            .windows(2)
            .map(|w| IncrementPair {
                window: w[0].window,
                mode,
                input: w[0].analysis.clone(),
                target: w[1].increment.clone(),
            })
            .collect(),
        PredictorMode::PostProcessing => records
            .iter()
            .map(|r| IncrementPair {
                window: r.window,
                mode,
                input: r.background.clone(),
                target: r.increment.clone(),
            })
            .collect(),
    })
}

/// Day index of a pair, counting from `first_window`.
pub fn day_of(pair: &IncrementPair, first_window: usize, windows_per_day: usize) -> usize {
    (pair.window - first_window) / windows_per_day
}

/// Pairs of each split, in chronological order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitPairs {
    pub train: Vec<IncrementPair>,
    pub valid: Vec<IncrementPair>,
    pub test: Vec<IncrementPair>,
}

/// Routes pairs to splits by day. Pairs of discarded days, of days outside
/// the spec, and of training days not in `train_days` (when given) are dropped.
pub fn assign_splits(
    pairs: &[IncrementPair],
    spec: &SplitSpec,
    first_window: usize,
    windows_per_day: usize,
    train_days: Option<&[usize]>,
) -> SplitPairs {
    let keep_train: Option<std::collections::BTreeSet<usize>> = train_days.map(|d| d.iter().copied().collect());
    let mut out = SplitPairs::default();
    for p in pairs {
        let day = day_of(p, first_window, windows_per_day);
        match spec.labels.get(day) {
            Some(Split::Train) if keep_train.as_ref().is_none_or(|k| k.contains(&day)) => out.train.push(p.clone()),
            Some(Split::Valid) => out.valid.push(p.clone()),
            Some(Split::Test) => out.test.push(p.clone()),
            _ => {}
        }
    }
    out
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, s) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = s / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Per-channel statistics of the stencil inputs and the increment output,
/// from training pairs only. The extra predictors are not normalized.
pub fn fit_norm_stats(train: &[IncrementPair], inputs: &ColumnInputs) -> Result<NormStats> {
    if train.is_empty() {
        return Err(HdaError::Config("empty training split".into()));
    }
    let n_state = inputs.n_state();
    let mut input = Vec::with_capacity(n_state);
    for c in 0..n_state {
        let offset = c as isize - inputs.stencil as isize;
        let vals = train.iter().flat_map(move |p| {
            let n = p.input.len() as isize;
            (0..n).map(move |i| p.input[(i + offset).rem_euclid(n) as usize])
        });
        let (mean, std) = mean_std(vals);
        input.push(ChannelStats { mean, std });
    }
    let (mean, std) = mean_std(train.iter().flat_map(|p| p.target.iter().copied()));
    let stats = NormStats {
        input,
        output: vec![ChannelStats { mean, std }],
    };
    for (channel, s) in stats.input.iter().chain(&stats.output).enumerate() {
        if !(s.std > 0.0) {
            return Err(HdaError::ZeroStd { channel });
        }
    }
    Ok(stats)
}

/// Expands pairs into normalized per-site column samples with site weights.
pub fn to_samples(pairs: &[IncrementPair], inputs: &ColumnInputs, norm: &NormStats, weights: &[f64]) -> Result<Vec<ColumnSample>> {
    let mut out = Vec::with_capacity(pairs.len() * weights.len());
    for p in pairs {
        check_len("pair input", weights.len(), p.input.len())?;
        check_len("pair target", weights.len(), p.target.len())?;
        for (i, &w) in weights.iter().enumerate() {
            out.push(ColumnSample {
                input: norm.normalize(&inputs.site_input(&p.input, i, p.window as f64)),
                target: norm.normalize_output(&[p.target[i]]),
                weight: w,
            });
        }
    }
    Ok(out)
}

/// Weighted squared error `sum w ||z^o - G(p, z^i)||^2` in normalized space.
pub fn wmse_loss(net: &NetParams, samples: &[ColumnSample]) -> Result<f64> {
    let mut s = 0.0;
    for c in samples {
        let y = net.forward(&c.input, None)?;
        s += c.weight * y.iter().zip(&c.target).map(|(y, t)| (t - y).powi(2)).sum::<f64>();
    }
    Ok(s)
}

/// [`wmse_loss`] and its parameter gradient.
pub fn wmse_loss_and_gradient(net: &NetParams, samples: &[ColumnSample], exec: Exec) -> (f64, Vec<f64>) {
    let refs: Vec<&ColumnSample> = samples.iter().collect();
    let (mean, mut grad) = batch_loss_and_gradient(net, &refs, None, exec);
    let wsum: f64 = samples.iter().map(|s| s.weight).sum();
    grad.iter_mut().for_each(|g| *g *= wsum);
    (mean * wsum, grad)
}

/// Physical-space per-site prediction for one pair.
pub fn predict_pair(net: &NetParams, inputs: &ColumnInputs, pair: &IncrementPair) -> Result<Vec<f64>> {
    Correction {
        net,
        inputs,
        window: pair.window as f64,
    }
    .forcing(&pair.input)
}

/// Predictions for many pairs, order preserving.
pub fn predict_pairs(net: &NetParams, inputs: &ColumnInputs, pairs: &[IncrementPair], exec: Exec) -> Result<Vec<Vec<f64>>> {
    exec.map(pairs, |p| predict_pair(net, inputs, p)).into_iter().collect()
}

/// `sum w (t - y)^2 / sum w t^2` over all fields; sites carry `weights`.
pub fn relative_wmse_values(predictions: &[Vec<f64>], targets: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
    check_len("predictions", targets.len(), predictions.len())?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (y, t) in predictions.iter().zip(targets) {
        check_len("prediction", weights.len(), y.len())?;
        check_len("target", weights.len(), t.len())?;
        for ((w, y), t) in weights.iter().zip(y).zip(t) {
            num += w * (t - y).powi(2);
            den += w * t * t;
        }
    }
    if den == 0.0 {
        return Err(HdaError::ZeroDenominator("relative wMSE"));
    }
    Ok(num / den)
}

/// Relative weighted MSE of the network in physical space.
pub fn relative_wmse(net: &NetParams, inputs: &ColumnInputs, pairs: &[IncrementPair], weights: &[f64], exec: Exec) -> Result<f64> {
    let preds = predict_pairs(net, inputs, pairs, exec)?;
    let targets: Vec<Vec<f64>> = pairs.iter().map(|p| p.target.clone()).collect();
    relative_wmse_values(&preds, &targets, weights)
}

/// Uniform unit site weights of the ring grid.
pub fn ring_weights(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

/// Serializable summary of a dataset build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub mode: PredictorMode,
    pub first_window: usize,
    pub windows_per_day: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
}
