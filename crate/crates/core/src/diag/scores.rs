use crate::error::{check_len, HdaError, Result};
use crate::sphere::SpectralBackend;
use serde::{Deserialize, Serialize};

/// Scores of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScore {
    pub window: usize,
    /// Missing when the target is identically zero.
    pub relative_wmse: Option<f64>,
    /// Weighted Pearson correlation over sites; missing for constant fields.
    pub correlation: Option<f64>,
}

fn weighted_mean(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>()
}

fn weighted_var(v: &[f64], w: &[f64]) -> f64 {
    let m = weighted_mean(v, w);
    v.iter().zip(w).map(|(a, b)| b * (a - m).powi(2)).sum::<f64>() / w.iter().sum::<f64>()
}

/// Weighted Pearson correlation; `None` when either field is constant.
pub fn pearson(a: &[f64], b: &[f64], w: &[f64]) -> Result<Option<f64>> {
    check_len("correlation operand", a.len(), b.len())?;
    check_len("correlation weights", a.len(), w.len())?;
    if a.len() < 2 {
        return Ok(None);
    }
    let (ma, mb) = (weighted_mean(a, w), weighted_mean(b, w));
    let cov: f64 = a.iter().zip(b).zip(w).map(|((x, y), w)| w * (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().zip(w).map(|(x, w)| w * (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().zip(w).map(|(y, w)| w * (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return Ok(None);
    }
    Ok(Some(cov / (va * vb).sqrt()))
}

/// Per-window relative wMSE and spatial correlation.
pub fn temporal_scores(windows: &[usize], predictions: &[Vec<f64>], targets: &[Vec<f64>], weights: &[f64]) -> Result<Vec<WindowScore>> {
    check_len("predictions", targets.len(), predictions.len())?;
    check_len("windows", targets.len(), windows.len())?;
    windows
        .iter()
        .zip(predictions.iter().zip(targets))
        .map(|(&window, (y, t))| {
            check_len("prediction", weights.len(), y.len())?;
            check_len("target", weights.len(), t.len())?;
            let num: f64 = weights.iter().zip(y.iter().zip(t)).map(|(w, (y, t))| w * (t - y).powi(2)).sum();
            let den: f64 = weights.iter().zip(t).map(|(w, t)| w * t * t).sum();
            Ok(WindowScore {
                window,
                relative_wmse: (den > 0.0).then(|| num / den),
                correlation: pearson(y, t, weights)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasVariance {
    /// Share of the wMSE due to the difference of the weighted spatial means.
    pub bias_share: f64,
    /// Mean spatial variance of the targets over that of the predictions;
    /// missing when the predictions have no spatial variance.
    pub variance_ratio: Option<f64>,
}

/// Splits the weighted error of a set of fields into squared spatial-mean
/// bias and the remainder, and compares spatial variances.
pub fn bias_variance_decomposition(predictions: &[Vec<f64>], targets: &[Vec<f64>], weights: &[f64]) -> Result<BiasVariance> {
    check_len("predictions", targets.len(), predictions.len())?;
    let wsum: f64 = weights.iter().sum();
    let (mut total, mut bias, mut vt, mut vp) = (0.0, 0.0, 0.0, 0.0);
    for (y, t) in predictions.iter().zip(targets) {
        check_len("prediction", weights.len(), y.len())?;
        check_len("target", weights.len(), t.len())?;
        total += weights.iter().zip(y.iter().zip(t)).map(|(w, (y, t))| w * (y - t).powi(2)).sum::<f64>();
        bias += wsum * (weighted_mean(y, weights) - weighted_mean(t, weights)).powi(2);
        vt += weighted_var(t, weights);
        vp += weighted_var(y, weights);
    }
    if vt == 0.0 {
        return Err(HdaError::ZeroDenominator("target spatial variance"));
    }
    if total == 0.0 {
        return Err(HdaError::ZeroDenominator("weighted error"));
    }
    Ok(BiasVariance {
        bias_share: bias / total,
        variance_ratio: (vp > 0.0).then(|| vt / vp),
    })
}

/// Averaged spectra of the offline quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSpectra {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub prediction: Vec<f64>,
    pub error: Vec<f64>,
    /// Error over target power per degree; missing where the target has none.
    pub relative: Vec<Option<f64>>,
}

/// Mean power spectra over samples and the relative error spectrum.
pub fn error_spectra(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    predictions: &[Vec<f64>],
    backend: &SpectralBackend,
) -> Result<ErrorSpectra> {
    check_len("predictions", targets.len(), predictions.len())?;
    check_len("inputs", targets.len(), inputs.len())?;
    let nd = backend.n_degrees();
    let mean_spec = |fields: &mut dyn Iterator<Item = Vec<f64>>| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; nd];
        let mut count = 0usize;
        for f in fields {
            for (a, p) in acc.iter_mut().zip(backend.power_spectrum(&f)?) {
                *a += p;
            }
            count += 1;
        }
        if count > 0 {
            acc.iter_mut().for_each(|a| *a /= count as f64);
        }
        Ok(acc)
    };
    let input = mean_spec(&mut inputs.iter().cloned())?;
    let target = mean_spec(&mut targets.iter().cloned())?;
    let prediction = mean_spec(&mut predictions.iter().cloned())?;
    let error = mean_spec(
        &mut predictions
            .iter()
            .zip(targets)
            .map(|(y, t)| y.iter().zip(t).map(|(a, b)| a - b).collect()),
    )?;
    // Degrees whose target power is round-off relative to the total carry no
    // meaningful ratio.
    let floor = 1e-20 * target.iter().sum::<f64>();
    let relative = error
        .iter()
        .zip(&target)
        .map(|(e, t)| (*t > floor).then(|| e / t))
        .collect();
    Ok(ErrorSpectra {
        input,
        target,
        prediction,
        error,
        relative,
    })
}
