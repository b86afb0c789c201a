use crate::assim::CycleRecord;
use crate::dynamics::{Correction, Dynamics, HybridConfig, HybridModel};
use crate::error::{check_len, HdaError, Result};
use crate::parallel::Exec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verification {
    Truth,
    OwnAnalysis,
}

impl Verification {
    pub fn as_str(self) -> &'static str {
        match self {
            Verification::Truth => "truth",
            Verification::OwnAnalysis => "own-analysis",
        }
    }
}

/// Model used to launch forecasts: physics plus an optional network whose
/// forcing is recomputed at the start of every window.
pub struct ForecastModel<'a, D: Dynamics + ?Sized> {
    pub dynamics: &'a D,
    pub dt: f64,
    pub steps_per_window: usize,
    pub hybrid: Option<&'a HybridConfig>,
}

impl<D: Dynamics + ?Sized> ForecastModel<'_, D> {
    /// States at window starts for leads `0..=max_lead`.
    pub fn forecast(&self, x0: &[f64], window: usize, params: Option<&[f64]>, max_lead: usize) -> Result<Vec<Vec<f64>>> {
        let net = match (self.hybrid, params) {
            (Some(h), Some(p)) => {
                let mut net = h.net.clone();
                check_len("forecast parameters", net.n_params(), p.len())?;
                net.params.copy_from_slice(p);
                Some((net, h))
            }
            _ => None,
        };
        let mut out = Vec::with_capacity(max_lead + 1);
        out.push(x0.to_vec());
        for lead in 0..max_lead {
            let model = match &net {
                Some((net, h)) => HybridModel {
                    dynamics: self.dynamics,
                    dt: self.dt,
                    forcing_scale: h.forcing_scale,
                    correction: Some(Correction {
                        net,
                        inputs: &h.inputs,
                        window: (window + lead) as f64,
                    }),
                },
                None => HybridModel::plain(self.dynamics, self.dt),
            };
            let traj = model.integrate(out.last().unwrap(), self.steps_per_window)?;
            out.push(traj.last().to_vec());
        }
        Ok(out)
    }
}

/// Forecast errors of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastErrors {
    pub experiment: String,
    pub variable: String,
    pub verification: Verification,
    /// Lead times in windows.
    pub leads: Vec<usize>,
    /// Start windows of the verified forecasts.
    pub windows: Vec<usize>,
    /// Site-mean squared error, indexed `[lead][forecast]`.
    pub sq_errors: Vec<Vec<f64>>,
}

impl ForecastErrors {
    pub fn rmse(&self) -> Vec<f64> {
        self.sq_errors
            .iter()
            .map(|e| (e.iter().sum::<f64>() / e.len().max(1) as f64).sqrt())
            .collect()
    }

    fn check_compatible(&self, other: &ForecastErrors) -> Result<()> {
        if self.windows != other.windows {
            return Err(HdaError::Mismatched(format!("cycle sets of {} and {}", self.experiment, other.experiment)));
        }
        if self.leads != other.leads || self.verification != other.verification || self.variable != other.variable {
            return Err(HdaError::Mismatched(format!("lead times or verification of {} and {}", self.experiment, other.experiment)));
        }
        Ok(())
    }

    /// Percent change of RMSE relative to `reference`; missing where the
    /// reference RMSE is zero.
    pub fn rmse_change_pct(&self, reference: &ForecastErrors) -> Result<Vec<Option<f64>>> {
        self.check_compatible(reference)?;
        Ok(self
            .rmse()
            .iter()
            .zip(reference.rmse())
            .map(|(e, r)| (r > 0.0).then(|| 100.0 * (e - r) / r))
            .collect())
    }

    /// Per-forecast differences of squared error at lead index `k`.
    pub fn paired_differences(&self, reference: &ForecastErrors, k: usize) -> Result<Vec<f64>> {
        self.check_compatible(reference)?;
        Ok(self.sq_errors[k].iter().zip(&reference.sq_errors[k]).map(|(a, b)| a - b).collect())
    }
}

/// Launches one forecast from every analysis and verifies it at each lead
/// against `truth` (window index to state) or the experiment's own analyses.
/// Only forecasts verifiable at every lead are kept.
pub fn forecast_errors<D: Dynamics + ?Sized>(
    experiment: &str,
    model: &ForecastModel<'_, D>,
    records: &[CycleRecord],
    leads: &[usize],
    verification: Verification,
    truth: &BTreeMap<usize, Vec<f64>>,
    exec: Exec,
) -> Result<ForecastErrors> {
    let own: BTreeMap<usize, &[f64]> = records.iter().map(|r| (r.window, r.analysis.as_slice())).collect();
    let verifying = |w: usize| -> Option<&[f64]> {
        match verification {
            Verification::Truth => truth.get(&w).map(|v| v.as_slice()),
            Verification::OwnAnalysis => own.get(&w).copied(),
        }
    };
    let max_lead = leads.iter().copied().max().unwrap_or(0);
    let usable: Vec<&CycleRecord> = records
        .iter()
        .filter(|r| leads.iter().all(|&l| verifying(r.window + l).is_some()))
        .collect();
    let per_forecast = exec.map(&usable, |r| -> Result<Vec<f64>> {
        let states = model.forecast(&r.analysis, r.window, r.params.as_deref(), max_lead)?;
        leads
            .iter()
            .map(|&l| {
                let v = verifying(r.window + l).unwrap();
                check_len("verifying state", v.len(), states[l].len())?;
                Ok(states[l].iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / v.len() as f64)
            })
            .collect()
    });
    let per_forecast: Vec<Vec<f64>> = per_forecast.into_iter().collect::<Result<_>>()?;
    let sq_errors = (0..leads.len()).map(|k| per_forecast.iter().map(|f| f[k]).collect()).collect();
    Ok(ForecastErrors {
        experiment: experiment.to_string(),
        variable: "x".to_string(),
        verification,
        leads: leads.to_vec(),
        windows: usable.iter().map(|r| r.window).collect(),
        sq_errors,
    })
}
