use super::forecast::ForecastErrors;
use super::significance::{significance, SignificanceConfig};
use crate::error::{HdaError, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub experiment: String,
    pub reference: String,
    pub variable: String,
    pub lead: usize,
    pub rmse_change_pct: Option<f64>,
    pub significant: Option<bool>,
    pub pvalue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    pub verification: String,
    pub rows: Vec<ScoreRow>,
}

pub const SCORECARD_HEADER: &str = "experiment,reference,variable,lead,rmse_change_pct,significant,pvalue";

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl Scorecard {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SCORECARD_HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.experiment,
                r.reference,
                r.variable,
                r.lead,
                cell(r.rmse_change_pct),
                cell(r.significant),
                cell(r.pvalue)
            )
            .unwrap();
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scorecard serializes")
    }

    pub fn significant_cells(&self) -> usize {
        self.rows.iter().filter(|r| r.significant == Some(true)).count()
    }
}

/// Normalized RMSE change of every experiment against the one named
/// `reference`, with paired significance per lead. Rows follow the order of
/// `experiments`, then lead.
pub fn scorecard(experiments: &[ForecastErrors], reference: &str, cfg: &SignificanceConfig) -> Result<Scorecard> {
    let reference_errors = experiments
        .iter()
        .find(|e| e.experiment == reference)
        .ok_or_else(|| HdaError::Mismatched(format!("no reference experiment `{reference}`")))?;
    let mut rows = Vec::new();
    for e in experiments {
        let change = e.rmse_change_pct(reference_errors)?;
        for (k, &lead) in e.leads.iter().enumerate() {
            let verdict = significance(&e.paired_differences(reference_errors, k)?, cfg)?;
            rows.push(ScoreRow {
                experiment: e.experiment.clone(),
                reference: reference.to_string(),
                variable: e.variable.clone(),
                lead,
                rmse_change_pct: change[k],
                significant: verdict.map(|v| v.significant),
                pvalue: verdict.map(|v| v.pvalue),
            });
        }
    }
    Ok(Scorecard {
        verification: reference_errors.verification.as_str().to_string(),
        rows,
    })
}
