use crate::error::{HdaError, Result};
use crate::parallel::map_bounded;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    DatasetSize,
    Resolution,
    PValue,
}

impl std::str::FromStr for SweepKind {
    type Err = HdaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dataset-size" => Ok(SweepKind::DatasetSize),
            "resolution" => Ok(SweepKind::Resolution),
            "p-value" => Ok(SweepKind::PValue),
            _ => Err(HdaError::Config(format!("unknown sweep kind `{s}`"))),
        }
    }
}

/// Result of one sweep member; failures are kept as messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome<R> {
    pub label: String,
    pub result: std::result::Result<R, String>,
}

/// Runs every labelled point with at most `jobs` workers. Outcomes are in
/// point order whatever the scheduling.
pub fn sweep<T, R, F>(points: &[(String, T)], jobs: usize, run: F) -> Vec<SweepOutcome<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    map_bounded(jobs, points, |(label, p)| SweepOutcome {
        label: label.clone(),
        result: run(p).map_err(|e| e.to_string()),
    })
}
