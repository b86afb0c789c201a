//! Evaluation: offline scores and spectra, forecast verification,
//! significance-tested scorecards, reports and sweeps.

mod forecast;
mod report;
mod scorecard;
mod scores;
mod significance;
mod sweep;

pub use forecast::{forecast_errors, ForecastErrors, ForecastModel, Verification};
pub use report::{DiagnosticsReport, ScoreEntry, ScoreKey, SignificanceEntry, SpectrumEntry, METRIC_CSV_HEADER};
pub use scorecard::{scorecard, ScoreRow, Scorecard, SCORECARD_HEADER};
pub use scores::{bias_variance_decomposition, error_spectra, pearson, temporal_scores, BiasVariance, ErrorSpectra, WindowScore};
pub use significance::{significance, SignificanceConfig, Verdict};
pub use sweep::{sweep, SweepKind, SweepOutcome};
