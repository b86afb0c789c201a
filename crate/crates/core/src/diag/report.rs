use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScoreKey {
    pub metric: String,
    pub experiment: String,
    pub variable: String,
    pub split: String,
    pub lead: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    #[serde(flatten)]
    pub key: ScoreKey,
    /// Missing values stay `None`.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub experiment: String,
    pub quantity: String,
    pub variable: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceEntry {
    #[serde(flatten)]
    pub key: ScoreKey,
    pub statistic: f64,
    pub corrected_alpha: f64,
    pub pvalue: f64,
    pub significant: bool,
}

/// Keyed scores, spectra and significance records, kept sorted by key so
/// serialization does not depend on insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub scores: Vec<ScoreEntry>,
    pub spectra: Vec<SpectrumEntry>,
    pub significance: Vec<SignificanceEntry>,
}

pub const METRIC_CSV_HEADER: &str = "experiment,variable,split,lead,value";

impl DiagnosticsReport {
    pub fn insert(&mut self, key: ScoreKey, value: Option<f64>) {
        let value = value.filter(|v| v.is_finite());
        match self.scores.binary_search_by(|e| e.key.cmp(&key)) {
            Ok(i) => self.scores[i].value = value,
            Err(i) => self.scores.insert(i, ScoreEntry { key, value }),
        }
    }

    pub fn score(&self, metric: &str, experiment: &str, variable: &str, split: &str, lead: Option<usize>) -> Option<f64> {
        let key = ScoreKey {
            metric: metric.into(),
            experiment: experiment.into(),
            variable: variable.into(),
            split: split.into(),
            lead,
        };
        self.scores
            .binary_search_by(|e| e.key.cmp(&key))
            .ok()
            .and_then(|i| self.scores[i].value)
    }

    pub fn push_spectrum(&mut self, entry: SpectrumEntry) {
        let k = |e: &SpectrumEntry| (e.experiment.clone(), e.quantity.clone(), e.variable.clone());
        let pos = self.spectra.partition_point(|e| k(e) < k(&entry));
        match self.spectra.get(pos) {
            Some(e) if k(e) == k(&entry) => self.spectra[pos] = entry,
            _ => self.spectra.insert(pos, entry),
        }
    }

    pub fn push_significance(&mut self, entry: SignificanceEntry) {
        let pos = self.significance.partition_point(|e| e.key < entry.key);
        match self.significance.get(pos) {
            Some(e) if e.key == entry.key => self.significance[pos] = entry,
            _ => self.significance.insert(pos, entry),
        }
    }

    /// Keyed union; entries of `other` replace equal keys.
    pub fn merge(&mut self, other: DiagnosticsReport) {
        for e in other.scores {
            self.insert(e.key, e.value);
        }
        for s in other.spectra {
            self.push_spectrum(s);
        }
        for s in other.significance {
            self.push_significance(s);
        }
    }

    pub fn metrics(&self) -> Vec<String> {
        let mut m: Vec<String> = self.scores.iter().map(|e| e.key.metric.clone()).collect();
        m.dedup();
        m
    }

    /// One metric as CSV with a fixed header; missing values are empty cells.
    pub fn metric_csv(&self, metric: &str) -> String {
        let mut s = String::from(METRIC_CSV_HEADER);
        s.push('\n');
        for e in self.scores.iter().filter(|e| e.key.metric == metric) {
            let lead = e.key.lead.map(|l| l.to_string()).unwrap_or_default();
            let value = e.value.map(|v| v.to_string()).unwrap_or_default();
            writeln!(s, "{},{},{},{},{}", e.key.experiment, e.key.variable, e.key.split, lead, value).unwrap();
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
