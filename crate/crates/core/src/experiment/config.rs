use crate::assim::{BModel, CovSpec, MinimizerConfig, ObsConfig, ObsTime};
use crate::diag::SignificanceConfig;
use crate::dynamics::{ColumnInputs, ModelConfig};
use crate::error::{HdaError, Result};
use crate::net::TrainConfig;
use serde::{Deserialize, Serialize};

/// Observation network: every `site_stride`-th site from `site_offset`,
/// observed at the listed steps of each window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObsSpec {
    pub steps: Vec<usize>,
    pub site_stride: usize,
    pub site_offset: usize,
    pub sigma: f64,
}

impl Default for ObsSpec {
    fn default() -> Self {
        ObsSpec {
            steps: vec![5, 10],
            site_stride: 1,
            site_offset: 0,
            sigma: 0.1,
        }
    }
}

impl ObsSpec {
    pub fn to_config(&self, n: usize) -> ObsConfig {
        let sites: Vec<usize> = (self.site_offset..n).step_by(self.site_stride.max(1)).collect();
        ObsConfig {
            times: self
                .steps
                .iter()
                .map(|&step| ObsTime {
                    step,
                    sites: sites.clone(),
                })
                .collect(),
            sigma: self.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSpec {
    pub hidden: Vec<usize>,
    pub inputs: ColumnInputs,
    /// Output standard deviation assumed by networks started from scratch.
    pub scratch_output_std: f64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            hidden: vec![16, 16],
            inputs: ColumnInputs::default(),
            scratch_output_std: 0.05,
        }
    }
}

impl NetworkSpec {
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.inputs.n_inputs()];
        d.extend(&self.hidden);
        d.push(1);
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    /// Consecutive windows forming one day.
    pub windows_per_day: usize,
    /// Fraction of days assigned to training before the split pattern.
    pub train_fraction: f64,
    /// Leading archive windows dropped while the cycling settles.
    pub skip_windows: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            windows_per_day: 2,
            train_fraction: 0.79,
            skip_windows: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowsSpec {
    /// Truth windows integrated and dropped before window 0.
    pub spinup: usize,
    /// Cycled windows forming the offline archive.
    pub offline: usize,
    /// Windows of the online evaluation, following the offline period.
    pub online: usize,
    /// Extra truth windows beyond the online period for forecast verification.
    pub verification: usize,
}

impl Default for WindowsSpec {
    fn default() -> Self {
        WindowsSpec {
            spinup: 200,
            offline: 2000,
            online: 500,
            verification: 20,
        }
    }
}

impl WindowsSpec {
    pub fn total(&self) -> usize {
        self.offline + self.online + self.verification
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnlineSpec {
    /// Parameter standard deviation for pre-trained starts.
    pub p: f64,
    /// Parameter standard deviation for starts from scratch.
    pub scratch_p: f64,
}

impl Default for OnlineSpec {
    fn default() -> Self {
        OnlineSpec { p: 5e-3, scratch_p: 2e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSpec {
    /// Forecast lead times in windows.
    pub leads: Vec<usize>,
    pub significance: SignificanceConfig,
    /// Training truncations of the resolution ladder; `None` is full
    /// resolution, written `"full"`.
    #[serde(with = "ladder")]
    pub resolution_ladder: Vec<Option<usize>>,
    pub size_fractions: Vec<f64>,
    pub p_values: Vec<f64>,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec {
            leads: vec![0, 2, 4, 8, 12, 20],
            significance: SignificanceConfig::default(),
            resolution_ladder: vec![Some(4), Some(8), None],
            size_fractions: vec![0.125, 0.25, 0.5, 1.0],
            p_values: vec![1e-2, 5e-3, 1e-3],
        }
    }
}

mod ladder {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Rung {
        Truncation(usize),
        Full(Full),
    }

    #[derive(Serialize, Deserialize)]
    #[serde(rename_all = "lowercase")]
    enum Full {
        Full,
    }

    pub fn serialize<S: Serializer>(v: &[Option<usize>], s: S) -> Result<S::Ok, S::Error> {
        let rungs: Vec<Rung> = v.iter().map(|k| k.map_or(Rung::Full(Full::Full), Rung::Truncation)).collect();
        rungs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<usize>>, D::Error> {
        let rungs = Vec::<Rung>::deserialize(d)?;
        Ok(rungs
            .into_iter()
            .map(|r| match r {
                Rung::Truncation(k) => Some(k),
                Rung::Full(_) => None,
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub truth: u64,
    pub obs: u64,
    pub background: u64,
    pub init: u64,
    pub training: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            truth: 1,
            obs: 2,
            background: 3,
            init: 4,
            training: 5,
        }
    }
}

impl Seeds {
    /// Replaces every seed by a distinct value derived from `base`.
    pub fn overridden(base: u64) -> Self {
        Seeds {
            truth: base,
            obs: base.wrapping_add(1),
            background: base.wrapping_add(2),
            init: base.wrapping_add(3),
            training: base.wrapping_add(4),
        }
    }
}

/// Full description of an OSSE experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub obs: ObsSpec,
    pub cov: CovSpec,
    pub minimizer: MinimizerConfig,
    pub network: NetworkSpec,
    pub training: TrainConfig,
    pub dataset: DatasetSpec,
    pub windows: WindowsSpec,
    pub online: OnlineSpec,
    pub diagnostics: DiagnosticsSpec,
    pub seeds: Seeds,
    /// Output directory, resolved against the data root when relative.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<std::path::PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelConfig::default(),
            obs: ObsSpec::default(),
            cov: CovSpec {
                b: BModel::Gaussian { sigma: 0.5, length: 0.7 },
                p: OnlineSpec::default().p,
            },
            minimizer: MinimizerConfig::default(),
            network: NetworkSpec::default(),
            training: TrainConfig {
                learning_rate: 3e-3,
                batch_size: 256,
                max_epochs: 60,
                dropout: 0.0,
                patience: 8,
                seed: 5,
            },
            dataset: DatasetSpec::default(),
            windows: WindowsSpec::default(),
            online: OnlineSpec::default(),
            diagnostics: DiagnosticsSpec::default(),
            seeds: Seeds::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.obs.to_config(self.model.n).validate(self.model.n, self.model.steps_per_window)?;
        if self.obs.site_stride == 0 {
            return Err(HdaError::Config("obs.site_stride must be >= 1".into()));
        }
        self.cov.validate()?;
        self.minimizer.validate()?;
        self.training.validate()?;
        self.diagnostics.significance.validate()?;
        if self.dataset.windows_per_day == 0 || !(self.dataset.train_fraction > 0.0 && self.dataset.train_fraction < 1.0) {
            return Err(HdaError::Config("dataset needs windows_per_day >= 1 and train_fraction in (0, 1)".into()));
        }
        if self.network.hidden.contains(&0) || !(self.network.inputs.cycle_period > 0.0) {
            return Err(HdaError::Config("network layers and cycle period must be positive".into()));
        }
        if !(self.online.p > 0.0 && self.online.scratch_p > 0.0 && self.network.scratch_output_std > 0.0) {
            return Err(HdaError::Config("online standard deviations must be positive".into()));
        }
        Ok(())
    }

    /// Canonical JSON of the resolved configuration.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
