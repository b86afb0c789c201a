use crate::error::{HdaError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Sites observed at one step of the window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObsTime {
    pub step: usize,
    pub sites: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObsConfig {
    pub times: Vec<ObsTime>,
    pub sigma: f64,
}

impl ObsConfig {
    /// Same sites at every listed step.
    pub fn uniform(steps: &[usize], sites: &[usize], sigma: f64) -> Self {
        ObsConfig {
            times: steps
                .iter()
                .map(|&step| ObsTime {
                    step,
                    sites: sites.to_vec(),
                })
                .collect(),
            sigma,
        }
    }

    pub fn validate(&self, n_sites: usize, steps_per_window: usize) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(HdaError::Config(format!("observation sigma must be positive, got {}", self.sigma)));
        }
        for t in &self.times {
            if t.step > steps_per_window {
                return Err(HdaError::OutOfRange {
                    what: "observation step",
                    index: t.step,
                    len: steps_per_window + 1,
                });
            }
            if let Some(&s) = t.sites.iter().find(|&&s| s >= n_sites) {
                return Err(HdaError::OutOfRange {
                    what: "observed site",
                    index: s,
                    len: n_sites,
                });
            }
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.times.iter().map(|t| t.sites.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObsRecord {
    pub step: usize,
    pub sites: Vec<usize>,
    pub values: Vec<f64>,
}

/// Observations of one window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowObs {
    pub records: Vec<ObsRecord>,
}

impl WindowObs {
    pub fn count(&self) -> usize {
        self.records.iter().map(|r| r.values.len()).sum()
    }

    /// Flattened values in record order.
    pub fn values(&self) -> Vec<f64> {
        self.records.iter().flat_map(|r| r.values.iter().copied()).collect()
    }
}

/// Generator for the observation noise of `window`, independent across windows.
pub fn window_rng(seed: u64, window: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(window);
    rng
}

/// Samples `trajectory[step][site]` at the configured times and adds
/// `N(0, sigma^2)` noise.
pub fn make_observations<R: Rng + ?Sized>(trajectory: &[Vec<f64>], cfg: &ObsConfig, rng: &mut R) -> Result<WindowObs> {
    let normal = Normal::new(0.0, cfg.sigma).map_err(|e| HdaError::Config(e.to_string()))?;
    let mut records = Vec::with_capacity(cfg.times.len());
    for t in &cfg.times {
        let state = trajectory.get(t.step).ok_or(HdaError::OutOfRange {
            what: "observation step",
            index: t.step,
            len: trajectory.len(),
        })?;
        let values = t
            .sites
            .iter()
            .map(|&s| {
                let truth = *state.get(s).ok_or(HdaError::OutOfRange {
                    what: "observed site",
                    index: s,
                    len: state.len(),
                })?;
                Ok(truth + normal.sample(rng))
            })
            .collect::<Result<Vec<f64>>>()?;
        records.push(ObsRecord {
            step: t.step,
            sites: t.sites.clone(),
            values,
        });
    }
    Ok(WindowObs { records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj() -> Vec<Vec<f64>> {
        (0..4).map(|k| (0..6).map(|i| (k * 10 + i) as f64).collect()).collect()
    }

    #[test]
    fn tiny_sigma_returns_truth() {
        let cfg = ObsConfig::uniform(&[0, 3], &[1, 4], 1e-300);
        let obs = make_observations(&traj(), &cfg, &mut window_rng(1, 0)).unwrap();
        assert_eq!(obs.values(), vec![1.0, 4.0, 31.0, 34.0]);
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let cfg = ObsConfig::uniform(&[1, 2], &[0, 2, 5], 0.3);
        let a = make_observations(&traj(), &cfg, &mut window_rng(9, 4)).unwrap();
        let b = make_observations(&traj(), &cfg, &mut window_rng(9, 4)).unwrap();
        let c = make_observations(&traj(), &cfg, &mut window_rng(9, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_standard_deviation() {
        let sites: Vec<usize> = (0..6).collect();
        let cfg = ObsConfig::uniform(&[0], &sites, 0.5);
        let t = traj();
        let mut rng = window_rng(3, 0);
        let mut sum2 = 0.0;
        let mut count = 0;
        while count < 100_002 {
            let o = make_observations(&t, &cfg, &mut rng).unwrap();
            for (v, truth) in o.values().iter().zip(&t[0]) {
                sum2 += (v - truth).powi(2);
                count += 1;
            }
        }
        let std = (sum2 / count as f64).sqrt();
        assert!((std / 0.5 - 1.0).abs() < 0.01, "{std}");
    }

    #[test]
    fn out_of_range_configs_are_rejected() {
        let cfg = ObsConfig::uniform(&[11], &[0], 1.0);
        assert!(cfg.validate(6, 10).is_err());
        let cfg = ObsConfig::uniform(&[1], &[6], 1.0);
        assert!(cfg.validate(6, 10).is_err());
        assert!(ObsConfig::uniform(&[1], &[0], 0.0).validate(6, 10).is_err());
    }
}
