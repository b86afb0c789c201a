use crate::error::{HdaError, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignificanceConfig {
    pub level: f64,
    /// Factor applied to the confidence-interval half-width.
    pub inflation: f64,
    /// Number of independent tests for the Sidak correction.
    pub n_tests: usize,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        SignificanceConfig {
            level: 0.95,
            inflation: 1.25,
            n_tests: 1,
        }
    }
}

impl SignificanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) || !(self.inflation >= 1.0) || self.n_tests < 1 {
            return Err(HdaError::Config("significance needs level in (0,1), inflation >= 1, n_tests >= 1".into()));
        }
        Ok(())
    }

    /// Per-test level `1 - (1 - alpha)^(1/N)`.
    pub fn corrected_alpha(&self) -> f64 {
        let alpha = 1.0 - self.level;
        -((-alpha).ln_1p() / self.n_tests as f64).exp_m1()
    }
}

/// Outcome of a paired test on the differences `a - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub mean: f64,
    /// Inflated confidence-interval half-width.
    pub half_width: f64,
    /// Two-sided p-value of the deflated statistic `t / inflation`.
    pub pvalue: f64,
    pub corrected_alpha: f64,
    pub significant: bool,
}

/// Two-sided paired t-test. `None` for fewer than two samples or a zero
/// sample variance with a nonzero mean.
pub fn significance(differences: &[f64], cfg: &SignificanceConfig) -> Result<Option<Verdict>> {
    cfg.validate()?;
    let n = differences.len();
    let corrected_alpha = cfg.corrected_alpha();
    if n < 2 {
        return Ok(None);
    }
    let mean = differences.iter().sum::<f64>() / n as f64;
    let var = differences.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok((mean == 0.0).then_some(Verdict {
            mean,
            half_width: 0.0,
            pvalue: 1.0,
            corrected_alpha,
            significant: false,
        }));
    }
    let se = (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| HdaError::Config(e.to_string()))?;
    let crit = dist.inverse_cdf(1.0 - corrected_alpha / 2.0);
    let half_width = crit * se * cfg.inflation;
    let t = mean / se / cfg.inflation;
    let pvalue = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(Some(Verdict {
        mean,
        half_width,
        pvalue,
        corrected_alpha,
        significant: mean.abs() > half_width,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidak_closed_form() {
        let cfg = SignificanceConfig { level: 0.95, inflation: 1.0, n_tests: 20 };
        assert!((cfg.corrected_alpha() - (1.0 - 0.95f64.powf(1.0 / 20.0))).abs() < 1e-12);
        assert!((cfg.corrected_alpha() - 0.002561).abs() < 1e-6);
    }

    #[test]
    fn standard_t_test_when_uncorrected() {
        // t_{0.975,3} = 3.182446.
        let d = [0.0, 1.0, 2.0, 1.0];
        let mean = 1.0;
        let sd = (d.iter().map(|x: &f64| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        let cfg = SignificanceConfig { level: 0.95, inflation: 1.0, n_tests: 1 };
        let v = significance(&d, &cfg).unwrap().unwrap();
        assert!((v.half_width - 3.182446305284263 * sd / 2.0).abs() < 1e-9);
        assert!(!v.significant);
    }

    #[test]
    fn identical_samples_are_not_significant() {
        let v = significance(&[0.0; 5], &SignificanceConfig::default()).unwrap().unwrap();
        assert!(!v.significant && v.mean == 0.0);
        assert!(significance(&[1.0; 5], &SignificanceConfig::default()).unwrap().is_none());
        assert!(significance(&[1.0], &SignificanceConfig::default()).unwrap().is_none());
    }
}
