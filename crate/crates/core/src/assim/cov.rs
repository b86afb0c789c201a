use crate::error::{HdaError, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Background-error covariance model on the periodic site ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BModel {
    Diagonal { sigma: f64 },
    /// Variance `sigma^2` and a wrapped Gaussian correlation: the sum of
    /// `exp(-(d + kN)^2 / (2 length^2))` over all periodic images, rescaled to
    /// one at `d = 0`. Lengths are in sites.
    Gaussian { sigma: f64, length: f64 },
}

impl BModel {
    pub fn sigma(&self) -> f64 {
        match *self {
            BModel::Diagonal { sigma } | BModel::Gaussian { sigma, .. } => sigma,
        }
    }

    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        match *self {
            BModel::Diagonal { sigma } => DMatrix::from_diagonal_element(n, n, sigma * sigma),
            BModel::Gaussian { sigma, length } => {
                let images = (6.0 * length / n as f64).ceil() as i64 + 1;
                let wrapped = |d: f64| -> f64 {
                    (-images..=images)
                        .map(|k| {
                            let e = d + (k * n as i64) as f64;
                            (-e * e / (2.0 * length * length)).exp()
                        })
                        .sum()
                };
                let c0 = wrapped(0.0);
                DMatrix::from_fn(n, n, |i, j| sigma * sigma * wrapped(i.abs_diff(j) as f64) / c0)
            }
        }
    }
}

/// Covariances of one assimilation problem: `B` from a model, `R = sigma_obs^2 I`,
/// `P = p^2 I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovSpec {
    pub b: BModel,
    /// Standard deviation of the parameter background error.
    pub p: f64,
}

impl CovSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.b {
            BModel::Diagonal { sigma } => sigma > 0.0,
            BModel::Gaussian { sigma, length } => sigma > 0.0 && length > 0.0,
        };
        if !ok || !(self.p > 0.0) {
            return Err(HdaError::Config("covariance standard deviations and length scales must be positive".into()));
        }
        Ok(())
    }
}

/// Symmetric square root and inverse square root of `B`.
#[derive(Debug, Clone)]
pub struct BackgroundCov {
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
}

/// Eigenvalues below this fraction of the largest are treated as singular.
const SINGULAR_RATIO: f64 = 1e-12;

impl BackgroundCov {
    pub fn new(model: &BModel, n: usize) -> Result<Self> {
        Self::from_matrix(model.matrix(n))
    }

    pub fn from_matrix(b: DMatrix<f64>) -> Result<Self> {
        let asym = (&b - b.transpose()).amax();
        if asym > 1e-12 * b.amax() {
            return Err(HdaError::CovarianceSingular { min_eigenvalue: f64::NAN });
        }
        let eig = SymmetricEigen::new(b);
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(min > SINGULAR_RATIO * max) {
            return Err(HdaError::CovarianceSingular { min_eigenvalue: min });
        }
        let v = &eig.eigenvectors;
        let scaled = |f: fn(f64) -> f64| {
            let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
            v * d * v.transpose()
        };
        Ok(BackgroundCov {
            sqrt: scaled(f64::sqrt),
            inv_sqrt: scaled(|l| 1.0 / l.sqrt()),
        })
    }

    pub fn dim(&self) -> usize {
        self.sqrt.nrows()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        &self.sqrt * &self.sqrt
    }

    /// `B^{1/2} v`; the square root is symmetric, so this is also its transpose.
    pub fn apply_sqrt(&self, v: &[f64]) -> Vec<f64> {
        (&self.sqrt * DVector::from_column_slice(v)).data.into()
    }

    pub fn apply_inv_sqrt(&self, v: &[f64]) -> Vec<f64> {
        (&self.inv_sqrt * DVector::from_column_slice(v)).data.into()
    }

    /// `B^{-1} v`.
    pub fn apply_inv(&self, v: &[f64]) -> Vec<f64> {
        self.apply_inv_sqrt(&self.apply_inv_sqrt(v))
    }

    /// `v^T B^{-1} v`.
    pub fn inv_quadratic(&self, v: &[f64]) -> f64 {
        self.apply_inv_sqrt(v).iter().map(|a| a * a).sum()
    }
}
