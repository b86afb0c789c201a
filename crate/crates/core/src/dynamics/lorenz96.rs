use super::Dynamics;
use crate::error::{check_len, HdaError, Result};
use serde::{Deserialize, Serialize};

/// Two-scale Lorenz-96 constants and window discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Number of slow sites.
    pub n: usize,
    /// Fast variables per slow site.
    pub j: usize,
    pub forcing: f64,
    pub h: f64,
    pub c: f64,
    pub b: f64,
    pub dt: f64,
    pub steps_per_window: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n: 36,
            j: 10,
            forcing: 10.0,
            h: 1.0,
            c: 10.0,
            b: 10.0,
            dt: 0.005,
            steps_per_window: 10,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(HdaError::Config(format!("need at least 4 sites, got {}", self.n)));
        }
        if !(self.dt > 0.0) || self.steps_per_window < 1 || self.j < 1 {
            return Err(HdaError::Config("dt, steps_per_window and j must be positive".into()));
        }
        Ok(())
    }

    pub fn truth(&self) -> TwoScaleLorenz96 {
        TwoScaleLorenz96 { cfg: self.clone() }
    }

    pub fn forecast(&self) -> Lorenz96 {
        Lorenz96 {
            n: self.n,
            forcing: self.forcing,
        }
    }

    /// Window length in model time units.
    pub fn window_length(&self) -> f64 {
        self.dt * self.steps_per_window as f64
    }
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Two-scale tendencies. The fast variables form one periodic ring of
/// length `n * j`, fast variable `k` belonging to slow site `k / j`.
pub fn truth_tendency(state: &[f64], cfg: &ModelConfig) -> Result<Vec<f64>> {
    let (n, j) = (cfg.n, cfg.j);
    check_len("two-scale state", n + n * j, state.len())?;
    let mut out = vec![0.0; state.len()];
    two_scale_tendency(cfg, state, &mut out);
    Ok(out)
}

fn two_scale_tendency(cfg: &ModelConfig, state: &[f64], out: &mut [f64]) {
    let (n, j) = (cfg.n, cfg.j);
    let nf = n * j;
    let (x, y) = state.split_at(n);
    let coupling = cfg.h * cfg.c / cfg.b;
    for i in 0..n {
        let ii = i as isize;
        let sum_y: f64 = y[i * j..(i + 1) * j].iter().sum();
        out[i] = -x[wrap(ii - 1, n)] * (x[wrap(ii - 2, n)] - x[wrap(ii + 1, n)]) - x[i]
            + cfg.forcing
            - coupling * sum_y;
    }
    for k in 0..nf {
        let kk = k as isize;
        out[n + k] = -cfg.c * cfg.b * y[wrap(kk + 1, nf)] * (y[wrap(kk + 2, nf)] - y[wrap(kk - 1, nf)])
            - cfg.c * y[k]
            + coupling * x[k / j];
    }
}

/// One-scale tendencies `-x_{i-1}(x_{i-2} - x_{i+1}) - x_i + F`.
pub fn forecast_tendency(state: &[f64], cfg: &ModelConfig) -> Result<Vec<f64>> {
    check_len("forecast state", cfg.n, state.len())?;
    let model = cfg.forecast();
    let mut out = vec![0.0; cfg.n];
    model.tendency(state, &mut out);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TwoScaleLorenz96 {
    pub cfg: ModelConfig,
}

impl Dynamics for TwoScaleLorenz96 {
    fn dim(&self) -> usize {
        self.cfg.n * (1 + self.cfg.j)
    }
    fn tendency(&self, x: &[f64], out: &mut [f64]) {
        two_scale_tendency(&self.cfg, x, out);
    }
    fn tendency_tl(&self, _: &[f64], _: &[f64], _: &mut [f64]) {
        unimplemented!("the nature run is never linearized")
    }
    fn tendency_adj(&self, _: &[f64], _: &[f64], _: &mut [f64]) {
        unimplemented!("the nature run is never linearized")
    }
}

/// One-scale Lorenz-96, the imperfect forecast model.
#[derive(Debug, Clone, PartialEq)]
pub struct Lorenz96 {
    pub n: usize,
    pub forcing: f64,
}

impl Dynamics for Lorenz96 {
    fn dim(&self) -> usize {
        self.n
    }

    fn tendency(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let (m2, m1, p1) = ((i + n - 2) % n, (i + n - 1) % n, (i + 1) % n);
            out[i] = (x[p1] - x[m2]) * x[m1] - x[i] + self.forcing;
        }
    }

    fn tendency_tl(&self, x: &[f64], dx: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let (m2, m1, p1) = ((i + n - 2) % n, (i + n - 1) % n, (i + 1) % n);
            out[i] = (dx[p1] - dx[m2]) * x[m1] + (x[p1] - x[m2]) * dx[m1] - dx[i];
        }
    }

    fn tendency_adj(&self, x: &[f64], lambda: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let (m2, m1, p1) = ((i + n - 2) % n, (i + n - 1) % n, (i + 1) % n);
            let l = lambda[i];
            out[p1] += x[m1] * l;
            out[m2] -= x[m1] * l;
            out[m1] += (x[p1] - x[m2]) * l;
            out[i] -= l;
        }
    }
}

/// Linear vector field `dx/dt = A x`, row-major `A`. Used to pose exactly
/// quadratic assimilation problems.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Dynamics for LinearModel {
    fn dim(&self) -> usize {
        self.n
    }
    fn tendency(&self, x: &[f64], out: &mut [f64]) {
        self.tendency_tl(x, x, out);
    }
    fn tendency_tl(&self, _: &[f64], dx: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.a[i * self.n..(i + 1) * self.n]
                .iter()
                .zip(dx)
                .map(|(a, d)| a * d)
                .sum();
        }
    }
    fn tendency_adj(&self, _: &[f64], lambda: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            for k in 0..self.n {
                out[k] += self.a[i * self.n + k] * lambda[i];
            }
        }
    }
}
