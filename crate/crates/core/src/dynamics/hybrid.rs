use super::rk4::{rk4_adj_step, rk4_step, rk4_tlm_step};
use super::Dynamics;
use crate::error::{check_len, HdaError, Result};
use crate::net::NetParams;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// How the offline training pairs were formed for a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorMode {
    /// Analysis at `t` predicts the increment at `t + 1`.
    Prediction,
    /// Background at `t` predicts the increment at `t`.
    PostProcessing,
}

impl PredictorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictorMode::Prediction => "prediction",
            PredictorMode::PostProcessing => "post-processing",
        }
    }
}

impl std::str::FromStr for PredictorMode {
    type Err = HdaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prediction" => Ok(PredictorMode::Prediction),
            "post-processing" | "postprocessing" => Ok(PredictorMode::PostProcessing),
            _ => Err(HdaError::Config(format!("unknown predictor mode `{s}`"))),
        }
    }
}

/// Layout of the per-site network input: the state on a stencil of
/// half-width `stencil` around the site, then four unnormalized extra
/// predictors `sin/cos(2 pi i / N)` and `sin/cos(2 pi t / period)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnInputs {
    pub stencil: usize,
    /// Period of the time predictors, in windows.
    pub cycle_period: f64,
}

impl Default for ColumnInputs {
    fn default() -> Self {
        ColumnInputs {
            stencil: 0,
            cycle_period: 20.0,
        }
    }
}

pub const N_EXTRA_PREDICTORS: usize = 4;

impl ColumnInputs {
    pub fn n_state(&self) -> usize {
        2 * self.stencil + 1
    }

    pub fn n_inputs(&self) -> usize {
        self.n_state() + N_EXTRA_PREDICTORS
    }

    /// Ring indices of the stencil around `site`.
    pub fn stencil_sites(&self, site: usize, n: usize) -> impl Iterator<Item = usize> {
        let s = self.stencil as isize;
        let site = site as isize;
        (-s..=s).map(move |d| (site + d).rem_euclid(n as isize) as usize)
    }

    pub fn site_input(&self, x: &[f64], site: usize, window: f64) -> Vec<f64> {
        let n = x.len();
        let mut v: Vec<f64> = self.stencil_sites(site, n).map(|k| x[k]).collect();
        let a = 2.0 * PI * site as f64 / n as f64;
        let t = 2.0 * PI * window / self.cycle_period;
        v.extend([a.sin(), a.cos(), t.sin(), t.cos()]);
        v
    }
}

/// Network correction of the hybrid model, owned form.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridConfig {
    pub net: NetParams,
    pub mode: PredictorMode,
    pub inputs: ColumnInputs,
    /// Fraction of the window forcing added after each model step.
    pub forcing_scale: f64,
}

impl HybridConfig {
    pub fn new(net: NetParams, mode: PredictorMode, inputs: ColumnInputs, steps_per_window: usize) -> Result<Self> {
        check_len("network inputs", inputs.n_inputs(), net.n_inputs())?;
        check_len("network outputs", 1, net.n_outputs())?;
        Ok(HybridConfig {
            net,
            mode,
            inputs,
            forcing_scale: 1.0 / steps_per_window as f64,
        })
    }

    pub fn correction(&self, window: f64) -> Correction<'_> {
        Correction {
            net: &self.net,
            inputs: &self.inputs,
            window,
        }
    }
}

/// Network evaluated at one window: maps the initial state to a per-site
/// forcing.
#[derive(Debug, Clone, Copy)]
pub struct Correction<'a> {
    pub net: &'a NetParams,
    pub inputs: &'a ColumnInputs,
    /// Window index used by the time predictors.
    pub window: f64,
}

impl Correction<'_> {
    pub fn forcing(&self, x0: &[f64]) -> Result<Vec<f64>> {
        (0..x0.len())
            .map(|i| Ok(self.net.predict(&self.inputs.site_input(x0, i, self.window))?[0]))
            .collect()
    }

    /// Tangent of the forcing along `(dx0, dp)`.
    pub fn forcing_tl(&self, x0: &[f64], dx0: &[f64], dp: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = x0.len();
        let n_state = self.inputs.n_state();
        (0..n)
            .map(|i| {
                let input = self.inputs.site_input(x0, i, self.window);
                let mut din = vec![0.0; input.len()];
                for (d, k) in din[..n_state].iter_mut().zip(self.inputs.stencil_sites(i, n)) {
                    *d = dx0[k];
                }
                Ok(self.net.predict_jvp(&input, &din, dp)?[0])
            })
            .collect()
    }

    /// Adds `(dw/dx0)^T lambda_w` into `gx0` and `(dw/dp)^T lambda_w` into `gp`.
    pub fn forcing_adj(&self, x0: &[f64], lambda_w: &[f64], gx0: &mut [f64], gp: &mut [f64]) {
        let n = x0.len();
        let n_state = self.inputs.n_state();
        for i in 0..n {
            if lambda_w[i] == 0.0 {
                continue;
            }
            let input = self.inputs.site_input(x0, i, self.window);
            let gin = self.net.predict_vjp_accumulate(&input, &[lambda_w[i]], gp);
            for (g, k) in gin[..n_state].iter().zip(self.inputs.stencil_sites(i, n)) {
                gx0[k] += g;
            }
        }
    }
}

/// Stored nonlinear trajectory of one window, `steps + 1` states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    /// Window forcing `w`; zero without a correction.
    pub forcing: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().unwrap()
    }
}

/// Physics model plus an optional network forcing `w = F(p, x0)`, computed
/// once from the initial state and added, scaled, after every step.
pub struct HybridModel<'a, D: Dynamics + ?Sized> {
    pub dynamics: &'a D,
    pub dt: f64,
    pub forcing_scale: f64,
    pub correction: Option<Correction<'a>>,
}

impl<'a, D: Dynamics + ?Sized> HybridModel<'a, D> {
    pub fn plain(dynamics: &'a D, dt: f64) -> Self {
        HybridModel {
            dynamics,
            dt,
            forcing_scale: 1.0,
            correction: None,
        }
    }

    pub fn n_params(&self) -> usize {
        self.correction.map_or(0, |c| c.net.n_params())
    }

    pub fn integrate(&self, x0: &[f64], steps: usize) -> Result<Trajectory> {
        check_len("initial state", self.dynamics.dim(), x0.len())?;
        let forcing = match &self.correction {
            Some(c) => c.forcing(x0)?,
            None => vec![0.0; x0.len()],
        };
        let mut states = Vec::with_capacity(steps + 1);
        states.push(x0.to_vec());
        for step in 0..steps {
            let mut x = rk4_step(self.dynamics, states.last().unwrap(), self.dt);
            if self.correction.is_some() {
                for (xi, wi) in x.iter_mut().zip(&forcing) {
                    *xi += self.forcing_scale * wi;
                }
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(HdaError::NonFinite { step: step + 1 });
            }
            states.push(x);
        }
        Ok(Trajectory { states, forcing })
    }

    /// Tangent states at every step for the perturbation `(dx0, dp)`.
    pub fn tlm(&self, traj: &Trajectory, dx0: &[f64], dp: Option<&[f64]>) -> Result<Vec<Vec<f64>>> {
        check_len("initial tangent", self.dynamics.dim(), dx0.len())?;
        let dw = match &self.correction {
            Some(c) => Some(c.forcing_tl(&traj.states[0], dx0, dp)?),
            None => None,
        };
        let steps = traj.states.len() - 1;
        let mut out = Vec::with_capacity(steps + 1);
        out.push(dx0.to_vec());
        for k in 0..steps {
            let mut d = rk4_tlm_step(self.dynamics, &traj.states[k], &out[k], self.dt);
            if let Some(dw) = &dw {
                for (di, wi) in d.iter_mut().zip(dw) {
                    *di += self.forcing_scale * wi;
                }
            }
            out.push(d);
        }
        Ok(out)
    }

    /// Gradient of `sum_k <cot_k, dx_k>` with respect to `x0` and `p`, for
    /// cotangents given as `(step, vector)` pairs.
    pub fn adjoint(&self, traj: &Trajectory, cotangents: &[(usize, Vec<f64>)]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dynamics.dim();
        let steps = traj.states.len() - 1;
        let mut by_step: Vec<Option<Vec<f64>>> = vec![None; steps + 1];
        for (k, c) in cotangents {
            if *k > steps {
                return Err(HdaError::OutOfRange {
                    what: "trajectory step",
                    index: *k,
                    len: steps + 1,
                });
            }
            check_len("cotangent", n, c.len())?;
            match &mut by_step[*k] {
                Some(acc) => acc.iter_mut().zip(c).for_each(|(a, b)| *a += b),
                slot => *slot = Some(c.clone()),
            }
        }
        let mut lambda = vec![0.0; n];
        let mut lambda_w = vec![0.0; n];
        for k in (1..=steps).rev() {
            if let Some(c) = &by_step[k] {
                lambda.iter_mut().zip(c).for_each(|(l, c)| *l += c);
            }
            if self.correction.is_some() {
                lambda_w
                    .iter_mut()
                    .zip(&lambda)
                    .for_each(|(w, l)| *w += self.forcing_scale * l);
            }
            lambda = rk4_adj_step(self.dynamics, &traj.states[k - 1], &lambda, self.dt);
        }
        if let Some(c) = &by_step[0] {
            lambda.iter_mut().zip(c).for_each(|(l, c)| *l += c);
        }
        let mut gp = vec![0.0; self.n_params()];
        if let Some(c) = &self.correction {
            c.forcing_adj(&traj.states[0], &lambda_w, &mut lambda, &mut gp);
        }
        Ok((lambda, gp))
    }
}
