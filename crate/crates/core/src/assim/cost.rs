use super::cov::BackgroundCov;
use super::obs::WindowObs;
use crate::dynamics::{ColumnInputs, Correction, Dynamics, HybridModel, Trajectory};
use crate::error::{check_len, HdaError, Result};
use crate::net::NetParams;
use std::borrow::Cow;

/// Network part of a window problem.
#[derive(Debug, Clone, Copy)]
pub struct HybridTerm<'a> {
    /// Network structure; its parameters are the background `p^b`.
    pub net: &'a NetParams,
    pub inputs: &'a ColumnInputs,
    pub window: f64,
    pub forcing_scale: f64,
    /// Standard deviation `p` of `P = p^2 I`; `None` keeps the parameters
    /// fixed at `p^b`.
    pub p_std: Option<f64>,
}

/// Everything that defines the cost of one assimilation window.
#[derive(Clone, Copy)]
pub struct WindowProblem<'a, D: Dynamics + ?Sized> {
    pub dynamics: &'a D,
    pub dt: f64,
    pub steps: usize,
    pub background: &'a [f64],
    pub b: &'a BackgroundCov,
    pub obs: &'a WindowObs,
    pub sigma_obs: f64,
    pub hybrid: Option<HybridTerm<'a>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostParts {
    pub background: f64,
    pub observation: f64,
    pub parameter: f64,
}

impl CostParts {
    pub fn total(&self) -> f64 {
        self.background + self.observation + self.parameter
    }
}

/// Cost gradient with respect to the initial state and the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGradient {
    pub cost: CostParts,
    pub x0: Vec<f64>,
    pub p: Vec<f64>,
}

impl<'a, D: Dynamics + ?Sized> WindowProblem<'a, D> {
    pub fn n_state(&self) -> usize {
        self.dynamics.dim()
    }

    /// Length of the parameter part of the control; zero when fixed.
    pub fn n_control_params(&self) -> usize {
        match &self.hybrid {
            Some(h) if h.p_std.is_some() => h.net.n_params(),
            _ => 0,
        }
    }

    pub fn background_params(&self) -> Option<&'a [f64]> {
        self.hybrid.map(|h| h.net.params.as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        check_len("background", self.n_state(), self.background.len())?;
        check_len("background covariance", self.n_state(), self.b.dim())?;
        if !(self.sigma_obs > 0.0) {
            return Err(HdaError::Config("observation sigma must be positive".into()));
        }
        if let Some(h) = &self.hybrid {
            if matches!(h.p_std, Some(p) if !(p > 0.0)) {
                return Err(HdaError::Config("parameter standard deviation must be positive".into()));
            }
        }
        for r in &self.obs.records {
            if r.step > self.steps {
                return Err(HdaError::OutOfRange {
                    what: "observation step",
                    index: r.step,
                    len: self.steps + 1,
                });
            }
            check_len("observation values", r.sites.len(), r.values.len())?;
            if let Some(&s) = r.sites.iter().find(|&&s| s >= self.n_state()) {
                return Err(HdaError::OutOfRange {
                    what: "observed site",
                    index: s,
                    len: self.n_state(),
                });
            }
        }
        Ok(())
    }

    /// Network carrying parameters `p`, or the background network.
    pub fn net_at(&self, p: Option<&[f64]>) -> Result<Option<Cow<'a, NetParams>>> {
        let Some(h) = &self.hybrid else { return Ok(None) };
        Ok(Some(match p {
            Some(p) => {
                check_len("network parameters", h.net.n_params(), p.len())?;
                let mut net = h.net.clone();
                net.params.copy_from_slice(p);
                Cow::Owned(net)
            }
            None => Cow::Borrowed(h.net),
        }))
    }

    pub fn model<'b>(&'b self, net: Option<&'b NetParams>) -> HybridModel<'b, D> {
        match (&self.hybrid, net) {
            (Some(h), Some(net)) => HybridModel {
                dynamics: self.dynamics,
                dt: self.dt,
                forcing_scale: h.forcing_scale,
                correction: Some(Correction {
                    net,
                    inputs: h.inputs,
                    window: h.window,
                }),
            },
            _ => HybridModel::plain(self.dynamics, self.dt),
        }
    }

    /// Innovations `y - H x_k` in record order.
    pub fn innovations(&self, traj: &Trajectory) -> Vec<Vec<f64>> {
        self.obs
            .records
            .iter()
            .map(|r| {
                let x = &traj.states[r.step];
                r.sites.iter().zip(&r.values).map(|(&s, y)| y - x[s]).collect()
            })
            .collect()
    }

    /// `H^T R^{-1} d` as adjoint forcing terms, one per observation record.
    pub fn obs_cotangents(&self, per_record: &[Vec<f64>]) -> Vec<(usize, Vec<f64>)> {
        let inv_r = 1.0 / (self.sigma_obs * self.sigma_obs);
        self.obs
            .records
            .iter()
            .zip(per_record)
            .map(|(r, d)| {
                let mut c = vec![0.0; self.n_state()];
                for (&s, v) in r.sites.iter().zip(d) {
                    c[s] += v * inv_r;
                }
                (r.step, c)
            })
            .collect()
    }

    fn parameter_term(&self, p: Option<&[f64]>) -> f64 {
        match (&self.hybrid, p) {
            (Some(HybridTerm { net, p_std: Some(std), .. }), Some(p)) => {
                let s: f64 = p.iter().zip(&net.params).map(|(a, b)| (a - b).powi(2)).sum();
                0.5 * s / (std * std)
            }
            _ => 0.0,
        }
    }

    /// Nonlinear cost; `p` is ignored unless the parameters are controlled.
    pub fn cost(&self, x0: &[f64], p: Option<&[f64]>) -> Result<CostParts> {
        Ok(self.cost_and_trajectory(x0, p)?.0)
    }

    pub fn cost_and_trajectory(&self, x0: &[f64], p: Option<&[f64]>) -> Result<(CostParts, Trajectory)> {
        check_len("initial state", self.n_state(), x0.len())?;
        let p = self.controlled(p);
        let net = self.net_at(p)?;
        let traj = self.model(net.as_deref()).integrate(x0, self.steps)?;
        let dx: Vec<f64> = x0.iter().zip(self.background).map(|(a, b)| a - b).collect();
        let inv_r = 1.0 / (self.sigma_obs * self.sigma_obs);
        let observation = 0.5
            * inv_r
            * self
                .innovations(&traj)
                .iter()
                .flatten()
                .map(|d| d * d)
                .sum::<f64>();
        Ok((
            CostParts {
                background: 0.5 * self.b.inv_quadratic(&dx),
                observation,
                parameter: self.parameter_term(p),
            },
            traj,
        ))
    }

    fn controlled<'p>(&self, p: Option<&'p [f64]>) -> Option<&'p [f64]> {
        if self.n_control_params() > 0 {
            p
        } else {
            None
        }
    }

    /// Cost and its adjoint gradient. The parameter gradient is empty when
    /// the parameters are not controlled.
    pub fn gradient(&self, x0: &[f64], p: Option<&[f64]>) -> Result<CostGradient> {
        let p = self.controlled(p);
        let (cost, traj) = self.cost_and_trajectory(x0, p)?;
        let net = self.net_at(p)?;
        let model = self.model(net.as_deref());
        let neg: Vec<Vec<f64>> = self
            .innovations(&traj)
            .into_iter()
            .map(|d| d.into_iter().map(|v| -v).collect())
            .collect();
        let (gx_obs, gp_obs) = model.adjoint(&traj, &self.obs_cotangents(&neg))?;
        let dx: Vec<f64> = x0.iter().zip(self.background).map(|(a, b)| a - b).collect();
        let gx: Vec<f64> = self.b.apply_inv(&dx).iter().zip(&gx_obs).map(|(a, b)| a + b).collect();
        let gp = match (&self.hybrid, self.n_control_params()) {
            (Some(h), n) if n > 0 => {
                let std = h.p_std.unwrap();
                let p = p.unwrap_or(&h.net.params);
                p.iter()
                    .zip(&h.net.params)
                    .zip(&gp_obs)
                    .map(|((a, b), g)| (a - b) / (std * std) + g)
                    .collect()
            }
            _ => Vec::new(),
        };
        Ok(CostGradient { cost, x0: gx, p: gp })
    }
}

/// Strong-constraint cost: background plus observation terms along the
/// model trajectory. A fixed network correction, if present, is part of the model.
pub fn sc4dvar_cost<D: Dynamics + ?Sized>(problem: &WindowProblem<'_, D>, x0: &[f64]) -> Result<f64> {
    Ok(problem.cost(x0, None)?.total())
}

/// Cost with the network parameters in the control vector.
pub fn nn4dvar_cost<D: Dynamics + ?Sized>(problem: &WindowProblem<'_, D>, x0: &[f64], p: &[f64]) -> Result<f64> {
    Ok(problem.cost(x0, Some(p))?.total())
}
