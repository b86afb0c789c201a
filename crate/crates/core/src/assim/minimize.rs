use super::cost::WindowProblem;
use crate::dynamics::{Dynamics, Trajectory};
use crate::error::{HdaError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimizerConfig {
    pub n_outer: usize,
    pub max_inner: usize,
    /// Inner loops stop once the residual norm drops below this fraction of
    /// its initial value.
    pub inner_tol: f64,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        MinimizerConfig {
            n_outer: 3,
            max_inner: 50,
            inner_tol: 1e-6,
        }
    }
}

impl MinimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_outer < 1 || self.max_inner < 1 || !(self.inner_tol > 0.0) {
            return Err(HdaError::Config("minimizer needs n_outer >= 1, max_inner >= 1, inner_tol > 0".into()));
        }
        Ok(())
    }
}

/// Record of one Gauss-Newton outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterTrace {
    /// Nonlinear cost at the linearization point.
    pub cost_before: f64,
    /// Nonlinear cost after the update.
    pub cost_after: f64,
    /// Quadratic inner cost after each conjugate-gradient iteration,
    /// starting with its value at zero increment.
    pub quadratic: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub x0: Vec<f64>,
    /// Analysed parameters when they are controlled.
    pub p: Option<Vec<f64>>,
    pub trace: Vec<OuterTrace>,
    /// Nonlinear trajectory from the analysis.
    pub trajectory: Trajectory,
}

impl Analysis {
    pub fn converged(&self) -> bool {
        self.trace.iter().all(|t| t.converged)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Control-space view of one linearization. Controls are `v = (v_x, v_p)`
/// with `x0 = x^b + B^{1/2} v_x` and `p = p^b + p v_p`.
struct Linearization<'p, 'a, D: Dynamics + ?Sized> {
    problem: &'p WindowProblem<'a, D>,
    traj: Trajectory,
    p_std: f64,
    n_x: usize,
}

impl<D: Dynamics + ?Sized> Linearization<'_, '_, D> {
    fn split<'v>(&self, v: &'v [f64]) -> (&'v [f64], &'v [f64]) {
        v.split_at(self.n_x)
    }

    fn hessian(&self, net: Option<&crate::net::NetParams>, dv: &[f64]) -> Result<Vec<f64>> {
        let model = self.problem.model(net);
        let (vx, vp) = self.split(dv);
        let dx0 = self.problem.b.apply_sqrt(vx);
        let dp: Vec<f64> = vp.iter().map(|v| self.p_std * v).collect();
        let tl = model.tlm(&self.traj, &dx0, (!dp.is_empty()).then_some(dp.as_slice()))?;
        let h_dx: Vec<Vec<f64>> = self
            .problem
            .obs
            .records
            .iter()
            .map(|r| r.sites.iter().map(|&s| tl[r.step][s]).collect())
            .collect();
        let (gx, gp) = model.adjoint(&self.traj, &self.problem.obs_cotangents(&h_dx))?;
        let mut out = dv.to_vec();
        for (o, g) in out[..self.n_x].iter_mut().zip(self.problem.b.apply_sqrt(&gx)) {
            *o += g;
        }
        for (o, g) in out[self.n_x..].iter_mut().zip(&gp) {
            *o += self.p_std * g;
        }
        Ok(out)
    }

    /// `U^T L^T H^T R^{-1} d`.
    fn obs_gradient(&self, net: Option<&crate::net::NetParams>) -> Result<Vec<f64>> {
        let model = self.problem.model(net);
        let d = self.problem.innovations(&self.traj);
        let (gx, gp) = model.adjoint(&self.traj, &self.problem.obs_cotangents(&d))?;
        let mut out = self.problem.b.apply_sqrt(&gx);
        if self.p_std > 0.0 {
            out.extend(gp.iter().map(|g| self.p_std * g));
        }
        Ok(out)
    }

    fn obs_term(&self) -> f64 {
        let inv_r = 1.0 / (self.problem.sigma_obs * self.problem.sigma_obs);
        0.5 * inv_r * self.problem.innovations(&self.traj).iter().flatten().map(|d| d * d).sum::<f64>()
    }
}

/// Incremental Gauss-Newton minimization starting from the background,
/// with conjugate-gradient inner loops in the preconditioned control space.
pub fn incremental_minimize<D: Dynamics + ?Sized>(problem: &WindowProblem<'_, D>, cfg: &MinimizerConfig) -> Result<Analysis> {
    incremental_minimize_from(problem, problem.background, None, cfg)
}

/// As [`incremental_minimize`] from an explicit first guess.
pub fn incremental_minimize_from<D: Dynamics + ?Sized>(
    problem: &WindowProblem<'_, D>,
    x_guess: &[f64],
    p_guess: Option<&[f64]>,
    cfg: &MinimizerConfig,
) -> Result<Analysis> {
    cfg.validate()?;
    problem.validate()?;
    let n_x = problem.n_state();
    let n_p = problem.n_control_params();
    let p_std = problem.hybrid.and_then(|h| h.p_std).filter(|_| n_p > 0).unwrap_or(0.0);
    let pb = problem.background_params();

    let dxg: Vec<f64> = x_guess.iter().zip(problem.background).map(|(a, b)| a - b).collect();
    let mut v = problem.b.apply_inv_sqrt(&dxg);
    match (p_guess, pb) {
        (Some(pg), Some(pb)) if n_p > 0 => v.extend(pg.iter().zip(pb).map(|(a, b)| (a - b) / p_std)),
        _ => v.resize(n_x + n_p, 0.0),
    }

    let state_of = |v: &[f64]| -> (Vec<f64>, Option<Vec<f64>>) {
        let x0: Vec<f64> = problem
            .b
            .apply_sqrt(&v[..n_x])
            .iter()
            .zip(problem.background)
            .map(|(a, b)| a + b)
            .collect();
        let p = (n_p > 0).then(|| v[n_x..].iter().zip(pb.unwrap()).map(|(a, b)| b + p_std * a).collect());
        (x0, p)
    };

    let (mut x0, mut p) = state_of(&v);
    let (mut cost, mut traj) = problem.cost_and_trajectory(&x0, p.as_deref())?;
    let mut trace = Vec::with_capacity(cfg.n_outer);
    for _ in 0..cfg.n_outer {
        let net = problem.net_at(p.as_deref())?;
        let lin = Linearization {
            problem,
            traj,
            p_std,
            n_x,
        };
        let g_obs = lin.obs_gradient(net.as_deref())?;
        // Quadratic q(dv) = 0.5 |v + dv|^2 + 0.5 |H L U dv - d|^2_{R^-1}
        // with Hessian A and q(dv) = q0 - rhs.dv + 0.5 dv.A dv.
        let rhs: Vec<f64> = g_obs.iter().zip(&v).map(|(g, a)| g - a).collect();
        let q0 = 0.5 * dot(&v, &v) + lin.obs_term();
        let (dv, quadratic, converged) = conjugate_gradient(
            |d| lin.hessian(net.as_deref(), d),
            &rhs,
            q0,
            cfg.max_inner,
            cfg.inner_tol,
        )?;
        for (a, d) in v.iter_mut().zip(&dv) {
            *a += d;
        }
        (x0, p) = state_of(&v);
        let before = cost.total();
        (cost, traj) = problem.cost_and_trajectory(&x0, p.as_deref())?;
        trace.push(OuterTrace {
            cost_before: before,
            cost_after: cost.total(),
            quadratic,
            converged,
        });
    }
    Ok(Analysis {
        x0,
        p,
        trace,
        trajectory: traj,
    })
}

/// Solves `A x = b` for symmetric positive definite `A` from `x = 0`. Also
/// returns `q0 - b.x + 0.5 x.A x` after each iteration.
pub fn conjugate_gradient<F>(mut apply: F, b: &[f64], q0: f64, max_iter: usize, tol: f64) -> Result<(Vec<f64>, Vec<f64>, bool)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let r0 = rr.sqrt();
    let mut q = vec![q0];
    if r0 == 0.0 {
        return Ok((x, q, true));
    }
    for _ in 0..max_iter {
        let ad = apply(&d)?;
        let dad = dot(&d, &ad);
        if !(dad > 0.0) {
            break;
        }
        let alpha = rr / dad;
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        // With r = b - A x: q = q0 - 0.5 x.(b + r).
        let qx = q0 - 0.5 * x.iter().zip(b.iter().zip(&r)).map(|(xi, (bi, ri))| xi * (bi + ri)).sum::<f64>();
        q.push(qx);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * r0 {
            return Ok((x, q, true));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            d[i] = r[i] + beta * d[i];
        }
    }
    Ok((x, q, false))
}
