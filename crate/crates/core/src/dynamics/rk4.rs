use super::Dynamics;
use crate::error::{HdaError, Result};

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(y, x)| y + a * x).collect()
}

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step<D: Dynamics + ?Sized>(model: &D, x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    model.tendency(x, &mut k1);
    model.tendency(&axpy(x, 0.5 * dt, &k1), &mut k2);
    model.tendency(&axpy(x, 0.5 * dt, &k2), &mut k3);
    model.tendency(&axpy(x, dt, &k3), &mut k4);
    (0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Composes `steps` RK4 steps, failing on the first non-finite state.
pub fn integrate<D: Dynamics + ?Sized>(model: &D, x: &[f64], dt: f64, steps: usize) -> Result<Vec<f64>> {
    let mut x = x.to_vec();
    for step in 0..steps {
        x = rk4_step(model, &x, dt);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(HdaError::NonFinite { step: step + 1 });
        }
    }
    Ok(x)
}

/// Stages `x, x + dt/2 k1, x + dt/2 k2, x + dt k3` of an RK4 step.
fn stages<D: Dynamics + ?Sized>(model: &D, x: &[f64], dt: f64) -> [Vec<f64>; 4] {
    let n = x.len();
    let mut k = vec![0.0; n];
    model.tendency(x, &mut k);
    let s1 = axpy(x, 0.5 * dt, &k);
    model.tendency(&s1, &mut k);
    let s2 = axpy(x, 0.5 * dt, &k);
    model.tendency(&s2, &mut k);
    let s3 = axpy(x, dt, &k);
    [x.to_vec(), s1, s2, s3]
}

/// Tangent-linear of [`rk4_step`] about `x`.
pub fn rk4_tlm_step<D: Dynamics + ?Sized>(model: &D, x: &[f64], dx: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    let s = stages(model, x, dt);
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let mut d3 = vec![0.0; n];
    let mut d4 = vec![0.0; n];
    model.tendency_tl(&s[0], dx, &mut d1);
    model.tendency_tl(&s[1], &axpy(dx, 0.5 * dt, &d1), &mut d2);
    model.tendency_tl(&s[2], &axpy(dx, 0.5 * dt, &d2), &mut d3);
    model.tendency_tl(&s[3], &axpy(dx, dt, &d3), &mut d4);
    (0..n)
        .map(|i| dx[i] + dt / 6.0 * (d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i]))
        .collect()
}

/// Adjoint of [`rk4_tlm_step`]: the exact transpose about the same `x`.
pub fn rk4_adj_step<D: Dynamics + ?Sized>(model: &D, x: &[f64], lambda: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    let s = stages(model, x, dt);
    let mut out = lambda.to_vec();
    let mut a1: Vec<f64> = lambda.iter().map(|l| dt / 6.0 * l).collect();
    let mut a2: Vec<f64> = lambda.iter().map(|l| dt / 3.0 * l).collect();
    let mut a3 = a2.clone();
    let a4 = a1.clone();
    let mut u = vec![0.0; n];
    model.tendency_adj(&s[3], &a4, &mut u);
    for i in 0..n {
        out[i] += u[i];
        a3[i] += dt * u[i];
    }
    u.iter_mut().for_each(|v| *v = 0.0);
    model.tendency_adj(&s[2], &a3, &mut u);
    for i in 0..n {
        out[i] += u[i];
        a2[i] += 0.5 * dt * u[i];
    }
    u.iter_mut().for_each(|v| *v = 0.0);
    model.tendency_adj(&s[1], &a2, &mut u);
    for i in 0..n {
        out[i] += u[i];
        a1[i] += 0.5 * dt * u[i];
    }
    u.iter_mut().for_each(|v| *v = 0.0);
    model.tendency_adj(&s[0], &a1, &mut u);
    for i in 0..n {
        out[i] += u[i];
    }
    out
}
