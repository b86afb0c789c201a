//! Truth and forecast dynamics: two-scale Lorenz-96 as the nature run,
//! one-scale Lorenz-96 as the imperfect forecast model, RK4 with exact
//! tangent-linear and adjoint steps, and the hybrid model with a
//! network-predicted constant forcing per window.

mod hybrid;
mod lorenz96;
mod rk4;

pub use hybrid::{
    ColumnInputs, Correction, HybridConfig, HybridModel, PredictorMode, Trajectory,
    N_EXTRA_PREDICTORS,
};
pub use lorenz96::{
    forecast_tendency, truth_tendency, LinearModel, Lorenz96, ModelConfig, TwoScaleLorenz96,
};
pub use rk4::{integrate, rk4_adj_step, rk4_step, rk4_tlm_step};

/// A differentiable autonomous vector field `dx/dt = f(x)`.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;
    fn tendency(&self, x: &[f64], out: &mut [f64]);
    /// `out = J(x) dx`.
    fn tendency_tl(&self, x: &[f64], dx: &[f64], out: &mut [f64]);
    /// `out += J(x)^T lambda`.
    fn tendency_adj(&self, x: &[f64], lambda: &[f64], out: &mut [f64]);
}
