//! Variational assimilation: covariances, observations, the strong-constraint
//! and network-augmented costs, incremental minimization, and cycling.

mod cost;
mod cov;
mod cycle;
mod minimize;
mod obs;

pub use cost::{nn4dvar_cost, sc4dvar_cost, CostGradient, CostParts, HybridTerm, WindowProblem};
pub use cov::{BModel, BackgroundCov, CovSpec};
pub use cycle::{run_cycles, CycleMode, CycleRecord, CycleSetup, CycleState};
pub use minimize::{
    conjugate_gradient, incremental_minimize, incremental_minimize_from, Analysis, MinimizerConfig, OuterTrace,
};
pub use obs::{make_observations, window_rng, ObsConfig, ObsRecord, ObsTime, WindowObs};
