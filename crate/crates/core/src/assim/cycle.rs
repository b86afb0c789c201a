use super::cost::{HybridTerm, WindowProblem};
use super::cov::BackgroundCov;
use super::minimize::{incremental_minimize, MinimizerConfig, OuterTrace};
use super::obs::WindowObs;
use crate::dynamics::{Dynamics, HybridConfig};
use crate::error::{HdaError, Result};
use crate::net::NetParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleMode {
    /// Strong constraint with the uncorrected model.
    Sc,
    /// Strong constraint with a frozen network correction.
    ScFixedNet,
    /// Network parameters in the control vector, persisted between windows.
    Nn4dvar,
}

impl CycleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CycleMode::Sc => "sc",
            CycleMode::ScFixedNet => "sc-fixed-net",
            CycleMode::Nn4dvar => "nn4dvar",
        }
    }

    pub fn uses_network(self) -> bool {
        self != CycleMode::Sc
    }
}

impl std::str::FromStr for CycleMode {
    type Err = HdaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sc" => Ok(CycleMode::Sc),
            "sc-fixed-net" | "sc+fixed-net" => Ok(CycleMode::ScFixedNet),
            "nn4dvar" => Ok(CycleMode::Nn4dvar),
            _ => Err(HdaError::Config(format!("unknown cycling mode `{s}`"))),
        }
    }
}

/// Archive entry of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub window: usize,
    pub background: Vec<f64>,
    pub analysis: Vec<f64>,
    /// `analysis - background`.
    pub increment: Vec<f64>,
    /// Forcing applied over the window from the analysis.
    pub forcing: Vec<f64>,
    pub obs: WindowObs,
    /// Network parameters used over the window.
    pub params: Option<Vec<f64>>,
    pub trace: Vec<OuterTrace>,
}

/// State carried from one window to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleState {
    pub window: usize,
    pub background: Vec<f64>,
    /// `p^b`, present whenever the mode uses a network.
    pub params: Option<Vec<f64>>,
}

/// Fixed ingredients of a cycling experiment.
pub struct CycleSetup<'a, D: Dynamics + ?Sized> {
    pub dynamics: &'a D,
    pub dt: f64,
    pub steps_per_window: usize,
    pub b: &'a BackgroundCov,
    pub sigma_obs: f64,
    pub minimizer: MinimizerConfig,
    pub mode: CycleMode,
    /// Network structure and normalization; required unless the mode is `Sc`.
    pub hybrid: Option<&'a HybridConfig>,
    /// Parameter background standard deviation for `Nn4dvar`.
    pub p_std: f64,
}

impl<D: Dynamics + ?Sized> CycleSetup<'_, D> {
    pub fn initial_state(&self, window: usize, background: Vec<f64>) -> CycleState {
        CycleState {
            window,
            background,
            params: self
                .hybrid
                .filter(|_| self.mode.uses_network())
                .map(|h| h.net.params.clone()),
        }
    }

    /// Assimilates one window and advances the state by persistence of the
    /// parameters and a forecast from the analysis.
    pub fn step(&self, state: &mut CycleState, obs: &WindowObs) -> Result<CycleRecord> {
        let window = state.window;
        self.step_inner(state, obs).map_err(|e| match e {
            e @ (HdaError::NonFinite { .. } | HdaError::CovarianceSingular { .. }) => HdaError::WindowFailed {
                window,
                source: Box::new(e),
            },
            e => e,
        })
    }

    fn step_inner(&self, state: &mut CycleState, obs: &WindowObs) -> Result<CycleRecord> {
        let net_b: Option<NetParams> = match (self.mode.uses_network(), self.hybrid, &state.params) {
            (false, _, _) => None,
            (true, Some(h), Some(p)) => {
                let mut net = h.net.clone();
                net.params.clone_from(p);
                Some(net)
            }
            _ => return Err(HdaError::Config(format!("mode {} needs a network", self.mode.as_str()))),
        };
        let hybrid = match (&net_b, self.hybrid) {
            (Some(net), Some(h)) => Some(HybridTerm {
                net,
                inputs: &h.inputs,
                window: state.window as f64,
                forcing_scale: h.forcing_scale,
                p_std: (self.mode == CycleMode::Nn4dvar).then_some(self.p_std),
            }),
            _ => None,
        };
        let problem = WindowProblem {
            dynamics: self.dynamics,
            dt: self.dt,
            steps: self.steps_per_window,
            background: &state.background,
            b: self.b,
            obs,
            sigma_obs: self.sigma_obs,
            hybrid,
        };
        let an = incremental_minimize(&problem, &self.minimizer)?;
        let increment = an.x0.iter().zip(&state.background).map(|(a, b)| a - b).collect();
        let record = CycleRecord {
            window: state.window,
            background: state.background.clone(),
            analysis: an.x0.clone(),
            increment,
            forcing: an.trajectory.forcing.clone(),
            obs: obs.clone(),
            params: an.p.clone().or_else(|| net_b.as_ref().map(|n| n.params.clone())),
            trace: an.trace,
        };
        if let Some(p) = an.p {
            state.params = Some(p);
        }
        state.background = an.trajectory.last().to_vec();
        state.window += 1;
        Ok(record)
    }
}

/// Cycles over consecutive windows, one observation set per window.
pub fn run_cycles<D: Dynamics + ?Sized>(
    setup: &CycleSetup<'_, D>,
    state: &mut CycleState,
    obs: &[WindowObs],
) -> Result<Vec<CycleRecord>> {
    obs.iter().map(|o| setup.step(state, o)).collect()
}
