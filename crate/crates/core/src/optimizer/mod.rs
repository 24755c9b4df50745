//! Green-energy and latency aware load balancing.
//!
//! The network objective is `psi(rho) = sum_j w_j(rho_j) f(rho_j)` where `f` is a
//! per-station performance model (M/G/1 latency by default) and
//! `w_j = exp(kappa * theta_j * (rho_j - rho_hat_j))` penalizes load beyond a
//! station's green traffic capacity. Each iteration lets every location pick the
//! station maximizing `rate / phi`, where `phi = grad psi`, then moves the load
//! vector toward the induced loads with an Armijo backtracking step.

mod bound;
mod objective;
mod problem;
mod vgala;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bound::{convergence_bound, estimate_curvature, Curvature};
pub use objective::{latency_indicator, weight, CustomModel, Objective, PerformanceModel, StationTerm};
pub use problem::{select_bs, AdmissionField, AssociationMap, LoadVector, OperationStatusVector, PerceivedLoads, Problem};
pub use vgala::{
    backtrack_delta, run_vgala, Backtrack, IterationTrace, StepOutcome, Termination, TraceRecord, Vgala, VgalaOutcome,
    VgalaState,
};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("load {value} of station index {index} is outside [0, 1 - epsilon]")]
    Domain { index: usize, value: f64 },
    #[error("backtracking did not satisfy the sufficient-decrease condition within {steps} steps at iteration {iter}")]
    BacktrackExhausted { iter: usize, steps: u32 },
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("performance model rejected at rho = {rho}: {reason}")]
    ModelRejected { rho: f64, reason: String },
    #[error("location {cell} carries traffic but has no candidate station")]
    UncoveredCell { cell: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("curvature estimate unusable: {0}")]
    Curvature(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Network-wide weight exponent scale.
    pub kappa: f64,
    pub epsilon: f64,
    /// Sufficient-decrease constant of the backtracking rule, in (0, 0.5).
    pub sigma_armijo: f64,
    /// Backtracking contraction factor, in (0, 1).
    pub xi: f64,
    pub max_iters: usize,
    /// Objective-change tolerance relative to the initial objective value.
    pub psi_tol_rel: f64,
    /// Absolute objective-change tolerance; overrides `psi_tol_rel` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_tol_abs: Option<f64>,
    pub backtrack_cap: u32,
    /// Cap the induced loads at `1 - epsilon` before stepping toward them. Capping
    /// discards the excess traffic of an overloaded target, so by default the
    /// uncapped loads are used and the line search keeps the iterate in range.
    pub clamp_targets: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kappa: 4.0,
            epsilon: 1e-3,
            sigma_armijo: 0.3,
            xi: 0.5,
            max_iters: 500,
            psi_tol_rel: 1e-8,
            psi_tol_abs: None,
            backtrack_cap: 60,
            clamp_targets: false,
        }
    }
}

impl OptimizerConfig {
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |msg: &str| Err(OptimizerError::InvalidConfig(msg.to_string()));
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad("kappa must be finite and >= 0");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad("epsilon must lie in (0, 0.5)");
        }
        if !(self.sigma_armijo > 0.0 && self.sigma_armijo < 0.5) {
            return bad("sigma_armijo must lie in (0, 0.5)");
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return bad("xi must lie in (0, 1)");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be > 0");
        }
        if !(self.psi_tol_rel >= 0.0) {
            return bad("psi_tol_rel must be >= 0");
        }
        if let Some(t) = self.psi_tol_abs {
            if !(t >= 0.0) {
                return bad("psi_tol_abs must be >= 0");
            }
        }
        if self.backtrack_cap == 0 {
            return bad("backtrack_cap must be > 0");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        OptimizerConfig::default().validate().unwrap();
    }

    #[test]
    fn armijo_constant_domain() {
        let mut c = OptimizerConfig {
            sigma_armijo: 0.7,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(OptimizerError::InvalidConfig(_))));
        c.sigma_armijo = 0.3;
        c.xi = 1.0;
        assert!(c.validate().is_err());
        c.xi = 0.5;
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
    }
}
