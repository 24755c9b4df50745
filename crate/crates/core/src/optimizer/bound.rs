use super::{Objective, OptimizerConfig, OptimizerError};

/// Extremes of the per-coordinate second derivative of `psi` over `[0, 1 - epsilon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub q: f64,
    pub big_q: f64,
}

impl Curvature {
    /// Per-iteration contraction factor `z = 1 - min(2 q sigma, 2 q sigma xi / Q)`.
    pub fn contraction(&self, sigma: f64, xi: f64) -> f64 {
        1.0 - (2.0 * self.q * sigma).min(2.0 * self.q * sigma * xi / self.big_q)
    }
}

/// Scans every station's diagonal second derivative on `points` evenly spaced loads.
pub fn estimate_curvature(objective: &Objective, points: usize) -> Result<Curvature, OptimizerError> {
    if points < 2 || objective.is_empty() {
        return Err(OptimizerError::Curvature("need at least two grid points and one station".into()));
    }
    let hi = 1.0 - objective.epsilon();
    let mut q = f64::INFINITY;
    let mut big_q = f64::NEG_INFINITY;
    for j in 0..objective.len() {
        for i in 0..points {
            let h = objective.term_second_derivative(j, hi * i as f64 / (points - 1) as f64);
            q = q.min(h);
            big_q = big_q.max(h);
        }
    }
    if !(q > 0.0) || !big_q.is_finite() {
        return Err(OptimizerError::Curvature(format!("q = {q}, Q = {big_q}")));
    }
    Ok(Curvature { q, big_q })
}

/// Iterations needed to shrink an objective gap below `tol` at contraction `z`.
pub fn iterations_for(gap: f64, tol: f64, z: f64) -> Result<usize, OptimizerError> {
    if gap <= tol {
        return Ok(0);
    }
    if !(z < 1.0) {
        return Err(OptimizerError::Curvature(format!("contraction factor {z} is not below 1")));
    }
    if z <= 0.0 {
        return Ok(1);
    }
    Ok(((gap / tol).ln() / (1.0 / z).ln()).ceil() as usize)
}

/// Upper bound on the iterations the balancing loop needs to bring `psi` within
/// `tol` of its minimum.
pub fn convergence_bound(
    psi_initial: f64,
    psi_star: f64,
    tol: f64,
    curvature: &Curvature,
    config: &OptimizerConfig,
) -> Result<usize, OptimizerError> {
    iterations_for(psi_initial - psi_star, tol, curvature.contraction(config.sigma_armijo, config.xi))
}
