//! Reference schemes: latency-only (LA), green-energy-only (GA), two-tier cell range
//! expansion (CRE) with bias search, and an exhaustive association oracle.

mod oracle;

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

pub use oracle::{exhaustive_min, exhaustive_oracle, ga_oracle, OracleResult, ORACLE_LIMIT};

use crate::evaluation::{compute_metrics, MetricsReport};
use crate::optimizer::{run_vgala, AdmissionField, AssociationMap, OptimizerConfig, OptimizerError, Problem, VgalaOutcome};
use crate::scenario::{RateMap, Scenario, Tier};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("{count} associations exceed the enumeration limit of {limit}")]
    TooLarge { count: f64, limit: f64 },
    #[error("invalid bias: {0}")]
    InvalidBias(String),
}

/// Weight exponent scale used to emulate the green-energy-only scheme.
pub const GA_KAPPA: f64 = 50.0;

/// Latency-only balancing: the same iteration with `kappa = 0`.
pub fn run_la(
    scenario: &Scenario,
    rates: &RateMap,
    config: &OptimizerConfig,
    admission: Option<&AdmissionField>,
) -> Result<VgalaOutcome, OptimizerError> {
    run_vgala(scenario, rates, &config.clone().with_kappa(0.0), admission)
}

/// Green-energy-only balancing, approximated by a large `kappa` with every `theta = 1`.
pub fn run_ga(
    scenario: &Scenario,
    rates: &RateMap,
    config: &OptimizerConfig,
    admission: Option<&AdmissionField>,
) -> Result<VgalaOutcome, OptimizerError> {
    run_vgala(&scenario.with_uniform_theta(1.0), rates, &config.clone().with_kappa(GA_KAPPA), admission)
}

/// Per-station rate bias: macro stations fixed at 1, small cells share one value.
#[derive(Debug, Clone, PartialEq)]
pub struct CreBias {
    pub z: Vec<f64>,
}

impl CreBias {
    pub fn two_tier(scenario: &Scenario, small_bias: f64) -> Result<Self, BaselineError> {
        if !(small_bias > 0.0 && small_bias.is_finite()) {
            return Err(BaselineError::InvalidBias(format!("small-cell bias {small_bias} must be positive and finite")));
        }
        Ok(Self {
            z: scenario
                .stations
                .iter()
                .map(|bs| if bs.tier == Tier::Small { small_bias } else { 1.0 })
                .collect(),
        })
    }

    pub fn unbiased(n_bs: usize) -> Self {
        Self { z: vec![1.0; n_bs] }
    }
}

/// Argmax of `Z_j r_j(x)` over candidates, lowest index on ties.
pub fn cre_select(cell: usize, bias: &CreBias, rates: &RateMap) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in rates.candidates(cell) {
        let score = bias.z[j] * rates.rate(cell, j);
        match best {
            Some((_, s)) if s >= score => {}
            _ => best = Some((j, score)),
        }
    }
    best.map(|(j, _)| j)
}

pub fn cre_association(bias: &CreBias, rates: &RateMap) -> AssociationMap {
    AssociationMap {
        choice: (0..rates.num_cells()).map(|x| cre_select(x, bias, rates)).collect(),
    }
}

/// What the bias search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CreCriterion {
    Latency,
    OnGrid,
    Psi,
}

impl CreCriterion {
    pub fn label(self) -> &'static str {
        match self {
            Self::Latency => "CRE_LA",
            Self::OnGrid => "CRE_GA",
            Self::Psi => "CRE_LG",
        }
    }
}

/// `n` small-cell biases evenly spaced in log2 between `2^-6` and `2^6`.
pub fn bias_grid(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![1.0],
        _ => (0..n).map(|i| (-6.0 + 12.0 * i as f64 / (n - 1) as f64).exp2()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrePoint {
    pub bias: f64,
    pub latency_metric: f64,
    pub on_grid_w: f64,
    pub psi: f64,
}

impl CrePoint {
    pub fn criterion(&self, c: CreCriterion) -> f64 {
        match c {
            CreCriterion::Latency => self.latency_metric,
            CreCriterion::OnGrid => self.on_grid_w,
            CreCriterion::Psi => self.psi,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CreSweep {
    pub criterion: CreCriterion,
    pub best: CreBias,
    pub best_index: usize,
    pub points: Vec<CrePoint>,
}

impl CreSweep {
    pub fn best_point(&self) -> &CrePoint {
        &self.points[self.best_index]
    }

    /// Sweep rows `bias,latency_metric,on_grid_w,psi`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bias", "latency_metric", "on_grid_w", "psi"])?;
        for p in &self.points {
            w.write_record(&[p.bias.to_string(), p.latency_metric.to_string(), p.on_grid_w.to_string(), p.psi.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads, metrics and objective of the association induced by `bias`.
pub fn evaluate_cre(problem: &Problem, scenario: &Scenario, bias: &CreBias) -> Result<(AssociationMap, MetricsReport, f64), BaselineError> {
    let association = cre_association(bias, problem.rates());
    let loads = problem.perceived_loads(&association).clamped;
    let psi = problem.objective().psi(&loads)?;
    let metrics = compute_metrics(&loads, scenario, problem.epsilon())?;
    Ok((association, metrics, psi))
}

/// Grid search for the small-cell bias minimizing `criterion` on the induced loads.
/// `psi` uses the objective implied by `config` and the stations' `theta`.
pub fn sweep_cre_bias(
    scenario: &Scenario,
    rates: &RateMap,
    config: &OptimizerConfig,
    criterion: CreCriterion,
    grid: &[f64],
) -> Result<CreSweep, BaselineError> {
    if grid.is_empty() {
        return Err(BaselineError::InvalidBias("empty bias grid".into()));
    }
    let problem = Problem::new(scenario, rates, config)?;
    let points = grid
        .par_iter()
        .map(|&b| {
            let (_, m, psi) = evaluate_cre(&problem, scenario, &CreBias::two_tier(scenario, b)?)?;
            Ok(CrePoint {
                bias: b,
                latency_metric: m.latency_metric,
                on_grid_w: m.on_grid_w,
                psi,
            })
        })
        .collect::<Result<Vec<_>, BaselineError>>()?;
    let mut best_index = 0;
    for (i, p) in points.iter().enumerate() {
        if p.criterion(criterion) < points[best_index].criterion(criterion) {
            best_index = i;
        }
    }
    Ok(CreSweep {
        criterion,
        best: CreBias::two_tier(scenario, points[best_index].bias)?,
        best_index,
        points,
    })
}
