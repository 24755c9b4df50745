use super::BaselineError;
use crate::energy::on_grid_power;
use crate::optimizer::{AssociationMap, OptimizerConfig, Problem};
use crate::scenario::{RateMap, Scenario};

/// Largest number of associations the oracle will enumerate.
pub const ORACLE_LIMIT: f64 = 1e5;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Minimum of the cost over all associations.
    pub best_psi: f64,
    pub best_association: AssociationMap,
    pub enumerated: u64,
}

/// Minimizes `cost(clamped loads)` over every association of loaded locations to
/// one of their candidates. Idle locations keep their first candidate.
pub fn exhaustive_min<F>(problem: &Problem, mut cost: F) -> Result<OracleResult, BaselineError>
where
    F: FnMut(&[f64]) -> Result<f64, BaselineError>,
{
    let rates = problem.rates();
    let mut choice: Vec<Option<usize>> = (0..problem.num_cells()).map(|x| rates.candidates(x).next()).collect();
    let options: Vec<(usize, Vec<usize>)> = (0..problem.num_cells())
        .filter(|&x| problem.demand()[x] > 0.0)
        .map(|x| (x, rates.candidates(x).collect()))
        .collect();
    let count: f64 = options.iter().map(|(_, c)| c.len() as f64).product();
    if count > ORACLE_LIMIT {
        return Err(BaselineError::TooLarge {
            count,
            limit: ORACLE_LIMIT,
        });
    }

    let mut digits = vec![0usize; options.len()];
    let mut best: Option<(f64, Vec<Option<usize>>)> = None;
    let mut enumerated = 0u64;
    loop {
        for ((x, cands), &d) in options.iter().zip(&digits) {
            choice[*x] = Some(cands[d]);
        }
        let assoc = AssociationMap { choice };
        let value = cost(&problem.perceived_loads(&assoc).clamped)?;
        choice = assoc.choice;
        enumerated += 1;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, choice.clone()));
        }

        // odometer increment
        let mut pos = 0;
        while pos < digits.len() {
            digits[pos] += 1;
            if digits[pos] < options[pos].1.len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
        if pos == digits.len() {
            break;
        }
    }
    let (best_psi, choice) = best.expect("at least one association");
    Ok(OracleResult {
        best_psi,
        best_association: AssociationMap { choice },
        enumerated,
    })
}

/// Smallest objective value over all discrete associations.
pub fn exhaustive_oracle(scenario: &Scenario, rates: &RateMap, config: &OptimizerConfig) -> Result<OracleResult, BaselineError> {
    let problem = Problem::new(scenario, rates, config)?;
    let objective = problem.objective().clone();
    exhaustive_min(&problem, |rho| Ok(objective.psi(rho)?))
}

/// Smallest total on-grid power over all discrete associations.
pub fn ga_oracle(scenario: &Scenario, rates: &RateMap, config: &OptimizerConfig) -> Result<OracleResult, BaselineError> {
    let problem = Problem::new(scenario, rates, config)?;
    exhaustive_min(&problem, |rho| {
        Ok(scenario.stations.iter().zip(rho).map(|(bs, &r)| on_grid_power(bs, r)).sum())
    })
}
