use std::io::Write;
use std::ops::Deref;

use super::{Objective, OptimizerConfig, OptimizerError};
use crate::scenario::{AreaGrid, RateMap, Scenario};

/// Per-station load fractions, each in `[0, 1 - epsilon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadVector(pub Vec<f64>);

impl Deref for LoadVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-station access prices `phi_j = d psi / d rho_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationStatusVector(pub Vec<f64>);

impl Deref for OperationStatusVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Chosen station index per location; `None` only for locations without candidates
/// (which carry no traffic).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationMap {
    pub choice: Vec<Option<usize>>,
}

impl AssociationMap {
    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    /// Number of locations served by each station.
    pub fn coverage_counts(&self, n_bs: usize) -> Vec<usize> {
        let mut counts = vec![0; n_bs];
        for j in self.choice.iter().flatten() {
            counts[*j] += 1;
        }
        counts
    }

    /// Coverage map rows `row,col,bs_id` (empty id for unassigned locations).
    pub fn write_grid_csv<W: Write>(&self, grid: &AreaGrid, scenario: &Scenario, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "bs_id"])?;
        for (x, c) in self.choice.iter().enumerate() {
            let (row, col) = grid.row_col(x);
            let id = c.map(|j| scenario.stations[j].id.to_string()).unwrap_or_default();
            w.write_record(&[row.to_string(), col.to_string(), id])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Admission probability per location.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissionField {
    pub mu: Vec<f64>,
}

impl AdmissionField {
    pub fn uniform(n_cells: usize, mu: f64) -> Result<Self, OptimizerError> {
        Self::new(vec![mu; n_cells])
    }

    pub fn new(mu: Vec<f64>) -> Result<Self, OptimizerError> {
        if let Some(bad) = mu.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(OptimizerError::InvalidConfig(format!("admission probability {bad} outside [0, 1]")));
        }
        Ok(Self { mu })
    }
}

/// Argmax of `rate / phi` over the location's candidate stations, lowest index on ties.
pub fn select_bs(cell: usize, phi: &[f64], rates: &RateMap) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in rates.candidates(cell) {
        let score = rates.rate(cell, j) / phi[j];
        match best {
            Some((_, s)) if s >= score => {}
            _ => best = Some((j, score)),
        }
    }
    best.map(|(j, _)| j)
}

/// Loads induced by an association, before and after clamping at `1 - epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceivedLoads {
    pub raw: Vec<f64>,
    pub clamped: LoadVector,
}

impl PerceivedLoads {
    /// Stations whose raw load reached the `1 - epsilon` cap.
    pub fn saturated(&self, epsilon: f64) -> Vec<usize> {
        self.raw
            .iter()
            .enumerate()
            .filter(|(_, &r)| r >= 1.0 - epsilon)
            .map(|(j, _)| j)
            .collect()
    }
}

/// A balancing instance: objective, rates and (admitted) offered traffic.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    objective: Objective,
    rates: &'a RateMap,
    /// Admitted traffic `mu * lambda * nu` per location, bits/s.
    demand: Vec<f64>,
    epsilon: f64,
}

impl<'a> Problem<'a> {
    pub fn new(scenario: &Scenario, rates: &'a RateMap, config: &OptimizerConfig) -> Result<Self, OptimizerError> {
        config.validate()?;
        Self::from_parts(Objective::for_stations(&scenario.stations, config), rates, scenario.demand())
    }

    pub fn from_parts(objective: Objective, rates: &'a RateMap, demand: Vec<f64>) -> Result<Self, OptimizerError> {
        if demand.len() != rates.num_cells() || objective.len() != rates.num_stations() {
            return Err(OptimizerError::Shape(format!(
                "{} demands / {} objective terms for a {}x{} rate map",
                demand.len(),
                objective.len(),
                rates.num_cells(),
                rates.num_stations()
            )));
        }
        for (cell, &d) in demand.iter().enumerate() {
            if d > 0.0 && rates.num_candidates(cell) == 0 {
                return Err(OptimizerError::UncoveredCell { cell });
            }
        }
        let epsilon = objective.epsilon();
        Ok(Self {
            objective,
            rates,
            demand,
            epsilon,
        })
    }

    pub fn with_admission(mut self, admission: &AdmissionField) -> Result<Self, OptimizerError> {
        if admission.mu.len() != self.demand.len() {
            return Err(OptimizerError::Shape("admission field length differs from cell count".into()));
        }
        for (d, &m) in self.demand.iter_mut().zip(&admission.mu) {
            *d *= m;
        }
        Ok(self)
    }

    pub fn with_objective(mut self, objective: Objective) -> Result<Self, OptimizerError> {
        if objective.len() != self.objective.len() {
            return Err(OptimizerError::Shape("objective station count changed".into()));
        }
        self.epsilon = objective.epsilon();
        self.objective = objective;
        Ok(self)
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn rates(&self) -> &RateMap {
        self.rates
    }

    pub fn demand(&self) -> &[f64] {
        &self.demand
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn num_stations(&self) -> usize {
        self.rates.num_stations()
    }

    pub fn num_cells(&self) -> usize {
        self.rates.num_cells()
    }

    /// Every location's choice under prices `phi`.
    pub fn associate(&self, phi: &[f64]) -> AssociationMap {
        AssociationMap {
            choice: (0..self.num_cells()).map(|x| select_bs(x, phi, self.rates)).collect(),
        }
    }

    /// Highest-rate association (all prices equal).
    pub fn max_rate_association(&self) -> AssociationMap {
        self.associate(&vec![1.0; self.num_stations()])
    }

    /// `M_j = min(sum over served locations of mu lambda nu / r_j, 1 - epsilon)`.
    pub fn perceived_loads(&self, association: &AssociationMap) -> PerceivedLoads {
        let mut raw = vec![0.0; self.num_stations()];
        for (x, choice) in association.choice.iter().enumerate() {
            let d = self.demand[x];
            if d == 0.0 {
                continue;
            }
            if let Some(j) = *choice {
                raw[j] += d / self.rates.rate(x, j);
            }
        }
        let cap = 1.0 - self.epsilon;
        let clamped = LoadVector(raw.iter().map(|&r| r.min(cap)).collect());
        PerceivedLoads { raw, clamped }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::StationTerm;

    fn objective(n: usize) -> Objective {
        Objective::new(4.0, 1e-3, vec![StationTerm { theta: 0.8, rho_hat: 0.3, vartheta: 1.0 }; n])
    }

    #[test]
    fn selection_examples() {
        let rates = RateMap::from_rates(1, 2, vec![10e6, 20e6]);
        assert_eq!(select_bs(0, &[1.0, 1.0], &rates), Some(1));
        assert_eq!(select_bs(0, &[1.0, 4.0], &rates), Some(0));
        let tied = RateMap::from_rates(1, 2, vec![10e6, 10e6]);
        assert_eq!(select_bs(0, &[2.0, 2.0], &tied), Some(0));
    }

    #[test]
    fn selection_ignores_non_candidates() {
        let rates = RateMap::from_rates(1, 2, vec![0.0, 1.0]);
        assert_eq!(select_bs(0, &[1e-12, 1e12], &rates), Some(1));
        let none = RateMap::from_rates(1, 2, vec![0.0, 0.0]);
        assert_eq!(select_bs(0, &[1.0, 1.0], &none), None);
    }

    #[test]
    fn perceived_loads_examples() {
        let rates = RateMap::from_rates(2, 1, vec![10e6, 5e6]);
        let p = Problem::from_parts(objective(1), &rates, vec![0.0, 0.0]).unwrap();
        let a = p.max_rate_association();
        assert_eq!(p.perceived_loads(&a).clamped.0, vec![0.0]);

        let p = Problem::from_parts(objective(1), &rates, vec![2e6, 0.5e6]).unwrap();
        let m = p.perceived_loads(&p.max_rate_association());
        assert!((m.clamped[0] - 0.3).abs() < 1e-15);

        let half = p.clone().with_admission(&AdmissionField::uniform(2, 0.5).unwrap()).unwrap();
        let mh = half.perceived_loads(&half.max_rate_association());
        assert!((mh.clamped[0] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn perceived_loads_clamp() {
        let rates = RateMap::from_rates(1, 1, vec![1e6]);
        let p = Problem::from_parts(objective(1), &rates, vec![3e6]).unwrap();
        let m = p.perceived_loads(&p.max_rate_association());
        assert_eq!(m.clamped[0], 0.999);
        assert_eq!(m.raw[0], 3.0);
        assert_eq!(m.saturated(1e-3), vec![0]);
    }

    #[test]
    fn uncovered_loaded_cell_rejected() {
        let rates = RateMap::from_rates(2, 1, vec![1e6, 0.0]);
        assert!(matches!(
            Problem::from_parts(objective(1), &rates, vec![1.0, 1.0]),
            Err(OptimizerError::UncoveredCell { cell: 1 })
        ));
    }

    #[test]
    fn admission_domain_checked() {
        assert!(AdmissionField::uniform(3, 1.2).is_err());
        assert!(AdmissionField::uniform(3, 0.0).is_ok());
    }
}
