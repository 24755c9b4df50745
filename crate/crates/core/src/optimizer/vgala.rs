use std::io::Write;

use super::{
    AdmissionField, AssociationMap, LoadVector, Objective, OperationStatusVector, OptimizerConfig, OptimizerError,
    PerceivedLoads, Problem,
};
use crate::scenario::{RateMap, Scenario};

/// Outcome of one backtracking line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backtrack {
    /// Weight kept on the current iterate; the step length is `1 - delta`.
    pub delta: f64,
    pub steps: u32,
    pub psi: f64,
    /// Directional derivative `sum_j phi_j (M_j - rho_j)`.
    pub slope: f64,
}

/// Smallest `m >= 0` such that `delta = 1 - xi^m` satisfies the sufficient-decrease
/// condition `psi(rho + (1 - delta)(M - rho)) <= psi(rho) + sigma (1 - delta) phi . (M - rho)`.
pub fn backtrack_delta(
    objective: &Objective,
    rho: &[f64],
    target: &[f64],
    config: &OptimizerConfig,
) -> Result<Backtrack, OptimizerError> {
    let psi0 = objective.psi(rho)?;
    let phi = objective.status(rho)?;
    let slope: f64 = phi.iter().zip(target.iter().zip(rho)).map(|(p, (m, r))| p * (m - r)).sum();
    if slope >= 0.0 && target != rho {
        // not a descent direction: stay put
        return Ok(Backtrack {
            delta: 1.0,
            steps: 0,
            psi: psi0,
            slope,
        });
    }
    let mut t = 1.0;
    let mut trial = vec![0.0; rho.len()];
    for steps in 0..=config.backtrack_cap {
        for ((c, &r), &m) in trial.iter_mut().zip(rho).zip(target) {
            *c = r + t * (m - r);
        }
        // outside the domain the objective is treated as +infinity
        let psi = match objective.psi(&trial) {
            Ok(v) => v,
            Err(OptimizerError::Domain { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if psi <= psi0 + config.sigma_armijo * t * slope {
            return Ok(Backtrack {
                delta: 1.0 - t,
                steps,
                psi,
                slope,
            });
        }
        t *= config.xi;
    }
    Err(OptimizerError::BacktrackExhausted {
        iter: 0,
        steps: config.backtrack_cap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `|psi(k+1) - psi(k)|` fell below the tolerance.
    Converged,
    /// The induced loads reproduce the iterate exactly.
    FixedPoint,
    /// The induced loads are not a descent direction: the iterate is optimal up to
    /// round-off (or, with capped targets, the cap has discarded traffic).
    Stationary,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub psi: f64,
    /// `None` for the initial point.
    pub delta: Option<f64>,
    pub backtrack_steps: u32,
    /// Directional derivative toward the loads that produced this iterate.
    pub slope: Option<f64>,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
}

impl IterationTrace {
    pub fn psi_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.psi)
    }

    /// Trace rows `iter,psi,delta,backtrack_steps,rho_1..rho_n`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.records.first().map_or(0, |r| r.rho.len());
        let mut header: Vec<String> = ["iter", "psi", "delta", "backtrack_steps"].map(String::from).to_vec();
        header.extend((1..=n).map(|j| format!("rho_{j}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.iter.to_string(),
                r.psi.to_string(),
                r.delta.map(|d| d.to_string()).unwrap_or_default(),
                r.backtrack_steps.to_string(),
            ];
            row.extend(r.rho.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Iterate state: the load vector and everything derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct VgalaState {
    pub iter: usize,
    pub rho: LoadVector,
    pub phi: OperationStatusVector,
    pub psi: f64,
}

#[derive(Debug, Clone)]
pub struct VgalaOutcome {
    /// Association induced by the converged prices.
    pub association: AssociationMap,
    pub rho: LoadVector,
    pub phi: OperationStatusVector,
    pub psi: f64,
    /// Loads induced by `association`.
    pub perceived: PerceivedLoads,
    pub trace: IterationTrace,
    pub termination: Termination,
    /// Number of load updates performed.
    pub iterations: usize,
    /// Stations whose induced load hit the `1 - epsilon` cap at termination.
    pub clamped: Vec<usize>,
}

impl VgalaOutcome {
    /// Heavy traffic: some station's load had to be capped, so admission control
    /// should be tightened.
    pub fn is_overloaded(&self) -> bool {
        !self.clamped.is_empty()
    }
}

/// Outcome of a single [`Vgala::step`].
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Moved { delta: f64, steps: u32, psi_change: f64 },
    Stopped(Termination),
}

/// The alternating user-side selection / station-side update loop.
pub struct Vgala<'p, 'r> {
    problem: &'p Problem<'r>,
    config: OptimizerConfig,
    state: VgalaState,
    trace: IterationTrace,
    tol: f64,
}

impl<'p, 'r> Vgala<'p, 'r> {
    /// Starts from the loads of the max-rate association, capped at `1 - epsilon`.
    pub fn new(problem: &'p Problem<'r>, config: &OptimizerConfig) -> Result<Self, OptimizerError> {
        config.validate()?;
        let rho = problem.perceived_loads(&problem.max_rate_association()).clamped;
        Self::from_loads(problem, config, rho)
    }

    pub fn from_loads(problem: &'p Problem<'r>, config: &OptimizerConfig, rho: LoadVector) -> Result<Self, OptimizerError> {
        let objective = problem.objective();
        let psi = objective.psi(&rho)?;
        let phi = OperationStatusVector(objective.status(&rho)?);
        let tol = config.psi_tol_abs.unwrap_or(config.psi_tol_rel * psi);
        let trace = IterationTrace {
            records: vec![TraceRecord {
                iter: 1,
                psi,
                delta: None,
                backtrack_steps: 0,
                slope: None,
                rho: rho.0.clone(),
            }],
        };
        Ok(Self {
            problem,
            config: config.clone(),
            state: VgalaState { iter: 1, rho, phi, psi },
            trace,
            tol,
        })
    }

    pub fn state(&self) -> &VgalaState {
        &self.state
    }

    pub fn trace(&self) -> &IterationTrace {
        &self.trace
    }

    /// Objective-change tolerance in absolute units.
    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Users pick stations under the current prices, then the loads move toward the
    /// induced loads by a backtracking step. Unless `clamp_targets` is set the
    /// induced loads are used uncapped and steps that would leave `[0, 1 - epsilon]`
    /// are rejected by the line search, so no traffic is lost along the way.
    pub fn step(&mut self) -> Result<StepOutcome, OptimizerError> {
        let p = self.problem;
        let perceived = p.perceived_loads(&p.associate(&self.state.phi));
        let target = if self.config.clamp_targets { perceived.clamped } else { LoadVector(perceived.raw) };
        if target == self.state.rho {
            return Ok(StepOutcome::Stopped(Termination::FixedPoint));
        }
        let bt = backtrack_delta(p.objective(), &self.state.rho, &target, &self.config).map_err(|e| match e {
            OptimizerError::BacktrackExhausted { steps, .. } => OptimizerError::BacktrackExhausted {
                iter: self.state.iter,
                steps,
            },
            e => e,
        })?;
        if bt.slope >= 0.0 {
            return Ok(StepOutcome::Stopped(Termination::Stationary));
        }
        let t = 1.0 - bt.delta;
        let rho: Vec<f64> = self
            .state
            .rho
            .iter()
            .zip(target.iter())
            .map(|(&r, &m)| r + t * (m - r))
            .collect();
        let psi_change = bt.psi - self.state.psi;
        self.state = VgalaState {
            iter: self.state.iter + 1,
            phi: OperationStatusVector(p.objective().status(&rho)?),
            rho: LoadVector(rho),
            psi: bt.psi,
        };
        self.trace.records.push(TraceRecord {
            iter: self.state.iter,
            psi: bt.psi,
            delta: Some(bt.delta),
            backtrack_steps: bt.steps,
            slope: Some(bt.slope),
            rho: self.state.rho.0.clone(),
        });
        Ok(StepOutcome::Moved {
            delta: bt.delta,
            steps: bt.steps,
            psi_change,
        })
    }

    pub fn run(mut self) -> Result<VgalaOutcome, OptimizerError> {
        let mut termination = Termination::MaxIterations;
        for _ in 0..self.config.max_iters {
            match self.step()? {
                StepOutcome::Stopped(t) => {
                    termination = t;
                    break;
                }
                StepOutcome::Moved { psi_change, .. } if psi_change.abs() < self.tol => {
                    termination = Termination::Converged;
                    break;
                }
                StepOutcome::Moved { .. } => {}
            }
        }
        let association = self.problem.associate(&self.state.phi);
        let perceived = self.problem.perceived_loads(&association);
        let clamped = perceived.saturated(self.problem.epsilon());
        Ok(VgalaOutcome {
            association,
            iterations: self.state.iter - 1,
            rho: self.state.rho,
            phi: self.state.phi,
            psi: self.state.psi,
            perceived,
            trace: self.trace,
            termination,
            clamped,
        })
    }
}

/// Runs the balancing loop on a scenario with the objective implied by `config`
/// and the stations' own `theta`, optionally thinning traffic by admission control.
pub fn run_vgala(
    scenario: &Scenario,
    rates: &RateMap,
    config: &OptimizerConfig,
    admission: Option<&AdmissionField>,
) -> Result<VgalaOutcome, OptimizerError> {
    let mut problem = Problem::new(scenario, rates, config)?;
    if let Some(a) = admission {
        problem = problem.with_admission(a)?;
    }
    Vgala::new(&problem, config)?.run()
}
