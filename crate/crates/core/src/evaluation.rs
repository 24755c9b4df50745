//! Metrics, Monte Carlo user draws and parameter sweeps.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{cre_select, run_la, BaselineError, CreBias};
use crate::energy::{bs_power, green_capacity, on_grid_power};
use crate::optimizer::{latency_indicator, run_vgala, select_bs, AssociationMap, OptimizerConfig, OptimizerError};
use crate::scenario::{RateMap, Scenario};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsMetrics {
    pub bs_id: u32,
    pub rho: f64,
    pub latency: f64,
    pub power_w: f64,
    pub on_grid_w: f64,
    pub green_capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// `sum_j L(rho_j)`.
    pub latency_metric: f64,
    /// Total grid draw in watts.
    pub on_grid_w: f64,
    pub per_bs: Vec<BsMetrics>,
    pub iterations: usize,
}

impl MetricsReport {
    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }
}

pub fn compute_metrics(rho: &[f64], scenario: &Scenario, epsilon: f64) -> Result<MetricsReport, OptimizerError> {
    if rho.len() != scenario.num_stations() {
        return Err(OptimizerError::Shape(format!("{} loads for {} stations", rho.len(), scenario.num_stations())));
    }
    let per_bs = scenario
        .stations
        .iter()
        .zip(rho)
        .map(|(bs, &r)| {
            Ok(BsMetrics {
                bs_id: bs.id,
                rho: r,
                latency: latency_indicator(r, bs.vartheta)?,
                power_w: bs_power(bs, r),
                on_grid_w: on_grid_power(bs, r),
                green_capacity: green_capacity(bs, epsilon),
            })
        })
        .collect::<Result<Vec<_>, OptimizerError>>()?;
    Ok(MetricsReport {
        latency_metric: per_bs.iter().map(|b| b.latency).sum(),
        on_grid_w: per_bs.iter().map(|b| b.on_grid_w).sum(),
        per_bs,
        iterations: 0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub position: (f64, f64),
    pub cell: usize,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserDraw {
    pub users: Vec<User>,
    pub seed: u64,
}

fn draw_with(scenario: &Scenario, mean_count: f64, mean_bits: f64, rng: &mut ChaCha8Rng) -> Result<Vec<User>, EvaluationError> {
    let poisson = Poisson::new(mean_count).map_err(|e| EvaluationError::InvalidInput(format!("mean count: {e}")))?;
    let exp = Exp::new(1.0 / mean_bits).map_err(|e| EvaluationError::InvalidInput(format!("mean traffic: {e}")))?;
    let weights = WeightedIndex::new(scenario.cells().iter().map(|c| c.lambda))
        .map_err(|e| EvaluationError::InvalidInput(format!("traffic field: {e}")))?;
    let grid = &scenario.grid;
    let n = poisson.sample(rng) as usize;
    let mut users = Vec::with_capacity(n);
    for _ in 0..n {
        let cell = weights.sample(rng);
        let (row, col) = grid.row_col(cell);
        let x0 = col as f64 * grid.cell_size_m;
        let y0 = row as f64 * grid.cell_size_m;
        let x1 = (x0 + grid.cell_size_m).min(grid.width_m);
        let y1 = (y0 + grid.cell_size_m).min(grid.height_m);
        users.push(User {
            position: (rng.random_range(x0..x1), rng.random_range(y0..y1)),
            cell,
            bits: exp.sample(rng),
        });
    }
    Ok(users)
}

/// Poisson number of users placed in proportion to each location's arrival rate,
/// each with exponentially distributed traffic.
pub fn draw_users(scenario: &Scenario, mean_count: f64, mean_bits: f64, seed: u64) -> Result<UserDraw, EvaluationError> {
    if !(mean_count > 0.0 && mean_bits > 0.0) {
        return Err(EvaluationError::InvalidInput("mean count and mean traffic must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(UserDraw {
        users: draw_with(scenario, mean_count, mean_bits, &mut rng)?,
        seed,
    })
}

/// How a scheme assigns a user at a location.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    /// Highest `rate / phi` under fixed prices.
    Prices(Vec<f64>),
    /// Highest biased rate.
    Bias(CreBias),
}

impl Selector {
    pub fn select(&self, cell: usize, rates: &RateMap) -> Option<usize> {
        match self {
            Self::Prices(phi) => select_bs(cell, phi, rates),
            Self::Bias(b) => cre_select(cell, b, rates),
        }
    }

    pub fn association(&self, rates: &RateMap) -> AssociationMap {
        AssociationMap {
            choice: (0..rates.num_cells()).map(|x| self.select(x, rates)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub name: String,
    pub selector: Selector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSummary {
    pub name: String,
    pub latency_mean: f64,
    pub latency_se: f64,
    pub on_grid_mean: f64,
    pub on_grid_se: f64,
    /// Draws in which some station's load had to be capped at `1 - epsilon`.
    pub clamped_draws: usize,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonteCarloConfig {
    pub draws: usize,
    pub mean_users: f64,
    pub mean_bits: f64,
    pub seed: u64,
    pub epsilon: f64,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Each draw places users and applies every scheme to the same users; a user's load
/// on its station is `bits / rate`. Draw `i` uses stream `i` of the seeded generator.
pub fn monte_carlo_compare(
    scenario: &Scenario,
    rates: &RateMap,
    schemes: &[Scheme],
    mc: &MonteCarloConfig,
) -> Result<Vec<SchemeSummary>, EvaluationError> {
    if mc.draws == 0 || schemes.is_empty() {
        return Err(EvaluationError::InvalidInput("need at least one draw and one scheme".into()));
    }
    let cap = 1.0 - mc.epsilon;
    let per_draw: Vec<Vec<(f64, f64, bool)>> = (0..mc.draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            rng.set_stream(i as u64);
            let users = draw_with(scenario, mc.mean_users, mc.mean_bits, &mut rng)?;
            schemes
                .iter()
                .map(|s| {
                    let mut raw = vec![0.0; scenario.num_stations()];
                    for u in &users {
                        let j = s.selector.select(u.cell, rates).ok_or_else(|| {
                            EvaluationError::InvalidInput(format!("user at location {} has no candidate", u.cell))
                        })?;
                        raw[j] += u.bits / rates.rate(u.cell, j);
                    }
                    let clamped = raw.iter().any(|&r| r >= cap);
                    let rho: Vec<f64> = raw.iter().map(|r| r.min(cap)).collect();
                    let m = compute_metrics(&rho, scenario, mc.epsilon)?;
                    Ok((m.latency_metric, m.on_grid_w, clamped))
                })
                .collect()
        })
        .collect::<Result<_, EvaluationError>>()?;

    Ok(schemes
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let lat: Vec<f64> = per_draw.iter().map(|d| d[k].0).collect();
            let grid: Vec<f64> = per_draw.iter().map(|d| d[k].1).collect();
            let (latency_mean, latency_se) = mean_se(&lat);
            let (on_grid_mean, on_grid_se) = mean_se(&grid);
            SchemeSummary {
                name: s.name.clone(),
                latency_mean,
                latency_se,
                on_grid_mean,
                on_grid_se,
                clamped_draws: per_draw.iter().filter(|d| d[k].2).count(),
                draws: mc.draws,
            }
        })
        .collect())
}

pub fn write_summary_csv<W: Write>(rows: &[SchemeSummary], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "latency_mean", "latency_se", "on_grid_mean_w", "on_grid_se_w", "clamped_draws", "draws"])?;
    for r in rows {
        w.write_record(&[
            r.name.clone(),
            r.latency_mean.to_string(),
            r.latency_se.to_string(),
            r.on_grid_mean.to_string(),
            r.on_grid_se.to_string(),
            r.clamped_draws.to_string(),
            r.draws.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param_value: f64,
    pub scheme: String,
    pub latency_metric: f64,
    pub on_grid_w: f64,
    pub iterations: usize,
}

/// Sweep rows `param_value,scheme,latency_metric,on_grid_w,iterations`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param_value", "scheme", "latency_metric", "on_grid_w", "iterations"])?;
    for r in rows {
        w.write_record(&[
            r.param_value.to_string(),
            r.scheme.clone(),
            r.latency_metric.to_string(),
            r.on_grid_w.to_string(),
            r.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn vgala_row(scenario: &Scenario, rates: &RateMap, config: &OptimizerConfig, param: f64) -> Result<SweepRow, EvaluationError> {
    let out = run_vgala(scenario, rates, config, None)?;
    let m = compute_metrics(&out.rho, scenario, config.epsilon)?;
    Ok(SweepRow {
        param_value: param,
        scheme: "vGALA".into(),
        latency_metric: m.latency_metric,
        on_grid_w: m.on_grid_w,
        iterations: out.iterations,
    })
}

pub fn sweep_kappa(scenario: &Scenario, rates: &RateMap, config: &OptimizerConfig, kappas: &[f64]) -> Result<Vec<SweepRow>, EvaluationError> {
    kappas
        .par_iter()
        .map(|&k| vgala_row(scenario, rates, &config.clone().with_kappa(k), k))
        .collect()
}

pub fn sweep_theta(scenario: &Scenario, rates: &RateMap, config: &OptimizerConfig, thetas: &[f64]) -> Result<Vec<SweepRow>, EvaluationError> {
    thetas
        .par_iter()
        .map(|&t| vgala_row(&scenario.with_uniform_theta(t), rates, config, t))
        .collect()
}

/// Where a solar efficiency puts the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolarRegion {
    /// No station can carry any load on green energy.
    R1,
    /// Some stations have no green capacity, others do.
    R2,
    /// Every station has some green capacity, not all have full capacity.
    R3,
    /// Every station can carry full load on green energy.
    R4,
}

pub fn classify_region(scenario: &Scenario, epsilon: f64) -> SolarRegion {
    let caps: Vec<f64> = scenario.stations.iter().map(|bs| green_capacity(bs, epsilon)).collect();
    if caps.iter().all(|&c| c <= epsilon) {
        SolarRegion::R1
    } else if caps.iter().all(|&c| c >= 1.0 - epsilon) {
        SolarRegion::R4
    } else if caps.iter().any(|&c| c <= epsilon) {
        SolarRegion::R2
    } else {
        SolarRegion::R3
    }
}

#[derive(Debug, Clone)]
pub struct SolarPoint {
    pub efficiency: f64,
    pub region: SolarRegion,
    pub green_capacity: Vec<f64>,
    pub vgala: MetricsReport,
    pub la: MetricsReport,
    pub vgala_association: AssociationMap,
    pub la_association: AssociationMap,
}

impl SolarPoint {
    pub fn same_association(&self) -> bool {
        self.vgala_association == self.la_association
    }
}

/// Recomputes panel-backed green budgets for each efficiency and runs vGALA and LA.
pub fn sweep_solar(
    scenario: &Scenario,
    rates: &RateMap,
    config: &OptimizerConfig,
    efficiencies: &[f64],
    irradiance_w_m2: f64,
) -> Result<Vec<SolarPoint>, EvaluationError> {
    if efficiencies.windows(2).any(|w| w[1] < w[0]) {
        return Err(EvaluationError::InvalidInput("efficiencies must be sorted ascending".into()));
    }
    efficiencies
        .par_iter()
        .map(|&eff| {
            let s = scenario.with_solar_efficiency(eff, irradiance_w_m2);
            let v = run_vgala(&s, rates, config, None)?;
            let la = run_la(&s, rates, config, None)?;
            Ok(SolarPoint {
                efficiency: eff,
                region: classify_region(&s, config.epsilon),
                green_capacity: s.stations.iter().map(|bs| green_capacity(bs, config.epsilon)).collect(),
                vgala: compute_metrics(&v.rho, &s, config.epsilon)?.with_iterations(v.iterations),
                la: compute_metrics(&la.rho, &s, config.epsilon)?.with_iterations(la.iterations),
                vgala_association: v.association,
                la_association: la.association,
            })
        })
        .collect()
}

pub fn solar_rows(points: &[SolarPoint]) -> Vec<SweepRow> {
    points
        .iter()
        .flat_map(|p| {
            [("vGALA", &p.vgala), ("LA", &p.la)].map(|(name, m)| SweepRow {
                param_value: p.efficiency,
                scheme: name.into(),
                latency_metric: m.latency_metric,
                on_grid_w: m.on_grid_w,
                iterations: m.iterations,
            })
        })
        .collect()
}
