//! Experiment configuration and orchestration: load a config, run one experiment,
//! write CSVs and a manifest into the output directory.
//!
//! ```toml
//! scenario = "hetnet_2km.toml"   # relative to this file
//! kind = "run"                   # run | sweep-kappa | sweep-theta | sweep-solar |
//!                                # compare-cre | oracle-check | monte-carlo
//! out_dir = "out/run"            # relative to this file
//! seed = 1
//! theta = 0.8                    # optional: same theta for every station
//! admission_mu = 1.0             # optional: uniform admission probability
//! grid = 100                     # optional: locations per side
//! draws = 500
//!
//! [optimizer]                    # every field optional
//! kappa = 4.0
//! epsilon = 0.001
//! sigma_armijo = 0.3
//! xi = 0.5
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    bias_grid, evaluate_cre, exhaustive_oracle, run_ga, run_la, sweep_cre_bias, BaselineError, CreCriterion,
};
use crate::energy::EnergyState;
use crate::evaluation::{
    compute_metrics, monte_carlo_compare, solar_rows, sweep_kappa, sweep_solar, sweep_theta, write_summary_csv,
    write_sweep_csv, EvaluationError, MonteCarloConfig, Scheme, Selector,
};
use crate::optimizer::{run_vgala, AdmissionField, OptimizerConfig, OptimizerError, Problem, VgalaOutcome};
use crate::scenario::{build_rate_map, RateMap, Scenario, ScenarioError, ScenarioFile};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(String),
    #[error("config field `{field}`: {constraint}")]
    Invalid { field: String, constraint: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(
        "offered traffic is infeasible: stations {stations:?} are saturated at 1 - epsilon; \
         set `admission_mu` below 1 to admit less traffic"
    )]
    Infeasible { stations: Vec<u32> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Run,
    SweepKappa,
    SweepTheta,
    SweepSolar,
    CompareCre,
    OracleCheck,
    MonteCarlo,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::Run,
        Self::SweepKappa,
        Self::SweepTheta,
        Self::SweepSolar,
        Self::CompareCre,
        Self::OracleCheck,
        Self::MonteCarlo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::SweepKappa => "sweep-kappa",
            Self::SweepTheta => "sweep-theta",
            Self::SweepSolar => "sweep-solar",
            Self::CompareCre => "compare-cre",
            Self::OracleCheck => "oracle-check",
            Self::MonteCarlo => "monte-carlo",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| ExperimentError::Invalid {
            field: "kind".into(),
            constraint: format!("unknown experiment `{s}`"),
        })
    }
}

fn default_kind() -> ExperimentKind {
    ExperimentKind::Run
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_seed() -> u64 {
    1
}
fn default_draws() -> usize {
    500
}
fn default_mean_users() -> f64 {
    200.0
}
fn default_mean_bits() -> f64 {
    250e3
}
fn default_kappas() -> Vec<f64> {
    vec![0.0, 2.0, 4.0, 8.0]
}
fn default_thetas() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}
fn default_efficiencies() -> Vec<f64> {
    (0..10).map(|i| i as f64 * 0.05).collect()
}
fn default_irradiance() -> f64 {
    1000.0
}
fn default_bias_points() -> usize {
    49
}
fn default_oracle_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario file; relative paths are resolved against the config file's directory.
    pub scenario: PathBuf,
    #[serde(default = "default_kind")]
    pub kind: ExperimentKind,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Same energy-latency coefficient for every station, overriding the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admission_mu: Option<f64>,
    /// Locations per side, overriding the scenario's cell size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_mean_users")]
    pub mean_users: f64,
    #[serde(default = "default_mean_bits")]
    pub mean_bits: f64,
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    #[serde(default = "default_efficiencies")]
    pub efficiencies: Vec<f64>,
    #[serde(default = "default_irradiance")]
    pub irradiance_w_m2: f64,
    #[serde(default = "default_bias_points")]
    pub bias_points: usize,
    /// Relative tolerance of the oracle check.
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
}

impl ExperimentConfig {
    /// Config with every default applied.
    pub fn new(scenario: impl Into<PathBuf>) -> Self {
        Self::from_toml(&format!("scenario = {:?}", scenario.into().display().to_string()), Path::new(""))
            .expect("default config is valid")
    }

    /// Parses and validates; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ExperimentError> {
        let mut c: Self = toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
        if c.scenario.is_relative() {
            c.scenario = base.join(&c.scenario);
        }
        if c.out_dir.is_relative() {
            c.out_dir = base.join(&c.out_dir);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |field: &str, constraint: &str| {
            Err(ExperimentError::Invalid {
                field: field.into(),
                constraint: constraint.into(),
            })
        };
        if let Err(OptimizerError::InvalidConfig(msg)) = self.optimizer.validate() {
            return invalid("optimizer", &msg);
        }
        if let Some(t) = self.theta {
            if !(0.0..=1.0).contains(&t) {
                return invalid("theta", "must lie in [0, 1]");
            }
        }
        if let Some(mu) = self.admission_mu {
            if !(0.0..=1.0).contains(&mu) {
                return invalid("admission_mu", "must lie in [0, 1]");
            }
        }
        if self.grid == Some(0) {
            return invalid("grid", "must be > 0");
        }
        if self.draws == 0 {
            return invalid("draws", "must be > 0");
        }
        if !(self.mean_users > 0.0 && self.mean_bits > 0.0) {
            return invalid("mean_users / mean_bits", "must be > 0");
        }
        if self.kappas.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
            return invalid("kappas", "every kappa must be finite and >= 0");
        }
        if self.thetas.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return invalid("thetas", "every theta must lie in [0, 1]");
        }
        if self.efficiencies.iter().any(|e| !(*e >= 0.0)) || self.efficiencies.windows(2).any(|w| w[1] < w[0]) {
            return invalid("efficiencies", "must be >= 0 and sorted ascending");
        }
        if !(self.irradiance_w_m2 > 0.0) {
            return invalid("irradiance_w_m2", "must be > 0");
        }
        if self.bias_points == 0 {
            return invalid("bias_points", "must be > 0");
        }
        if !(self.oracle_tol >= 0.0) {
            return invalid("oracle_tol", "must be >= 0");
        }
        Ok(())
    }

    /// Scenario as configured: file, grid override and theta override applied.
    pub fn load_scenario(&self) -> Result<(String, Scenario), ExperimentError> {
        let text = read(&self.scenario)?;
        let mut file = ScenarioFile::from_toml(&text)?;
        if let Some(n) = self.grid {
            file.area.cell_size_m = file.area.width_m.max(file.area.height_m) / n as f64;
        }
        let mut scenario = file.build()?;
        if let Some(t) = self.theta {
            scenario = scenario.with_uniform_theta(t);
        }
        Ok((text, scenario))
    }

    fn admission(&self, n_cells: usize) -> Result<Option<AdmissionField>, ExperimentError> {
        self.admission_mu
            .map(|mu| AdmissionField::uniform(n_cells, mu))
            .transpose()
            .map_err(Into::into)
    }
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    let text = read(path)?;
    let c = ExperimentConfig::from_toml(&text, path.parent().unwrap_or(Path::new("")))?;
    if !c.scenario.is_file() {
        return Err(ExperimentError::Invalid {
            field: "scenario".into(),
            constraint: format!("file {} does not exist", c.scenario.display()),
        });
    }
    Ok(c)
}

/// What an experiment printed and wrote.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    /// Outcome of a pass/fail experiment (oracle check).
    pub passed: Option<bool>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    kind: ExperimentKind,
    seed: u64,
    config: &'a ExperimentConfig,
    scenario_name: &'a str,
    scenario_file: &'a str,
}

struct Out<'a> {
    dir: &'a Path,
    summary: RunSummary,
}

impl Out<'_> {
    fn create(&mut self, name: &str) -> Result<fs::File, ExperimentError> {
        let path = self.dir.join(name);
        let f = fs::File::create(&path).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.summary.files.push(path);
        Ok(f)
    }

    fn say(&mut self, line: String) {
        self.summary.lines.push(line);
    }
}

fn vgala_metrics_line(name: &str, scenario: &Scenario, out: &VgalaOutcome, eps: f64) -> Result<String, ExperimentError> {
    let m = compute_metrics(&out.rho, scenario, eps)?;
    Ok(format!(
        "{name}: psi = {:.6}, latency = {:.6}, on-grid = {:.3} W, iterations = {} ({:?})",
        out.psi, m.latency_metric, m.on_grid_w, out.iterations, out.termination
    ))
}

/// Runs the configured experiment. Output files are written before an infeasibility
/// error is returned, so the trace can still be inspected.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, ExperimentError> {
    config.validate()?;
    let (scenario_text, scenario) = config.load_scenario()?;
    let rates = build_rate_map(&scenario)?;
    fs::create_dir_all(&config.out_dir).map_err(|source| ExperimentError::Io {
        path: config.out_dir.display().to_string(),
        source,
    })?;
    let mut out = Out {
        dir: &config.out_dir,
        summary: RunSummary::default(),
    };
    let manifest = Manifest {
        tool: "vgala",
        version: env!("CARGO_PKG_VERSION"),
        kind: config.kind,
        seed: config.seed,
        config,
        scenario_name: &scenario.name,
        scenario_file: &scenario_text,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = config.out_dir.join("manifest.json");
    fs::write(&path, json + "\n").map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    out.summary.files.push(path);

    let opt = &config.optimizer;
    let admission = config.admission(scenario.num_cells())?;
    match config.kind {
        ExperimentKind::Run => run_single(&mut out, &scenario, &rates, opt, admission.as_ref())?,
        ExperimentKind::SweepKappa => {
            let rows = sweep_kappa(&scenario, &rates, opt, &config.kappas)?;
            write_sweep_csv(&rows, out.create("sweep_kappa.csv")?)?;
            for r in &rows {
                out.say(format!("kappa = {}: latency = {:.6}, on-grid = {:.3} W", r.param_value, r.latency_metric, r.on_grid_w));
            }
        }
        ExperimentKind::SweepTheta => {
            let rows = sweep_theta(&scenario, &rates, opt, &config.thetas)?;
            write_sweep_csv(&rows, out.create("sweep_theta.csv")?)?;
            for r in &rows {
                out.say(format!("theta = {}: latency = {:.6}, on-grid = {:.3} W", r.param_value, r.latency_metric, r.on_grid_w));
            }
        }
        ExperimentKind::SweepSolar => {
            let points = sweep_solar(&scenario, &rates, opt, &config.efficiencies, config.irradiance_w_m2)?;
            write_sweep_csv(&solar_rows(&points), out.create("sweep_solar.csv")?)?;
            for p in &points {
                out.say(format!(
                    "efficiency = {}: region {:?}, vGALA on-grid = {:.3} W, LA on-grid = {:.3} W, same association as LA: {}",
                    p.efficiency,
                    p.region,
                    p.vgala.on_grid_w,
                    p.la.on_grid_w,
                    p.same_association()
                ));
            }
        }
        ExperimentKind::CompareCre => compare_cre(&mut out, &scenario, &rates, config)?,
        ExperimentKind::OracleCheck => oracle_check(&mut out, &scenario, &rates, config)?,
        ExperimentKind::MonteCarlo => monte_carlo(&mut out, &scenario, &rates, config)?,
    }
    Ok(out.summary)
}

fn run_single(
    out: &mut Out,
    scenario: &Scenario,
    rates: &RateMap,
    opt: &OptimizerConfig,
    admission: Option<&AdmissionField>,
) -> Result<(), ExperimentError> {
    let v = run_vgala(scenario, rates, opt, admission)?;
    v.trace.write_csv(out.create("trace.csv")?)?;
    v.association.write_grid_csv(&scenario.grid, scenario, out.create("coverage.csv")?)?;
    EnergyState::evaluate(&scenario.stations, &v.rho, opt.epsilon).write_csv(out.create("energy.csv")?)?;
    rates.write_csv(scenario, out.create("rate_map.csv")?)?;
    let line = vgala_metrics_line("vGALA", scenario, &v, opt.epsilon)?;
    out.say(line);
    if v.is_overloaded() {
        return Err(ExperimentError::Infeasible {
            stations: v.clamped.iter().map(|&j| scenario.stations[j].id).collect(),
        });
    }
    Ok(())
}

fn compare_cre(out: &mut Out, scenario: &Scenario, rates: &RateMap, config: &ExperimentConfig) -> Result<(), ExperimentError> {
    let opt = &config.optimizer;
    let eps = opt.epsilon;
    let problem = Problem::new(scenario, rates, opt)?;
    let mut w = csv::Writer::from_writer(out.create("compare_cre.csv")?);
    w.write_record(["scheme", "latency_metric", "on_grid_w", "psi", "bias"])?;
    let runs = [
        ("vGALA", run_vgala(scenario, rates, opt, None)?),
        ("LA", run_la(scenario, rates, opt, None)?),
        ("GA", run_ga(scenario, rates, opt, None)?),
    ];
    for (name, v) in &runs {
        let m = compute_metrics(&v.rho, scenario, eps)?;
        let psi = problem.objective().psi(&v.rho)?;
        w.write_record(&[name.to_string(), m.latency_metric.to_string(), m.on_grid_w.to_string(), psi.to_string(), String::new()])?;
        out.say(format!("{name}: latency = {:.6}, on-grid = {:.3} W, psi = {:.6}", m.latency_metric, m.on_grid_w, psi));
    }
    let grid = bias_grid(config.bias_points);
    for c in [CreCriterion::Latency, CreCriterion::OnGrid, CreCriterion::Psi] {
        let sweep = sweep_cre_bias(scenario, rates, opt, c, &grid)?;
        let bias = sweep.best_point().bias;
        sweep.write_csv(out.create(&format!("cre_sweep_{}.csv", c.label().to_lowercase()))?)?;
        let (_, m, psi) = evaluate_cre(&problem, scenario, &sweep.best)?;
        w.write_record(&[c.label().to_string(), m.latency_metric.to_string(), m.on_grid_w.to_string(), psi.to_string(), bias.to_string()])?;
        out.say(format!(
            "{}: bias = {bias}, latency = {:.6}, on-grid = {:.3} W, psi = {:.6}",
            c.label(),
            m.latency_metric,
            m.on_grid_w,
            psi
        ));
    }
    w.flush().map_err(|e| ExperimentError::Csv(e.into()))?;
    Ok(())
}

fn oracle_check(out: &mut Out, scenario: &Scenario, rates: &RateMap, config: &ExperimentConfig) -> Result<(), ExperimentError> {
    let opt = &config.optimizer;
    let v = run_vgala(scenario, rates, opt, None)?;
    let o = exhaustive_oracle(scenario, rates, opt)?;
    let rel = (v.psi - o.best_psi).abs() / o.best_psi.abs().max(f64::MIN_POSITIVE);
    let passed = rel <= config.oracle_tol;
    // objective of the final association's own loads, an upper bound on the oracle
    let problem = Problem::new(scenario, rates, opt)?;
    let assoc_psi = problem.objective().psi(&v.perceived.clamped)?;
    let mut w = csv::Writer::from_writer(out.create("oracle.csv")?);
    w.write_record(["vgala_psi", "association_psi", "oracle_psi", "rel_diff", "enumerated", "iterations", "passed"])?;
    w.write_record(&[
        v.psi.to_string(),
        assoc_psi.to_string(),
        o.best_psi.to_string(),
        rel.to_string(),
        o.enumerated.to_string(),
        v.iterations.to_string(),
        passed.to_string(),
    ])?;
    w.flush().map_err(|e| ExperimentError::Csv(e.into()))?;
    out.say(format!(
        "{}: oracle psi = {:.10}, vGALA psi = {:.10}, rel diff = {rel:.3e} ({} associations)",
        if passed { "PASS" } else { "FAIL" },
        o.best_psi,
        v.psi,
        o.enumerated
    ));
    out.say(format!("final association psi = {assoc_psi:.10}"));
    out.summary.passed = Some(passed);
    Ok(())
}

fn monte_carlo(out: &mut Out, scenario: &Scenario, rates: &RateMap, config: &ExperimentConfig) -> Result<(), ExperimentError> {
    let opt = &config.optimizer;
    let mut schemes = vec![
        Scheme {
            name: "vGALA".into(),
            selector: Selector::Prices(run_vgala(scenario, rates, opt, None)?.phi.0),
        },
        Scheme {
            name: "LA".into(),
            selector: Selector::Prices(run_la(scenario, rates, opt, None)?.phi.0),
        },
        Scheme {
            name: "GA".into(),
            selector: Selector::Prices(run_ga(scenario, rates, opt, None)?.phi.0),
        },
    ];
    let grid = bias_grid(config.bias_points);
    for c in [CreCriterion::Latency, CreCriterion::OnGrid, CreCriterion::Psi] {
        schemes.push(Scheme {
            name: c.label().into(),
            selector: Selector::Bias(sweep_cre_bias(scenario, rates, opt, c, &grid)?.best),
        });
    }
    let mc = MonteCarloConfig {
        draws: config.draws,
        mean_users: config.mean_users,
        mean_bits: config.mean_bits,
        seed: config.seed,
        epsilon: opt.epsilon,
    };
    let rows = monte_carlo_compare(scenario, rates, &schemes, &mc)?;
    write_summary_csv(&rows, out.create("monte_carlo.csv")?)?;
    for r in &rows {
        out.say(format!(
            "{}: latency = {:.6} +- {:.6}, on-grid = {:.3} +- {:.3} W, clamped draws = {}/{}",
            r.name, r.latency_mean, r.latency_se, r.on_grid_mean, r.on_grid_se, r.clamped_draws, r.draws
        ));
    }
    Ok(())
}
