//! Scenario file schema (TOML).
//!
//! ```toml
//! name = "example"
//!
//! [area]
//! width_m = 2000.0
//! height_m = 2000.0
//! cell_size_m = 20.0
//!
//! [traffic]
//! arrivals_per_s = 200.0      # total over the area, uniform density
//! bits_per_arrival = 250000.0
//! # optional per-cell overrides
//! # [[traffic.cells]]
//! # row = 0
//! # col = 0
//! # lambda = 0.5
//! # nu = 250000.0
//!
//! [channel]                    # every field optional, defaults shown
//! shadowing_db = 5.0
//! shadowing = "fixed"          # or "lognormal"
//! rayleigh_margin_db = 9.0
//! antenna_gain_db = 15.0
//! noise_dbm_per_hz = -174.0
//! receiver_sensitivity_dbm = -123.0
//! uplink_pathloss_threshold_db = 140.0
//!
//! [energy]
//! solar_efficiency = 0.174
//! irradiance_w_m2 = 1000.0
//! macro_capacity_w = [750.0, 1300.0]   # panel output range at solar_efficiency
//! small_capacity_w = [37.0, 48.0]
//! seed = 1
//!
//! [deployment]                 # optional random placement
//! macros = 3
//! smalls = 7
//! seed = 7
//!
//! [[bs]]                       # explicit stations (in addition to random ones)
//! id = 1
//! tier = "macro"
//! x = 500.0
//! y = 500.0
//! # any TierDefaults field may be overridden here, plus green_budget_w or panel_area_m2
//! ```
//!
//! Macro path loss takes the distance in kilometers, small-cell path loss in meters.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AreaGrid, BaseStation, ChannelParams, Scenario, ScenarioError, Tier};
use crate::energy::solar_budget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSpec {
    pub width_m: f64,
    pub height_m: f64,
    pub cell_size_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellTraffic {
    pub row: usize,
    pub col: usize,
    pub lambda: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    pub arrivals_per_s: f64,
    pub bits_per_arrival: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellTraffic>,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        Self {
            arrivals_per_s: 200.0,
            bits_per_arrival: 250e3,
            cells: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySpec {
    pub solar_efficiency: f64,
    pub irradiance_w_m2: f64,
    pub macro_capacity_w: [f64; 2],
    pub small_capacity_w: [f64; 2],
    pub seed: u64,
}

impl Default for EnergySpec {
    fn default() -> Self {
        Self {
            solar_efficiency: 0.174,
            irradiance_w_m2: 1000.0,
            macro_capacity_w: [750.0, 1300.0],
            small_capacity_w: [37.0, 48.0],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TierDefaults {
    pub tx_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub static_power_w: f64,
    pub load_power_coeff_w: f64,
    pub theta: f64,
    pub vartheta: f64,
}

impl TierDefaults {
    pub fn macro_cell() -> Self {
        Self {
            tx_power_dbm: 46.0,
            bandwidth_hz: 10e6,
            static_power_w: 750.0,
            load_power_coeff_w: 500.0,
            theta: 0.8,
            vartheta: 1.0,
        }
    }

    pub fn small_cell() -> Self {
        Self {
            tx_power_dbm: 30.0,
            bandwidth_hz: 10e6,
            static_power_w: 37.0,
            load_power_coeff_w: 4.0,
            theta: 0.8,
            vartheta: 1.0,
        }
    }
}

impl Default for TierDefaults {
    fn default() -> Self {
        Self::macro_cell()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    #[serde(rename = "macro", default = "TierDefaults::macro_cell")]
    pub macro_cell: TierDefaults,
    #[serde(rename = "small", default = "TierDefaults::small_cell")]
    pub small_cell: TierDefaults,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            macro_cell: TierDefaults::macro_cell(),
            small_cell: TierDefaults::small_cell(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentSpec {
    pub macros: usize,
    pub smalls: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSpec {
    pub id: u32,
    pub tier: Tier,
    pub x: f64,
    pub y: f64,
    pub tx_power_dbm: Option<f64>,
    pub bandwidth_hz: Option<f64>,
    pub static_power_w: Option<f64>,
    pub load_power_coeff_w: Option<f64>,
    pub theta: Option<f64>,
    pub vartheta: Option<f64>,
    pub green_budget_w: Option<f64>,
    pub panel_area_m2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_name")]
    pub name: String,
    pub area: AreaSpec,
    #[serde(default)]
    pub traffic: TrafficSpec,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub shadowing_seed: u64,
    #[serde(default)]
    pub energy: EnergySpec,
    #[serde(default)]
    pub defaults: Defaults,
    pub deployment: Option<DeploymentSpec>,
    #[serde(default)]
    pub bs: Vec<StationSpec>,
}

fn default_name() -> String {
    "scenario".to_string()
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    fn panel_area_for(&self, capacity_w: f64) -> f64 {
        capacity_w / (self.energy.solar_efficiency * self.energy.irradiance_w_m2)
    }

    /// Materializes the scenario: grid, traffic field, and station roster.
    ///
    /// Randomly deployed stations take ids after the largest explicit id, macros first.
    /// Stations without an explicit budget or panel get a panel sized so that its
    /// output at the configured efficiency is uniform in the tier's capacity range.
    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let a = &self.area;
        let mut grid = AreaGrid::uniform(
            a.width_m,
            a.height_m,
            a.cell_size_m,
            self.traffic.arrivals_per_s,
            self.traffic.bits_per_arrival,
        )?;
        for c in &self.traffic.cells {
            if c.row >= grid.rows || c.col >= grid.cols {
                return Err(ScenarioError::InvalidArea(format!(
                    "traffic cell ({}, {}) outside {}x{} grid",
                    c.row, c.col, grid.rows, grid.cols
                )));
            }
            let idx = grid.index(c.row, c.col);
            grid.cells[idx].lambda = c.lambda;
            grid.cells[idx].nu = c.nu;
        }

        let e = &self.energy;
        if !(e.solar_efficiency > 0.0 && e.irradiance_w_m2 > 0.0) {
            return Err(ScenarioError::Parse(
                "energy.solar_efficiency and energy.irradiance_w_m2 must be > 0".into(),
            ));
        }
        for range in [e.macro_capacity_w, e.small_capacity_w] {
            if !(range[0] >= 0.0 && range[0] <= range[1]) {
                return Err(ScenarioError::Parse(format!("invalid capacity range {range:?}")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(e.seed);

        let mut placed: Vec<(u32, Tier, f64, f64)> = self.bs.iter().map(|b| (b.id, b.tier, b.x, b.y)).collect();
        if let Some(dep) = &self.deployment {
            let first_id = self.bs.iter().map(|b| b.id).max().unwrap_or(0) + 1;
            let mut pos_rng = ChaCha8Rng::seed_from_u64(dep.seed);
            let tiers = std::iter::repeat_n(Tier::Macro, dep.macros).chain(std::iter::repeat_n(Tier::Small, dep.smalls));
            for (id, tier) in (first_id..).zip(tiers) {
                let x = pos_rng.random_range(0.0..a.width_m);
                let y = pos_rng.random_range(0.0..a.height_m);
                placed.push((id, tier, x, y));
            }
        }

        let mut stations = Vec::with_capacity(placed.len());
        for (i, (id, tier, x, y)) in placed.into_iter().enumerate() {
            let spec = self.bs.get(i);
            let d = match tier {
                Tier::Macro => &self.defaults.macro_cell,
                Tier::Small => &self.defaults.small_cell,
            };
            let pick = |o: Option<f64>, dflt: f64| o.unwrap_or(dflt);
            let range = match tier {
                Tier::Macro => e.macro_capacity_w,
                Tier::Small => e.small_capacity_w,
            };
            // one draw per station keeps budgets stable when explicit overrides change
            let drawn_capacity = if range[0] < range[1] {
                rng.random_range(range[0]..=range[1])
            } else {
                range[0]
            };
            let (green_budget_w, panel_area_m2) = match spec.map(|s| (s.green_budget_w, s.panel_area_m2)) {
                Some((Some(budget), panel)) => (budget, panel),
                Some((None, Some(panel))) => (solar_budget(panel, e.solar_efficiency, e.irradiance_w_m2), Some(panel)),
                _ => {
                    let panel = self.panel_area_for(drawn_capacity);
                    (solar_budget(panel, e.solar_efficiency, e.irradiance_w_m2), Some(panel))
                }
            };
            stations.push(BaseStation {
                id,
                tier,
                position: (x, y),
                tx_power_dbm: pick(spec.and_then(|s| s.tx_power_dbm), d.tx_power_dbm),
                bandwidth_hz: pick(spec.and_then(|s| s.bandwidth_hz), d.bandwidth_hz),
                static_power_w: pick(spec.and_then(|s| s.static_power_w), d.static_power_w),
                load_power_coeff_w: pick(spec.and_then(|s| s.load_power_coeff_w), d.load_power_coeff_w),
                green_budget_w,
                panel_area_m2,
                theta: pick(spec.and_then(|s| s.theta), d.theta),
                vartheta: pick(spec.and_then(|s| s.vartheta), d.vartheta),
            });
        }

        let scenario = Scenario::new(self.name.clone(), grid, stations, self.channel.clone())?;
        Ok(scenario.with_shadowing_seed(self.shadowing_seed))
    }
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        ScenarioFile::load(path)?.build()
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        ScenarioFile::from_toml(text)?.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [area]
        width_m = 1000.0
        height_m = 1000.0
        cell_size_m = 50.0

        [[bs]]
        id = 4
        tier = "macro"
        x = 500.0
        y = 500.0
        green_budget_w = 900.0

        [[bs]]
        id = 9
        tier = "small"
        x = 200.0
        y = 300.0
        theta = 0.3
    "#;

    #[test]
    fn minimal_file_applies_defaults() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.grid.len(), 400);
        assert_eq!(s.stations.len(), 2);
        let m = &s.stations[0];
        assert_eq!((m.id, m.tier, m.green_budget_w, m.panel_area_m2), (4, Tier::Macro, 900.0, None));
        assert_eq!(m.static_power_w, 750.0);
        let sc = &s.stations[1];
        assert_eq!(sc.theta, 0.3);
        assert_eq!(sc.load_power_coeff_w, 4.0);
        assert!((37.0..=48.0).contains(&sc.green_budget_w));
        let total: f64 = s.cells().iter().map(|c| c.lambda).sum();
        assert!((total - 200.0).abs() < 1e-9);
    }

    #[test]
    fn random_deployment_is_seeded() {
        let text = r#"
            [area]
            width_m = 2000.0
            height_m = 2000.0
            cell_size_m = 100.0
            [deployment]
            macros = 3
            smalls = 7
            seed = 5
        "#;
        let a = Scenario::from_toml(text).unwrap();
        let b = Scenario::from_toml(text).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.stations.iter().filter(|s| s.tier == Tier::Macro).count(), 3);
        assert_eq!(a.stations.iter().map(|s| s.id).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
        for s in &a.stations {
            let range = if s.tier == Tier::Macro { 750.0..=1300.0 } else { 37.0..=48.0 };
            assert!(range.contains(&s.green_budget_w), "{}", s.green_budget_w);
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = "[area]\nwidth_m = 1.0\nheight_m = 1.0\ncell_size_m = 1.0\nbogus = 2\n";
        assert!(matches!(ScenarioFile::from_toml(text), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn per_cell_traffic_override() {
        let text = format!("{MINIMAL}\n[traffic]\narrivals_per_s = 0.0\nbits_per_arrival = 1.0\n[[traffic.cells]]\nrow = 1\ncol = 2\nlambda = 3.0\nnu = 7.0\n");
        let s = Scenario::from_toml(&text).unwrap();
        let idx = s.grid.index(1, 2);
        assert_eq!(s.cells()[idx].lambda, 3.0);
        assert_eq!(s.demand().iter().sum::<f64>(), 21.0);
    }
}
