//! World description: area grid, base stations, propagation and per-location rates.
//!
//! A [`Scenario`] is immutable once built. Rates are derived from it by
//! [`build_rate_map`], which is a pure function of the scenario and a shadowing seed.

mod config;
pub mod generate;
mod rate_map;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{DeploymentSpec, EnergySpec, ScenarioFile, StationSpec, TierDefaults, TrafficSpec};
pub use rate_map::{build_rate_map, RateMap, ZETA};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid area: {0}")]
    InvalidArea(String),
    #[error("base station {id}: {reason}")]
    InvalidStation { id: u32, reason: String },
    #[error("duplicate base station id {0}")]
    DuplicateStation(u32),
    #[error("scenario has no base stations")]
    NoStations,
    #[error("cell {cell}: {reason}")]
    InvalidCell { cell: usize, reason: String },
    #[error("cell {cell} carries traffic (lambda = {lambda}) but no base station is a candidate")]
    UncoveredCell { cell: usize, lambda: f64 },
    #[error("invalid channel parameters: {0}")]
    InvalidChannel(String),
    #[error("failed to read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse scenario file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Macro,
    Small,
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tier::Macro => f.write_str("macro"),
            Tier::Small => f.write_str("small"),
        }
    }
}

/// Path loss in dB for a link of `distance_m` meters.
///
/// Macro links use `128.1 + 37.6 log10(d)` with `d` in kilometers, small-cell links
/// use `38 + 10 log10(d)` with `d` in meters.
pub fn pathloss(tier: Tier, distance_m: f64) -> f64 {
    debug_assert!(distance_m > 0.0);
    match tier {
        Tier::Macro => 128.1 + 37.6 * (distance_m / 1000.0).log10(),
        Tier::Small => 38.0 + 10.0 * distance_m.log10(),
    }
}

/// Shannon-Hartley rate in bits/s.
pub fn shannon_rate(bandwidth_hz: f64, sinr: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr).log2()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Load a single location places on a base station serving it at `rate_bps`,
/// i.e. `lambda * nu / r`.
pub fn traffic_density(cell: &LocationCell, rate_bps: f64) -> f64 {
    if cell.lambda == 0.0 {
        return 0.0;
    }
    cell.lambda * cell.nu / rate_bps
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: u32,
    pub tier: Tier,
    pub position: (f64, f64),
    pub tx_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub static_power_w: f64,
    pub load_power_coeff_w: f64,
    pub green_budget_w: f64,
    /// Solar panel area backing `green_budget_w`, when the budget came from a panel.
    pub panel_area_m2: Option<f64>,
    pub theta: f64,
    pub vartheta: f64,
}

impl BaseStation {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |reason: &str| {
            Err(ScenarioError::InvalidStation {
                id: self.id,
                reason: reason.to_string(),
            })
        };
        if !(self.bandwidth_hz > 0.0) {
            return fail("bandwidth_hz must be > 0");
        }
        if !(self.static_power_w >= 0.0) {
            return fail("static_power_w must be >= 0");
        }
        if !(self.load_power_coeff_w > 0.0) {
            return fail("load_power_coeff_w must be > 0");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return fail("theta must lie in [0, 1]");
        }
        if !(self.vartheta > 0.0) {
            return fail("vartheta must be > 0");
        }
        if !(self.green_budget_w >= 0.0) {
            return fail("green_budget_w must be >= 0");
        }
        if !self.tx_power_dbm.is_finite() || !self.position.0.is_finite() || !self.position.1.is_finite() {
            return fail("position and tx_power_dbm must be finite");
        }
        Ok(())
    }

    pub fn distance_to(&self, point: (f64, f64)) -> f64 {
        let dx = self.position.0 - point.0;
        let dy = self.position.1 - point.1;
        (dx * dx + dy * dy).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Shadowing {
    /// Shadowing applied as a constant link margin of `shadowing_db`.
    #[default]
    Fixed,
    /// Zero-mean log-normal shadowing with standard deviation `shadowing_db`,
    /// drawn independently per (location, base station).
    LogNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub shadowing_db: f64,
    pub shadowing: Shadowing,
    pub rayleigh_margin_db: f64,
    pub antenna_gain_db: f64,
    /// Thermal noise density in dBm/Hz; noise power is this plus `10 log10(W)`.
    pub noise_dbm_per_hz: f64,
    pub receiver_sensitivity_dbm: f64,
    pub uplink_pathloss_threshold_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            shadowing_db: 5.0,
            shadowing: Shadowing::Fixed,
            rayleigh_margin_db: 9.0,
            antenna_gain_db: 15.0,
            noise_dbm_per_hz: -174.0,
            receiver_sensitivity_dbm: -123.0,
            uplink_pathloss_threshold_db: 140.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let finite = [
            self.shadowing_db,
            self.rayleigh_margin_db,
            self.antenna_gain_db,
            self.noise_dbm_per_hz,
            self.receiver_sensitivity_dbm,
            self.uplink_pathloss_threshold_db,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(ScenarioError::InvalidChannel("all channel parameters must be finite".into()));
        }
        if self.shadowing_db < 0.0 {
            return Err(ScenarioError::InvalidChannel("shadowing_db must be >= 0".into()));
        }
        Ok(())
    }

    pub fn noise_mw(&self, bandwidth_hz: f64) -> f64 {
        dbm_to_mw(self.noise_dbm_per_hz + 10.0 * bandwidth_hz.log10())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationCell {
    pub center: (f64, f64),
    /// Arrivals per second attributed to this cell.
    pub lambda: f64,
    /// Bits per arrival.
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaGrid {
    pub width_m: f64,
    pub height_m: f64,
    pub cell_size_m: f64,
    pub cols: usize,
    pub rows: usize,
    /// Row-major.
    pub cells: Vec<LocationCell>,
}

impl AreaGrid {
    /// Grid with uniform traffic: `arrivals_per_s` spread over the area in proportion
    /// to each cell's area inside the region.
    pub fn uniform(
        width_m: f64,
        height_m: f64,
        cell_size_m: f64,
        arrivals_per_s: f64,
        bits_per_arrival: f64,
    ) -> Result<Self, ScenarioError> {
        if !(width_m > 0.0 && height_m > 0.0 && cell_size_m > 0.0) {
            return Err(ScenarioError::InvalidArea(
                "width_m, height_m and cell_size_m must be > 0".into(),
            ));
        }
        if !(arrivals_per_s >= 0.0) || !(bits_per_arrival > 0.0) {
            return Err(ScenarioError::InvalidArea(
                "arrivals_per_s must be >= 0 and bits_per_arrival > 0".into(),
            ));
        }
        // a ratio like 1000 / (1000 / 37) can land just above an integer
        let count = |extent: f64| ((extent / cell_size_m) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let cols = count(width_m);
        let rows = count(height_m);
        let density = arrivals_per_s / (width_m * height_m);
        let mut cells = Vec::with_capacity(rows * cols);
        for row in 0..rows {
            let y0 = row as f64 * cell_size_m;
            let y1 = (y0 + cell_size_m).min(height_m);
            for col in 0..cols {
                let x0 = col as f64 * cell_size_m;
                let x1 = (x0 + cell_size_m).min(width_m);
                cells.push(LocationCell {
                    center: (0.5 * (x0 + x1), 0.5 * (y0 + y1)),
                    lambda: density * (x1 - x0) * (y1 - y0),
                    nu: bits_per_arrival,
                });
            }
        }
        Ok(Self {
            width_m,
            height_m,
            cell_size_m,
            cols,
            rows,
            cells,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Cell containing `point`, if it lies inside the area.
    pub fn locate(&self, point: (f64, f64)) -> Option<usize> {
        let (x, y) = point;
        if !(0.0..self.width_m).contains(&x) || !(0.0..self.height_m).contains(&y) {
            return None;
        }
        let col = ((x / self.cell_size_m) as usize).min(self.cols - 1);
        let row = ((y / self.cell_size_m) as usize).min(self.rows - 1);
        Some(self.index(row, col))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.cells.len() != self.rows * self.cols {
            return Err(ScenarioError::InvalidArea(format!(
                "expected {} cells, found {}",
                self.rows * self.cols,
                self.cells.len()
            )));
        }
        for (i, c) in self.cells.iter().enumerate() {
            let (x, y) = c.center;
            if !(x > 0.0 && x < self.width_m && y > 0.0 && y < self.height_m) {
                return Err(ScenarioError::InvalidCell {
                    cell: i,
                    reason: "center lies outside the area".into(),
                });
            }
            if !(c.lambda >= 0.0) {
                return Err(ScenarioError::InvalidCell {
                    cell: i,
                    reason: "lambda must be >= 0".into(),
                });
            }
            if !(c.nu > 0.0) {
                return Err(ScenarioError::InvalidCell {
                    cell: i,
                    reason: "nu must be > 0".into(),
                });
            }
        }
        Ok(())
    }
}

/// Received power, uplink loss and SINR of one (location, station) link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub rx_dbm: f64,
    pub uplink_pathloss_db: f64,
    pub sinr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub grid: AreaGrid,
    pub stations: Vec<BaseStation>,
    pub channel: ChannelParams,
    /// Seed for the log-normal shadowing realization.
    pub shadowing_seed: u64,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        grid: AreaGrid,
        stations: Vec<BaseStation>,
        channel: ChannelParams,
    ) -> Result<Self, ScenarioError> {
        let scenario = Self {
            name: name.into(),
            grid,
            stations,
            channel,
            shadowing_seed: 0,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn with_shadowing_seed(mut self, seed: u64) -> Self {
        self.shadowing_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.stations.is_empty() {
            return Err(ScenarioError::NoStations);
        }
        self.grid.validate()?;
        self.channel.validate()?;
        let mut ids = std::collections::HashSet::new();
        for bs in &self.stations {
            bs.validate()?;
            if !ids.insert(bs.id) {
                return Err(ScenarioError::DuplicateStation(bs.id));
            }
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.grid.len()
    }

    pub fn num_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn cells(&self) -> &[LocationCell] {
        &self.grid.cells
    }

    /// Offered traffic `lambda * nu` per cell in bits/s.
    pub fn demand(&self) -> Vec<f64> {
        self.grid.cells.iter().map(|c| c.lambda * c.nu).collect()
    }

    pub fn total_offered_bps(&self) -> f64 {
        self.demand().iter().sum()
    }

    pub fn station_index(&self, id: u32) -> Option<usize> {
        self.stations.iter().position(|b| b.id == id)
    }

    fn link_distance(&self, cell: usize, bs: usize) -> f64 {
        let d = self.stations[bs].distance_to(self.grid.cells[cell].center);
        if d > 0.0 {
            d
        } else {
            self.grid.cell_size_m / 2.0
        }
    }

    /// Per-station link figures for one cell, given each link's shadowing loss in dB.
    ///
    /// Interference on a link comes from every other station of the same tier,
    /// transmitting at full power; the tiers use disjoint spectrum.
    pub(crate) fn cell_links(&self, cell: usize, shadowing_db: &[f64]) -> Vec<Link> {
        let ch = &self.channel;
        let n = self.stations.len();
        let mut pl = Vec::with_capacity(n);
        let mut rx_dbm = Vec::with_capacity(n);
        for (k, bs) in self.stations.iter().enumerate() {
            let loss = pathloss(bs.tier, self.link_distance(cell, k));
            pl.push(loss);
            rx_dbm.push(
                bs.tx_power_dbm + ch.antenna_gain_db - loss - shadowing_db[k] - ch.rayleigh_margin_db,
            );
        }
        let rx_mw: Vec<f64> = rx_dbm.iter().map(|&p| dbm_to_mw(p)).collect();
        (0..n)
            .map(|j| {
                let tier = self.stations[j].tier;
                let interference: f64 = (0..n)
                    .filter(|&k| k != j && self.stations[k].tier == tier)
                    .map(|k| rx_mw[k])
                    .sum();
                let noise = ch.noise_mw(self.stations[j].bandwidth_hz);
                Link {
                    rx_dbm: rx_dbm[j],
                    uplink_pathloss_db: pl[j] + shadowing_db[j],
                    sinr: rx_mw[j] / (noise + interference),
                }
            })
            .collect()
    }

    fn fixed_shadowing(&self) -> Vec<f64> {
        vec![self.channel.shadowing_db; self.stations.len()]
    }

    /// SINR of `bs` at `cell` under the fixed shadowing margin.
    pub fn sinr(&self, cell: usize, bs: usize) -> f64 {
        self.cell_links(cell, &self.fixed_shadowing())[bs].sinr
    }

    pub fn is_candidate(&self, link: &Link) -> bool {
        link.rx_dbm >= self.channel.receiver_sensitivity_dbm
            && link.uplink_pathloss_db <= self.channel.uplink_pathloss_threshold_db
    }

    /// Downlink rate of `bs` at `cell` under the fixed shadowing margin; [`ZETA`] when
    /// the station is not a candidate for the location.
    pub fn rate(&self, cell: usize, bs: usize) -> f64 {
        let link = self.cell_links(cell, &self.fixed_shadowing())[bs];
        if self.is_candidate(&link) {
            shannon_rate(self.stations[bs].bandwidth_hz, link.sinr)
        } else {
            ZETA
        }
    }

    /// Copy with every station's energy-latency coefficient set to `theta`.
    pub fn with_uniform_theta(&self, theta: f64) -> Self {
        let mut s = self.clone();
        for bs in &mut s.stations {
            bs.theta = theta;
        }
        s
    }

    /// Copy whose panel-backed green budgets are recomputed for a solar efficiency.
    pub fn with_solar_efficiency(&self, efficiency: f64, irradiance_w_m2: f64) -> Self {
        let mut s = self.clone();
        for bs in &mut s.stations {
            if let Some(area) = bs.panel_area_m2 {
                bs.green_budget_w = crate::energy::solar_budget(area, efficiency, irradiance_w_m2);
            }
        }
        s
    }
}
