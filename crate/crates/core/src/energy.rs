//! Base station power model, on-grid power draw and green traffic capacity.

use std::io::Write;

use crate::scenario::BaseStation;

/// Total power draw `beta * rho + p_static` in watts.
pub fn bs_power(bs: &BaseStation, rho: f64) -> f64 {
    bs.load_power_coeff_w * rho + bs.static_power_w
}

/// Power drawn from the grid once the green budget is spent. Surplus green energy
/// is not carried over.
pub fn on_grid_power(bs: &BaseStation, rho: f64) -> f64 {
    (bs_power(bs, rho) - bs.green_budget_w).max(0.0)
}

/// Largest load the station can carry on green energy alone, clamped to
/// `[epsilon, 1 - epsilon]`.
pub fn green_capacity(bs: &BaseStation, epsilon: f64) -> f64 {
    let raw = (bs.green_budget_w - bs.static_power_w) / bs.load_power_coeff_w;
    epsilon.max(raw.min(1.0 - epsilon))
}

/// Panel output in watts.
pub fn solar_budget(panel_area_m2: f64, efficiency: f64, irradiance_w_m2: f64) -> f64 {
    panel_area_m2 * efficiency * irradiance_w_m2
}

/// Standard test condition irradiance, W/m^2.
pub const STANDARD_IRRADIANCE: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationEnergy {
    pub bs_id: u32,
    pub rho: f64,
    pub power_w: f64,
    pub on_grid_w: f64,
    pub green_capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyState {
    pub stations: Vec<StationEnergy>,
}

impl EnergyState {
    pub fn evaluate(stations: &[BaseStation], rho: &[f64], epsilon: f64) -> Self {
        assert_eq!(stations.len(), rho.len());
        let stations = stations
            .iter()
            .zip(rho)
            .map(|(bs, &r)| StationEnergy {
                bs_id: bs.id,
                rho: r,
                power_w: bs_power(bs, r),
                on_grid_w: on_grid_power(bs, r),
                green_capacity: green_capacity(bs, epsilon),
            })
            .collect();
        Self { stations }
    }

    pub fn total_on_grid_w(&self) -> f64 {
        self.stations.iter().map(|s| s.on_grid_w).sum()
    }

    /// Energy report rows `bs_id,rho,power_w,on_grid_w,green_capacity`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bs_id", "rho", "power_w", "on_grid_w", "green_capacity"])?;
        for s in &self.stations {
            w.write_record(&[
                s.bs_id.to_string(),
                s.rho.to_string(),
                s.power_w.to_string(),
                s.on_grid_w.to_string(),
                s.green_capacity.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
