//! Seeded scenario generators for regression runs and oracle-scale instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_rate_map, AreaGrid, BaseStation, ChannelParams, RateMap, Scenario, ScenarioError, Tier};
use crate::scenario::TierDefaults;

fn make_station(id: u32, tier: Tier, position: (f64, f64), green_budget_w: f64) -> BaseStation {
    let d = match tier {
        Tier::Macro => TierDefaults::macro_cell(),
        Tier::Small => TierDefaults::small_cell(),
    };
    BaseStation {
        id,
        tier,
        position,
        tx_power_dbm: d.tx_power_dbm,
        bandwidth_hz: d.bandwidth_hz,
        static_power_w: d.static_power_w,
        load_power_coeff_w: d.load_power_coeff_w,
        green_budget_w,
        panel_area_m2: None,
        theta: d.theta,
        vartheta: d.vartheta,
    }
}

fn draw_budget(rng: &mut ChaCha8Rng, tier: Tier) -> f64 {
    match tier {
        Tier::Macro => rng.random_range(750.0..=1300.0),
        Tier::Small => rng.random_range(37.0..=48.0),
    }
}

/// Square area with `n_macro + n_small` uniformly placed stations and uniform traffic.
pub fn random_deployment(
    seed: u64,
    n_macro: usize,
    n_small: usize,
    side_m: f64,
    cells_per_side: usize,
) -> Result<Scenario, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = AreaGrid::uniform(side_m, side_m, side_m / cells_per_side as f64, 200.0, 250e3)?;
    let mut stations = Vec::with_capacity(n_macro + n_small);
    for i in 0..n_macro + n_small {
        let tier = if i < n_macro { Tier::Macro } else { Tier::Small };
        let pos = (rng.random_range(0.0..side_m), rng.random_range(0.0..side_m));
        let budget = draw_budget(&mut rng, tier);
        stations.push(make_station(i as u32 + 1, tier, pos, budget));
    }
    Scenario::new(format!("random-{seed}"), grid, stations, ChannelParams::default())
}

/// Per-station load when every location joins its highest-rate candidate.
pub fn max_rate_loads(scenario: &Scenario, rates: &RateMap) -> Vec<f64> {
    let mut loads = vec![0.0; scenario.num_stations()];
    for (x, cell) in scenario.cells().iter().enumerate() {
        if cell.lambda == 0.0 {
            continue;
        }
        let best = rates
            .candidates(x)
            .fold(None::<usize>, |acc, j| match acc {
                Some(b) if rates.rate(x, b) >= rates.rate(x, j) => Some(b),
                _ => Some(j),
            })
            .expect("loaded cell without candidate");
        loads[best] += cell.lambda * cell.nu / rates.rate(x, best);
    }
    loads
}

/// Largest load any single station would carry if it served every location it can.
pub fn single_station_loads(scenario: &Scenario, rates: &RateMap) -> Vec<f64> {
    let mut loads = vec![0.0; scenario.num_stations()];
    for (x, cell) in scenario.cells().iter().enumerate() {
        for j in rates.candidates(x) {
            loads[j] += cell.lambda * cell.nu / rates.rate(x, j);
        }
    }
    loads
}

/// Multiplies every cell's arrival rate by `factor`.
pub fn scale_traffic(scenario: &Scenario, factor: f64) -> Scenario {
    let mut s = scenario.clone();
    for c in &mut s.grid.cells {
        c.lambda *= factor;
    }
    s
}

/// Random scenario whose max-rate association puts `peak_load` on its busiest station.
pub fn random_scenario(
    seed: u64,
    n_bs: usize,
    cells_per_side: usize,
    peak_load: f64,
) -> Result<(Scenario, RateMap), ScenarioError> {
    let n_macro = (n_bs / 3).max(1);
    let s = random_deployment(seed, n_macro, n_bs - n_macro, 1000.0, cells_per_side)?;
    let rates = build_rate_map(&s)?;
    let peak = max_rate_loads(&s, &rates).into_iter().fold(0.0, f64::max);
    Ok((scale_traffic(&s, peak_load / peak), rates))
}

/// Oracle-scale instance: 2 to 4 stations over at most 16 locations, so that the
/// number of discrete associations stays at or below 4^8 = 65 536.
///
/// Traffic is scaled so that any single station could absorb all of it at a load of
/// 0.5 to 0.95. Every association is then feasible and the cap at `1 - epsilon`
/// never distorts an enumerated objective value.
pub fn tiny_instance(seed: u64) -> Result<(Scenario, RateMap), ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7469_6e79);
    let n_bs = rng.random_range(2..=4usize);
    let (cols, rows) = match n_bs {
        2 => (4, 4),
        3 => (3, 3),
        _ => (4, 2),
    };
    let cell = 100.0;
    let (w, h) = (cols as f64 * cell, rows as f64 * cell);
    let grid = AreaGrid::uniform(w, h, cell, 1.0, 250e3)?;
    let mut stations = Vec::with_capacity(n_bs);
    for i in 0..n_bs {
        let tier = if i == 0 { Tier::Macro } else { Tier::Small };
        let pos = (rng.random_range(0.0..w), rng.random_range(0.0..h));
        let budget = draw_budget(&mut rng, tier);
        stations.push(make_station(i as u32 + 1, tier, pos, budget));
    }
    let mut s = Scenario::new(format!("tiny-{seed}"), grid, stations, ChannelParams::default())?;
    for c in &mut s.grid.cells {
        c.lambda = rng.random_range(0.5..1.5);
    }
    let rates = build_rate_map(&s)?;
    let worst = single_station_loads(&s, &rates).into_iter().fold(0.0, f64::max);
    let target = rng.random_range(0.5..0.95);
    Ok((scale_traffic(&s, target / worst), rates))
}

/// Four macro stations on a symmetric layout with uniform traffic scaled so the
/// max-rate association loads every station to `overload * (1 - epsilon)`.
pub fn overloaded_instance(
    overload: f64,
    epsilon: f64,
    cells_per_side: usize,
) -> Result<(Scenario, RateMap), ScenarioError> {
    let side = 2000.0;
    let grid = AreaGrid::uniform(side, side, side / cells_per_side as f64, 200.0, 250e3)?;
    let budgets = [800.0, 1300.0, 950.0, 1100.0];
    let stations = [(500.0, 500.0), (1500.0, 500.0), (500.0, 1500.0), (1500.0, 1500.0)]
        .iter()
        .zip(budgets)
        .enumerate()
        .map(|(i, (&p, b))| make_station(i as u32 + 1, Tier::Macro, p, b))
        .collect();
    let s = Scenario::new("overloaded", grid, stations, ChannelParams::default())?;
    let rates = build_rate_map(&s)?;
    let peak = max_rate_loads(&s, &rates).into_iter().fold(0.0, f64::max);
    Ok((scale_traffic(&s, overload * (1.0 - epsilon) / peak), rates))
}
