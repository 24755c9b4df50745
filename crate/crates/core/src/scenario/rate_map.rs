use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{shannon_rate, Scenario, ScenarioError, Shadowing};

/// Rate assigned to (location, station) pairs outside the candidate set, in bits/s.
pub const ZETA: f64 = 1e-3;

/// Per-location, per-station downlink rates and candidate masks. Row-major
/// `[cells x stations]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMap {
    n_cells: usize,
    n_bs: usize,
    rates: Vec<f64>,
    candidate: Vec<bool>,
    zeta: f64,
}

impl RateMap {
    /// Builds a rate map from a raw matrix. Entries `<= ZETA` are treated as
    /// non-candidates and pinned to `ZETA`.
    pub fn from_rates(n_cells: usize, n_bs: usize, mut rates: Vec<f64>) -> Self {
        assert_eq!(rates.len(), n_cells * n_bs, "rate matrix shape mismatch");
        let candidate: Vec<bool> = rates.iter().map(|&r| r > ZETA).collect();
        for (r, &c) in rates.iter_mut().zip(&candidate) {
            if !c {
                *r = ZETA;
            }
        }
        Self {
            n_cells,
            n_bs,
            rates,
            candidate,
            zeta: ZETA,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.n_cells
    }

    pub fn num_stations(&self) -> usize {
        self.n_bs
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    #[inline]
    pub fn rate(&self, cell: usize, bs: usize) -> f64 {
        self.rates[cell * self.n_bs + bs]
    }

    #[inline]
    pub fn is_candidate(&self, cell: usize, bs: usize) -> bool {
        self.candidate[cell * self.n_bs + bs]
    }

    pub fn row(&self, cell: usize) -> &[f64] {
        &self.rates[cell * self.n_bs..(cell + 1) * self.n_bs]
    }

    pub fn candidates(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_bs).filter(move |&j| self.is_candidate(cell, j))
    }

    pub fn num_candidates(&self, cell: usize) -> usize {
        self.candidates(cell).count()
    }

    /// Writes `cell_index,bs_id,rate_bps,candidate` rows.
    pub fn write_csv<W: Write>(&self, scenario: &Scenario, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell_index", "bs_id", "rate_bps", "candidate"])?;
        for cell in 0..self.n_cells {
            for (j, bs) in scenario.stations.iter().enumerate() {
                w.write_record(&[
                    cell.to_string(),
                    bs.id.to_string(),
                    format!("{:e}", self.rate(cell, j)),
                    self.is_candidate(cell, j).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Computes every (location, station) rate and the candidate sets.
///
/// The result depends only on the scenario (including its shadowing seed). Every
/// location with traffic must have at least one candidate station.
pub fn build_rate_map(scenario: &Scenario) -> Result<RateMap, ScenarioError> {
    scenario.validate()?;
    let n_bs = scenario.num_stations();
    let n_cells = scenario.num_cells();
    let ch = &scenario.channel;
    let normal = Normal::new(0.0, ch.shadowing_db).map_err(|e| ScenarioError::InvalidChannel(e.to_string()))?;

    let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..n_cells)
        .into_par_iter()
        .map(|cell| {
            let shadow: Vec<f64> = match ch.shadowing {
                Shadowing::Fixed => vec![ch.shadowing_db; n_bs],
                Shadowing::LogNormal => {
                    let mut rng = ChaCha8Rng::seed_from_u64(scenario.shadowing_seed);
                    rng.set_stream(cell as u64);
                    (0..n_bs).map(|_| normal.sample(&mut rng)).collect()
                }
            };
            let links = scenario.cell_links(cell, &shadow);
            let mut rates = Vec::with_capacity(n_bs);
            let mut cand = Vec::with_capacity(n_bs);
            for (j, link) in links.iter().enumerate() {
                let ok = scenario.is_candidate(link);
                let r = shannon_rate(scenario.stations[j].bandwidth_hz, link.sinr);
                if ok && r > ZETA {
                    rates.push(r);
                    cand.push(true);
                } else {
                    rates.push(ZETA);
                    cand.push(false);
                }
            }
            (rates, cand)
        })
        .collect();

    let mut rates = Vec::with_capacity(n_cells * n_bs);
    let mut candidate = Vec::with_capacity(n_cells * n_bs);
    for (cell, (r, c)) in rows.into_iter().enumerate() {
        let lambda = scenario.grid.cells[cell].lambda;
        if lambda > 0.0 && !c.iter().any(|&b| b) {
            return Err(ScenarioError::UncoveredCell { cell, lambda });
        }
        rates.extend(r);
        candidate.extend(c);
    }
    Ok(RateMap {
        n_cells,
        n_bs,
        rates,
        candidate,
        zeta: ZETA,
    })
}
