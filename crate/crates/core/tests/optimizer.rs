use std::path::Path;

use proptest::prelude::*;

use vgala::baselines::{ga_oracle, run_ga, run_la};
use vgala::energy::on_grid_power;
use vgala::evaluation::compute_metrics;
use vgala::optimizer::{
    run_vgala, select_bs, AdmissionField, AssociationMap, CustomModel, Objective, OptimizerConfig, PerformanceModel,
    Problem, StationTerm, Vgala,
};
use vgala::scenario::generate::random_scenario;
use vgala::scenario::{build_rate_map, AreaGrid, BaseStation, ChannelParams, RateMap, Scenario, ScenarioFile, Tier};

fn bundled(name: &str) -> (Scenario, RateMap) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name);
    let s = ScenarioFile::load(&path).unwrap().build().unwrap();
    let rates = build_rate_map(&s).unwrap();
    (s, rates)
}

fn macro_at(id: u32, x: f64, y: f64, budget: f64) -> BaseStation {
    BaseStation {
        id,
        tier: Tier::Macro,
        position: (x, y),
        tx_power_dbm: 46.0,
        bandwidth_hz: 10e6,
        static_power_w: 750.0,
        load_power_coeff_w: 500.0,
        green_budget_w: budget,
        panel_area_m2: None,
        theta: 0.8,
        vartheta: 1.0,
    }
}

/// Two macros mirrored about the vertical center line with uniform traffic.
fn symmetric_pair(budget: f64) -> (Scenario, RateMap) {
    let grid = AreaGrid::uniform(2000.0, 1000.0, 100.0, 150.0, 250e3).unwrap();
    let stations = vec![macro_at(1, 500.0, 500.0, budget), macro_at(2, 1500.0, 500.0, budget)];
    let s = Scenario::new("pair", grid, stations, ChannelParams::default()).unwrap();
    let rates = build_rate_map(&s).unwrap();
    (s, rates)
}

#[test]
fn hetnet_2km_scenario_is_covered_and_offers_50_mbit() {
    let (s, rates) = bundled("hetnet_2km.toml");
    assert_eq!(s.num_stations(), 10);
    assert_eq!(s.num_cells(), 100 * 100);
    for x in 0..s.num_cells() {
        assert!(rates.num_candidates(x) >= 1, "location {x} uncovered");
    }
    assert!((s.total_offered_bps() - 50e6).abs() < 1e-3);
}

#[test]
fn first_iteration_strictly_decreases_psi() {
    let cfg = OptimizerConfig::default();
    for seed in 0..10 {
        let (s, rates) = random_scenario(seed, 3 + seed as usize % 5, 30, 0.6).unwrap();
        let problem = Problem::new(&s, &rates, &cfg).unwrap();
        let mut v = Vgala::new(&problem, &cfg).unwrap();
        let before = v.state().psi;
        let target = problem.perceived_loads(&problem.associate(&v.state().phi)).raw;
        v.step().unwrap();
        if target != v.trace().records[0].rho {
            assert!(v.state().psi < before, "seed {seed}");
        }
    }
}

#[test]
fn kappa_zero_run_is_the_la_baseline() {
    let cfg = OptimizerConfig::default();
    for seed in 0..5 {
        let (s, rates) = random_scenario(seed, 5, 25, 0.7).unwrap();
        let a = run_vgala(&s, &rates, &cfg.clone().with_kappa(0.0), None).unwrap();
        let b = run_la(&s, &rates, &cfg, None).unwrap();
        assert_eq!(a.association, b.association);
        assert_eq!(a.rho, b.rho);
    }
}

#[test]
fn la_single_station_carries_offered_load() {
    let grid = AreaGrid::uniform(1000.0, 1000.0, 100.0, 100.0, 250e3).unwrap();
    let s = Scenario::new("one", grid, vec![macro_at(1, 500.0, 500.0, 0.0)], ChannelParams::default()).unwrap();
    let rates = build_rate_map(&s).unwrap();
    let offered: f64 = (0..s.num_cells()).map(|x| s.demand()[x] / rates.rate(x, 0)).sum();
    let out = run_la(&s, &rates, &OptimizerConfig::default(), None).unwrap();
    assert!((out.rho[0] - offered).abs() < 1e-12);
}

#[test]
fn la_symmetric_pair_splits_evenly() {
    let (s, rates) = symmetric_pair(0.0);
    let out = run_la(&s, &rates, &OptimizerConfig::default(), None).unwrap();
    assert!((out.rho[0] - out.rho[1]).abs() < 1e-6, "{:?}", out.rho);
}

#[test]
fn two_station_bundled_instance_matches_enumeration() {
    let (s, rates) = bundled("tiny_2bs.toml");
    assert_eq!((s.num_stations(), s.num_cells()), (2, 8));
    let cfg = OptimizerConfig::default();
    let v = run_vgala(&s, &rates, &cfg, None).unwrap();
    let o = vgala::baselines::exhaustive_oracle(&s, &rates, &cfg).unwrap();
    assert_eq!(o.enumerated, 256);
    assert!((v.psi - o.best_psi).abs() <= 1e-4 * o.best_psi);
}

#[test]
fn ga_oracle_without_green_energy_prefers_cheap_loads() {
    // no budgets and equal load coefficients: on-grid power is minimized by giving
    // every location its fastest station
    let grid = AreaGrid::uniform(600.0, 400.0, 200.0, 60.0, 250e3).unwrap();
    let stations = vec![macro_at(1, 100.0, 200.0, 0.0), macro_at(2, 500.0, 200.0, 0.0)];
    let s = Scenario::new("ga", grid, stations, ChannelParams::default()).unwrap();
    let rates = build_rate_map(&s).unwrap();
    let cfg = OptimizerConfig::default();
    let o = ga_oracle(&s, &rates, &cfg).unwrap();
    assert_eq!(o.enumerated, 64);
    let problem = Problem::new(&s, &rates, &cfg).unwrap();
    let max_rate = problem.perceived_loads(&problem.max_rate_association()).clamped;
    let total: f64 = s.stations.iter().zip(max_rate.iter()).map(|(bs, &r)| on_grid_power(bs, r)).sum();
    assert!((o.best_psi - total).abs() < 1e-9, "{} vs {total}", o.best_psi);
}

#[test]
fn ga_loads_up_the_station_with_plenty_of_green_energy() {
    let cfg = OptimizerConfig::default();
    let (s, rates) = symmetric_pair(0.0);
    let mut s = s;
    s.stations[1].green_budget_w = 1e5;
    let ga = run_ga(&s, &rates, &cfg, None).unwrap();
    let la = run_la(&s, &rates, &cfg, None).unwrap();
    assert!(ga.rho[1] > la.rho[1], "GA {:?} LA {:?}", ga.rho, la.rho);
}

#[test]
fn ga_trades_latency_for_on_grid_power_on_seeded_scenarios() {
    let cfg = OptimizerConfig::default();
    let mut violations = Vec::new();
    for seed in 0..8 {
        let (s, rates) = random_scenario(seed, 6, 30, 0.5).unwrap();
        let la = run_la(&s, &rates, &cfg, None).unwrap();
        let ga = run_ga(&s, &rates, &cfg, None).unwrap();
        let ml = compute_metrics(&la.rho, &s, cfg.epsilon).unwrap();
        let mg = compute_metrics(&ga.rho, &s, cfg.epsilon).unwrap();
        assert!(ml.latency_metric <= mg.latency_metric + 1e-12, "seed {seed}");
        if mg.on_grid_w > ml.on_grid_w + 1e-9 {
            violations.push((seed, ml.on_grid_w, mg.on_grid_w));
        }
    }
    assert!(violations.is_empty(), "GA used more grid power than LA: {violations:?}");
}

#[test]
fn identity_model_run_descends() {
    let cfg = OptimizerConfig::default();
    let (s, rates) = random_scenario(4, 4, 20, 0.6).unwrap();
    let model = CustomModel::register("identity", |r| r, |_| 1.0, cfg.epsilon).unwrap();
    let objective = Objective::for_stations(&s.stations, &cfg).with_model(PerformanceModel::Custom(model));
    let problem = Problem::new(&s, &rates, &cfg).unwrap().with_objective(objective).unwrap();
    let out = Vgala::new(&problem, &cfg).unwrap().run().unwrap();
    let psi: Vec<f64> = out.trace.psi_values().collect();
    assert!(psi.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(CustomModel::register("negated", |r| -r, |_| -1.0, cfg.epsilon).is_err());
}

#[test]
fn admission_run_has_no_saturated_station() {
    let cfg = OptimizerConfig::default();
    let (s, rates) = vgala::scenario::generate::overloaded_instance(1.6, cfg.epsilon, 30).unwrap();
    let mu = AdmissionField::uniform(s.num_cells(), 0.5).unwrap();
    let out = run_vgala(&s, &rates, &cfg, Some(&mu)).unwrap();
    assert!(out.clamped.is_empty());
    assert!(out.rho.iter().all(|&r| r < 1.0 - cfg.epsilon));
}

fn objective_strategy() -> impl Strategy<Value = (Objective, Vec<f64>)> {
    (1usize..5, 0.0..8.0f64).prop_flat_map(|(n, kappa)| {
        let term = (0.0..=1.0f64, 1e-3..=0.999f64, 0.5..=2.0f64).prop_map(|(theta, rho_hat, vartheta)| StationTerm {
            theta,
            rho_hat,
            vartheta,
        });
        (prop::collection::vec(term, n), prop::collection::vec(1e-3..0.99f64, n))
            .prop_map(move |(terms, rho)| (Objective::new(kappa, 1e-3, terms), rho))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn status_is_the_gradient((obj, rho) in objective_strategy()) {
        let phi = obj.status(&rho).unwrap();
        for j in 0..rho.len() {
            let h = 1e-6;
            let mut up = rho.clone();
            let mut down = rho.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (obj.psi(&up).unwrap() - obj.psi(&down).unwrap()) / (2.0 * h);
            prop_assert!((phi[j] - fd).abs() <= 1e-5 * phi[j].abs());
        }
    }

    #[test]
    fn selection_ignores_price_scale(
        rates in prop::collection::vec(1e5..1e8f64, 4),
        phi in prop::collection::vec(0.1..100.0f64, 4),
        scale in 1e-3..1e3f64,
    ) {
        let map = RateMap::from_rates(1, 4, rates);
        let scaled: Vec<f64> = phi.iter().map(|p| p * scale).collect();
        prop_assert_eq!(select_bs(0, &phi, &map), select_bs(0, &scaled, &map));
    }

    #[test]
    fn admission_scales_loads_linearly(seed in 0u64..50, mu in 0.0..=1.0f64, pick in prop::collection::vec(0usize..3, 16)) {
        let rates = RateMap::from_rates(16, 3, (0..48).map(|i| 1e6 + (i as f64 * 7919.0 + seed as f64 * 104_729.0) % 3e7).collect());
        let demand: Vec<f64> = (0..16).map(|i| 1e5 * (1 + (i + seed as usize) % 5) as f64).collect();
        let obj = Objective::new(4.0, 1e-3, vec![StationTerm { theta: 0.8, rho_hat: 0.5, vartheta: 1.0 }; 3]);
        let full = Problem::from_parts(obj.clone(), &rates, demand.clone()).unwrap();
        let part = Problem::from_parts(obj, &rates, demand).unwrap()
            .with_admission(&AdmissionField::uniform(16, mu).unwrap()).unwrap();
        let assoc = AssociationMap { choice: pick.into_iter().map(Some).collect() };
        let a = full.perceived_loads(&assoc).raw;
        let b = part.perceived_loads(&assoc).raw;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((mu * x - y).abs() <= 1e-12 * x.max(1.0));
        }
    }

    #[test]
    fn every_step_descends_on_random_scenarios(seed in 100u64..10_000, n_bs in 2usize..8, peak in 0.3..0.9f64) {
        let cfg = OptimizerConfig::default();
        let (s, rates) = random_scenario(seed, n_bs, 15, peak).unwrap();
        let out = run_vgala(&s, &rates, &cfg, None).unwrap();
        let psi: Vec<f64> = out.trace.psi_values().collect();
        prop_assert!(psi.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(out.trace.records.iter().filter_map(|r| r.slope).all(|s| s < 0.0));
    }
}
