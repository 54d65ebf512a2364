//! Coverage integrals against the library's own simulator, at reduced trial
//! counts. The acceptance target runs the full-size versions.

use clustercache::analytic::EngineConfig;
use clustercache::montecarlo::{simulate_coverage, SimConfig};
use clustercache::{CoverageEngine, PlacementCase, SystemParams};

const TRIALS: u64 = 20_000;

fn check(case: PlacementCase, params: SystemParams, slack: f64, seed: u64) {
    let params = params.validate(&case).unwrap();
    let engine = CoverageEngine::new(params, EngineConfig::default()).unwrap();
    let analytic = engine.coverage(case).unwrap().value;
    let mc = simulate_coverage(case, &params, &SimConfig::new(TRIALS, seed)).unwrap();
    let se = mc.std_error.unwrap();
    assert!(
        (analytic - mc.value).abs() <= 3.0 * se + slack,
        "{case:?}: analytic {analytic}, simulated {} ± {se}",
        mc.value
    );
}

#[test]
fn baseline_and_lrx_match_simulation() {
    let p = SystemParams::new(50.0, 30.0, 40, 40, 4.0);
    check(PlacementCase::Baseline, p, 0.01, 1);
    check(PlacementCase::LRx { l: 1 }, p, 0.01, 2);
    check(PlacementCase::LRx { l: 10 }, p, 0.01, 3);
}

#[test]
fn ktx_approximation_is_close_to_simulation() {
    let p = SystemParams::new(50.0, 30.0, 30, 30, 6.0);
    check(PlacementCase::KTx { k: 1 }, p, 0.03, 4);
    check(PlacementCase::KTx { k: 20 }, p, 0.03, 5);
}

#[test]
fn double_variance_matches_simulation() {
    let p = SystemParams::new(50.0, 10.0, 30, 30, 2.0).with_sparse(30.0, 2.0);
    check(PlacementCase::DoubleVariance { rx_in_dense: true, tx_in_dense: true }, p, 0.01, 6);
    check(PlacementCase::DoubleVariance { rx_in_dense: false, tx_in_dense: true }, p, 0.01, 7);
}
