//! Distances produced by the simulator against their closed-form laws.

use clustercache::checks::ks_test;
use clustercache::dist::{marcum_q1, rayleigh_cdf, OrderStat};
use clustercache::montecarlo::{trial_realization, SimConfig};
use clustercache::quad::{integrate, Tolerance};
use clustercache::{PlacementCase, SystemParams};

const SAMPLES: u64 = 4000;

fn params() -> SystemParams {
    SystemParams::new(50.0, 30.0, 30, 30, 4.0)
}

fn sample(case: PlacementCase, params: &SystemParams, seed: u64, pick: impl Fn(&clustercache::model::Geometry) -> f64) -> Vec<f64> {
    let cfg = SimConfig::new(SAMPLES, seed);
    (0..SAMPLES).map(|t| pick(&trial_realization(params, case, &cfg, t).unwrap().geometry())).collect()
}

#[test]
fn receiver_to_center_is_rayleigh() {
    let p = params();
    let nu0 = sample(PlacementCase::Baseline, &p, 1, |g| g.nu0);
    let res = ks_test(&nu0, |v| rayleigh_cdf(v, p.sigma_a));
    assert!(res.p_value > 0.01, "{res:?}");
}

#[test]
fn ktx_serving_offset_is_order_statistic() {
    let p = params();
    for k in [1, 7, 30] {
        let t = sample(PlacementCase::KTx { k }, &p, 2 + k as u64, |g| g.t_k.unwrap());
        let os = OrderStat::new(k, p.n_t, p.sigma_a);
        let res = ks_test(&t, |x| os.cdf(x));
        assert!(res.p_value > 0.01, "k={k}: {res:?}");
    }
}

#[test]
fn lrx_serving_distance_matches_rice_mixture() {
    let p = params();
    let l = 3;
    let os = OrderStat::new(l, p.n_r, p.sigma_a);
    let sigma = p.sigma_a;
    let tol = Tolerance::new(1e-9, 1e-12);
    // P(R ≤ r) = ∫ f_ν(ν) (1 - Q1(ν/σ, r/σ)) dν.
    let cdf = |r: f64| {
        let f = |nu: f64| os.pdf(nu) * (1.0 - marcum_q1(nu / sigma, r / sigma).unwrap());
        integrate(f, 0.0, os.upper(), &tol).unwrap()
    };
    let r = sample(PlacementCase::LRx { l }, &p, 40, |g| g.r);
    let res = ks_test(&r, cdf);
    assert!(res.p_value > 0.01, "{res:?}");
}

#[test]
fn sparse_receiver_uses_sparse_spread() {
    let p = SystemParams::new(50.0, 10.0, 30, 30, 2.0).with_sparse(30.0, 2.0);
    let case = PlacementCase::DoubleVariance { rx_in_dense: false, tx_in_dense: true };
    let nu0 = sample(case, &p, 5, |g| g.nu0);
    let res = ks_test(&nu0, |v| rayleigh_cdf(v, 30.0));
    assert!(res.p_value > 0.01, "{res:?}");
    let wrong = ks_test(&nu0, |v| rayleigh_cdf(v, 10.0));
    assert!(wrong.p_value < 1e-6);
}
