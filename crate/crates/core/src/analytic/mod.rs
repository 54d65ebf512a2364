//! Coverage probability, area spectral efficiency and total hit probability.
//!
//! Coverage is `P(SIR > β)`. With unit-mean exponential fading on the serving
//! link it equals `E[L_inter(β r^α) · L_intra(β r^α | geometry)]`, the
//! expectation running over the serving distance `r` and whatever geometry
//! the intra-cluster transform is conditioned on. Each placement case picks
//! different conditioning; [`CoverageEngine`] evaluates all of them at one
//! parameter set and shares the expensive tables between them.

mod engine;
mod metrics;

use std::fmt;

use crate::laplace::{IntraMode, ENVELOPE_SIGMAS};
use crate::model::{PlacementCase, SystemParams};
use crate::quad::Tolerance;
use crate::Result;

pub use engine::{CoverageEngine, EngineConfig, QmcConfig};
pub use metrics::{ase, hit_cluster_centric, hit_uniform, optimize_ase, AseOptimum};

/// How a coverage value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// k-Tx with the exact intra-cluster transform, by quasi-Monte Carlo.
    KTxExact,
    /// k-Tx with the intra-cluster transform of a uniformly chosen server.
    KTxApprox,
    /// k-Tx with uncorrelated intra-cluster distances as well.
    KTxFast,
    /// ℓ-Rx, exact.
    LRx,
    /// Uniform serving and receiving devices, exact.
    Baseline,
    /// Double-variance model, exact.
    DoubleVariance,
    /// Direct simulation.
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::KTxExact => "ktx_exact",
            Method::KTxApprox => "ktx_approx",
            Method::KTxFast => "ktx_fast",
            Method::LRx => "lrx",
            Method::Baseline => "baseline",
            Method::DoubleVariance => "double_variance",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Settings needed to reproduce an estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimateMeta {
    Quadrature {
        tol: Tolerance,
        envelope_sigmas: f64,
        intra_mode: IntraMode,
    },
    Qmc {
        points: u64,
        seed: u64,
        /// Change between the last two successive estimates.
        change: f64,
        tol: Tolerance,
    },
    Simulation {
        trials: u64,
        seed: u64,
        disk_radius: f64,
        antithetic: bool,
        rng: &'static str,
    },
}

impl EstimateMeta {
    pub(crate) fn quadrature(cfg: &EngineConfig) -> Self {
        EstimateMeta::Quadrature { tol: cfg.tol, envelope_sigmas: ENVELOPE_SIGMAS, intra_mode: cfg.intra_mode }
    }

    /// Flat `(key, value)` pairs, in a fixed order per variant.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        match self {
            EstimateMeta::Quadrature { tol, envelope_sigmas, intra_mode } => vec![
                ("quad_rel_tol", format!("{:e}", tol.rel)),
                ("quad_abs_tol", format!("{:e}", tol.abs)),
                ("truncation_sigmas", format!("{envelope_sigmas}")),
                ("intra_mode", intra_mode.as_str().to_string()),
            ],
            EstimateMeta::Qmc { points, seed, change, tol } => vec![
                ("qmc_points", points.to_string()),
                ("qmc_seed", seed.to_string()),
                ("qmc_change", format!("{change:e}")),
                ("quad_rel_tol", format!("{:e}", tol.rel)),
                ("quad_abs_tol", format!("{:e}", tol.abs)),
            ],
            EstimateMeta::Simulation { trials, seed, disk_radius, antithetic, rng } => vec![
                ("trials", trials.to_string()),
                ("seed", seed.to_string()),
                ("disk_radius", format!("{disk_radius}")),
                ("antithetic", antithetic.to_string()),
                ("rng", rng.to_string()),
            ],
        }
    }
}

/// A coverage probability with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageEstimate {
    pub value: f64,
    pub method: Method,
    /// Present exactly for [`Method::MonteCarlo`].
    pub std_error: Option<f64>,
    pub meta: EstimateMeta,
}

impl CoverageEstimate {
    pub(crate) fn analytic(value: f64, method: Method, meta: EstimateMeta) -> Self {
        Self { value: value.clamp(0.0, 1.0), method, std_error: None, meta }
    }
}

fn engine_for(params: &SystemParams, case: PlacementCase) -> Result<CoverageEngine> {
    let params = params.validate(&case)?;
    CoverageEngine::new(params, EngineConfig::default())
}

/// k-Tx coverage with the exact intra-cluster transform.
pub fn coverage_ktx_exact(k: u32, params: &SystemParams) -> Result<CoverageEstimate> {
    engine_for(params, PlacementCase::KTx { k })?.ktx_exact(k)
}

/// k-Tx coverage using the intra-cluster transform of a uniformly chosen
/// serving device.
pub fn coverage_ktx_approx(k: u32, params: &SystemParams) -> Result<CoverageEstimate> {
    engine_for(params, PlacementCase::KTx { k })?.ktx_approx(k)
}

/// k-Tx coverage with uncorrelated intra-cluster distances.
pub fn coverage_ktx_fast(k: u32, params: &SystemParams) -> Result<CoverageEstimate> {
    engine_for(params, PlacementCase::KTx { k })?.ktx_fast(k)
}

/// ℓ-Rx coverage.
pub fn coverage_lrx(l: u32, params: &SystemParams) -> Result<CoverageEstimate> {
    engine_for(params, PlacementCase::LRx { l })?.lrx(l)
}

/// Baseline coverage: serving and receiving devices both uniform.
pub fn coverage_baseline(params: &SystemParams) -> Result<CoverageEstimate> {
    engine_for(params, PlacementCase::Baseline)?.baseline()
}

/// Double-variance coverage with the serving device in the dense
/// subcluster and the receiver in the dense one iff `rx_in_dense`.
pub fn coverage_double(rx_in_dense: bool, params: &SystemParams) -> Result<CoverageEstimate> {
    engine_for(params, PlacementCase::DoubleVariance { rx_in_dense, tx_in_dense: true })?.double(rx_in_dense)
}

/// The default analytic coverage for `case`: the uncorrelated-order
/// approximation for k-Tx and the exact expressions elsewhere.
pub fn coverage(case: PlacementCase, params: &SystemParams) -> Result<CoverageEstimate> {
    engine_for(params, case)?.coverage(case)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ZipfLibrary;

    fn small() -> SystemParams {
        SystemParams::new(50.0, 30.0, 20, 20, 4.0)
    }

    fn engine(p: SystemParams) -> CoverageEngine {
        CoverageEngine::new(p, EngineConfig::default()).unwrap()
    }

    #[test]
    fn rank_averages_equal_baseline() {
        for p in [small(), small().with_m_a(8.0).with_beta_db(-3.0)] {
            let e = engine(p);
            let base = e.baseline().unwrap().value;
            let tx: f64 = (1..=20).map(|k| e.ktx_approx(k).unwrap().value).sum::<f64>() / 20.0;
            let rx: f64 = (1..=20).map(|l| e.lrx(l).unwrap().value).sum::<f64>() / 20.0;
            assert!((tx - base).abs() < 1e-5, "{tx} vs {base}");
            assert!((rx - base).abs() < 1e-5, "{rx} vs {base}");
        }
    }

    #[test]
    fn ranked_coverage_decreases_with_rank() {
        let e = engine(small().with_m_a(5.0));
        let base = e.baseline().unwrap().value;
        let tx: Vec<f64> = (1..=20).map(|k| e.ktx_approx(k).unwrap().value).collect();
        let rx: Vec<f64> = (1..=20).map(|l| e.lrx(l).unwrap().value).collect();
        for w in tx.windows(2).chain(rx.windows(2)) {
            assert!(w[0] >= w[1]);
        }
        assert!(tx[0] > base && base > tx[19]);
        assert!(tx[0] - tx[19] > 0.005);
    }

    #[test]
    fn threshold_limits() {
        let lo = small().with_beta_db(-100.0);
        let hi = small().with_beta_db(100.0);
        for (p, want) in [(lo, 1.0), (hi, 0.0)] {
            let e = engine(p);
            for v in [e.baseline(), e.lrx(3), e.ktx_approx(3), e.ktx_fast(3)] {
                let v = v.unwrap().value;
                assert!((v - want).abs() < 1e-3, "{v} vs {want}");
            }
        }
    }

    #[test]
    fn coverage_decreases_in_threshold_and_load() {
        let mut prev = 1.0;
        for db in [-6.0, -3.0, 0.0, 3.0, 6.0] {
            let v = coverage_baseline(&small().with_beta_db(db)).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
        let mut prev = 1.0;
        for m in [1.0, 2.0, 4.0, 8.0] {
            let v = coverage_baseline(&small().with_m_a(m)).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn fast_approximation_is_close() {
        let e = engine(SystemParams::new(50.0, 30.0, 40, 40, 4.0));
        for k in [1, 10, 20, 40] {
            let (a, f) = (e.ktx_approx(k).unwrap().value, e.ktx_fast(k).unwrap().value);
            assert!((a - f).abs() < 0.03, "k={k}: {a} vs {f}");
        }
    }

    #[test]
    fn double_variance_reduces_to_single() {
        let p = SystemParams::new(50.0, 30.0, 500, 40, 4.0);
        let single = coverage_baseline(&p).unwrap().value;
        let double = coverage_double(true, &p.with_sparse(30.0, 0.0)).unwrap();
        assert!((single - double.value).abs() < 1e-3);
        assert_eq!(double.method, Method::DoubleVariance);
    }

    #[test]
    fn double_variance_orderings() {
        let base = SystemParams::new(50.0, 10.0, 40, 40, 4.0);
        let dense_heavy = base.with_m_a(6.0).with_sparse(30.0, 2.0);
        let sparse_heavy = base.with_m_a(2.0).with_sparse(30.0, 6.0);
        let a = coverage_double(true, &dense_heavy).unwrap().value;
        let b = coverage_double(true, &sparse_heavy).unwrap().value;
        assert!(b > a);
        assert!(coverage_double(false, &sparse_heavy).unwrap().value < b);
    }

    #[test]
    fn sparse_serving_is_simulation_only() {
        let p = SystemParams::new(50.0, 10.0, 40, 40, 2.0).with_sparse(30.0, 2.0);
        let case = PlacementCase::DoubleVariance { rx_in_dense: true, tx_in_dense: false };
        assert!(matches!(coverage(case, &p), Err(crate::Error::Unsupported(_))));
    }

    #[test]
    fn power_does_not_matter() {
        let a = coverage_lrx(2, &small()).unwrap();
        let b = coverage_lrx(2, &small().with_power(10.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimates_carry_their_method() {
        let p = small();
        let est = coverage(PlacementCase::KTx { k: 2 }, &p).unwrap();
        assert_eq!(est.method, Method::KTxApprox);
        assert!(est.std_error.is_none());
        let keys: Vec<_> = est.meta.pairs().into_iter().map(|(k, _)| k).collect();
        assert_eq!(keys, ["quad_rel_tol", "quad_abs_tol", "truncation_sigmas", "intra_mode"]);
        assert!(coverage(PlacementCase::KTx { k: 21 }, &p).is_err());
        assert!(coverage_lrx(0, &p).is_err());
    }

    #[test]
    fn ase_closed_form() {
        let p = small().with_m_a(3.0);
        let pc = coverage_baseline(&p).unwrap();
        let zero = CoverageEstimate { value: 0.0, ..pc.clone() };
        assert_eq!(ase(&zero, &p), 0.0);
        let mut dense = p;
        dense.lambda_c *= 2.0;
        assert!((ase(&pc, &dense) / ase(&pc, &p) - 2.0).abs() < 1e-15);
        let r = ase(&pc, &p.with_beta(3.0)) / ase(&pc, &p.with_beta(1.0));
        assert!((r - 2.0).abs() < 1e-15);
        let want = 3.0 * 50e-6 * 1.0 * pc.value;
        assert!((ase(&pc, &p) - want).abs() < 1e-18);
    }

    #[test]
    fn optimize_ase_matches_brute_force() {
        let p = small();
        let case = PlacementCase::KTx { k: 1 };
        let opt = optimize_ase(case, &p, 1..=8).unwrap();
        let mut best = (0, f64::NEG_INFINITY);
        for m in 1..=8u32 {
            let q = p.with_m_a(m as f64);
            let v = ase(&coverage(case, &q).unwrap(), &q);
            assert!((v - opt.curve[m as usize - 1].1).abs() < 1e-15);
            if v > best.1 {
                best = (m, v);
            }
        }
        assert_eq!((opt.m_a, opt.ase), best);
        let single = optimize_ase(case, &p, 4..=4).unwrap();
        assert_eq!(single.m_a, 4);
        #[allow(clippy::reversed_empty_ranges)]
        let empty = optimize_ase(case, &p, 5..=4);
        assert_eq!(empty.unwrap_err(), crate::Error::EmptyRange);
    }

    #[test]
    fn hit_probabilities() {
        let p = SystemParams::new(50.0, 30.0, 30, 30, 4.0);
        let e = engine(p);
        let base = e.baseline().unwrap().value;

        let flat = ZipfLibrary::new(40, 0.0).unwrap();
        assert!((e.hit_uniform(&flat).unwrap() - 30.0 / 40.0 * base).abs() < 1e-15);
        let exact = ZipfLibrary::new(30, 0.0).unwrap();
        assert!((e.hit_uniform(&exact).unwrap() - base).abs() < 1e-12);

        let lib = ZipfLibrary::new(40, 0.8).unwrap();
        let norm: f64 = (1..=40).map(|i| (i as f64).powf(-0.8)).sum();
        let cached: f64 = (1..=30).map(|i| (i as f64).powf(-0.8) / norm).sum();
        assert!((e.hit_uniform(&lib).unwrap() - cached * base).abs() < 1e-12);

        let cc_flat = e.hit_cluster_centric(&flat).unwrap();
        assert!((cc_flat - e.hit_uniform(&flat).unwrap()).abs() < 2e-3);
        let mut prev = cc_flat;
        for g in [0.5, 1.0, 1.5] {
            let lib = ZipfLibrary::new(40, g).unwrap();
            let cc = e.hit_cluster_centric(&lib).unwrap();
            assert!(cc > e.hit_uniform(&lib).unwrap());
            assert!(cc >= prev);
            prev = cc;
        }
        assert!(hit_uniform(&p, &ZipfLibrary::new(10, 1.0).unwrap()).is_err());
    }
}
