//! Goodness-of-fit tests and the built-in invariant suite.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analytic::CoverageEngine;
use crate::dist::{marcum_q1, DensityFn, OrderStat};
use crate::laplace::{IntraMode, Transforms};
use crate::model::{PlacementCase, SystemParams};
use crate::montecarlo::{simulate_range, SimConfig};
use crate::quad::Tolerance;

/// Outcome of a one-sample test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    // The series converges slowly near zero, where the value is 1 to double precision.
    if x < 0.27 {
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        total += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// Kolmogorov–Smirnov test of `samples` against `cdf`, with the usual
/// finite-sample correction to the asymptotic p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let f = cdf(xi);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    TestResult { statistic: d, p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d) }
}

/// Pearson chi-square test of counts against cell probabilities. Adjacent
/// cells are pooled from the right until each expects at least five.
pub fn chi_square_test(observed: &[u64], probs: &[f64]) -> TestResult {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs).rev() {
        o_acc += o as f64;
        e_acc += p * n;
        if e_acc >= 5.0 {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += o_acc;
        last.1 += e_acc;
    }
    let statistic: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1).max(1) as f64;
    let p_value = 1.0 - ChiSquared::new(dof).expect("positive dof").cdf(statistic);
    TestResult { statistic, p_value }
}

/// One line of the invariant suite.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Fast invariant checks across every module; used by the `selftest` verb.
pub fn selftest() -> Vec<CheckOutcome> {
    let tol = Tolerance::default();
    let params = SystemParams::new(50.0, 30.0, 20, 20, 4.0);
    let mut out = Vec::new();

    let densities = [
        ("rice", DensityFn::rice(40.0, 30.0)),
        ("rayleigh", DensityFn::rayleigh(30.0)),
        ("order_stat", DensityFn::order_stat(3, 20, 30.0)),
    ];
    let worst = densities
        .iter()
        .map(|(_, d)| d.mass(&tol).map(|m| (m - 1.0).abs()).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    out.push(outcome("density normalization", worst < 1e-6, format!("max |mass - 1| = {worst:.2e}")));

    let os = OrderStat::new(5, 20, 30.0);
    let q = os.quantile(0.3);
    let err = (os.cdf(q) - 0.3).abs();
    out.push(outcome("order statistic quantile", err < 1e-9, format!("|F(F⁻¹(0.3)) - 0.3| = {err:.2e}")));

    let mono = (0..20).all(|i| {
        let b = 5.0 * i as f64;
        marcum_q1(10.0, b).unwrap_or(f64::NAN) >= marcum_q1(10.0, b + 5.0).unwrap_or(f64::NAN)
    });
    out.push(outcome("Marcum Q decreasing", mono, String::new()));

    let tr = Transforms::new(&params);
    let at_zero = [
        tr.inter(0.0),
        tr.inter_double(0.0),
        tr.intra_uncorrelated(0.0),
        tr.intra_conditional(0.0, 20.0, IntraMode::ExactSum),
        tr.intra_double(0.0, 20.0),
    ];
    let worst = at_zero
        .iter()
        .map(|v| v.as_ref().map(|x| (x - 1.0).abs()).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    out.push(outcome("transforms are 1 at s = 0", worst <= 1e-12, format!("max |L(0) - 1| = {worst:.2e}")));

    let s = 3e5;
    let reduce = match (tr.inter(s), tr.inter_double(s)) {
        (Ok(a), Ok(b)) => (a - b).abs(),
        _ => f64::INFINITY,
    };
    out.push(outcome("double-variance inter reduces", reduce <= 1e-12, format!("diff {reduce:.2e}")));

    match CoverageEngine::new(params, Default::default()) {
        Ok(engine) => {
            let mix = (|| -> crate::Result<f64> {
                let base = engine.baseline()?.value;
                let mut avg = 0.0;
                for l in 1..=params.n_r {
                    avg += engine.lrx(l)?.value / params.n_r as f64;
                }
                Ok((avg - base).abs())
            })();
            match mix {
                Ok(d) => out.push(outcome("rank mixture equals baseline", d < 2e-3, format!("diff {d:.2e}"))),
                Err(e) => out.push(outcome("rank mixture equals baseline", false, e.to_string())),
            }
        }
        Err(e) => out.push(outcome("rank mixture equals baseline", false, e.to_string())),
    }

    let cfg = SimConfig::new(400, 11);
    let case = PlacementCase::Baseline;
    let whole = simulate_range(case, &params, &cfg, 0..400);
    let split = simulate_range(case, &params, &cfg, 0..150)
        .and_then(|a| Ok(a.merge(simulate_range(case, &params, &cfg, 150..400)?)));
    let ok = matches!((&whole, &split), (Ok(a), Ok(b)) if a == b);
    out.push(outcome("simulation splits deterministically", ok, String::new()));

    out
}
