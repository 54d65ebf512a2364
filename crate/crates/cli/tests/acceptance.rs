//! Acceptance suite: one PASS/FAIL line per criterion, details indented
//! beneath. Exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use clustercache::analytic::{coverage_baseline, coverage_double, EngineConfig};
use clustercache::checks::ks_test;
use clustercache::dist::{
    marcum_q1, rayleigh_cdf, rayleigh_pdf_unchecked, rice_pdf_unchecked, truncated_rayleigh_pdf, DensityFn, OrderStat,
    Side,
};
use clustercache::laplace::{IntraMode, KTxCombinatorics, Transforms};
use clustercache::montecarlo::{simulate_coverage, trial_realization, SimConfig};
use clustercache::quad::{integrate, Tolerance};
use clustercache::{CoverageEngine, PlacementCase, SystemParams};
use clustercache_cli::output::render_csv;
use clustercache_cli::{reproduce_figure, FigureOptions};
use rayon::prelude::*;

const TRIALS: u64 = 100_000;
const SEED: u64 = 1;

struct Verdict {
    passed: bool,
    lines: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { passed: true, lines: Vec::new() }
    }

    fn record(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn fail(&mut self, line: String) {
        self.record(false, line);
    }
}

fn engine(p: SystemParams, case: PlacementCase) -> clustercache::Result<CoverageEngine> {
    CoverageEngine::new(p.validate(&case)?, EngineConfig::default())
}

/// Analytic value vs a 1e5-trial simulation; `(analytic, mc, se)`.
fn versus_mc(case: PlacementCase, p: SystemParams, analytic: f64) -> clustercache::Result<(f64, f64, f64)> {
    let mc = simulate_coverage(case, &p, &SimConfig::new(TRIALS, SEED))?;
    Ok((analytic, mc.value, mc.std_error.unwrap_or(0.0)))
}

fn fig3_agreement() -> Verdict {
    let mut v = Verdict::new();
    let cases = [PlacementCase::Baseline, PlacementCase::LRx { l: 1 }, PlacementCase::LRx { l: 10 }];
    let points: Vec<(PlacementCase, f64)> =
        cases.iter().flat_map(|&c| [1.0, 2.0, 4.0, 6.0, 8.0, 10.0].map(|m| (c, m))).collect();
    let results: Vec<_> = points
        .par_iter()
        .map(|&(case, m)| {
            let p = SystemParams::new(50.0, 30.0, 40, 40, m);
            let a = engine(p, case)?.coverage(case)?.value;
            versus_mc(case, p, a)
        })
        .collect();
    for (&(case, m), r) in points.iter().zip(results) {
        match r {
            Ok((a, mc, se)) => {
                let ok = (a - mc).abs() <= 3.0 * se + 0.01;
                v.record(ok, format!("{case:?} m_a={m}: analytic {a:.4}, simulated {mc:.4} ± {se:.4}"));
            }
            Err(e) => v.fail(format!("{case:?} m_a={m}: {e}")),
        }
    }
    v
}

fn ktx_tightness() -> Verdict {
    let mut v = Verdict::new();
    let points: Vec<(u32, f64)> = [1, 5, 10, 20].iter().flat_map(|&k| [2.0, 6.0, 10.0].map(|m| (k, m))).collect();
    let results: Vec<_> = points
        .par_iter()
        .map(|&(k, m)| {
            let case = PlacementCase::KTx { k };
            let p = SystemParams::new(50.0, 30.0, 30, 30, m);
            let e = engine(p, case)?;
            let fast = e.ktx_fast(k)?.value;
            versus_mc(case, p, e.ktx_approx(k)?.value).map(|r| (r, fast))
        })
        .collect();
    for (&(k, m), r) in points.iter().zip(results) {
        match r {
            Ok(((a, mc, se), fast)) => {
                let ok = (a - mc).abs() <= 0.03 && (fast - a).abs() <= 0.03;
                v.record(ok, format!("k={k} m_a={m}: approx {a:.4}, fast {fast:.4}, simulated {mc:.4} ± {se:.4}"));
            }
            Err(e) => v.fail(format!("k={k} m_a={m}: {e}")),
        }
    }
    v
}

fn mixture_identities() -> Verdict {
    let mut v = Verdict::new();
    let base = SystemParams::new(50.0, 30.0, 20, 20, 4.0);
    for p in [base, base.with_m_a(8.0).with_beta_db(-3.0)] {
        let r = (|| -> clustercache::Result<(f64, f64, f64)> {
            let e = engine(p, PlacementCase::Baseline)?;
            let b = e.baseline()?.value;
            let mut tx = 0.0;
            let mut rx = 0.0;
            for k in 1..=20 {
                tx += e.ktx_approx(k)?.value / 20.0;
                rx += e.lrx(k)?.value / 20.0;
            }
            Ok((b, tx, rx))
        })();
        match r {
            Ok((b, tx, rx)) => {
                let ok = (tx - b).abs() <= 2e-3 && (rx - b).abs() <= 2e-3;
                v.record(ok, format!("m_a={} beta_db={}: baseline {b:.6}, k-average {tx:.6}, l-average {rx:.6}", p.m_a, p.beta_db()));
            }
            Err(e) => v.fail(e.to_string()),
        }
    }
    v
}

fn closest_transmitter_is_best() -> Verdict {
    let mut v = Verdict::new();
    let points = [
        SystemParams::new(50.0, 30.0, 30, 30, 2.0),
        SystemParams::new(50.0, 30.0, 30, 30, 6.0),
        SystemParams::new(50.0, 30.0, 40, 40, 4.0).with_beta_db(3.0),
    ];
    for p in points {
        let r = (|| -> clustercache::Result<Vec<f64>> {
            let e = engine(p, PlacementCase::KTx { k: 1 })?;
            (1..=p.n_t).map(|k| e.ktx_approx(k).map(|c| c.value)).collect()
        })();
        match r {
            Ok(c) => {
                let first = c[0];
                let worst_rank = (2..=p.n_t).filter(|&k| c[k as usize - 1] > first).collect::<Vec<_>>();
                let margin = first - c[c.len() - 1];
                let ok = worst_rank.is_empty() && margin > 0.005;
                v.record(
                    ok,
                    format!(
                        "N_t={} m_a={} beta_db={}: k=1 {first:.4}, k=N_t {:.4}, margin {margin:.4}, ranks above k=1 {worst_rank:?}",
                        p.n_t,
                        p.m_a,
                        p.beta_db(),
                        c[c.len() - 1]
                    ),
                );
            }
            Err(e) => v.fail(e.to_string()),
        }
    }
    v
}

fn figure_claims(name: &str) -> Verdict {
    let mut v = Verdict::new();
    match reproduce_figure(name, &FigureOptions::default()) {
        Ok(run) => {
            for r in run.rows.iter().filter(|r| !r.ok()) {
                v.fail(format!("row {} x={}: {:?}", r.task.curve, r.task.x, r.outcome));
            }
            for c in run.checks {
                v.record(c.passed, format!("{}: {}", c.name, c.detail));
            }
        }
        Err(e) => v.fail(e),
    }
    v
}

fn double_variance() -> Verdict {
    let mut v = Verdict::new();
    let single = SystemParams::new(50.0, 30.0, 500, 40, 4.0);
    match (coverage_baseline(&single), coverage_double(true, &single.with_sparse(30.0, 0.0))) {
        (Ok(a), Ok(b)) => {
            let d = (a.value - b.value).abs();
            v.record(d <= 1e-3, format!("(a) sigma_b = sigma_a, m_b = 0, N_t = 500: {:.6} vs {:.6}", b.value, a.value));
        }
        (a, b) => v.fail(format!("(a) {a:?} {b:?}")),
    }

    // (total, m_b) splits; m_b = 0 is the all-dense reference.
    let base = SystemParams::new(50.0, 10.0, 40, 40, 1.0);
    let split = |total: f64, m_b: f64| base.with_m_a(total - m_b).with_sparse(30.0, m_b);
    let mut points = Vec::new();
    for total in [4.0, 8.0] {
        for m_b in [0.0, total - 2.0] {
            for rx in [true, false] {
                points.push((total, m_b, rx));
            }
        }
    }
    let results: Vec<_> = points
        .par_iter()
        .map(|&(total, m_b, rx)| {
            let p = split(total, m_b);
            let case = PlacementCase::DoubleVariance { rx_in_dense: rx, tx_in_dense: true };
            let a = engine(p, case)?.double(rx)?.value;
            versus_mc(case, p, a)
        })
        .collect();
    let value = |total: f64, m_b: f64, rx: bool| {
        points
            .iter()
            .zip(&results)
            .find(|(&pt, _)| pt == (total, m_b, rx))
            .and_then(|(_, r)| r.as_ref().ok())
            .map(|r| r.0)
    };
    for total in [4.0, 8.0] {
        for rx in [true, false] {
            match (value(total, total - 2.0, rx), value(total, 0.0, rx)) {
                (Some(hi), Some(lo)) => v.record(
                    hi > lo,
                    format!("(b) total {total}, rx_in_dense={rx}: m_b={} gives {hi:.4}, m_b=0 gives {lo:.4}", total - 2.0),
                ),
                _ => v.fail(format!("(b) total {total}: missing values")),
            }
        }
        for m_b in [0.0, total - 2.0] {
            match (value(total, m_b, true), value(total, m_b, false)) {
                (Some(d), Some(s)) => {
                    v.record(d >= s, format!("(c) total {total}, m_b={m_b}: rx dense {d:.4}, rx sparse {s:.4}"))
                }
                _ => v.fail(format!("(c) total {total}: missing values")),
            }
        }
    }
    for (&(total, m_b, rx), r) in points.iter().zip(&results) {
        match r {
            Ok((a, mc, se)) => v.record(
                (a - mc).abs() <= 3.0 * se + 0.01,
                format!("(d) total {total}, m_b={m_b}, rx_in_dense={rx}: analytic {a:.4}, simulated {mc:.4} ± {se:.4}"),
            ),
            Err(e) => v.fail(format!("(d) total {total}, m_b={m_b}: {e}")),
        }
    }
    v
}

fn transform_sanity() -> Verdict {
    let mut v = Verdict::new();
    let p = SystemParams::new(50.0, 30.0, 30, 30, 5.0);
    let dv = SystemParams::new(50.0, 10.0, 30, 30, 3.0).with_sparse(30.0, 2.0);
    let tr = Transforms::new(&p);
    let tv = Transforms::new(&dv);
    let comb = match KTxCombinatorics::new(4, p.n_t, p.m_a) {
        Ok(c) => c,
        Err(e) => {
            v.fail(e.to_string());
            return v;
        }
    };
    let grid: Vec<f64> = (0..30).map(|i| 10f64.powf(-2.0 + 10.0 * i as f64 / 29.0)).collect();
    type Eval<'a> = Box<dyn Fn(f64) -> clustercache::Result<f64> + 'a>;
    let evaluators: Vec<(&str, Eval)> = vec![
        ("inter", Box::new(|s| tr.inter(s))),
        ("inter_double", Box::new(|s| tv.inter_double(s))),
        ("intra_uncorrelated", Box::new(|s| tr.intra_uncorrelated(s))),
        ("intra_conditional exact_sum", Box::new(|s| tr.intra_conditional(s, 25.0, IntraMode::ExactSum))),
        ("intra_conditional exp_approx", Box::new(|s| tr.intra_conditional(s, 25.0, IntraMode::ExpApprox))),
        ("intra_double", Box::new(|s| tv.intra_double(s, 25.0))),
        ("intra_ktx_exact", Box::new(|s| tr.intra_ktx_exact(s, 25.0, 15.0, &comb))),
    ];
    for (name, f) in &evaluators {
        let r = (|| -> clustercache::Result<(f64, Option<f64>)> {
            let at_zero = f(0.0)?;
            let mut prev = 1.0 + 1e-12;
            for &s in &grid {
                let x = f(s)?;
                if x > prev + 1e-12 {
                    return Ok((at_zero, Some(s)));
                }
                prev = x;
            }
            Ok((at_zero, None))
        })();
        match r {
            Ok((z, rise)) => v.record(
                (z - 1.0).abs() <= 1e-12 && rise.is_none(),
                format!("{name}: L(0) = {z}, increase at {rise:?}"),
            ),
            Err(e) => v.fail(format!("{name}: {e}")),
        }
    }
    let single = SystemParams::new(50.0, 10.0, 30, 30, 3.0);
    let reduced = single.with_sparse(30.0, 0.0);
    let (ts, td) = (Transforms::new(&single), Transforms::new(&reduced));
    let worst = grid.iter().try_fold(0.0f64, |w, &s| Ok::<_, clustercache::Error>(w.max((ts.inter(s)? - td.inter_double(s)?).abs())));
    match worst {
        Ok(w) => v.record(w <= 1e-12, format!("inter vs inter_double at m_b = 0: max diff {w:.2e}")),
        Err(e) => v.fail(e.to_string()),
    }
    v
}

fn distributions() -> Verdict {
    let mut v = Verdict::new();
    let tol = Tolerance::new(1e-10, 1e-14);
    let sigma = 30.0;
    let densities = [
        ("rice(40, 30)", DensityFn::rice(40.0, sigma)),
        ("rice(150, 30)", DensityFn::rice(150.0, sigma)),
        ("rayleigh(30)", DensityFn::rayleigh(sigma)),
        ("order_stat(1, 40)", DensityFn::order_stat(1, 40, sigma)),
        ("order_stat(40, 40)", DensityFn::order_stat(40, 40, sigma)),
        ("truncated_rayleigh inner", DensityFn::truncated_rayleigh(25.0, Side::Inner, sigma)),
        ("truncated_rayleigh outer", DensityFn::truncated_rayleigh(25.0, Side::Outer, sigma)),
    ];
    for (name, d) in &densities {
        match d.mass(&tol) {
            Ok(m) => v.record((m - 1.0).abs() <= 1e-6, format!("{name} mass {m:.9}")),
            Err(e) => v.fail(format!("{name}: {e}")),
        }
    }

    let rr = [0.5, 10.0, 30.0, 90.0]
        .iter()
        .map(|&y| (rice_pdf_unchecked(y, 1e-6, sigma) - rayleigh_pdf_unchecked(y, sigma)).abs())
        .fold(0.0, f64::max);
    v.record(rr <= 1e-12, format!("Rice with vanishing center is Rayleigh: max diff {rr:.2e}"));

    let stats: Vec<OrderStat> = (1..=40).map(|k| OrderStat::new(k, 40, sigma)).collect();
    let mix = [0.1, 5.0, 20.0, 30.0, 61.0, 120.0]
        .iter()
        .map(|&t| (stats.iter().map(|s| s.pdf(t)).sum::<f64>() / 40.0 - rayleigh_pdf_unchecked(t, sigma)).abs())
        .fold(0.0, f64::max);
    v.record(mix <= 1e-10, format!("order-statistic mixture is Rayleigh: max diff {mix:.2e}"));

    let f_cut = rayleigh_cdf(25.0, sigma);
    let total = [1.0, 12.0, 24.9, 25.1, 60.0, 140.0]
        .iter()
        .map(|&t| {
            let mixed = f_cut * truncated_rayleigh_pdf(t, 25.0, Side::Inner, sigma)
                + (1.0 - f_cut) * truncated_rayleigh_pdf(t, 25.0, Side::Outer, sigma);
            ((mixed - rayleigh_pdf_unchecked(t, sigma)) / rayleigh_pdf_unchecked(t, sigma)).abs()
        })
        .fold(0.0, f64::max);
    v.record(total <= 1e-12, format!("truncated Rayleigh total probability: max rel diff {total:.2e}"));

    // Q1(a, b) increases in a and decreases in b.
    let mut monotone = true;
    for i in 0..=40 {
        for j in 0..40 {
            let (a, b) = (0.25 * i as f64, 0.25 * j as f64);
            let here = marcum_q1(a, b).unwrap_or(f64::NAN);
            let right = marcum_q1(a, b + 0.25).unwrap_or(f64::NAN);
            let up = marcum_q1(a + 0.25, b).unwrap_or(f64::NAN);
            monotone &= here >= right && up >= here;
        }
    }
    v.record(monotone, "Marcum Q1 monotone on a 41 x 40 grid".into());

    let p = SystemParams::new(50.0, 30.0, 30, 30, 4.0);
    let n = 4000;
    let draw = |case: PlacementCase, seed: u64, pick: &dyn Fn(&clustercache::model::Geometry) -> f64| {
        let cfg = SimConfig::new(n, seed);
        (0..n)
            .map(|t| trial_realization(&p, case, &cfg, t).map(|r| pick(&r.geometry())))
            .collect::<clustercache::Result<Vec<f64>>>()
    };
    let k = 7;
    let os_k = OrderStat::new(k, p.n_t, sigma);
    let l = 3;
    let os_l = OrderStat::new(l, p.n_r, sigma);
    let rice_mix = |r: f64| {
        integrate(|nu| os_l.pdf(nu) * (1.0 - marcum_q1(nu / sigma, r / sigma).unwrap_or(1.0)), 0.0, os_l.upper(), &Tolerance::new(1e-9, 1e-12))
            .unwrap_or(f64::NAN)
    };
    let ks: [(&str, clustercache::Result<Vec<f64>>, &dyn Fn(f64) -> f64); 3] = [
        ("receiver-to-center distance is Rayleigh", draw(PlacementCase::Baseline, 1, &|g| g.nu0), &|x| rayleigh_cdf(x, sigma)),
        (
            "k-th transmitter offset is an order statistic (k = 7)",
            draw(PlacementCase::KTx { k }, 2, &|g| g.t_k.unwrap_or(f64::NAN)),
            &|x| os_k.cdf(x),
        ),
        ("l-Rx serving distance is a Rice mixture (l = 3)", draw(PlacementCase::LRx { l }, 3, &|g| g.r), &rice_mix),
    ];
    for (name, samples, cdf) in ks {
        match samples {
            Ok(s) => {
                let res = ks_test(&s, cdf);
                v.record(res.p_value > 0.01, format!("KS {name}: D = {:.4}, p = {:.3}", res.statistic, res.p_value));
            }
            Err(e) => v.fail(format!("KS {name}: {e}")),
        }
    }
    v
}

fn determinism() -> Verdict {
    let mut v = Verdict::new();
    let run = |workers: usize| {
        let opts = FigureOptions { trials: 5_000, workers, ..Default::default() };
        reproduce_figure("fig10", &opts).map(|r| render_csv(&r.rows))
    };
    match (run(1), run(1), run(3)) {
        (Ok(a), Ok(b), Ok(c)) => {
            v.record(a == b, format!("fig10 at 5000 trials rerun: {} bytes, identical = {}", a.len(), a == b));
            v.record(a == c, format!("fig10 with 3 workers: identical = {}", a == c));
        }
        (a, b, c) => v.fail(format!("{:?} {:?} {:?}", a.err(), b.err(), c.err())),
    }
    v
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("analytic/MC agreement, baseline and l-Rx (N = 40)", fig3_agreement),
        ("k-Tx approximation tightness (N_t = 30)", ktx_tightness),
        ("rank mixtures equal baseline", mixture_identities),
        ("closest transmitter gives the best coverage", closest_transmitter_is_best),
        ("ASE trade-off orderings", || figure_claims("fig5")),
        ("hit probability orderings", || figure_claims("fig9")),
        ("double-variance reductions and orderings", double_variance),
        ("transform sanity", transform_sanity),
        ("distribution suite", distributions),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = run();
        let secs = start.elapsed().as_secs_f64();
        println!("{} {}. {name} ({secs:.1} s)", if verdict.passed { "PASS" } else { "FAIL" }, i + 1);
        for line in &verdict.lines {
            println!("    {line}");
        }
        failed += usize::from(!verdict.passed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
