//! Canned sweeps for the published figures, with the qualitative claims
//! made about each figure checked against the computed curves.

use clustercache::analytic::EngineConfig;
use clustercache::montecarlo::SimConfig;
use clustercache::{SystemParams, ZipfLibrary};

use crate::sweep::{run_tasks, Axis, CaseKind, Hold, MethodSel, Metric, Row, SweepSpec};

pub const FIGURES: &[&str] = &["fig3", "fig4", "fig5", "fig6", "fig7", "fig9", "fig10"];

/// Default Monte Carlo trials per row in figure mode.
pub const FIGURE_TRIALS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    pub seed: u64,
    pub trials: u64,
    /// Replaces each curve's default methods (restricted to what the curve supports).
    pub methods: Option<Vec<MethodSel>>,
    pub workers: usize,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self { seed: 1, trials: FIGURE_TRIALS, methods: None, workers: 1 }
    }
}

/// Outcome of one qualitative claim.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct FigureRun {
    pub name: String,
    pub rows: Vec<Row>,
    pub checks: Vec<Check>,
}

impl FigureRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const ANALYTIC: &[MethodSel] = &[MethodSel::AnalyticExact, MethodSel::AnalyticApprox, MethodSel::AnalyticFast];
const ALL: &[MethodSel] =
    &[MethodSel::AnalyticExact, MethodSel::AnalyticApprox, MethodSel::AnalyticFast, MethodSel::MonteCarlo];
const MC: &[MethodSel] = &[MethodSel::MonteCarlo];

use MethodSel::{AnalyticApprox as Approx, AnalyticFast as Fast, MonteCarlo};

struct Curve {
    case: CaseKind,
    metric: Metric,
    axis: Axis,
    values: Vec<f64>,
    defaults: &'static [MethodSel],
    allowed: &'static [MethodSel],
    base: SystemParams,
    hold: Hold,
    gamma: f64,
    label: Option<String>,
}

impl Curve {
    fn new(base: SystemParams, case: CaseKind, metric: Metric, values: Vec<f64>, defaults: &'static [MethodSel]) -> Self {
        Self {
            case,
            metric,
            axis: Axis::MA,
            values,
            defaults,
            allowed: if matches!(metric, Metric::HitUniform | Metric::HitClusterCentric) { ANALYTIC } else { ALL },
            base,
            hold: Hold::SparseMean(0.0),
            gamma: 0.0,
            label: None,
        }
    }

    fn spec(self, opts: &FigureOptions) -> Option<SweepSpec> {
        let wanted = opts.methods.as_deref().unwrap_or(self.defaults);
        let methods: Vec<MethodSel> = wanted.iter().copied().filter(|m| self.allowed.contains(m)).collect();
        if methods.is_empty() {
            return None;
        }
        Some(SweepSpec {
            base: self.base,
            case: self.case,
            metric: self.metric,
            axis: self.axis,
            values: self.values,
            methods,
            hold: self.hold,
            library: ZipfLibrary { j_total: 40, gamma: self.gamma },
            sim: SimConfig::new(opts.trials, opts.seed),
            engine: EngineConfig::default(),
            label: self.label,
            output: None,
        })
    }
}

fn range(a: u32, b: u32) -> Vec<f64> {
    (a..=b).map(f64::from).collect()
}

/// Single-variance figures: λ_c = 50 /km², σ_a = 30 m, α = 4, β = 0 dB.
fn single(n: u32) -> SystemParams {
    SystemParams::new(50.0, 30.0, n, n, 1.0)
}

fn curves(name: &str) -> Result<Vec<Curve>, String> {
    let cov = Metric::Coverage;
    Ok(match name {
        "fig3" => {
            let b = single(40);
            vec![
                Curve::new(b, CaseKind::Baseline, cov, range(1, 10), &[Approx, MonteCarlo]),
                Curve::new(b, CaseKind::LRx(vec![1, 10]), cov, range(1, 10), &[Approx, MonteCarlo]),
                Curve::new(b, CaseKind::KTx(vec![1]), cov, range(1, 10), &[Approx, Fast, MonteCarlo]),
            ]
        }
        "fig4" => {
            let b = single(30);
            vec![
                Curve::new(b, CaseKind::KTx(vec![1, 5, 10, 20]), cov, range(1, 10), &[Approx, Fast]),
                Curve::new(b, CaseKind::Baseline, cov, range(1, 10), &[Approx]),
            ]
        }
        "fig5" => {
            let b = single(30);
            vec![
                Curve::new(b, CaseKind::KTx(vec![1, 10, 20]), Metric::Ase, range(1, 15), &[Approx]),
                Curve::new(b, CaseKind::Baseline, Metric::Ase, range(1, 15), &[Approx]),
            ]
        }
        "fig6" => {
            let b = single(30);
            vec![
                Curve::new(b, CaseKind::LRx(vec![1, 5, 10, 20]), cov, range(1, 10), &[Approx]),
                Curve::new(b, CaseKind::Baseline, cov, range(1, 10), &[Approx]),
            ]
        }
        "fig7" => {
            let b = single(30);
            vec![
                Curve::new(b, CaseKind::LRx(vec![1, 10, 20]), Metric::Ase, range(1, 15), &[Approx]),
                Curve::new(b, CaseKind::Baseline, Metric::Ase, range(1, 15), &[Approx]),
            ]
        }
        "fig9" => {
            let b = single(30);
            let mut out = Vec::new();
            for gamma in [0.0, 0.5, 1.0] {
                for metric in [Metric::HitUniform, Metric::HitClusterCentric] {
                    let mut c = Curve::new(b, CaseKind::Baseline, metric, range(1, 10), &[Approx]);
                    c.gamma = gamma;
                    out.push(c);
                }
            }
            out
        }
        "fig10" => {
            let b = SystemParams::new(50.0, 10.0, 40, 40, 1.0).with_sparse(30.0, 0.0);
            let split = |hold: Hold, rx_in_dense: bool, tx_in_dense: bool, from: u32, defaults, label: &str| {
                let mut c = Curve::new(b, CaseKind::Double { rx_in_dense, tx_in_dense }, cov, range(from, 10), defaults);
                c.axis = Axis::MSplit;
                c.hold = hold;
                c.label = Some(label.to_string());
                c
            };
            let mut v = vec![split(Hold::DenseMean(0.0), false, false, 1, MC, "m_a=0")];
            v[0].allowed = MC;
            v.push(split(Hold::SparseMean(0.0), true, true, 1, &[Approx, MonteCarlo], "m_b=0 rx=dense"));
            v.push(split(Hold::SparseMean(0.0), false, true, 1, &[Approx, MonteCarlo], "m_b=0 rx=sparse"));
            v.push(split(Hold::DenseMean(2.0), true, true, 2, &[Approx, MonteCarlo], "m_a=2 rx=dense"));
            v.push(split(Hold::DenseMean(2.0), false, true, 2, &[Approx, MonteCarlo], "m_a=2 rx=sparse"));
            v
        }
        _ => return Err(format!("unknown figure `{name}` (expected one of {})", FIGURES.join(", "))),
    })
}

/// The sweeps behind figure `name`.
pub fn figure_specs(name: &str, opts: &FigureOptions) -> Result<Vec<SweepSpec>, String> {
    let specs: Vec<SweepSpec> = curves(name)?.into_iter().filter_map(|c| c.spec(opts)).collect();
    for s in &specs {
        s.check()?;
    }
    Ok(specs)
}

/// Runs every sweep of figure `name` and checks its qualitative claims.
pub fn reproduce_figure(name: &str, opts: &FigureOptions) -> Result<FigureRun, String> {
    let specs = figure_specs(name, opts)?;
    let tasks: Vec<_> = specs.iter().flat_map(|s| s.tasks()).collect();
    let rows = run_tasks(&tasks, opts.workers);
    let checks = checks(name, &rows);
    Ok(FigureRun { name: name.to_string(), rows, checks })
}

/// Value of the row for `(curve, method, x)`, if it exists and succeeded.
fn value(rows: &[Row], curve: &str, method: MethodSel, x: f64) -> Option<(f64, Option<f64>)> {
    rows.iter()
        .find(|r| r.task.curve == curve && r.task.method == method && r.task.x == x)
        .and_then(|r| r.value.map(|v| (v, r.std_error)))
}

fn xs(rows: &[Row], curve: &str) -> Vec<f64> {
    let mut v: Vec<f64> = rows.iter().filter(|r| r.task.curve == curve).map(|r| r.task.x).collect();
    v.dedup();
    v
}

fn analytic(rows: &[Row], curve: &str, x: f64) -> Option<f64> {
    [Approx, MethodSel::AnalyticExact].iter().find_map(|&m| value(rows, curve, m, x)).map(|v| v.0)
}

/// Pointwise comparison of two analytic curves; `holds(a, b)` at each
/// shared axis value.
fn pointwise(rows: &[Row], name: &str, a: &str, b: &str, holds: impl Fn(f64, f64) -> bool) -> Check {
    let mut seen = 0;
    let mut bad = Vec::new();
    for x in xs(rows, a) {
        if let (Some(va), Some(vb)) = (analytic(rows, a, x), analytic(rows, b, x)) {
            seen += 1;
            if !holds(va, vb) {
                bad.push(format!("x={x}: {va:.4} vs {vb:.4}"));
            }
        }
    }
    finish(name, seen, bad)
}

fn finish(name: &str, seen: usize, bad: Vec<String>) -> Check {
    let detail = if seen == 0 {
        "skipped: no rows to compare".to_string()
    } else if bad.is_empty() {
        format!("{seen} points")
    } else {
        format!("{} of {seen} points fail; {}", bad.len(), bad.join("; "))
    };
    Check { name: name.to_string(), passed: bad.is_empty(), detail }
}

/// Analytic vs simulated rows of one curve: `|a - mc| ≤ k·SE + slack`.
fn versus_mc(rows: &[Row], curve: &str, method: MethodSel, se_factor: f64, slack: f64) -> Check {
    let mut seen = 0;
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for x in xs(rows, curve) {
        if let (Some((a, _)), Some((m, se))) = (value(rows, curve, method, x), value(rows, curve, MonteCarlo, x)) {
            seen += 1;
            let se = se.unwrap_or(0.0);
            let excess = (a - m).abs() - se_factor * se;
            worst = worst.max((a - m).abs());
            if excess > slack {
                bad.push(format!("x={x}: {a:.4} vs {m:.4} ± {se:.4}"));
            }
        }
    }
    let bound = if se_factor > 0.0 { format!("{se_factor}·SE + {slack}") } else { format!("{slack}") };
    let mut c = finish(&format!("{curve}: {} vs simulation within {bound}", method.as_str()), seen, bad);
    if c.passed && seen > 0 {
        c.detail = format!("{seen} points, max |diff| {worst:.4}");
    }
    c
}

/// `(argmax, max)` of an analytic curve; ties go to the smaller x.
fn peak(rows: &[Row], curve: &str) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for x in xs(rows, curve) {
        let v = analytic(rows, curve, x)?;
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((x, v));
        }
    }
    best
}

fn ase_orderings(rows: &[Row], family: &str, ranks: [u32; 3], param: char) -> Vec<Check> {
    let curve = |r: u32| format!("{family}({param}={r})");
    let peaks: Option<Vec<(f64, f64)>> = ranks.iter().map(|&r| peak(rows, &curve(r))).collect();
    let base = peak(rows, "baseline");
    let (Some(p), Some(base)) = (peaks, base) else {
        return vec![Check { name: format!("{family} ASE optimum"), passed: false, detail: "missing rows".into() }];
    };
    let arg = p.iter().map(|(x, _)| format!("{x}")).collect::<Vec<_>>().join(" ≥ ");
    let val = format!("{:.3e} > {:.3e} > {:.3e}", p[0].1, base.1, p[2].1);
    vec![
        Check {
            name: format!("optimal m_a decreases with {param} ({})", ranks.map(|r| r.to_string()).join(", ")),
            passed: p[0].0 >= p[1].0 && p[1].0 >= p[2].0,
            detail: arg,
        },
        Check {
            name: format!("optimal ASE: {param}={} > baseline > {param}={}", ranks[0], ranks[2]),
            passed: p[0].1 > base.1 && base.1 > p[2].1,
            detail: val,
        },
    ]
}

/// Qualitative claims for figure `name`.
pub fn checks(name: &str, rows: &[Row]) -> Vec<Check> {
    let mut out = Vec::new();
    match name {
        "fig3" => {
            for c in ["baseline", "lrx(l=1)", "lrx(l=10)"] {
                out.push(versus_mc(rows, c, Approx, 3.0, 0.01));
            }
            out.push(versus_mc(rows, "ktx(k=1)", Approx, 0.0, 0.03));
            out.push(pointwise(rows, "ktx(k=1) above baseline", "ktx(k=1)", "baseline", |a, b| a >= b));
            out.push(pointwise(rows, "lrx(l=1) above baseline", "lrx(l=1)", "baseline", |a, b| a >= b));
        }
        "fig4" => {
            out.push(pointwise(rows, "k=1 above k=20", "ktx(k=1)", "ktx(k=20)", |a, b| a >= b));
            for k in [5, 10, 20] {
                let c = format!("ktx(k={k})");
                out.push(pointwise(rows, &format!("k=1 above k={k}"), "ktx(k=1)", &c, |a, b| a >= b));
            }
            out.push(pointwise(rows, "k=1 above baseline", "ktx(k=1)", "baseline", |a, b| a >= b));
            for k in [1, 5, 10, 20] {
                let c = format!("ktx(k={k})");
                let mut seen = 0;
                let mut bad = Vec::new();
                for x in xs(rows, &c) {
                    if let (Some((a, _)), Some((f, _))) = (value(rows, &c, Approx, x), value(rows, &c, Fast, x)) {
                        seen += 1;
                        if (a - f).abs() > 0.03 {
                            bad.push(format!("x={x}: {a:.4} vs {f:.4}"));
                        }
                    }
                }
                out.push(finish(&format!("{c}: fast within 0.03 of approx"), seen, bad));
            }
        }
        "fig5" => out.extend(ase_orderings(rows, "ktx", [1, 10, 20], 'k')),
        "fig6" => {
            out.push(pointwise(rows, "l=1 above l=20", "lrx(l=1)", "lrx(l=20)", |a, b| a >= b));
            out.push(pointwise(rows, "l=1 above baseline", "lrx(l=1)", "baseline", |a, b| a >= b));
        }
        "fig7" => out.extend(ase_orderings(rows, "lrx", [1, 10, 20], 'l')),
        "fig9" => {
            let u = |g: &str| format!("hit_uniform(gamma={g})");
            let c = |g: &str| format!("hit_cluster_centric(gamma={g})");
            for g in ["0.5", "1"] {
                out.push(pointwise(rows, &format!("cluster-centric above uniform at gamma={g}"), &c(g), &u(g), |a, b| a > b));
            }
            out.push(pointwise(rows, "cluster-centric equals uniform at gamma=0", &c("0"), &u("0"), |a, b| (a - b).abs() <= 2e-3));
            out.push(pointwise(rows, "cluster-centric nondecreasing in gamma (0 to 0.5)", &c("0.5"), &c("0"), |a, b| a >= b));
            out.push(pointwise(rows, "cluster-centric nondecreasing in gamma (0.5 to 1)", &c("1"), &c("0.5"), |a, b| a >= b));
            // The uniform curve depends on gamma once the library exceeds N_t.
            let spread = xs(rows, &u("0"))
                .into_iter()
                .filter_map(|x| {
                    let v: Option<Vec<f64>> = ["0", "0.5", "1"].iter().map(|g| analytic(rows, &u(g), x)).collect();
                    v.map(|v| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min))
                })
                .fold(0.0, f64::max);
            out.push(Check {
                name: "uniform placement spread across gamma (informational)".into(),
                passed: true,
                detail: format!("max spread {spread:.4}"),
            });
        }
        "fig10" => {
            for rx in ["dense", "sparse"] {
                let a2 = format!("m_a=2 rx={rx}");
                let b0 = format!("m_b=0 rx={rx}");
                let mut seen = 0;
                let mut bad = Vec::new();
                for total in [4.0, 8.0] {
                    if let (Some(a), Some(b)) = (analytic(rows, &a2, total), analytic(rows, &b0, total)) {
                        seen += 1;
                        if !(a > b) {
                            bad.push(format!("total={total}: {a:.4} vs {b:.4}"));
                        }
                    }
                }
                out.push(finish(&format!("rx={rx}: larger sparse share covers better"), seen, bad));
            }
            for split in ["m_b=0", "m_a=2"] {
                let d = format!("{split} rx=dense");
                let s = format!("{split} rx=sparse");
                out.push(pointwise(rows, &format!("{split}: dense receiver dominates sparse"), &d, &s, |a, b| a >= b));
            }
            for c in ["m_b=0 rx=dense", "m_b=0 rx=sparse", "m_a=2 rx=dense", "m_a=2 rx=sparse"] {
                out.push(versus_mc(rows, c, Approx, 3.0, 0.01));
            }
            // Serving device in the sparse subcluster is worst.
            let mut seen = 0;
            let mut bad = Vec::new();
            for x in xs(rows, "m_a=0") {
                let Some((v, se)) = value(rows, "m_a=0", MonteCarlo, x) else { continue };
                for c in ["m_b=0 rx=dense", "m_b=0 rx=sparse", "m_a=2 rx=dense", "m_a=2 rx=sparse"] {
                    if let Some(o) = analytic(rows, c, x) {
                        seen += 1;
                        if v > o + 3.0 * se.unwrap_or(0.0) {
                            bad.push(format!("total={x}: {v:.4} above {c} {o:.4}"));
                        }
                    }
                }
            }
            out.push(finish("m_a=0 below every dense-serving curve", seen, bad));
        }
        _ => {}
    }
    out
}
