//! Sweeps: one parameter varied along an axis, evaluated by one or more
//! methods, one row per (curve, axis value, method).

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use clustercache::analytic::{ase, EngineConfig};
use clustercache::montecarlo::{simulate_coverage, SimConfig};
use clustercache::{CoverageEngine, CoverageEstimate, Error, PlacementCase, SystemParams, ZipfLibrary};
use rayon::prelude::*;

/// The varied quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    MA,
    BetaDb,
    K,
    L,
    Gamma,
    /// Total `m_a + m_b`, split according to [`Hold`].
    MSplit,
}

impl Axis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Axis::MA => "m_a",
            Axis::BetaDb => "beta_db",
            Axis::K => "k",
            Axis::L => "l",
            Axis::Gamma => "gamma",
            Axis::MSplit => "m_split",
        }
    }
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "m_a" => Axis::MA,
            "beta_db" => Axis::BetaDb,
            "k" => Axis::K,
            "l" => Axis::L,
            "gamma" => Axis::Gamma,
            "m_split" => Axis::MSplit,
            _ => return Err("expected m_a, beta_db, k, l, gamma or m_split".into()),
        })
    }
}

/// Requested evaluation method. For cases with a single exact formula the
/// three analytic choices coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MethodSel {
    AnalyticExact,
    AnalyticApprox,
    AnalyticFast,
    MonteCarlo,
}

impl MethodSel {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodSel::AnalyticExact => "analytic_exact",
            MethodSel::AnalyticApprox => "analytic_approx",
            MethodSel::AnalyticFast => "analytic_fast",
            MethodSel::MonteCarlo => "monte_carlo",
        }
    }
}

impl FromStr for MethodSel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "analytic_exact" => MethodSel::AnalyticExact,
            "analytic_approx" => MethodSel::AnalyticApprox,
            "analytic_fast" => MethodSel::AnalyticFast,
            "monte_carlo" => MethodSel::MonteCarlo,
            _ => return Err(format!("unknown method `{s}`")),
        })
    }
}

impl fmt::Display for MethodSel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Coverage,
    /// Area spectral efficiency, bits/s/Hz/m².
    Ase,
    HitUniform,
    HitClusterCentric,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Coverage => "coverage",
            Metric::Ase => "ase",
            Metric::HitUniform => "hit_uniform",
            Metric::HitClusterCentric => "hit_cluster_centric",
        }
    }

    fn is_hit(&self) -> bool {
        matches!(self, Metric::HitUniform | Metric::HitClusterCentric)
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "coverage" => Metric::Coverage,
            "ase" => Metric::Ase,
            "hit_uniform" => Metric::HitUniform,
            "hit_cluster_centric" => Metric::HitClusterCentric,
            _ => return Err("expected coverage, ase, hit_uniform or hit_cluster_centric".into()),
        })
    }
}

/// Placement case, with the rank lists that expand into one curve each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseKind {
    Baseline,
    KTx(Vec<u32>),
    LRx(Vec<u32>),
    Double { rx_in_dense: bool, tx_in_dense: bool },
}

/// For the `m_split` axis: which mean stays fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hold {
    DenseMean(f64),
    SparseMean(f64),
}

/// A fully specified sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SystemParams,
    pub case: CaseKind,
    pub metric: Metric,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub methods: Vec<MethodSel>,
    pub hold: Hold,
    pub library: ZipfLibrary,
    pub sim: SimConfig,
    pub engine: EngineConfig,
    pub label: Option<String>,
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    /// Structural checks. Parameter ranges are validated per row.
    pub fn check(&self) -> Result<(), String> {
        if self.values.is_empty() || self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err("sweep values must be nonempty and strictly increasing".into());
        }
        if self.methods.is_empty() {
            return Err("at least one method is required".into());
        }
        match (&self.case, self.axis) {
            (CaseKind::KTx(_), Axis::K) | (CaseKind::LRx(_), Axis::L) => {}
            (_, Axis::K) => return Err("axis k needs case ktx".into()),
            (_, Axis::L) => return Err("axis l needs case lrx".into()),
            _ => {}
        }
        if matches!(self.axis, Axis::K | Axis::L) && self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err("rank values must be positive integers".into());
        }
        if let CaseKind::KTx(r) | CaseKind::LRx(r) = &self.case {
            if r.is_empty() {
                return Err("rank list is empty".into());
            }
        }
        if self.metric.is_hit() {
            if self.case != CaseKind::Baseline {
                return Err("hit probability sums over its own placements; set case = baseline".into());
            }
            if self.methods.contains(&MethodSel::MonteCarlo) {
                return Err("hit probability is analytic only".into());
            }
        } else if self.axis == Axis::Gamma {
            return Err("axis gamma needs a hit metric".into());
        }
        if self.axis == Axis::MSplit && !matches!(self.case, CaseKind::Double { .. }) {
            return Err("axis m_split needs case double".into());
        }
        self.sim.validate().map_err(|e| e.to_string())
    }

    /// The rows this sweep produces, in output order.
    pub fn tasks(&self) -> Vec<Task> {
        let cases: Vec<PlacementCase> = match (&self.case, self.axis) {
            (CaseKind::KTx(_), Axis::K) => vec![PlacementCase::KTx { k: 0 }],
            (CaseKind::LRx(_), Axis::L) => vec![PlacementCase::LRx { l: 0 }],
            (CaseKind::KTx(ks), _) => ks.iter().map(|&k| PlacementCase::KTx { k }).collect(),
            (CaseKind::LRx(ls), _) => ls.iter().map(|&l| PlacementCase::LRx { l }).collect(),
            (CaseKind::Baseline, _) => vec![PlacementCase::Baseline],
            (&CaseKind::Double { rx_in_dense, tx_in_dense }, _) => {
                vec![PlacementCase::DoubleVariance { rx_in_dense, tx_in_dense }]
            }
        };
        let mut out = Vec::new();
        for case in cases {
            for &x in &self.values {
                let (case, params, library) = self.point(case, x);
                let curve = self.curve_label(&case);
                for &method in &self.methods {
                    out.push(Task {
                        curve: curve.clone(),
                        axis: self.axis,
                        x,
                        case,
                        params,
                        metric: self.metric,
                        method,
                        library,
                        sim: self.sim,
                        engine: self.engine,
                    });
                }
            }
        }
        out
    }

    fn point(&self, case: PlacementCase, x: f64) -> (PlacementCase, SystemParams, ZipfLibrary) {
        let mut p = self.base;
        let mut lib = self.library;
        let mut case = case;
        match self.axis {
            Axis::MA => p.m_a = x,
            Axis::BetaDb => p = p.with_beta_db(x),
            Axis::K => case = PlacementCase::KTx { k: x as u32 },
            Axis::L => case = PlacementCase::LRx { l: x as u32 },
            Axis::Gamma => lib.gamma = x,
            Axis::MSplit => match self.hold {
                Hold::DenseMean(m) => {
                    p.m_a = m;
                    p.m_b = x - m;
                }
                Hold::SparseMean(m) => {
                    p.m_b = m;
                    p.m_a = x - m;
                }
            },
        }
        (case, p, lib)
    }

    fn curve_label(&self, case: &PlacementCase) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        if self.metric.is_hit() {
            return match self.axis {
                Axis::Gamma => self.metric.as_str().into(),
                _ => format!("{}(gamma={})", self.metric.as_str(), self.library.gamma),
            };
        }
        match (self.axis, case) {
            (Axis::K, _) => "ktx".into(),
            (Axis::L, _) => "lrx".into(),
            _ => case.to_string(),
        }
    }
}

/// One row's worth of work.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub curve: String,
    pub axis: Axis,
    pub x: f64,
    pub case: PlacementCase,
    pub params: SystemParams,
    pub metric: Metric,
    pub method: MethodSel,
    pub library: ZipfLibrary,
    pub sim: SimConfig,
    pub engine: EngineConfig,
}

/// A finished row.
#[derive(Debug, Clone)]
pub struct Row {
    pub task: Task,
    pub outcome: Result<CoverageEstimate, Error>,
    /// The reported number: coverage, ASE or hit probability.
    pub value: Option<f64>,
    pub std_error: Option<f64>,
    pub wall: Duration,
}

impl Row {
    pub fn ok(&self) -> bool {
        self.outcome.is_ok()
    }
}

/// Engines shared between rows, so ranks and methods at one parameter set
/// reuse the same tables.
#[derive(Default)]
pub struct EngineCache {
    engines: Mutex<Vec<Arc<CoverageEngine>>>,
}

impl EngineCache {
    pub fn get(&self, params: &SystemParams, cfg: &EngineConfig) -> Result<Arc<CoverageEngine>, Error> {
        let params = params.validate(&PlacementCase::Baseline)?;
        let template = {
            let engines = self.engines.lock().expect("engine cache poisoned");
            if let Some(e) = engines.iter().find(|e| e.params() == &params && e.config() == cfg) {
                return Ok(Arc::clone(e));
            }
            engines
                .iter()
                .find(|e| {
                    let q = e.params();
                    e.config() == cfg
                        && (q.sigma_a, q.alpha, q.beta, q.n_t, q.n_r) == (params.sigma_a, params.alpha, params.beta, params.n_t, params.n_r)
                })
                .cloned()
        };
        let engine = Arc::new(match template {
            Some(t) => t.rebind(params)?,
            None => CoverageEngine::new(params, *cfg)?,
        });
        self.engines.lock().expect("engine cache poisoned").push(Arc::clone(&engine));
        Ok(engine)
    }
}

fn coverage(task: &Task, cache: &EngineCache) -> Result<CoverageEstimate, Error> {
    let p = task.params.validate(&task.case)?;
    if task.method == MethodSel::MonteCarlo {
        return simulate_coverage(task.case, &p, &task.sim);
    }
    let engine = cache.get(&p, &task.engine)?;
    match (task.case, task.method) {
        (PlacementCase::KTx { k }, MethodSel::AnalyticExact) => engine.ktx_exact(k),
        (PlacementCase::KTx { k }, MethodSel::AnalyticFast) => engine.ktx_fast(k),
        (case, _) => engine.coverage(case),
    }
}

/// Evaluates one row.
pub fn evaluate(task: &Task, cache: &EngineCache) -> Row {
    let start = Instant::now();
    let outcome = match task.metric {
        Metric::Coverage | Metric::Ase => coverage(task, cache),
        Metric::HitUniform | Metric::HitClusterCentric => hit(task, cache),
    };
    let (value, std_error) = match (&outcome, task.metric) {
        (Ok(pc), Metric::Ase) => {
            let scale = ase(pc, &task.params) / pc.value.max(f64::MIN_POSITIVE);
            (Some(ase(pc, &task.params)), pc.std_error.map(|se| se * scale))
        }
        (Ok(pc), _) => (Some(pc.value), pc.std_error),
        (Err(_), _) => (None, None),
    };
    Row { task: task.clone(), outcome, value, std_error, wall: start.elapsed() }
}

fn hit(task: &Task, cache: &EngineCache) -> Result<CoverageEstimate, Error> {
    let p = task.params.validate(&PlacementCase::Baseline)?;
    let lib = ZipfLibrary::new(task.library.j_total, task.library.gamma)?;
    let engine = cache.get(&p, &task.engine)?;
    let value = match task.metric {
        Metric::HitUniform => engine.hit_uniform(&lib)?,
        _ => engine.hit_cluster_centric(&lib)?,
    };
    // Carry the provenance of the coverage values the sum is built from.
    let template = match task.metric {
        Metric::HitUniform => engine.baseline()?,
        _ => engine.ktx_approx(1)?,
    };
    Ok(CoverageEstimate { value, ..template })
}

/// Evaluates `tasks` on up to `workers` threads. Rows come back in task
/// order whatever the completion order.
pub fn run_tasks(tasks: &[Task], workers: usize) -> Vec<Row> {
    let cache = EngineCache::default();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().expect("thread pool");
    pool.install(|| tasks.par_iter().map(|t| evaluate(t, &cache)).collect())
}

/// Runs every row of `spec`.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<Vec<Row>, String> {
    spec.check()?;
    Ok(run_tasks(&spec.tasks(), workers))
}
