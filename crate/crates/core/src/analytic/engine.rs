use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::dist::{law_of_cosines, rayleigh_pdf_unchecked, rayleigh_quantile, rice_pdf_unchecked, triangle_mean, OrderStat};
use crate::laplace::{IntraMode, IntraWeights, KTxCombinatorics, Transforms, ENVELOPE_SIGMAS};
use crate::model::{PlacementCase, SystemParams};
use crate::quad::{integrate_with_breaks, Chebyshev, CubicGrid, CubicTable, Kronecker, QuadError, Tolerance};
use crate::{Error, Result};

use super::{CoverageEstimate, EstimateMeta, Method};

/// Quasi-Monte Carlo settings for the exact k-Tx coverage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QmcConfig {
    pub seed: u64,
    /// The first estimate uses `2^min_log2` points.
    pub min_log2: u32,
    /// Give up once the point count would exceed `2^max_log2`.
    pub max_log2: u32,
    /// Stop when two successive estimates differ by less than this.
    pub target: f64,
    /// Tolerance for the inner integrals at each point.
    pub tol: Tolerance,
}

impl Default for QmcConfig {
    fn default() -> Self {
        Self { seed: 0x5eed, min_log2: 16, max_log2: 20, target: 5e-4, tol: Tolerance::new(1e-5, 1e-9) }
    }
}

/// Numerical settings of a [`CoverageEngine`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub tol: Tolerance,
    pub intra_mode: IntraMode,
    /// Points in the 1-D tables over the serving distance.
    pub table_points: usize,
    /// `(serving distance, receiver distance)` points of the complement grid.
    pub grid: (usize, usize),
    /// Degree of the Chebyshev fits over the ranked distance.
    pub cheb_degree: usize,
    pub qmc: QmcConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            tol: Tolerance::default(),
            intra_mode: IntraMode::default(),
            table_points: 384,
            grid: (241, 121),
            cheb_degree: 48,
            qmc: QmcConfig::default(),
        }
    }
}

type Lazy<T> = OnceLock<Result<T>>;

/// `ln L_inter(β r^α)` tabulated over the serving distance, with direct
/// evaluation past the end of the table.
///
/// All tables over the serving distance `r` are uniform in `√r`: the
/// transforms carry `r^α ln r` terms at the origin that a grid uniform in `r`
/// resolves poorly.
#[derive(Debug)]
struct InterTable {
    ln_values: CubicTable,
    double: bool,
}

/// Complement `C(β r^α, ν)` against `Rice(·; ν, σ_a)` on an `(r, ν)` grid.
/// Shared between engines whose parameters differ only in the active means.
#[derive(Debug)]
struct ComplementGrid {
    key: GridKey,
    grid: Lazy<CubicGrid>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GridKey {
    sigma_a: f64,
    alpha: f64,
    beta: f64,
    n_t: u32,
    n_r: u32,
    config: EngineConfig,
}

/// Coverage evaluator at one parameter set.
///
/// Interpolation tables are built on first use and kept, so evaluating many
/// ranks at one parameter set costs little more than evaluating one.
#[derive(Debug)]
pub struct CoverageEngine {
    params: SystemParams,
    cfg: EngineConfig,
    weights: IntraWeights,
    /// Serving distances up to here are covered by every table.
    r_max: f64,
    /// Ranked distances beyond this carry no probability.
    t_max: f64,
    inter: Lazy<InterTable>,
    inter_double: Lazy<InterTable>,
    complement: Arc<ComplementGrid>,
    uncorrelated: Lazy<CubicTable>,
    rx_rank_kernel: Lazy<Chebyshev>,
    tx_rank_kernel: Lazy<Chebyshev>,
    tx_rank_kernel_fast: Lazy<Chebyshev>,
}

/// Records the first failure inside nested integrands, which can only
/// return a number.
struct FirstError(RefCell<Option<Error>>);

impl FirstError {
    fn new() -> Self {
        Self(RefCell::new(None))
    }

    fn value(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }

    fn finish(self, r: Result<f64, QuadError>) -> Result<f64> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(r?),
        }
    }
}

fn try_values(points: &[f64], mut f: impl FnMut(f64) -> Result<f64>) -> Result<Vec<f64>> {
    points.iter().map(|&x| f(x)).collect()
}

impl CoverageEngine {
    /// Every analytic expression draws the serving device from the dense
    /// subcluster, so `params` must validate for the baseline case.
    pub fn new(params: SystemParams, cfg: EngineConfig) -> Result<Self> {
        let params = params.validate(&PlacementCase::Baseline)?;
        let key = GridKey {
            sigma_a: params.sigma_a,
            alpha: params.alpha,
            beta: params.beta,
            n_t: params.n_t,
            n_r: params.n_r,
            config: cfg,
        };
        Ok(Self::with_grid(params, cfg, Arc::new(ComplementGrid { key, grid: OnceLock::new() })))
    }

    fn with_grid(params: SystemParams, cfg: EngineConfig, complement: Arc<ComplementGrid>) -> Self {
        let e = ENVELOPE_SIGMAS;
        let n = params.n_t.max(params.n_r);
        let t_max = OrderStat::new(1, n, params.sigma_a).upper();
        let sigma_max = params.sigma_a.max(params.sigma_b);
        let r_max = t_max.max(e * sigma_max) + e * params.sigma_a;
        Self {
            weights: IntraWeights::new(params.m_a - 1.0, params.n_t, cfg.intra_mode),
            params,
            cfg,
            r_max,
            t_max,
            inter: OnceLock::new(),
            inter_double: OnceLock::new(),
            complement,
            uncorrelated: OnceLock::new(),
            rx_rank_kernel: OnceLock::new(),
            tx_rank_kernel: OnceLock::new(),
            tx_rank_kernel_fast: OnceLock::new(),
        }
    }

    /// An engine for `params`, reusing this one's complement grid when the
    /// parameters it depends on are unchanged.
    pub fn rebind(&self, params: SystemParams) -> Result<Self> {
        let fresh = Self::new(params, self.cfg)?;
        if fresh.complement.key == self.complement.key {
            Ok(Self::with_grid(fresh.params, self.cfg, Arc::clone(&self.complement)))
        } else {
            Ok(fresh)
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    fn transforms(&self) -> Transforms<'_> {
        Transforms::new(&self.params).with_tolerance(self.cfg.tol)
    }

    fn meta(&self) -> EstimateMeta {
        EstimateMeta::quadrature(&self.cfg)
    }

    #[inline]
    fn s_of(&self, r: f64) -> f64 {
        let p = &self.params;
        if p.alpha == 4.0 {
            let r2 = r * r;
            p.beta * r2 * r2
        } else {
            p.beta * r.powf(p.alpha)
        }
    }

    fn table_nodes(&self) -> Vec<f64> {
        let n = self.cfg.table_points;
        let hi = self.r_max.sqrt();
        (0..n).map(|i| (hi * i as f64 / (n - 1) as f64).powi(2)).collect()
    }

    fn inter_table(&self, double: bool) -> Result<&InterTable> {
        let cell = if double { &self.inter_double } else { &self.inter };
        let built = cell.get_or_init(|| {
            let tr = self.transforms();
            let values = try_values(&self.table_nodes(), |r| {
                let s = self.s_of(r);
                let a = if double { tr.inter_double(s)? } else { tr.inter(s)? };
                Ok(a.max(f64::MIN_POSITIVE).ln())
            })?;
            Ok(InterTable { ln_values: CubicTable::from_values(0.0, self.r_max.sqrt(), values), double })
        });
        built.as_ref().map_err(Clone::clone)
    }

    /// Inter-cluster transform at serving distance `r`.
    fn inter_at(&self, table: &InterTable, r: f64) -> Result<f64> {
        let rho = r.sqrt();
        if table.ln_values.contains(rho) {
            return Ok(table.ln_values.eval(rho).exp());
        }
        let s = self.s_of(r);
        if table.double {
            self.transforms().inter_double(s)
        } else {
            self.transforms().inter(s)
        }
    }

    fn grid(&self) -> Result<&CubicGrid> {
        let built = self.complement.grid.get_or_init(|| {
            let tr = self.transforms();
            let (nx, ny) = self.cfg.grid;
            let nu_max = self.t_max.max(ENVELOPE_SIGMAS * self.params.sigma_a);
            let r_max = nu_max + ENVELOPE_SIGMAS * self.params.sigma_a;
            CubicGrid::try_fit((0.0, r_max.sqrt(), nx), (0.0, nu_max, ny), |rho, nu| {
                tr.rice_complement(self.s_of(rho * rho), nu, self.params.sigma_a)
            })
        });
        built.as_ref().map_err(Clone::clone)
    }

    /// Intra-cluster transform for a uniformly chosen serving device, at
    /// serving distance `r` and receiver distance `nu` from the center.
    fn intra_at(&self, grid: &CubicGrid, r: f64, nu: f64) -> Result<f64> {
        let c = if grid.contains(r.sqrt(), nu) {
            grid.eval(r.sqrt(), nu).clamp(0.0, 1.0)
        } else {
            self.transforms().rice_complement(self.s_of(r), nu, self.params.sigma_a)?
        };
        Ok(self.weights.apply(c))
    }

    fn uncorrelated_table(&self) -> Result<&CubicTable> {
        let built = self.uncorrelated.get_or_init(|| {
            let tr = self.transforms();
            let sigma = std::f64::consts::SQRT_2 * self.params.sigma_a;
            let values = try_values(&self.table_nodes(), |r| tr.rice_complement(self.s_of(r), 0.0, sigma))?;
            Ok(CubicTable::from_values(0.0, self.r_max.sqrt(), values))
        });
        built.as_ref().map_err(Clone::clone)
    }

    fn fit_rank_kernel(&self, cell: &Lazy<Chebyshev>, f: impl FnMut(f64) -> Result<f64>) -> Result<Chebyshev> {
        let built = cell.get_or_init(|| {
            let nodes = Chebyshev::nodes(0.0, self.t_max, self.cfg.cheb_degree);
            Ok(Chebyshev::from_values(0.0, self.t_max, try_values(&nodes, f)?))
        });
        built.clone()
    }

    /// `∫ L_inter · L_intra(·|t) · Rice(r; t, σ_a) dr`: coverage given the
    /// receiver sits at distance `t` from the center.
    pub fn coverage_given_rx_distance(&self, t: f64) -> Result<f64> {
        let a = self.inter_table(false)?;
        let grid = self.grid()?;
        let sigma = self.params.sigma_a;
        let errs = FirstError::new();
        let mut f = |r: f64| {
            let v = self.inter_at(a, r).and_then(|a| Ok(a * self.intra_at(grid, r, t)?));
            errs.value(v) * rice_pdf_unchecked(r, t, sigma)
        };
        let breaks = envelope_breaks(t, sigma);
        let r = integrate_with_breaks(&mut f, &breaks, &self.cfg.tol);
        errs.finish(r)
    }

    /// Coverage given the serving device sits at distance `t` from the
    /// center, with the receiver uniform and the intra-cluster transform of
    /// a uniformly chosen serving device.
    pub fn coverage_given_tx_distance(&self, t: f64) -> Result<f64> {
        let a = self.inter_table(false)?;
        let grid = self.grid()?;
        let sigma = self.params.sigma_a;
        let tol = self.cfg.tol;
        let errs = FirstError::new();
        let mut outer = |nu0: f64| {
            let inner = triangle_mean(
                |r| errs.value(self.inter_at(a, r).and_then(|a| Ok(a * self.intra_at(grid, r, nu0)?))),
                nu0,
                t,
                &tol,
            );
            errs.value(inner.map_err(Error::from)) * rayleigh_pdf_unchecked(nu0, sigma)
        };
        let breaks = rayleigh_breaks(sigma, t);
        let r = integrate_with_breaks(&mut outer, &breaks, &tol);
        errs.finish(r)
    }

    /// As [`Self::coverage_given_tx_distance`] with uncorrelated intra-cluster
    /// distances.
    pub fn coverage_given_tx_distance_fast(&self, t: f64) -> Result<f64> {
        let a = self.inter_table(false)?;
        let table = self.uncorrelated_table()?;
        let p = &self.params;
        let mean = p.m_a - 1.0;
        let errs = FirstError::new();
        let mut f = |r: f64| {
            let c = if table.contains(r.sqrt()) {
                Ok(table.eval(r.sqrt()).clamp(0.0, 1.0))
            } else {
                self.transforms().rice_complement(self.s_of(r), 0.0, std::f64::consts::SQRT_2 * p.sigma_a)
            };
            let v = self.inter_at(a, r).and_then(|a| Ok(a * (-mean * c?).exp()));
            errs.value(v) * rice_pdf_unchecked(r, t, p.sigma_a)
        };
        let breaks = envelope_breaks(t, p.sigma_a);
        let r = integrate_with_breaks(&mut f, &breaks, &self.cfg.tol);
        errs.finish(r)
    }

    /// `∫ f_T(t) K(t) dt` for the rank-`rank` order statistic of `n` Rayleigh
    /// distances and a kernel fitted over the ranked distance.
    fn rank_mixture(&self, kernel: &Chebyshev, rank: u32, n: u32) -> Result<f64> {
        let os = OrderStat::new(rank, n, self.params.sigma_a);
        let mut f = |t: f64| os.pdf(t) * kernel.eval(t);
        let mut breaks = vec![0.0];
        for q in [1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-9] {
            let x = os.quantile(q);
            if x > 0.0 && x < self.t_max {
                breaks.push(x);
            }
        }
        breaks.push(self.t_max);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        Ok(integrate_with_breaks(&mut f, &breaks, &self.cfg.tol)?)
    }

    fn check_tx_rank(&self, k: u32) -> Result<()> {
        self.params.validate(&PlacementCase::KTx { k })?;
        Ok(())
    }

    /// k-Tx coverage with the intra-cluster transform of a uniformly chosen
    /// serving device.
    pub fn ktx_approx(&self, k: u32) -> Result<CoverageEstimate> {
        self.check_tx_rank(k)?;
        let kernel = self.fit_rank_kernel(&self.tx_rank_kernel, |t| self.coverage_given_tx_distance(t))?;
        let v = self.rank_mixture(&kernel, k, self.params.n_t)?;
        Ok(CoverageEstimate::analytic(v, Method::KTxApprox, self.meta()))
    }

    /// k-Tx coverage with uncorrelated intra-cluster distances.
    pub fn ktx_fast(&self, k: u32) -> Result<CoverageEstimate> {
        self.check_tx_rank(k)?;
        let kernel = self.fit_rank_kernel(&self.tx_rank_kernel_fast, |t| self.coverage_given_tx_distance_fast(t))?;
        let v = self.rank_mixture(&kernel, k, self.params.n_t)?;
        Ok(CoverageEstimate::analytic(v, Method::KTxFast, self.meta()))
    }

    /// ℓ-Rx coverage.
    pub fn lrx(&self, l: u32) -> Result<CoverageEstimate> {
        self.params.validate(&PlacementCase::LRx { l })?;
        let kernel = self.fit_rank_kernel(&self.rx_rank_kernel, |t| self.coverage_given_rx_distance(t))?;
        let v = self.rank_mixture(&kernel, l, self.params.n_r)?;
        Ok(CoverageEstimate::analytic(v, Method::LRx, self.meta()))
    }

    /// Baseline coverage, integrated directly over `(ν₀, r)` without any of
    /// the interpolation tables except the inter-cluster one.
    pub fn baseline(&self) -> Result<CoverageEstimate> {
        let v = self.direct(self.params.sigma_a, false)?;
        Ok(CoverageEstimate::analytic(v, Method::Baseline, self.meta()))
    }

    /// Double-variance coverage, serving device in the dense subcluster.
    pub fn double(&self, rx_in_dense: bool) -> Result<CoverageEstimate> {
        let p = &self.params;
        p.validate(&PlacementCase::DoubleVariance { rx_in_dense, tx_in_dense: true })?;
        let sigma_v = if rx_in_dense { p.sigma_a } else { p.sigma_b };
        let v = self.direct(sigma_v, true)?;
        let meta = EstimateMeta::Quadrature {
            tol: self.cfg.tol,
            envelope_sigmas: ENVELOPE_SIGMAS,
            // The double-variance transform has no truncated sum.
            intra_mode: IntraMode::ExpApprox,
        };
        Ok(CoverageEstimate::analytic(v, Method::DoubleVariance, meta))
    }

    /// `∫ Ray(ν₀; σ_v) ∫ L_inter · L_intra(·|ν₀) · Rice(r; ν₀, σ_a) dr dν₀`.
    fn direct(&self, sigma_v: f64, double: bool) -> Result<f64> {
        let a = self.inter_table(double)?;
        let tr = self.transforms();
        let sigma = self.params.sigma_a;
        let tol = self.cfg.tol;
        let errs = FirstError::new();
        let mut outer = |nu0: f64| {
            let mut inner = |r: f64| {
                let s = self.s_of(r);
                let intra = if double {
                    tr.intra_double(s, nu0)
                } else {
                    tr.rice_complement(s, nu0, sigma).map(|c| self.weights.apply(c))
                };
                let v = self.inter_at(a, r).and_then(|a| Ok(a * intra?));
                errs.value(v) * rice_pdf_unchecked(r, nu0, sigma)
            };
            let v = integrate_with_breaks(&mut inner, &envelope_breaks(nu0, sigma), &tol);
            errs.value(v.map_err(Error::from)) * rayleigh_pdf_unchecked(nu0, sigma_v)
        };
        let r = integrate_with_breaks(&mut outer, &rayleigh_breaks(sigma_v, f64::NAN), &tol);
        errs.finish(r)
    }

    /// k-Tx coverage with the exact intra-cluster transform, by randomly
    /// shifted quasi-Monte Carlo over `(t_k, ν₀, θ)`.
    pub fn ktx_exact(&self, k: u32) -> Result<CoverageEstimate> {
        self.check_tx_rank(k)?;
        let p = &self.params;
        let q = self.cfg.qmc;
        let comb = KTxCombinatorics::new(k, p.n_t, p.m_a)?;
        let os = OrderStat::new(k, p.n_t, p.sigma_a);
        let seq = Kronecker::new(3, q.seed);
        let a = self.inter_table(false)?;
        let tr = Transforms::new(p).with_tolerance(q.tol);

        let point = |n: u64| -> Result<f64> {
            let mut u = [0.0; 3];
            seq.point(n, &mut u);
            let t_k = os.quantile(u[0]);
            let nu0 = rayleigh_quantile(u[1], p.sigma_a);
            let r = law_of_cosines(nu0, t_k, PI * u[2]);
            let intra = tr.intra_ktx_exact(self.s_of(r), nu0, t_k, &comb)?;
            Ok(self.inter_at(a, r)? * intra)
        };
        // Fixed chunks summed in order keep the result independent of the
        // thread count.
        const CHUNK: u64 = 1024;
        let sum_range = |lo: u64, hi: u64| -> Result<f64> {
            let chunks: Vec<f64> = (lo / CHUNK..hi / CHUNK)
                .into_par_iter()
                .map(|c| (c * CHUNK..(c + 1) * CHUNK).map(point).sum::<Result<f64>>())
                .collect::<Result<_>>()?;
            Ok(chunks.iter().sum())
        };

        let mut n = 1u64 << q.min_log2.max(10);
        let mut total = sum_range(0, n)?;
        loop {
            let prev = total / n as f64;
            total += sum_range(n, 2 * n)?;
            n *= 2;
            let est = total / n as f64;
            let change = (est - prev).abs();
            if change < q.target {
                let meta = EstimateMeta::Qmc { points: n, seed: q.seed, change, tol: q.tol };
                return Ok(CoverageEstimate::analytic(est, Method::KTxExact, meta));
            }
            if n >= 1u64 << q.max_log2 {
                return Err(Error::QmcNonConvergence { points: n, change });
            }
        }
    }

    /// The default analytic coverage for `case`.
    pub fn coverage(&self, case: PlacementCase) -> Result<CoverageEstimate> {
        match case {
            PlacementCase::KTx { k } => self.ktx_approx(k),
            PlacementCase::LRx { l } => self.lrx(l),
            PlacementCase::Baseline => self.baseline(),
            PlacementCase::DoubleVariance { rx_in_dense, tx_in_dense: true } => self.double(rx_in_dense),
            PlacementCase::DoubleVariance { tx_in_dense: false, .. } => {
                self.params.validate(&case)?;
                Err(Error::Unsupported("a serving device in the sparse subcluster is available only by simulation"))
            }
        }
    }
}

/// `[max(0, c − 8σ), c, c + 8σ]` with duplicates removed.
fn envelope_breaks(c: f64, sigma: f64) -> Vec<f64> {
    let lo = (c - ENVELOPE_SIGMAS * sigma).max(0.0);
    let mut b = vec![lo];
    if c > lo {
        b.push(c);
    }
    b.push(c + ENVELOPE_SIGMAS * sigma);
    b
}

/// Breaks over the Rayleigh(σ) support, plus `extra` when it falls inside.
fn rayleigh_breaks(sigma: f64, extra: f64) -> Vec<f64> {
    let hi = ENVELOPE_SIGMAS * sigma;
    let mut b = vec![0.0, sigma, 3.0 * sigma, hi];
    if extra > 0.0 && extra < hi {
        b.push(extra);
    }
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}
