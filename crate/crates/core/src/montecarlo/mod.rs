//! Direct simulation of the clustered network.
//!
//! Each trial places the receiver of interest at the origin, builds its own
//! (representative) cluster around it according to the placement case, scatters
//! interfering clusters as a Poisson process in a disk, draws fading, and
//! records whether the SIR beats the threshold.
//!
//! Randomness is split into independent ChaCha8 streams per trial, so any
//! partition of the trials over threads gives the same tally.

use std::ops::Range;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, Poisson, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{CoverageEstimate, EstimateMeta, Method};
use crate::dist::{poisson_cdf, poisson_pmf};
use crate::model::{Geometry, PlacementCase, SystemParams};
use crate::Result;

/// Name of the generator, recorded with every estimate.
pub const RNG_NAME: &str = "chacha8";

/// Streams reserved per trial: one for the representative cluster and the
/// rest for rings of interfering parents.
const STREAMS_PER_TRIAL: u64 = 64;
const MAX_RINGS: usize = STREAMS_PER_TRIAL as usize - 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("at least one trial is required")]
    NoTrials,
    #[error("disk radius must be positive (got {0})")]
    DiskRadius(f64),
    #[error("antithetic sampling needs an even number of trials (got {0})")]
    OddAntithetic(u64),
}

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    /// Radius of the disk of interfering parents around the receiver. `None`
    /// picks [`default_disk_radius`].
    pub disk_radius: Option<f64>,
    /// Pair trials that share geometry and use reflected fading draws.
    pub antithetic: bool,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self { trials, seed, disk_radius: None, antithetic: false }
    }

    pub fn with_disk_radius(mut self, radius: f64) -> Self {
        self.disk_radius = Some(radius);
        self
    }

    pub fn with_antithetic(mut self, antithetic: bool) -> Self {
        self.antithetic = antithetic;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::NoTrials);
        }
        if let Some(r) = self.disk_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(SimError::DiskRadius(r));
            }
        }
        if self.antithetic && self.trials % 2 == 1 {
            return Err(SimError::OddAntithetic(self.trials));
        }
        Ok(())
    }

    /// The disk radius actually used for `params` and `case`.
    pub fn radius(&self, params: &SystemParams, case: &PlacementCase) -> f64 {
        self.disk_radius.unwrap_or_else(|| default_disk_radius(params, case))
    }
}

/// `max(10σ, 15/√(πλ_c))` with σ the widest scattering in use.
///
/// Interferers beyond the disk are dropped, which biases coverage upward by
/// roughly `πλ_c m̄ β E[r^α] / R^{α-2}`. At 50 clusters/km² and one active
/// device per cluster the second term keeps that bias near 5e-4.
pub fn default_disk_radius(params: &SystemParams, case: &PlacementCase) -> f64 {
    let sigma = if case.is_double_variance() { params.sigma_b.max(params.sigma_a) } else { params.sigma_a };
    (10.0 * sigma).max(15.0 / (std::f64::consts::PI * params.lambda_c).sqrt())
}

/// An interfering cluster: its center and the offsets of its active devices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentCluster {
    pub center: [f64; 2],
    pub dense: Vec<[f64; 2]>,
    pub sparse: Vec<[f64; 2]>,
}

/// One draw of everything a trial needs. Coordinates put the receiver of
/// interest at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRealization {
    /// Interfering clusters in the disk.
    pub parents: Vec<ParentCluster>,
    /// Representative cluster center, `x₀`.
    pub rep_center: [f64; 2],
    /// Offsets of the potential transmitters of the subcluster the serving
    /// device comes from.
    pub offsets_t: Vec<[f64; 2]>,
    /// Offsets of the potential receivers; `offsets_r[receiver] = -x₀`.
    pub offsets_r: Vec<[f64; 2]>,
    pub receiver: usize,
    /// Index of the serving device in `offsets_t`.
    pub serving: usize,
    /// Active interferers among `offsets_t`; distinct, never `serving`.
    pub active: Vec<usize>,
    /// Active devices of the other subcluster (double-variance only).
    pub other_active: Vec<[f64; 2]>,
    pub fading_serving: f64,
    /// Fading of `active` followed by `other_active`.
    pub fading_intra: Vec<f64>,
    /// Fading of the interfering clusters' devices, dense then sparse, in
    /// parent order.
    pub fading_inter: Vec<f64>,
}

impl ClusterRealization {
    fn at(&self, offset: [f64; 2]) -> [f64; 2] {
        [self.rep_center[0] + offset[0], self.rep_center[1] + offset[1]]
    }

    /// Distances from the receiver.
    pub fn geometry(&self) -> Geometry {
        let w = self
            .active
            .iter()
            .map(|&i| norm(self.at(self.offsets_t[i])))
            .chain(self.other_active.iter().map(|&o| norm(self.at(o))))
            .collect();
        let u = self
            .parents
            .iter()
            .flat_map(|p| p.dense.iter().chain(&p.sparse).map(move |o| norm([p.center[0] + o[0], p.center[1] + o[1]])))
            .collect();
        Geometry {
            nu0: norm(self.rep_center),
            t_k: Some(norm(self.offsets_t[self.serving])),
            t_l: Some(norm(self.offsets_r[self.receiver])),
            r: norm(self.at(self.offsets_t[self.serving])),
            w,
            u,
        }
    }

    /// Signal-to-interference ratio at the receiver.
    pub fn sir(&self, params: &SystemParams) -> f64 {
        let total = self
            .parents
            .iter()
            .flat_map(|p| p.dense.iter().chain(&p.sparse).map(move |o| (p.center, *o)))
            .zip(&self.fading_inter)
            .fold(0.0, |acc, ((c, o), &h)| acc + h * path_gain(params, [c[0] + o[0], c[1] + o[1]]));
        self.sir_with(params, total)
    }

    /// SIR given the total inter-cluster interference.
    fn sir_with(&self, params: &SystemParams, inter: f64) -> f64 {
        let signal = self.fading_serving * path_gain(params, self.at(self.offsets_t[self.serving]));
        let intra = self
            .active
            .iter()
            .map(|&i| self.at(self.offsets_t[i]))
            .chain(self.other_active.iter().map(|&o| self.at(o)))
            .zip(&self.fading_intra)
            .fold(0.0, |acc, (x, &h)| acc + h * path_gain(params, x));
        signal / (intra + inter)
    }
}

/// `P_d ‖x‖^{-α}`.
#[inline]
fn path_gain(params: &SystemParams, x: [f64; 2]) -> f64 {
    let d2 = x[0] * x[0] + x[1] * x[1];
    if params.alpha == 4.0 {
        params.p_d / (d2 * d2)
    } else {
        params.p_d * d2.powf(-0.5 * params.alpha)
    }
}

/// Receives the interfering devices of a trial as they are drawn.
trait InterSink {
    fn parent(&mut self, center: [f64; 2]);
    fn device(&mut self, center: [f64; 2], offset: [f64; 2], sparse: bool, fading: f64);
}

#[derive(Default)]
struct Recorder {
    parents: Vec<ParentCluster>,
    fading: Vec<f64>,
}

impl InterSink for Recorder {
    fn parent(&mut self, center: [f64; 2]) {
        self.parents.push(ParentCluster { center, dense: Vec::new(), sparse: Vec::new() });
    }

    fn device(&mut self, _center: [f64; 2], offset: [f64; 2], sparse: bool, fading: f64) {
        let last = self.parents.last_mut().expect("device before its parent");
        if sparse {
            last.sparse.push(offset);
        } else {
            last.dense.push(offset);
        }
        self.fading.push(fading);
    }
}

/// Running inter-cluster interference, without keeping the devices.
struct Interference<'a> {
    params: &'a SystemParams,
    total: f64,
}

impl<'a> Interference<'a> {
    fn new(params: &'a SystemParams) -> Self {
        Self { params, total: 0.0 }
    }
}

impl InterSink for Interference<'_> {
    fn parent(&mut self, _center: [f64; 2]) {}

    #[inline]
    fn device(&mut self, c: [f64; 2], o: [f64; 2], _sparse: bool, fading: f64) {
        self.total += fading * path_gain(self.params, [c[0] + o[0], c[1] + o[1]]);
    }
}

fn norm(p: [f64; 2]) -> f64 {
    p[0].hypot(p[1])
}

/// `P(N ≤ max)` for `N ~ Poisson(mean)`: the acceptance rate of
/// [`sample_truncated_poisson`]'s rejection step.
pub fn truncated_poisson_acceptance(mean: f64, max: u64) -> f64 {
    poisson_cdf(max, mean.max(0.0))
}

/// Poisson(`mean`) conditioned on not exceeding `max`. Rejection when the
/// acceptance rate is reasonable, inversion of the truncated pmf otherwise.
pub fn sample_truncated_poisson<R: Rng + ?Sized>(mean: f64, max: u64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let accept = truncated_poisson_acceptance(mean, max);
    if accept >= 0.05 {
        let dist = Poisson::new(mean).expect("positive finite mean");
        loop {
            let n = dist.sample(rng) as u64;
            if n <= max {
                return n;
            }
        }
    }
    let u: f64 = rng.random::<f64>() * accept;
    let mut acc = 0.0;
    for n in 0..=max {
        acc += poisson_pmf(n, mean);
        if u < acc {
            return n;
        }
    }
    max
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
    }
}

fn gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> [f64; 2] {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    [sigma * x, sigma * y]
}

fn fading<R: Rng + ?Sized>(reflect: bool, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    if reflect {
        -(-u).ln_1p()
    } else {
        -u.ln()
    }
}

/// Index of the `rank`-th (1-based) shortest vector.
fn ranked(offsets: &[[f64; 2]], rank: u32) -> usize {
    let mut order: Vec<usize> = (0..offsets.len()).collect();
    order.sort_by(|&a, &b| norm(offsets[a]).total_cmp(&norm(offsets[b])));
    order[rank as usize - 1]
}

/// Everything that fixes the random draws of one trial.
#[derive(Debug, Clone, Copy)]
struct TrialKey {
    seed: u64,
    /// Geometry index; antithetic pairs share it.
    index: u64,
    reflect: bool,
}

impl TrialKey {
    fn new(cfg: &SimConfig, trial: u64) -> Self {
        if cfg.antithetic {
            Self { seed: cfg.seed, index: trial / 2, reflect: trial % 2 == 1 }
        } else {
            Self { seed: cfg.seed, index: trial, reflect: false }
        }
    }

    fn stream(&self, sub: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index.wrapping_mul(STREAMS_PER_TRIAL).wrapping_add(sub));
        rng
    }
}

fn realize<S: InterSink>(
    params: &SystemParams,
    case: &PlacementCase,
    radius: f64,
    key: TrialKey,
    sink: &mut S,
) -> ClusterRealization {
    let p = params;
    let mut rng = key.stream(0);

    // Which subcluster serves, and how the receiver sits in its cluster.
    let (sigma_tx, m_tx, sigma_other, m_other, sigma_rx) = match *case {
        PlacementCase::DoubleVariance { rx_in_dense, tx_in_dense } => {
            let sigma_rx = if rx_in_dense { p.sigma_a } else { p.sigma_b };
            if tx_in_dense {
                (p.sigma_a, p.m_a, p.sigma_b, p.m_b, sigma_rx)
            } else {
                (p.sigma_b, p.m_b, p.sigma_a, p.m_a, sigma_rx)
            }
        }
        _ => (p.sigma_a, p.m_a, p.sigma_a, 0.0, p.sigma_a),
    };

    let offsets_r: Vec<[f64; 2]> = (0..p.n_r).map(|_| gaussian(sigma_rx, &mut rng)).collect();
    let receiver = match *case {
        PlacementCase::LRx { l } => ranked(&offsets_r, l),
        _ => 0,
    };
    let g = offsets_r[receiver];
    let rep_center = [-g[0], -g[1]];

    let offsets_t: Vec<[f64; 2]> = (0..p.n_t).map(|_| gaussian(sigma_tx, &mut rng)).collect();
    let serving = match *case {
        PlacementCase::KTx { k } => ranked(&offsets_t, k),
        _ => 0,
    };
    let n_active = sample_truncated_poisson(m_tx - 1.0, p.n_t as u64 - 1, &mut rng) as usize;
    let active: Vec<usize> = index::sample(&mut rng, p.n_t as usize - 1, n_active)
        .into_iter()
        .map(|i| if i >= serving { i + 1 } else { i })
        .collect();
    let n_other = poisson(m_other, &mut rng).min(p.n_t as u64);
    let other_active: Vec<[f64; 2]> = (0..n_other).map(|_| gaussian(sigma_other, &mut rng)).collect();

    let fading_serving = fading(key.reflect, &mut rng);
    let fading_intra = (0..active.len() + other_active.len()).map(|_| fading(key.reflect, &mut rng)).collect();

    // Interfering parents, ring by ring so that enlarging the disk keeps the
    // inner rings' draws.
    let width = default_disk_radius(p, case).max(radius / MAX_RINGS as f64);
    let mut inner = 0.0f64;
    let mut ring = 0u64;
    while inner < radius {
        let outer = (inner + width).min(radius);
        let mut rng = key.stream(1 + ring);
        let area = std::f64::consts::PI * (outer * outer - inner * inner);
        let count = poisson(p.lambda_c * area, &mut rng);
        for _ in 0..count {
            let rho = (inner * inner + rng.random::<f64>() * (outer * outer - inner * inner)).sqrt();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            let center = [rho * phi.cos(), rho * phi.sin()];
            sink.parent(center);
            let n_dense = poisson(if case.is_double_variance() { p.m_a } else { m_tx }, &mut rng);
            for _ in 0..n_dense {
                let o = gaussian(p.sigma_a, &mut rng);
                sink.device(center, o, false, fading(key.reflect, &mut rng));
            }
            let n_sparse = if case.is_double_variance() { poisson(p.m_b, &mut rng) } else { 0 };
            for _ in 0..n_sparse {
                let o = gaussian(p.sigma_b, &mut rng);
                sink.device(center, o, true, fading(key.reflect, &mut rng));
            }
        }
        inner = outer;
        ring += 1;
    }

    ClusterRealization {
        parents: Vec::new(),
        rep_center,
        offsets_t,
        offsets_r,
        receiver,
        serving,
        active,
        other_active,
        fading_serving,
        fading_intra,
        fading_inter: Vec::new(),
    }
}

fn record(params: &SystemParams, case: &PlacementCase, radius: f64, key: TrialKey) -> ClusterRealization {
    let mut rec = Recorder::default();
    let mut out = realize(params, case, radius, key, &mut rec);
    out.parents = rec.parents;
    out.fading_inter = rec.fading;
    out
}

fn trial_succeeds(params: &SystemParams, case: &PlacementCase, radius: f64, key: TrialKey) -> bool {
    let mut inter = Interference::new(params);
    let rep = realize(params, case, radius, key, &mut inter);
    rep.sir_with(params, inter.total) > params.beta
}

fn checked(params: &SystemParams, case: &PlacementCase, cfg: &SimConfig) -> Result<(SystemParams, f64)> {
    let p = params.validate(case)?;
    cfg.validate()?;
    Ok((p, cfg.radius(&p, case)))
}

/// A realization drawn from `rng`.
pub fn generate_realization<R: Rng + ?Sized>(
    params: &SystemParams,
    case: PlacementCase,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<ClusterRealization> {
    let (p, radius) = checked(params, &case, cfg)?;
    let key = TrialKey { seed: rng.random(), index: 0, reflect: false };
    Ok(record(&p, &case, radius, key))
}

/// The realization used by trial `trial` of [`simulate_coverage`].
pub fn trial_realization(
    params: &SystemParams,
    case: PlacementCase,
    cfg: &SimConfig,
    trial: u64,
) -> Result<ClusterRealization> {
    let (p, radius) = checked(params, &case, cfg)?;
    Ok(record(&p, &case, radius, TrialKey::new(cfg, trial)))
}

/// SIR of trial `trial` of [`simulate_coverage`].
pub fn trial_sir(params: &SystemParams, case: PlacementCase, cfg: &SimConfig, trial: u64) -> Result<f64> {
    Ok(trial_realization(params, case, cfg, trial)?.sir(params))
}

/// Success counts over a set of trials. Merging is addition, so tallies of
/// disjoint trial ranges combine in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub trials: u64,
    pub successes: u64,
    /// Antithetic pairs with 0, 1 and 2 successes.
    pub pairs: [u64; 3],
}

impl Tally {
    pub fn merge(self, other: Tally) -> Tally {
        Tally {
            trials: self.trials + other.trials,
            successes: self.successes + other.successes,
            pairs: [self.pairs[0] + other.pairs[0], self.pairs[1] + other.pairs[1], self.pairs[2] + other.pairs[2]],
        }
    }

    pub fn estimate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    /// Binomial standard error, or the spread of pair means under
    /// antithetic sampling.
    pub fn std_error(&self) -> f64 {
        let n_pairs: u64 = self.pairs.iter().sum();
        if n_pairs == 0 {
            let p = self.estimate();
            return (p * (1.0 - p) / self.trials as f64).sqrt();
        }
        let n = n_pairs as f64;
        let mean = (0.5 * self.pairs[1] as f64 + self.pairs[2] as f64) / n;
        let second = (0.25 * self.pairs[1] as f64 + self.pairs[2] as f64) / n;
        let var = (second - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        (var / n).sqrt()
    }
}

/// Tally of trials `range`. With antithetic sampling the range must start
/// and end on pair boundaries.
pub fn simulate_range(
    case: PlacementCase,
    params: &SystemParams,
    cfg: &SimConfig,
    range: Range<u64>,
) -> Result<Tally> {
    let (p, radius) = checked(params, &case, cfg)?;
    let success = |t: u64| trial_succeeds(&p, &case, radius, TrialKey::new(cfg, t));
    let tally = if cfg.antithetic {
        debug_assert!(range.start % 2 == 0 && range.end % 2 == 0);
        (range.start / 2..range.end / 2)
            .into_par_iter()
            .map(|pair| {
                let k = success(2 * pair) as usize + success(2 * pair + 1) as usize;
                let mut pairs = [0; 3];
                pairs[k] = 1;
                Tally { trials: 2, successes: k as u64, pairs }
            })
            .reduce(Tally::default, Tally::merge)
    } else {
        range
            .into_par_iter()
            .map(|t| Tally { trials: 1, successes: success(t) as u64, pairs: [0; 3] })
            .reduce(Tally::default, Tally::merge)
    };
    Ok(tally)
}

/// Coverage estimated from `cfg.trials` independent trials.
pub fn simulate_coverage(case: PlacementCase, params: &SystemParams, cfg: &SimConfig) -> Result<CoverageEstimate> {
    let (p, radius) = checked(params, &case, cfg)?;
    let tally = simulate_range(case, &p, cfg, 0..cfg.trials)?;
    Ok(CoverageEstimate {
        value: tally.estimate(),
        method: Method::MonteCarlo,
        std_error: Some(tally.std_error()),
        meta: EstimateMeta::Simulation {
            trials: cfg.trials,
            seed: cfg.seed,
            disk_radius: radius,
            antithetic: cfg.antithetic,
            rng: RNG_NAME,
        },
    })
}
