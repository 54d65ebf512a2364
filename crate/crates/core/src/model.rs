//! Domain types shared by every evaluator.
//!
//! Lengths are meters and densities are per square meter everywhere inside the
//! crate. The only place a per-km² density or a dB threshold is accepted is at
//! construction ([`SystemParams::new`], [`SystemParams::with_beta_db`]), so the
//! conversion happens exactly once.

use std::fmt;

use thiserror::Error;

/// Square meters per square kilometer, as a density factor.
pub const PER_KM2_TO_PER_M2: f64 = 1e-6;

/// A violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("lambda_c must be positive (got {0} per m^2)")]
    Density(f64),
    #[error("sigma_a must be positive (got {0})")]
    SigmaA(f64),
    #[error("sigma_b must be at least sigma_a (got sigma_a={sigma_a}, sigma_b={sigma_b})")]
    SigmaB { sigma_a: f64, sigma_b: f64 },
    #[error("alpha must exceed 2 (got {0})")]
    Alpha(f64),
    #[error("beta must be positive (got {0})")]
    Beta(f64),
    #[error("n_t must be at least 1")]
    NumTx,
    #[error("n_r must be at least 1")]
    NumRx,
    #[error("m_a must lie in [1, n_t] (got m_a={m_a}, n_t={n_t})")]
    MeanActiveA { m_a: f64, n_t: u32 },
    #[error("m_b must be nonnegative (got {0})")]
    MeanActiveB(f64),
    #[error("serving subcluster needs at least one active device on average (got {0})")]
    ServingMean(f64),
    #[error("transmit power must be positive (got {0})")]
    Power(f64),
    #[error("rank exceeds N_t (k={k}, n_t={n_t})")]
    TxRank { k: u32, n_t: u32 },
    #[error("rank exceeds N_r (l={l}, n_r={n_r})")]
    RxRank { l: u32, n_r: u32 },
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("{0} is not finite")]
    NotFinite(&'static str),
    #[error("zipf library needs j_total >= n_t (got j_total={j_total}, n_t={n_t})")]
    LibrarySize { j_total: u32, n_t: u32 },
    #[error("zipf exponent must be nonnegative (got {0})")]
    ZipfExponent(f64),
}

/// Physical and statistical parameters of the clustered network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Cluster-center density, per m².
    pub lambda_c: f64,
    /// Scattering standard deviation of the (denser) subcluster, m.
    pub sigma_a: f64,
    /// Scattering standard deviation of the sparser subcluster, m.
    pub sigma_b: f64,
    /// Potential transmitters per cluster.
    pub n_t: u32,
    /// Potential receivers per cluster.
    pub n_r: u32,
    /// Mean number of simultaneously active transmitters, denser subcluster.
    pub m_a: f64,
    /// Mean number of simultaneously active transmitters, sparser subcluster.
    pub m_b: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// SIR threshold, linear.
    pub beta: f64,
    /// Transmit power. SIR does not depend on it; kept so the simulator can check that.
    pub p_d: f64,
}

impl SystemParams {
    /// Single-variance parameters with α = 4 and β = 0 dB.
    ///
    /// `lambda_c_per_km2` is converted to per-m² here.
    pub fn new(lambda_c_per_km2: f64, sigma_a: f64, n_t: u32, n_r: u32, m_a: f64) -> Self {
        Self {
            lambda_c: lambda_c_per_km2 * PER_KM2_TO_PER_M2,
            sigma_a,
            sigma_b: sigma_a,
            n_t,
            n_r,
            m_a,
            m_b: 0.0,
            alpha: 4.0,
            beta: 1.0,
            p_d: 1.0,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_beta_db(self, beta_db: f64) -> Self {
        self.with_beta(db_to_linear(beta_db))
    }

    pub fn with_m_a(mut self, m_a: f64) -> Self {
        self.m_a = m_a;
        self
    }

    pub fn with_n_t(mut self, n_t: u32) -> Self {
        self.n_t = n_t;
        self
    }

    pub fn with_n_r(mut self, n_r: u32) -> Self {
        self.n_r = n_r;
        self
    }

    /// Switches to the double-variance model.
    pub fn with_sparse(mut self, sigma_b: f64, m_b: f64) -> Self {
        self.sigma_b = sigma_b;
        self.m_b = m_b;
        self
    }

    pub fn with_power(mut self, p_d: f64) -> Self {
        self.p_d = p_d;
        self
    }

    pub fn lambda_c_per_km2(&self) -> f64 {
        self.lambda_c / PER_KM2_TO_PER_M2
    }

    pub fn beta_db(&self) -> f64 {
        linear_to_db(self.beta)
    }

    /// Checks every invariant for `case` and returns a copy of the parameters.
    pub fn validate(&self, case: &PlacementCase) -> Result<SystemParams, ParamError> {
        self.check_common()?;
        match *case {
            PlacementCase::KTx { k } => {
                check_rank(k)?;
                if k > self.n_t {
                    return Err(ParamError::TxRank { k, n_t: self.n_t });
                }
                self.check_dense_serving()?;
            }
            PlacementCase::LRx { l } => {
                check_rank(l)?;
                if l > self.n_r {
                    return Err(ParamError::RxRank { l, n_r: self.n_r });
                }
                self.check_dense_serving()?;
            }
            PlacementCase::Baseline => self.check_dense_serving()?,
            PlacementCase::DoubleVariance { tx_in_dense, .. } => {
                if self.m_b < 0.0 {
                    return Err(ParamError::MeanActiveB(self.m_b));
                }
                if tx_in_dense {
                    self.check_dense_serving()?;
                } else {
                    // The serving device comes from the sparse subcluster, so the
                    // roles of the two means swap.
                    if self.m_a < 0.0 || self.m_a > self.n_t as f64 {
                        return Err(ParamError::MeanActiveA { m_a: self.m_a, n_t: self.n_t });
                    }
                    if !(self.m_b >= 1.0 && self.m_b <= self.n_t as f64) {
                        return Err(ParamError::ServingMean(self.m_b));
                    }
                }
            }
        }
        Ok(*self)
    }

    fn check_common(&self) -> Result<(), ParamError> {
        let fields = [
            ("lambda_c", self.lambda_c),
            ("sigma_a", self.sigma_a),
            ("sigma_b", self.sigma_b),
            ("m_a", self.m_a),
            ("m_b", self.m_b),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("p_d", self.p_d),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(ParamError::NotFinite(name));
            }
        }
        if self.lambda_c <= 0.0 {
            return Err(ParamError::Density(self.lambda_c));
        }
        if self.sigma_a <= 0.0 {
            return Err(ParamError::SigmaA(self.sigma_a));
        }
        if self.sigma_b < self.sigma_a {
            return Err(ParamError::SigmaB { sigma_a: self.sigma_a, sigma_b: self.sigma_b });
        }
        if self.alpha <= 2.0 {
            return Err(ParamError::Alpha(self.alpha));
        }
        if self.beta <= 0.0 {
            return Err(ParamError::Beta(self.beta));
        }
        if self.n_t < 1 {
            return Err(ParamError::NumTx);
        }
        if self.n_r < 1 {
            return Err(ParamError::NumRx);
        }
        if self.m_b < 0.0 {
            return Err(ParamError::MeanActiveB(self.m_b));
        }
        if self.p_d <= 0.0 {
            return Err(ParamError::Power(self.p_d));
        }
        Ok(())
    }

    fn check_dense_serving(&self) -> Result<(), ParamError> {
        if !(self.m_a >= 1.0 && self.m_a <= self.n_t as f64) {
            return Err(ParamError::MeanActiveA { m_a: self.m_a, n_t: self.n_t });
        }
        Ok(())
    }
}

fn check_rank(rank: u32) -> Result<(), ParamError> {
    if rank == 0 {
        Err(ParamError::ZeroRank)
    } else {
        Ok(())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Which serving/receiving device selection rule is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlacementCase {
    /// Receiver uniform, serving device is the k-th closest transmitter to the center.
    KTx { k: u32 },
    /// Receiver is the ℓ-th closest receiver to the center, serving device uniform.
    LRx { l: u32 },
    /// Both chosen uniformly.
    Baseline,
    /// Double-variance cluster; flags say which subcluster the receiver and serving device come from.
    DoubleVariance { rx_in_dense: bool, tx_in_dense: bool },
}

impl PlacementCase {
    pub fn rank(&self) -> Option<u32> {
        match *self {
            PlacementCase::KTx { k } => Some(k),
            PlacementCase::LRx { l } => Some(l),
            _ => None,
        }
    }

    pub fn is_double_variance(&self) -> bool {
        matches!(self, PlacementCase::DoubleVariance { .. })
    }
}

impl fmt::Display for PlacementCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PlacementCase::KTx { k } => write!(f, "ktx(k={k})"),
            PlacementCase::LRx { l } => write!(f, "lrx(l={l})"),
            PlacementCase::Baseline => f.write_str("baseline"),
            PlacementCase::DoubleVariance { rx_in_dense, tx_in_dense } => {
                let s = |dense: bool| if dense { "dense" } else { "sparse" };
                write!(f, "double(rx={},tx={})", s(rx_in_dense), s(tx_in_dense))
            }
        }
    }
}

/// Distances describing one link geometry, all in meters.
///
/// Fields that do not apply to a case are `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Geometry {
    /// Receiver of interest to its cluster center.
    pub nu0: f64,
    /// Serving transmitter to the cluster center.
    pub t_k: Option<f64>,
    /// Receiver of interest to the cluster center when it is ranked (ℓ-Rx).
    pub t_l: Option<f64>,
    /// Serving-link distance.
    pub r: f64,
    /// Intra-cluster interferer to receiver distances.
    pub w: Vec<f64>,
    /// Inter-cluster interferer to receiver distances.
    pub u: Vec<f64>,
}

impl Geometry {
    pub fn is_valid(&self) -> bool {
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        nonneg(self.nu0)
            && nonneg(self.r)
            && self.t_k.map_or(true, nonneg)
            && self.t_l.map_or(true, nonneg)
            && self.w.iter().copied().all(nonneg)
            && self.u.iter().copied().all(nonneg)
    }
}

/// A content library with Zipf popularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipfLibrary {
    pub j_total: u32,
    pub gamma: f64,
}

impl ZipfLibrary {
    pub fn new(j_total: u32, gamma: f64) -> Result<Self, ParamError> {
        if !gamma.is_finite() {
            return Err(ParamError::NotFinite("gamma"));
        }
        if gamma < 0.0 {
            return Err(ParamError::ZipfExponent(gamma));
        }
        if j_total == 0 {
            return Err(ParamError::ZeroRank);
        }
        Ok(Self { j_total, gamma })
    }

    /// Checks that every transmitter can hold a distinct file.
    pub fn check_fits(&self, params: &SystemParams) -> Result<(), ParamError> {
        if self.j_total < params.n_t {
            return Err(ParamError::LibrarySize { j_total: self.j_total, n_t: params.n_t });
        }
        Ok(())
    }

    /// Σ_{i=1..J} i^{-γ}.
    pub fn normalizer(&self) -> f64 {
        (1..=self.j_total).map(|i| (i as f64).powf(-self.gamma)).sum()
    }
}
