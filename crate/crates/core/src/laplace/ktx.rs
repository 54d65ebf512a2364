//! Weights of the (n, l) lattice in the exact k-Tx intra-cluster transform.

use crate::dist::{ln_binomial, poisson_pmf, reg_inc_beta};
use crate::model::ParamError;
use crate::Result;

use super::truncation_mass;

/// One term: `n` active interferers of which `l` lie nearer the cluster
/// center than the serving device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KTxTerm {
    pub n: u32,
    pub l: u32,
    /// `min(n, k - 1)`.
    pub g_m: u32,
    /// `P(L = l | L ≤ g_m) · P(N = n | N ≤ N_t - 1)`.
    pub weight: f64,
}

/// The binomial × truncated-Poisson weights of the exact k-Tx transform.
#[derive(Debug, Clone)]
pub struct KTxCombinatorics {
    /// `(k - 1)/(N_t - 1)`, the chance a given other device is nearer the
    /// center than the serving one.
    pub p: f64,
    /// Truncated-Poisson normalizer.
    pub xi: f64,
    pub k: u32,
    pub terms: Vec<KTxTerm>,
}

/// Stop adding terms once this much probability weight is covered.
const WEIGHT_COVERAGE: f64 = 1.0 - 1e-8;

impl KTxCombinatorics {
    /// Weights for rank `k`, truncated in `n` once the kept terms carry all
    /// but 1e-8 of the probability.
    pub fn new(k: u32, n_t: u32, m_a: f64) -> Result<Self> {
        Self::build(k, n_t, m_a, WEIGHT_COVERAGE)
    }

    /// Every term of the lattice, with no truncation in `n`.
    pub fn full(k: u32, n_t: u32, m_a: f64) -> Result<Self> {
        Self::build(k, n_t, m_a, f64::INFINITY)
    }

    fn build(k: u32, n_t: u32, m_a: f64, coverage: f64) -> Result<Self> {
        if k == 0 {
            return Err(ParamError::ZeroRank.into());
        }
        if k > n_t {
            return Err(ParamError::TxRank { k, n_t }.into());
        }
        let mean = (m_a - 1.0).max(0.0);
        let xi = truncation_mass(mean, n_t);
        let p = if n_t > 1 { (k - 1) as f64 / (n_t - 1) as f64 } else { 0.0 };

        let mut terms = Vec::new();
        let mut covered = 0.0;
        for n in 0..n_t {
            let pn = poisson_pmf(n as u64, mean) / xi;
            let g_m = n.min(k - 1);
            let norm = if g_m >= n { 1.0 } else { reg_inc_beta(1.0 - p, (n - g_m) as f64, (1 + g_m) as f64)? };
            for l in 0..=g_m {
                let weight = binomial_pmf(n, l, p) / norm * pn;
                if weight > 0.0 {
                    terms.push(KTxTerm { n, l, g_m, weight });
                }
            }
            covered += pn;
            if covered >= coverage {
                break;
            }
        }
        Ok(Self { p, xi, k, terms })
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// `Σ weight · M_in^l · M_out^{n - l}`, divided by the kept weight so
    /// that truncation in `n` still leaves a proper mixture.
    pub fn evaluate(&self, m_in: f64, m_out: f64) -> f64 {
        let sum: f64 = self
            .terms
            .iter()
            .map(|t| t.weight * m_in.powi(t.l as i32) * m_out.powi((t.n - t.l) as i32))
            .sum();
        sum / self.total_weight()
    }
}

fn binomial_pmf(n: u32, l: u32, p: f64) -> f64 {
    if p == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if l == n { 1.0 } else { 0.0 };
    }
    let (n64, l64) = (n as u64, l as u64);
    (ln_binomial(n64, l64) + l as f64 * p.ln() + (n - l) as f64 * (-p).ln_1p()).exp()
}
