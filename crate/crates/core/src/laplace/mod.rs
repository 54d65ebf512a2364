//! Laplace transforms `E[exp(-s I)]` of intra- and inter-cluster interference.
//!
//! All transforms are assembled from one building block, the mean of the
//! kernel `s / (s + w^α)` against a distance density. That mean is the
//! probability a unit-mean exponential fade is beaten by the interferer's
//! path gain, and is called the *complement* below: for a distance `w` the
//! per-interferer transform is `1 - s/(s + w^α) = 1/(1 + s w^{-α})`.

mod ktx;

use crate::dist::{
    poisson_cdf, poisson_pmf, rice_pdf_unchecked, triangle_mean, truncated_rayleigh_pdf, DomainError, Side,
};
use crate::model::SystemParams;
use crate::quad::{integrate_tail, integrate_with_breaks, Tolerance};
use crate::{Error, Result};

pub use ktx::{KTxCombinatorics, KTxTerm};

/// Gaussian and Rayleigh envelopes are cut this many standard deviations
/// from their center, where they fall below 1e-12 of their peak.
pub const ENVELOPE_SIGMAS: f64 = 8.0;

/// How the intra-cluster transform conditioned on ν₀ sums over the number of
/// active interferers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum IntraMode {
    /// The truncated Poisson power sum, exact for the uniform serving choice.
    #[default]
    ExactSum,
    /// `exp(-(m̄ - 1)(1 - M))`, which drops the truncation of the Poisson
    /// count. Accurate when `m̄ ≪ N_t`.
    ExpApprox,
}

impl IntraMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntraMode::ExactSum => "exact_sum",
            IntraMode::ExpApprox => "exp_approx",
        }
    }
}

/// `s / (s + w^α)`, the probability that an interferer at distance `w` pushes
/// a unit-mean exponential fade below `s w^{-α}`.
#[inline]
pub fn interference_kernel(s: f64, w: f64, alpha: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let wa = if alpha == 4.0 {
        let w2 = w * w;
        w2 * w2
    } else {
        w.powf(alpha)
    };
    s / (s + wa)
}

/// `ξ`: probability that a Poisson(`mean`) count does not exceed `n_t - 1`.
pub fn truncation_mass(mean: f64, n_t: u32) -> f64 {
    poisson_cdf(n_t.saturating_sub(1) as u64, mean.max(0.0))
}

fn check_s(s: f64) -> Result<()> {
    if !(s >= 0.0) || s.is_infinite() {
        return Err(DomainError::new("laplace", "s must be finite and nonnegative").into());
    }
    Ok(())
}

/// Evaluators for every transform at one validated parameter set.
#[derive(Debug, Clone, Copy)]
pub struct Transforms<'a> {
    params: &'a SystemParams,
    tol: Tolerance,
}

impl<'a> Transforms<'a> {
    pub fn new(params: &'a SystemParams) -> Self {
        Self { params, tol: Tolerance::default() }
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn params(&self) -> &SystemParams {
        self.params
    }

    pub fn tolerance(&self) -> &Tolerance {
        &self.tol
    }

    /// `∫ s/(s + w^α) Rice(w; nu, σ) dw`.
    pub fn rice_complement(&self, s: f64, nu: f64, sigma: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        let alpha = self.params.alpha;
        let lo = (nu - ENVELOPE_SIGMAS * sigma).max(0.0);
        let hi = nu + ENVELOPE_SIGMAS * sigma;
        let knee = s.powf(1.0 / alpha);
        let mut breaks = vec![lo];
        if nu > lo && nu < hi {
            breaks.push(nu);
        }
        if knee > lo && knee < hi {
            breaks.push(knee);
        }
        breaks.push(hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut f = |w: f64| interference_kernel(s, w, alpha) * rice_pdf_unchecked(w, nu, sigma);
        Ok(integrate_with_breaks(&mut f, &breaks, &self.tol)?)
    }

    /// `M(w | ν₀) = ∫ 1/(1 + s w^{-α}) Rice(w; ν₀, σ_a) dw`, computed by direct
    /// quadrature of its own integrand.
    pub fn rice_mean_direct(&self, s: f64, nu0: f64) -> Result<f64> {
        let sigma = self.params.sigma_a;
        let alpha = self.params.alpha;
        let lo = (nu0 - ENVELOPE_SIGMAS * sigma).max(0.0);
        let hi = nu0 + ENVELOPE_SIGMAS * sigma;
        let mut f = |w: f64| (1.0 - interference_kernel(s, w, alpha)) * rice_pdf_unchecked(w, nu0, sigma);
        let mut breaks = vec![lo, hi];
        if nu0 > lo {
            breaks.insert(1, nu0);
        }
        Ok(integrate_with_breaks(&mut f, &breaks, &self.tol)?)
    }

    /// Intra-cluster transform conditioned on ν₀ for a uniformly chosen
    /// serving device.
    pub fn intra_conditional(&self, s: f64, nu0: f64, mode: IntraMode) -> Result<f64> {
        check_s(s)?;
        let p = self.params;
        let mean = p.m_a - 1.0;
        let c = self.rice_complement(s, nu0, p.sigma_a)?;
        Ok(intra_sum(1.0 - c, c, mean, p.n_t, mode))
    }

    /// Intra-cluster transform with the interferer distances treated as
    /// i.i.d. Rayleigh of scale `√2 σ_a`, ignoring their common dependence
    /// on ν₀.
    pub fn intra_uncorrelated(&self, s: f64) -> Result<f64> {
        check_s(s)?;
        let p = self.params;
        let mean = p.m_a - 1.0;
        let c = self.rice_complement(s, 0.0, std::f64::consts::SQRT_2 * p.sigma_a)?;
        Ok((-mean * c).exp())
    }

    /// Inner and outer per-interferer transforms `(M_in, M_out)` for the
    /// k-Tx case at serving-device distance `t_k` from the cluster center.
    pub fn ktx_moments(&self, s: f64, nu0: f64, t_k: f64) -> Result<(f64, f64)> {
        check_s(s)?;
        if s == 0.0 {
            return Ok((1.0, 1.0));
        }
        let p = self.params;
        let (sigma, alpha) = (p.sigma_a, p.alpha);
        let tol = self.tol;
        let ring = |t: f64, side: Side| -> f64 {
            let density = truncated_rayleigh_pdf(t, t_k, side, sigma);
            if density == 0.0 {
                return 0.0;
            }
            // Quadrature failures inside an outer integrand are surfaced as
            // NaN, which the outer rule reports as non-finite.
            match triangle_mean(|w| interference_kernel(s, w, alpha), nu0, t, &tol) {
                Ok(v) => v * density,
                Err(_) => f64::NAN,
            }
        };
        let c_in = if t_k > 0.0 {
            let mut f = |t: f64| ring(t, Side::Inner);
            let mut breaks = vec![0.0, t_k];
            if nu0 > 0.0 && nu0 < t_k {
                breaks.insert(1, nu0);
            }
            integrate_with_breaks(&mut f, &breaks, &tol)?
        } else {
            0.0
        };
        let hi = (t_k * t_k + (ENVELOPE_SIGMAS * sigma).powi(2)).sqrt();
        let mut f = |t: f64| ring(t, Side::Outer);
        let mut breaks = vec![t_k, hi];
        if nu0 > t_k && nu0 < hi {
            breaks.insert(1, nu0);
        }
        let c_out = integrate_with_breaks(&mut f, &breaks, &tol)?;
        Ok((1.0 - c_in, 1.0 - c_out))
    }

    /// Exact k-Tx intra-cluster transform, conditioned on ν₀ and on the
    /// serving device's distance `t_k` from the cluster center.
    pub fn intra_ktx_exact(&self, s: f64, nu0: f64, t_k: f64, comb: &KTxCombinatorics) -> Result<f64> {
        let (m_in, m_out) = self.ktx_moments(s, nu0, t_k)?;
        Ok(comb.evaluate(m_in, m_out))
    }

    /// Intra-cluster transform of the double-variance model, serving device
    /// drawn from the dense subcluster.
    pub fn intra_double(&self, s: f64, nu0: f64) -> Result<f64> {
        check_s(s)?;
        let p = self.params;
        if p.m_a < 1.0 {
            return Err(Error::Unsupported("the serving device must come from the dense subcluster"));
        }
        let c_a = self.rice_complement(s, nu0, p.sigma_a)?;
        let c_b = if p.m_b > 0.0 { self.rice_complement(s, nu0, p.sigma_b)? } else { 0.0 };
        Ok((-(p.m_a - 1.0) * c_a - p.m_b * c_b).exp())
    }

    /// Inter-cluster transform of the single-variance model.
    pub fn inter(&self, s: f64) -> Result<f64> {
        check_s(s)?;
        self.pgfl(s, &[(self.params.m_a, self.params.sigma_a)])
    }

    /// Inter-cluster transform of the double-variance model.
    pub fn inter_double(&self, s: f64) -> Result<f64> {
        check_s(s)?;
        let p = self.params;
        self.pgfl(s, &[(p.m_a, p.sigma_a), (p.m_b, p.sigma_b)])
    }

    /// `exp(-2πλ_c ∫ (1 - exp(-Σ m_i C_i(ν))) ν dν)` over clusters whose
    /// devices scatter with the given `(mean, σ)` kernels.
    fn pgfl(&self, s: f64, kernels: &[(f64, f64)]) -> Result<f64> {
        let kernels: Vec<(f64, f64)> = kernels.iter().copied().filter(|&(m, _)| m > 0.0).collect();
        if s == 0.0 || kernels.is_empty() {
            return Ok(1.0);
        }
        let lambda = self.params.lambda_c;
        let sigma_max = kernels.iter().map(|&(_, sg)| sg).fold(0.0, f64::max);
        let knee = s.powf(1.0 / self.params.alpha);
        let spacing = 5.0 / (std::f64::consts::PI * lambda).sqrt();
        let v = (10.0 * sigma_max + spacing).max(knee + 10.0 * sigma_max);

        let mut failure = None;
        let mut integrand = |nu: f64| -> f64 {
            let mut exponent = 0.0;
            for &(m, sg) in &kernels {
                match self.rice_complement(s, nu, sg) {
                    Ok(c) => exponent += m * c,
                    Err(e) => {
                        failure.get_or_insert(e);
                        return 0.0;
                    }
                }
            }
            -(-exponent).exp_m1() * nu
        };
        let mut breaks = vec![0.0];
        if knee < v {
            breaks.push(knee);
        }
        breaks.push(v);
        let body = integrate_with_breaks(&mut integrand, &breaks, &self.tol)?;
        let tail = integrate_tail(&mut integrand, v, &self.tol)?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok((-2.0 * std::f64::consts::PI * lambda * (body + tail)).exp())
    }
}

/// Sum over the truncated Poisson number of intra-cluster interferers, given
/// the per-interferer transform `m` and its complement `c = 1 - m`.
pub(crate) fn intra_sum(m: f64, c: f64, mean: f64, n_t: u32, mode: IntraMode) -> f64 {
    match mode {
        IntraMode::ExpApprox => (-mean * c).exp(),
        IntraMode::ExactSum => {
            if mean <= 0.0 {
                return 1.0;
            }
            let mut total = 0.0;
            let mut pow = 1.0;
            for n in 0..n_t as u64 {
                total += pow * poisson_pmf(n, mean);
                pow *= m;
                if pow < 1e-300 {
                    break;
                }
            }
            total / truncation_mass(mean, n_t)
        }
    }
}

/// Precomputed truncated-Poisson weights for repeated [`IntraMode::ExactSum`]
/// evaluations at one parameter set.
#[derive(Debug, Clone)]
pub struct IntraWeights {
    weights: Vec<f64>,
    mean: f64,
    mode: IntraMode,
}

impl IntraWeights {
    pub fn new(mean: f64, n_t: u32, mode: IntraMode) -> Self {
        let xi = truncation_mass(mean, n_t);
        let mut weights = Vec::new();
        if mode == IntraMode::ExactSum && mean > 0.0 {
            let mut acc = 0.0;
            for n in 0..n_t as u64 {
                let w = poisson_pmf(n, mean) / xi;
                weights.push(w);
                acc += w;
                if n as f64 > mean && 1.0 - acc < 1e-16 {
                    break;
                }
            }
        }
        Self { weights, mean, mode }
    }

    /// Transform value from the per-interferer complement `c`.
    pub fn apply(&self, c: f64) -> f64 {
        match self.mode {
            IntraMode::ExpApprox => (-self.mean * c).exp(),
            IntraMode::ExactSum => {
                if self.weights.is_empty() {
                    return 1.0;
                }
                let m = 1.0 - c;
                // Horner from the top.
                self.weights.iter().rev().fold(0.0, |acc, &w| acc * m + w)
            }
        }
    }
}

/// k-Tx intra-cluster transform (exact), conditioned on ν₀ and `t_k`.
pub fn intra_ktx_exact(s: f64, nu0: f64, t_k: f64, k: u32, params: &SystemParams) -> Result<f64> {
    check_s(s)?;
    if !(nu0 >= 0.0 && t_k >= 0.0) {
        return Err(DomainError::new("intra_ktx_exact", "distances must be nonnegative").into());
    }
    let comb = KTxCombinatorics::new(k, params.n_t, params.m_a)?;
    Transforms::new(params).intra_ktx_exact(s, nu0, t_k, &comb)
}

/// Intra-cluster transform conditioned on ν₀ (ℓ-Rx and baseline cases).
pub fn intra_conditional(s: f64, nu0: f64, params: &SystemParams, mode: IntraMode) -> Result<f64> {
    if !(nu0 >= 0.0) {
        return Err(DomainError::new("intra_conditional", "nu0 must be nonnegative").into());
    }
    Transforms::new(params).intra_conditional(s, nu0, mode)
}

/// Intra-cluster transform with uncorrelated Rayleigh interferer distances.
pub fn intra_uncorrelated(s: f64, params: &SystemParams) -> Result<f64> {
    Transforms::new(params).intra_uncorrelated(s)
}

/// Inter-cluster transform, single-variance model.
pub fn inter(s: f64, params: &SystemParams) -> Result<f64> {
    Transforms::new(params).inter(s)
}

/// Intra-cluster transform of the double-variance model conditioned on ν₀.
pub fn intra_double(s: f64, nu0: f64, params: &SystemParams) -> Result<f64> {
    if !(nu0 >= 0.0) {
        return Err(DomainError::new("intra_double", "nu0 must be nonnegative").into());
    }
    Transforms::new(params).intra_double(s, nu0)
}

/// Inter-cluster transform of the double-variance model.
pub fn inter_double(s: f64, params: &SystemParams) -> Result<f64> {
    Transforms::new(params).inter_double(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlacementCase;
    use approx::assert_relative_eq;

    fn params(m_a: f64, n_t: u32) -> SystemParams {
        SystemParams::new(50.0, 30.0, n_t, n_t, m_a).validate(&PlacementCase::Baseline).unwrap()
    }

    #[test]
    fn kernel_limits() {
        assert_eq!(interference_kernel(0.0, 0.0, 4.0), 0.0);
        assert_eq!(interference_kernel(2.0, 0.0, 4.0), 1.0);
        assert_relative_eq!(interference_kernel(16.0, 2.0, 4.0), 0.5);
        assert_relative_eq!(interference_kernel(8.0, 2.0, 3.0), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn complement_forms_add_to_one() {
        let p = params(5.0, 40);
        let tr = Transforms::new(&p).with_tolerance(Tolerance::new(1e-11, 1e-15));
        for (s, nu0) in [(1e3, 10.0), (2.56e6, 30.0), (1e9, 80.0)] {
            let c = tr.rice_complement(s, nu0, p.sigma_a).unwrap();
            let m = tr.rice_mean_direct(s, nu0).unwrap();
            assert!((c + m - 1.0).abs() < 1e-9, "s={s} nu0={nu0}: {c} + {m}");
        }
    }

    #[test]
    fn transforms_are_one_at_zero() {
        let p = params(5.0, 40);
        let tr = Transforms::new(&p);
        assert_eq!(tr.inter(0.0).unwrap(), 1.0);
        assert_eq!(tr.inter_double(0.0).unwrap(), 1.0);
        assert_relative_eq!(tr.intra_conditional(0.0, 20.0, IntraMode::ExactSum).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(tr.intra_conditional(0.0, 20.0, IntraMode::ExpApprox).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(tr.intra_uncorrelated(0.0).unwrap(), 1.0, max_relative = 1e-12);
        assert_eq!(tr.intra_double(0.0, 20.0).unwrap(), 1.0);
        let comb = KTxCombinatorics::new(3, 40, 5.0).unwrap();
        assert_relative_eq!(tr.intra_ktx_exact(0.0, 20.0, 10.0, &comb).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn single_active_device_sees_no_intra_interference() {
        let p = params(1.0, 40);
        let tr = Transforms::new(&p);
        for s in [1e2, 1e6, 1e10] {
            assert_eq!(tr.intra_conditional(s, 20.0, IntraMode::ExactSum).unwrap(), 1.0);
            assert_eq!(tr.intra_conditional(s, 20.0, IntraMode::ExpApprox).unwrap(), 1.0);
            assert_eq!(tr.intra_uncorrelated(s).unwrap(), 1.0);
            let comb = KTxCombinatorics::new(4, 40, 1.0).unwrap();
            assert_eq!(tr.intra_ktx_exact(s, 20.0, 15.0, &comb).unwrap(), 1.0);
        }
    }

    #[test]
    fn exact_sum_and_exponential_form_are_close() {
        let p = params(5.0, 40);
        let tr = Transforms::new(&p);
        for s in [1e4, 2.56e6, 1e8] {
            for nu0 in [5.0, 30.0, 70.0] {
                let a = tr.intra_conditional(s, nu0, IntraMode::ExactSum).unwrap();
                let b = tr.intra_conditional(s, nu0, IntraMode::ExpApprox).unwrap();
                assert!((a - b).abs() < 1e-3, "s={s} nu0={nu0}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn intra_weights_match_direct_sum() {
        let p = params(6.0, 30);
        let tr = Transforms::new(&p);
        for mode in [IntraMode::ExactSum, IntraMode::ExpApprox] {
            let weights = IntraWeights::new(p.m_a - 1.0, p.n_t, mode);
            for s in [1e3, 1e6, 1e9] {
                let c = tr.rice_complement(s, 25.0, p.sigma_a).unwrap();
                let direct = tr.intra_conditional(s, 25.0, mode).unwrap();
                assert_relative_eq!(weights.apply(c), direct, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn inter_vanishes_without_clusters() {
        let mut p = params(5.0, 40);
        p.lambda_c = 1e-30;
        let tr = Transforms::new(&p);
        for s in [1.0, 1e6, 1e12] {
            assert_relative_eq!(tr.inter(s).unwrap(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_variance_is_double_variance_without_sparse_devices() {
        let p = params(5.0, 40).with_sparse(60.0, 0.0);
        let tr = Transforms::new(&p);
        for s in [1e2, 2.56e6, 1e10] {
            let a = tr.inter(s).unwrap();
            let b = tr.inter_double(s).unwrap();
            assert!((a - b).abs() <= 1e-12, "s={s}: {a} vs {b}");
        }
    }

    #[test]
    fn equal_spreads_add_means() {
        let p = params(3.0, 40).with_sparse(30.0, 2.0);
        let q = params(5.0, 40);
        for s in [1e3, 2.56e6, 1e9] {
            let a = Transforms::new(&p).inter_double(s).unwrap();
            let b = Transforms::new(&q).inter(s).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
        let none = params(1.0, 40).with_sparse(30.0, 0.0);
        let mut none = none;
        none.m_a = 0.0;
        assert_eq!(Transforms::new(&none).inter_double(1e6).unwrap(), 1.0);
    }

    #[test]
    fn double_reduces_to_exponential_form() {
        let p = params(5.0, 500).with_sparse(30.0, 0.0);
        let tr = Transforms::new(&p);
        for s in [1e4, 2.56e6, 1e8] {
            let a = tr.intra_double(s, 30.0).unwrap();
            let b = tr.intra_conditional(s, 30.0, IntraMode::ExpApprox).unwrap();
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_negative_s() {
        let p = params(5.0, 40);
        assert!(inter(-1.0, &p).is_err());
        assert!(intra_conditional(f64::NAN, 1.0, &p, IntraMode::ExactSum).is_err());
        assert!(intra_ktx_exact(1.0, 1.0, 1.0, 41, &p).is_err());
    }
}
