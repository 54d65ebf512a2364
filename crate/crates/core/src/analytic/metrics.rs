use std::ops::RangeInclusive;

use crate::dist::zipf_pmf;
use crate::model::{PlacementCase, SystemParams, ZipfLibrary};
use crate::{Error, Result};

use super::{CoverageEngine, CoverageEstimate, EngineConfig};

/// Area spectral efficiency in bits/s/Hz/m²: active transmitters per unit
/// area times the rate each achieves when covered.
pub fn ase(pc: &CoverageEstimate, params: &SystemParams) -> f64 {
    (params.m_a + params.m_b) * params.lambda_c * (1.0 + params.beta).log2() * pc.value
}

/// Result of [`optimize_ase`].
#[derive(Debug, Clone, PartialEq)]
pub struct AseOptimum {
    pub m_a: u32,
    pub ase: f64,
    /// `(m_a, ASE)` at every point scanned.
    pub curve: Vec<(u32, f64)>,
}

/// Exhaustive scan of ASE over integer `m_a` in `m_range`; ties go to the
/// smaller `m_a`.
pub fn optimize_ase(case: PlacementCase, params: &SystemParams, m_range: RangeInclusive<u32>) -> Result<AseOptimum> {
    if m_range.is_empty() {
        return Err(Error::EmptyRange);
    }
    let mut engine: Option<CoverageEngine> = None;
    let mut curve = Vec::new();
    for m in m_range {
        let p = params.with_m_a(m as f64).validate(&case)?;
        let e = match &engine {
            Some(prev) => prev.rebind(p)?,
            None => CoverageEngine::new(p, EngineConfig::default())?,
        };
        let pc = e.coverage(case)?;
        curve.push((m, ase(&pc, &p)));
        engine = Some(e);
    }
    let (m_a, best) = curve
        .iter()
        .copied()
        .fold((0, f64::NEG_INFINITY), |(bm, bv), (m, v)| if v > bv { (m, v) } else { (bm, bv) });
    Ok(AseOptimum { m_a, ase: best, curve })
}

fn checked_library(params: &SystemParams, lib: &ZipfLibrary) -> Result<SystemParams> {
    let p = params.validate(&PlacementCase::Baseline)?;
    lib.check_fits(&p)?;
    Ok(p)
}

/// Hit probability when the cached files are spread uniformly over the
/// cluster's transmitters.
pub fn hit_uniform(params: &SystemParams, lib: &ZipfLibrary) -> Result<f64> {
    let p = checked_library(params, lib)?;
    CoverageEngine::new(p, EngineConfig::default())?.hit_uniform(lib)
}

/// Hit probability when the j-th most popular file sits at the j-th closest
/// transmitter to the cluster center.
pub fn hit_cluster_centric(params: &SystemParams, lib: &ZipfLibrary) -> Result<f64> {
    let p = checked_library(params, lib)?;
    CoverageEngine::new(p, EngineConfig::default())?.hit_cluster_centric(lib)
}

impl CoverageEngine {
    /// Probability the requested file is cached in the cluster at all.
    fn cached_mass(&self, lib: &ZipfLibrary) -> Result<f64> {
        checked_library(self.params(), lib)?;
        let mut total = 0.0;
        for j in 1..=self.params().n_t {
            total += zipf_pmf(j, lib)?;
        }
        Ok(total)
    }

    pub fn hit_uniform(&self, lib: &ZipfLibrary) -> Result<f64> {
        Ok(self.cached_mass(lib)? * self.baseline()?.value)
    }

    pub fn hit_cluster_centric(&self, lib: &ZipfLibrary) -> Result<f64> {
        checked_library(self.params(), lib)?;
        let mut total = 0.0;
        for j in 1..=self.params().n_t {
            total += zipf_pmf(j, lib)? * self.ktx_approx(j)?.value;
        }
        Ok(total)
    }
}
