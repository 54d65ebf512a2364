//! Coverage probability, area spectral efficiency and content hit probability
//! for cache-enabled device-to-device networks whose devices form a Thomas
//! cluster process, together with a Monte Carlo simulator of the same model.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: parameters, placement cases and validation.
//! - [`dist`]: distance densities and special functions.
//! - [`laplace`]: Laplace transforms of intra- and inter-cluster interference.
//! - [`analytic`]: coverage integrals, spectral efficiency and hit probability.
//! - [`montecarlo`]: direct simulation of the point process and SIR.
//! - [`checks`]: goodness-of-fit helpers shared by tests and the self-test.
//!
//! ```
//! use clustercache::analytic::coverage_baseline;
//! use clustercache::model::{PlacementCase, SystemParams};
//!
//! let params = SystemParams::new(50.0, 30.0, 40, 40, 4.0)
//!     .validate(&PlacementCase::Baseline)
//!     .unwrap();
//! let pc = coverage_baseline(&params).unwrap();
//! assert!(pc.value > 0.0 && pc.value < 1.0);
//! ```

use thiserror::Error;

pub mod analytic;
pub mod checks;
pub mod dist;
pub mod laplace;
pub mod model;
pub mod montecarlo;
pub mod quad;

pub use analytic::{CoverageEngine, CoverageEstimate, Method};
pub use model::{PlacementCase, SystemParams, ZipfLibrary};

/// Any failure raised by an evaluator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Param(#[from] model::ParamError),
    #[error(transparent)]
    Domain(#[from] dist::DomainError),
    #[error(transparent)]
    Quadrature(#[from] quad::QuadError),
    #[error(transparent)]
    Simulation(#[from] montecarlo::SimError),
    #[error("quasi-Monte Carlo estimate still moved by {change:e} after {points} points")]
    QmcNonConvergence { points: u64, change: f64 },
    #[error("{0}")]
    Unsupported(&'static str),
    #[error("empty search range")]
    EmptyRange,
}

impl Error {
    /// True for failures of a numerical method rather than of the inputs.
    pub fn is_nonconvergence(&self) -> bool {
        matches!(self, Error::Quadrature(_) | Error::QmcNonConvergence { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/distances.md")]
    mod distances {}
    #[doc = include_str!("../../../book/src/interference.md")]
    mod interference {}
    #[doc = include_str!("../../../book/src/coverage.md")]
    mod coverage {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/caching.md")]
    mod caching {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
