//! Batch front-end for `clustercache`: parses run configurations, executes
//! sweeps and canned figure reproductions, and writes versioned CSV.

pub mod config;
pub mod figures;
pub mod output;
pub mod sweep;

pub use config::{Config, ConfigError};
pub use figures::{reproduce_figure, Check, FigureOptions, FigureRun, FIGURES};
pub use sweep::{run_sweep, run_tasks, Axis, CaseKind, MethodSel, Metric, Row, SweepSpec};

/// Version recorded in every output row.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Exit {
    Success = 0,
    Validation = 1,
    NonConvergence = 2,
    Assertion = 3,
}

/// Exit status implied by the row outcomes alone.
pub fn rows_exit(rows: &[Row]) -> Exit {
    rows.iter()
        .filter_map(|r| r.outcome.as_ref().err())
        .map(|e| if e.is_nonconvergence() { Exit::NonConvergence } else { Exit::Validation })
        .max()
        .unwrap_or(Exit::Success)
}
