//! CSV rendering and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use clustercache::analytic::EstimateMeta;
use clustercache::laplace::ENVELOPE_SIGMAS;
use clustercache::montecarlo::RNG_NAME;
use clustercache::PlacementCase;

use crate::sweep::Row;

/// Bumped whenever columns are added, removed or reordered.
pub const SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: &[&str] = &[
    "schema",
    "version",
    "curve",
    "axis",
    "x",
    "case",
    "rank",
    "rx_in_dense",
    "tx_in_dense",
    "lambda_c",
    "sigma_a",
    "sigma_b",
    "n_t",
    "n_r",
    "m_a",
    "m_b",
    "alpha",
    "beta_db",
    "j_total",
    "gamma",
    "metric",
    "method",
    "estimator",
    "value",
    "std_error",
    "status",
    "error",
    "seed",
    "trials",
    "disk_radius",
    "antithetic",
    "rng",
    "qmc_points",
    "qmc_seed",
    "qmc_change",
    "quad_rel_tol",
    "quad_abs_tol",
    "truncation_sigmas",
    "intra_mode",
];

/// `x` with nine significant digits: fixed notation for moderate
/// magnitudes, scientific otherwise.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("exponent");
    if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, x)
    } else {
        sci
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

/// The CSV line for `row`, without the trailing newline.
pub fn csv_line(row: &Row) -> String {
    let t = &row.task;
    let p = &t.params;
    let (rank, rx, tx) = match t.case {
        PlacementCase::KTx { k } => (k.to_string(), String::new(), String::new()),
        PlacementCase::LRx { l } => (l.to_string(), String::new(), String::new()),
        PlacementCase::Baseline => Default::default(),
        PlacementCase::DoubleVariance { rx_in_dense, tx_in_dense } => {
            (String::new(), rx_in_dense.to_string(), tx_in_dense.to_string())
        }
    };
    let case = match t.case {
        PlacementCase::KTx { .. } => "ktx",
        PlacementCase::LRx { .. } => "lrx",
        PlacementCase::Baseline => "baseline",
        PlacementCase::DoubleVariance { .. } => "double",
    };
    let hit = matches!(t.metric, crate::sweep::Metric::HitUniform | crate::sweep::Metric::HitClusterCentric);
    let mut sim = [String::new(), String::new(), String::new(), String::new()];
    let mut qmc = [String::new(), String::new(), String::new()];
    let (estimator, status, error) = match &row.outcome {
        Ok(pc) => {
            match &pc.meta {
                EstimateMeta::Simulation { trials, disk_radius, antithetic, rng, .. } => {
                    sim = [trials.to_string(), sig9(*disk_radius), antithetic.to_string(), rng.to_string()];
                }
                EstimateMeta::Qmc { points, seed, change, .. } => {
                    qmc = [points.to_string(), seed.to_string(), sig9(*change)];
                }
                EstimateMeta::Quadrature { .. } => {}
            }
            (pc.method.as_str().to_string(), "ok", String::new())
        }
        Err(e) => {
            let kind = if e.is_nonconvergence() { "nonconvergence" } else { "error" };
            (String::new(), kind, e.to_string())
        }
    };
    if row.outcome.is_err() && t.method == crate::sweep::MethodSel::MonteCarlo {
        sim[3] = RNG_NAME.to_string();
    }
    let fields: Vec<String> = vec![
        SCHEMA_VERSION.to_string(),
        crate::VERSION.to_string(),
        t.curve.clone(),
        t.axis.as_str().to_string(),
        sig9(t.x),
        case.to_string(),
        rank,
        rx,
        tx,
        sig9(p.lambda_c_per_km2()),
        sig9(p.sigma_a),
        sig9(p.sigma_b),
        p.n_t.to_string(),
        p.n_r.to_string(),
        sig9(p.m_a),
        sig9(p.m_b),
        sig9(p.alpha),
        sig9(p.beta_db()),
        if hit { t.library.j_total.to_string() } else { String::new() },
        if hit { sig9(t.library.gamma) } else { String::new() },
        t.metric.as_str().to_string(),
        t.method.as_str().to_string(),
        estimator,
        opt(row.value),
        opt(row.std_error),
        status.to_string(),
        error,
        t.sim.seed.to_string(),
        sim[0].clone(),
        sim[1].clone(),
        sim[2].clone(),
        sim[3].clone(),
        qmc[0].clone(),
        qmc[1].clone(),
        qmc[2].clone(),
        sig9(t.engine.tol.rel),
        sig9(t.engine.tol.abs),
        sig9(ENVELOPE_SIGMAS),
        t.engine.intra_mode.as_str().to_string(),
    ];
    debug_assert_eq!(fields.len(), COLUMNS.len());
    fields.iter().map(|f| quote(f)).collect::<Vec<_>>().join(",")
}

/// Header plus one line per row.
pub fn render_csv(rows: &[Row]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&csv_line(r));
        out.push('\n');
    }
    out
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Path of the key-value metadata file written next to `csv`.
pub fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_os_string();
    s.push(".meta");
    PathBuf::from(s)
}

/// Key-value metadata: run-level facts and per-row wall times, which are
/// kept out of the CSV so its body stays reproducible.
pub fn render_meta(pairs: &[(String, String)], rows: &[Row]) -> String {
    let mut out = String::new();
    out.push_str(&format!("schema = {SCHEMA_VERSION}\nversion = {}\n", crate::VERSION));
    for (k, v) in pairs {
        out.push_str(&format!("{k} = {v}\n"));
    }
    let total: f64 = rows.iter().map(|r| r.wall.as_secs_f64()).sum();
    out.push_str(&format!("rows = {}\nrow_wall_seconds_total = {total:.3}\n", rows.len()));
    for (i, r) in rows.iter().enumerate() {
        out.push_str(&format!("row.{i}.wall_seconds = {:.3}\n", r.wall.as_secs_f64()));
    }
    out
}
