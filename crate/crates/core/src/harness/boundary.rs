use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::confidence::{mixture_boundary, relative_width};
use crate::error::{Error, Result};
use crate::harness::manifest::{RunManifest, RunRecorder};
use crate::io::{create, finish};

pub const BOUNDARY_FILE: &str = "boundary.csv";

/// Strictly increasing, nonnegative variance-clock values.
///
/// Parsed from either a comma list (`1,10,100`) or a log-spaced spec
/// `log:LO:HI:N` with `N >= 2` points from `LO` to `HI` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VGrid(pub Vec<f64>);

impl VGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("variance grid is empty"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::domain(format!(
                "variance grid values must be finite and >= 0, got {v}"
            )));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("variance grid must be strictly increasing"));
        }
        Ok(VGrid(values))
    }

    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(Error::domain(format!(
                "log grid needs 0 < lo < hi and n >= 2, got {lo}, {hi}, {n}"
            )));
        }
        let (a, b) = (lo.log10(), hi.log10());
        let mut v: Vec<f64> = (0..n)
            .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
            .collect();
        v[0] = lo;
        v[n - 1] = hi;
        VGrid::new(v)
    }
}

impl Default for VGrid {
    fn default() -> Self {
        VGrid::log_spaced(1e-2, 1e10, 121).expect("valid default grid")
    }
}

impl FromStr for VGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::domain(format!("bad number `{x}` in variance grid")))
        };
        if let Some(rest) = s.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::domain(format!("expected log:LO:HI:N, got `{s}`")));
            }
            let n = parts[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::domain(format!("bad point count `{}`", parts[2])))?;
            VGrid::log_spaced(num(parts[0])?, num(parts[1])?, n)
        } else {
            VGrid::new(s.split(',').map(num).collect::<Result<Vec<_>>>()?)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub v0: f64,
    pub v1: f64,
    /// `b(v1; α)`.
    pub b_alpha: f64,
    /// `b(v1; α/2)`.
    pub b_half_alpha: f64,
    /// `b(v0; α/2) + b(v1; α/2)`.
    pub union_half_width: f64,
    /// `b(v1/(1-π) + v0/π; α)`, the half-width from the variance upper bound.
    pub sigma_bound_half_width: f64,
    pub relative_width: f64,
}

/// One row per grid value. With `v0 = None` the clocks are symmetric
/// (`v0 = v1 = V`); otherwise `v0` is held fixed while `v1` runs over the grid.
pub fn boundary_table(grid: &VGrid, v0: Option<f64>, alpha: f64, eta_sq: f64, pi: f64) -> Result<Vec<BoundaryRow>> {
    grid.0
        .iter()
        .map(|&v1| {
            let v0 = v0.unwrap_or(v1);
            let b0 = mixture_boundary(v0, alpha / 2.0, eta_sq)?;
            let b1 = mixture_boundary(v1, alpha / 2.0, eta_sq)?;
            Ok(BoundaryRow {
                v0,
                v1,
                b_alpha: mixture_boundary(v1, alpha, eta_sq)?,
                b_half_alpha: b1,
                union_half_width: b0 + b1,
                sigma_bound_half_width: mixture_boundary(v1 / (1.0 - pi) + v0 / pi, alpha, eta_sq)?,
                relative_width: relative_width(v0, v1, pi, alpha, eta_sq)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryOptions {
    pub v_grid: VGrid,
    pub v0: Option<f64>,
    pub alpha: f64,
    pub eta_sq: f64,
    pub pi: f64,
    pub out: PathBuf,
}

pub fn cmd_boundary(opts: &BoundaryOptions) -> Result<RunManifest> {
    let rows = boundary_table(&opts.v_grid, opts.v0, opts.alpha, opts.eta_sq, opts.pi)?;
    let mut run = RunRecorder::start(&opts.out, "boundary")?;
    let path = run.path(BOUNDARY_FILE);
    let mut wtr = csv::Writer::from_writer(create(&path)?);
    wtr.write_record([
        "v0",
        "v1",
        "b_alpha",
        "b_half_alpha",
        "union_half_width",
        "sigma_bound_half_width",
        "relative_width",
    ])?;
    for r in &rows {
        wtr.write_record(
            [
                r.v0,
                r.v1,
                r.b_alpha,
                r.b_half_alpha,
                r.union_half_width,
                r.sigma_bound_half_width,
                r.relative_width,
            ]
            .map(|x| x.to_string()),
        )?;
    }
    finish(wtr, &path)?;
    run.record(BOUNDARY_FILE)?;
    run.finish(None, opts)
}
