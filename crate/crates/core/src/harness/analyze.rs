use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::confidence::{
    classical_pointwise, difference_cs, p_value_path, running_minimum, single_arm_cs, BoundaryConfig,
};
use crate::error::{Error, Result};
use crate::estimators::{aipw_paths, ipw_paths, AugmentationPolicy, EstimatePaths};
use crate::harness::manifest::{RunManifest, RunRecorder};
use crate::io::{detect_schema, read_observed_csv, read_oracle_csv, Schema, SeriesTable};
use crate::model::{apply_switching, Bounds};
use crate::step::{union_times, StepPath};

pub const SERIES_FILE: &str = "series.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Ipw,
    /// Event-time AIPW with the running-mean augmentation; needs oracle input.
    AipwRunningMean,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Ipw => "ipw",
            EstimatorKind::AipwRunningMean => "aipw-running-mean",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeOptions {
    pub input: PathBuf,
    pub out: PathBuf,
    pub estimator: EstimatorKind,
    pub alpha: f64,
    pub eta_sq: f64,
    pub bounds: Bounds,
}

/// Series names in emission order.
pub const SERIES: [&str; 20] = [
    "r_hat_0",
    "r_hat_1",
    "delta_hat",
    "v_hat_0",
    "v_hat_1",
    "sigma_sq_hat",
    "cs_lower_0",
    "cs_upper_0",
    "cs_lower_1",
    "cs_upper_1",
    "cs_lower_delta",
    "cs_upper_delta",
    "classical_lower_0",
    "classical_upper_0",
    "classical_lower_1",
    "classical_upper_1",
    "classical_lower_delta",
    "classical_upper_delta",
    "p_value",
    "p_value_running_min",
];

/// Every analysis series evaluated at time 0 and at each jump time.
///
/// Arm sequences run at level `1 - α/2` so that together they imply the
/// difference sequence at `1 - α`. Classical intervals use `χ²₁` at level
/// `1 - α` with `V̂` for the arms and `σ̂²` for the difference.
pub fn analysis_series(est: &EstimatePaths, cfg: &BoundaryConfig) -> Result<SeriesTable> {
    let half = cfg.with_alpha(cfg.alpha / 2.0)?;
    let arm_cs = [0, 1].map(|w| single_arm_cs(&est.reward[w], &est.variance[w], &half));
    let delta_cs = difference_cs(&est.delta, &est.variance[0], &est.variance[1], cfg);
    let c0 = classical_pointwise(&est.reward[0], &est.variance[0], cfg.alpha)?;
    let c1 = classical_pointwise(&est.reward[1], &est.variance[1], cfg.alpha)?;
    let classical_delta = classical_pointwise(&est.delta, &est.sigma_sq, cfg.alpha)?;
    let p = p_value_path(&est.delta, &est.variance[0], &est.variance[1], cfg.eta_sq)?;
    let p_min = running_minimum(&p);

    let paths: [&StepPath; 20] = [
        &est.reward[0],
        &est.reward[1],
        &est.delta,
        &est.variance[0],
        &est.variance[1],
        &est.sigma_sq,
        &arm_cs[0].lower,
        &arm_cs[0].upper,
        &arm_cs[1].lower,
        &arm_cs[1].upper,
        &delta_cs.lower,
        &delta_cs.upper,
        &c0.lower,
        &c0.upper,
        &c1.lower,
        &c1.upper,
        &classical_delta.lower,
        &classical_delta.upper,
        &p,
        &p_min,
    ];
    let mut times = vec![0.0];
    times.extend(union_times(&paths).into_iter().filter(|&t| t > 0.0));
    let sampled: Vec<Vec<f64>> = paths.iter().map(|p| p.sample_sorted(&times)).collect();
    let mut table = SeriesTable::default();
    for (k, &t) in times.iter().enumerate() {
        for (name, values) in SERIES.iter().zip(&sampled) {
            table.push(t, name, values[k]);
        }
    }
    Ok(table)
}

pub(crate) fn load_estimates(opts: &AnalyzeOptions) -> Result<EstimatePaths> {
    let schema = detect_schema(&opts.input)?;
    match (opts.estimator, schema) {
        (EstimatorKind::Ipw, Schema::Observed) => Ok(ipw_paths(&read_observed_csv(&opts.input, opts.bounds)?)),
        (EstimatorKind::Ipw, Schema::Oracle) => {
            let (table, a) = read_oracle_csv(&opts.input, opts.bounds)?;
            Ok(ipw_paths(&apply_switching(&table, &a)?))
        }
        (EstimatorKind::AipwRunningMean, Schema::Oracle) => {
            let (table, a) = read_oracle_csv(&opts.input, opts.bounds)?;
            aipw_paths(&table, &a, &AugmentationPolicy::RunningMean)
        }
        (EstimatorKind::AipwRunningMean, Schema::Observed) => Err(Error::OracleRequired),
    }
}

/// Reads an observed or oracle file and writes the long-format analysis series.
pub fn cmd_analyze(opts: &AnalyzeOptions) -> Result<RunManifest> {
    let cfg = BoundaryConfig::new(opts.eta_sq, opts.alpha)?;
    let est = load_estimates(opts)?;
    let series = analysis_series(&est, &cfg)?;
    let mut run = RunRecorder::start(&opts.out, "analyze")?;
    series.write(run.path(SERIES_FILE))?;
    run.record(SERIES_FILE)?;
    run.finish(None, opts)
}
