use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::confidence::{classical_pointwise, difference_cs, single_arm_cs, BoundaryConfig, ConfidenceBand};
use crate::diagnostics::replicate;
use crate::error::{Error, Result};
use crate::estimators::{aipw_paths, ipw_paths, oracle_clocks, AugmentationPolicy, EstimatePaths};
use crate::harness::analyze::EstimatorKind;
use crate::harness::manifest::{RunManifest, RunRecorder};
use crate::io::{create, finish};
use crate::model::{apply_switching, true_delta_path, true_reward_path, Arm, AssignmentVector, PotentialOutcomeTable};
use crate::simulation::{generate_dataset, SimConfig};
use crate::stats::compensated_sum;
use crate::step::{union_times, StepPath};

pub const COVERAGE_FILE: &str = "coverage.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMode {
    /// True clock `V_t(w)` computed from the potential outcomes.
    Oracle,
    /// Estimated clock `V̂_t(w)`.
    Estimated,
}

impl VarianceMode {
    pub fn label(self) -> &'static str {
        match self {
            VarianceMode::Oracle => "oracle",
            VarianceMode::Estimated => "estimated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimand {
    R0,
    R1,
    Delta,
}

impl Estimand {
    pub const ALL: [Estimand; 3] = [Estimand::R0, Estimand::R1, Estimand::Delta];

    pub fn label(self) -> &'static str {
        match self {
            Estimand::R0 => "r(0)",
            Estimand::R1 => "r(1)",
            Estimand::Delta => "delta",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageConfig {
    pub reps: usize,
    /// Seeds assignment draws; the table is supplied separately.
    pub seed: u64,
    pub boundary: BoundaryConfig,
    pub estimators: Vec<EstimatorKind>,
    pub variance_modes: Vec<VarianceMode>,
    /// Every this many replications, also check containment on a refined grid
    /// and count disagreements with the jump-time check. Zero disables.
    pub grid_check_every: usize,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            reps: 200,
            seed: 0,
            boundary: BoundaryConfig::default(),
            estimators: vec![EstimatorKind::Ipw, EstimatorKind::AipwRunningMean],
            variance_modes: vec![VarianceMode::Oracle, VarianceMode::Estimated],
            grid_check_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub estimator: EstimatorKind,
    pub variance: VarianceMode,
    pub estimand: Estimand,
    pub reps: usize,
    /// Fraction of replications whose band contained the truth at all times.
    pub coverage: f64,
    /// Mean half-width at the last event time.
    pub mean_final_half_width: f64,
    pub nominal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub grid_checks: usize,
    pub grid_mismatches: usize,
}

impl CoverageReport {
    pub fn get(&self, estimator: EstimatorKind, variance: VarianceMode, estimand: Estimand) -> Option<&CoverageRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.variance == variance && r.estimand == estimand)
    }

    /// `1 - AIPW/IPW` for the mean final half-width.
    pub fn width_reduction(&self, variance: VarianceMode, estimand: Estimand) -> Option<f64> {
        let ipw = self.get(EstimatorKind::Ipw, variance, estimand)?;
        let aipw = self.get(EstimatorKind::AipwRunningMean, variance, estimand)?;
        Some(1.0 - aipw.mean_final_half_width / ipw.mean_final_half_width)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut wtr = csv::Writer::from_writer(create(path)?);
        wtr.write_record([
            "estimator",
            "variance",
            "estimand",
            "reps",
            "coverage",
            "mean_final_half_width",
            "nominal",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.estimator.label().to_string(),
                r.variance.label().to_string(),
                r.estimand.label().to_string(),
                r.reps.to_string(),
                r.coverage.to_string(),
                r.mean_final_half_width.to_string(),
                r.nominal.to_string(),
            ])?;
        }
        finish(wtr, path)
    }
}

pub(crate) fn estimate(
    table: &PotentialOutcomeTable,
    a: &AssignmentVector,
    estimator: EstimatorKind,
) -> Result<(EstimatePaths, AugmentationPolicy)> {
    Ok(match estimator {
        EstimatorKind::Ipw => (ipw_paths(&apply_switching(table, a)?), AugmentationPolicy::Zero),
        EstimatorKind::AipwRunningMean => {
            let policy = AugmentationPolicy::RunningMean;
            (aipw_paths(table, a, &policy)?, policy)
        }
    })
}

/// Arm bands at `α/2` and the union difference band at `α`, indexed by [`Estimand`].
pub fn sequence_bands(
    est: &EstimatePaths,
    clocks: &[StepPath; 2],
    cfg: &BoundaryConfig,
) -> Result<[ConfidenceBand; 3]> {
    let half = cfg.with_alpha(cfg.alpha / 2.0)?;
    Ok([
        single_arm_cs(&est.reward[0], &clocks[0], &half),
        single_arm_cs(&est.reward[1], &clocks[1], &half),
        difference_cs(&est.delta, &clocks[0], &clocks[1], cfg),
    ])
}

/// Truth paths indexed by [`Estimand`].
pub fn truth_paths(table: &PotentialOutcomeTable) -> [StepPath; 3] {
    [
        true_reward_path(table, Arm::Control),
        true_reward_path(table, Arm::Treatment),
        true_delta_path(table),
    ]
}

/// Containment checked at the jump times plus a uniform grid `factor` times
/// as dense, reaching past the last jump.
pub fn covers_on_refined_grid(band: &ConfidenceBand, truth: &StepPath, factor: usize) -> bool {
    let mut times = union_times(&[truth, &band.lower, &band.upper]);
    let end = times.last().copied().unwrap_or(1.0) * 1.01;
    let n = factor * times.len().max(1);
    times.extend((0..=n).map(|k| end * k as f64 / n as f64));
    times.iter().all(|&t| band.contains(t, truth.eval(t)))
}

struct RepOutcome {
    // [config][estimand]
    covered: Vec<[bool; 3]>,
    final_half_width: Vec<[f64; 3]>,
    grid_checks: usize,
    grid_mismatches: usize,
}

/// Holds `table` fixed and redraws the assignment in each replication.
pub fn run_coverage(table: &PotentialOutcomeTable, cfg: &CoverageConfig) -> Result<CoverageReport> {
    if cfg.estimators.is_empty() || cfg.variance_modes.is_empty() {
        return Err(Error::domain(
            "coverage needs at least one estimator and one variance mode",
        ));
    }
    let truth = truth_paths(table);
    let horizon = table.horizon();
    let configs: Vec<(EstimatorKind, VarianceMode)> = cfg
        .estimators
        .iter()
        .flat_map(|&e| cfg.variance_modes.iter().map(move |&v| (e, v)))
        .collect();

    let outcomes = replicate(table, cfg.seed, cfg.reps, |r, a| {
        let mut out = RepOutcome {
            covered: Vec::with_capacity(configs.len()),
            final_half_width: Vec::with_capacity(configs.len()),
            grid_checks: 0,
            grid_mismatches: 0,
        };
        let check_grid = cfg.grid_check_every > 0 && r % cfg.grid_check_every == 0;
        for &estimator in &cfg.estimators {
            let (est, policy) = estimate(table, a, estimator)?;
            let oracle = if cfg.variance_modes.contains(&VarianceMode::Oracle) {
                Some(oracle_clocks(table, a, &policy)?.variance)
            } else {
                None
            };
            for &mode in &cfg.variance_modes {
                let clocks = match mode {
                    VarianceMode::Oracle => oracle.as_ref().expect("computed above"),
                    VarianceMode::Estimated => &est.variance,
                };
                let bands = sequence_bands(&est, clocks, &cfg.boundary)?;
                let covered = [0, 1, 2].map(|k| bands[k].covers(&truth[k]));
                if check_grid {
                    for k in 0..3 {
                        out.grid_checks += 1;
                        if covers_on_refined_grid(&bands[k], &truth[k], 10) != covered[k] {
                            out.grid_mismatches += 1;
                        }
                    }
                }
                out.covered.push(covered);
                out.final_half_width
                    .push([0, 1, 2].map(|k| bands[k].half_width_at(horizon)));
            }
        }
        Ok(out)
    })?;

    let mut rows = Vec::with_capacity(3 * configs.len());
    for (c, &(estimator, variance)) in configs.iter().enumerate() {
        for estimand in Estimand::ALL {
            let k = estimand.index();
            let hits = outcomes.iter().filter(|o| o.covered[c][k]).count();
            let width = compensated_sum(outcomes.iter().map(|o| o.final_half_width[c][k]));
            rows.push(CoverageRow {
                estimator,
                variance,
                estimand,
                reps: cfg.reps,
                coverage: hits as f64 / cfg.reps as f64,
                mean_final_half_width: width / cfg.reps as f64,
                nominal: nominal_level(estimand, cfg.boundary.alpha),
            });
        }
    }
    Ok(CoverageReport {
        rows,
        grid_checks: outcomes.iter().map(|o| o.grid_checks).sum(),
        grid_mismatches: outcomes.iter().map(|o| o.grid_mismatches).sum(),
    })
}

pub fn nominal_level(estimand: Estimand, alpha: f64) -> f64 {
    match estimand {
        Estimand::Delta => 1.0 - alpha,
        _ => 1.0 - alpha / 2.0,
    }
}

/// Fraction of replications in which each band misses the truth somewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub estimand: Estimand,
    pub classical_miss: f64,
    pub sequence_miss: f64,
}

/// Classical fixed-time intervals against confidence sequences for IPW with
/// estimated clocks, both judged on "covers at all times".
pub fn pointwise_contrast(
    table: &PotentialOutcomeTable,
    reps: usize,
    seed: u64,
    cfg: &BoundaryConfig,
) -> Result<Vec<ContrastRow>> {
    let truth = truth_paths(table);
    let misses = replicate(table, seed, reps, |_, a| {
        let est = ipw_paths(&apply_switching(table, a)?);
        let seq = sequence_bands(&est, &est.variance, cfg)?;
        let classical = [
            classical_pointwise(&est.reward[0], &est.variance[0], cfg.alpha)?,
            classical_pointwise(&est.reward[1], &est.variance[1], cfg.alpha)?,
            classical_pointwise(&est.delta, &est.sigma_sq, cfg.alpha)?,
        ];
        Ok([0, 1, 2].map(|k| (!classical[k].covers(&truth[k]), !seq[k].covers(&truth[k]))))
    })?;
    Ok(Estimand::ALL
        .iter()
        .map(|&estimand| {
            let k = estimand.index();
            let frac = |f: fn(&(bool, bool)) -> bool| misses.iter().filter(|m| f(&m[k])).count() as f64 / reps as f64;
            ContrastRow {
                estimand,
                classical_miss: frac(|m| m.0),
                sequence_miss: frac(|m| m.1),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageOptions {
    pub reps: usize,
    pub seed: u64,
    pub n: usize,
    pub counting: bool,
    pub estimators: Vec<EstimatorKind>,
    pub variance_modes: Vec<VarianceMode>,
    pub alpha: f64,
    pub eta_sq: f64,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl CoverageOptions {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            n_units: self.n,
            counting: self.counting,
            seed: self.seed,
            ..SimConfig::default()
        }
    }

    pub fn coverage_config(&self) -> Result<CoverageConfig> {
        Ok(CoverageConfig {
            reps: self.reps,
            seed: self.seed,
            boundary: BoundaryConfig::new(self.eta_sq, self.alpha)?,
            estimators: self.estimators.clone(),
            variance_modes: self.variance_modes.clone(),
            ..CoverageConfig::default()
        })
    }
}

/// Generates one table and writes the coverage report for resampled assignments.
pub fn cmd_coverage(opts: &CoverageOptions) -> Result<(CoverageReport, RunManifest)> {
    let cfg = opts.coverage_config()?;
    if opts.reps < 2 {
        return Err(Error::domain(format!(
            "need at least 2 replications, got {}",
            opts.reps
        )));
    }
    let run_all = || -> Result<CoverageReport> {
        let table = generate_dataset(&opts.sim_config())?;
        run_coverage(&table, &cfg)
    };
    let report = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::domain(format!("thread pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };
    let mut run = RunRecorder::start(&opts.out, "coverage")?;
    report.write_csv(run.path(COVERAGE_FILE))?;
    run.record(COVERAGE_FILE)?;
    let manifest = run.finish(Some(opts.seed), opts)?;
    Ok((report, manifest))
}
