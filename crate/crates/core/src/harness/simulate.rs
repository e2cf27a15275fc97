use std::path::PathBuf;

use serde::Serialize;

use crate::diagnostics::draw_assignment;
use crate::error::Result;
use crate::harness::manifest::{RunManifest, RunRecorder};
use crate::io::{write_observed_csv, write_oracle_csv};
use crate::model::apply_switching;
use crate::simulation::{generate_dataset, SimConfig};

pub const ORACLE_FILE: &str = "oracle.csv";
pub const OBSERVED_FILE: &str = "observed.csv";

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOptions {
    pub n: usize,
    pub seed: u64,
    pub counting: bool,
    pub out: PathBuf,
}

impl SimulateOptions {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            n_units: self.n,
            counting: self.counting,
            seed: self.seed,
            ..SimConfig::default()
        }
    }
}

/// Generates a table, draws one assignment, and writes the oracle file, the
/// observed file it implies, and a manifest into `opts.out`.
pub fn cmd_simulate(opts: &SimulateOptions) -> Result<RunManifest> {
    let cfg = opts.sim_config();
    let table = generate_dataset(&cfg)?;
    let assignment = draw_assignment(&table, opts.seed, 0);
    let observed = apply_switching(&table, &assignment)?;

    let mut run = RunRecorder::start(&opts.out, "simulate")?;
    write_oracle_csv(run.path(ORACLE_FILE), &table, &assignment)?;
    run.record(ORACLE_FILE)?;
    write_observed_csv(run.path(OBSERVED_FILE), &observed)?;
    run.record(OBSERVED_FILE)?;
    run.finish(Some(opts.seed), &cfg)
}
