//! Orchestration behind the command-line tool: simulation, analysis of a
//! single dataset, coverage studies, and boundary tabulation. Each command
//! writes into an output directory and records a manifest of content digests.

pub mod analyze;
pub mod boundary;
pub mod coverage;
pub mod manifest;
pub mod simulate;

pub use analyze::{analysis_series, cmd_analyze, AnalyzeOptions, EstimatorKind, SERIES};
pub use boundary::{boundary_table, cmd_boundary, BoundaryOptions, BoundaryRow, VGrid};
pub use coverage::{
    cmd_coverage, covers_on_refined_grid, nominal_level, pointwise_contrast, run_coverage, sequence_bands, truth_paths,
    ContrastRow, CoverageConfig, CoverageOptions, CoverageReport, CoverageRow, Estimand, VarianceMode,
};
pub use manifest::{file_digest, sha256_hex, FileDigest, RunManifest, MANIFEST_FILE};
pub use simulate::{cmd_simulate, SimulateOptions, OBSERVED_FILE, ORACLE_FILE};
