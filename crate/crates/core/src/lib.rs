//! Anytime-valid, design-based inference for randomized experiments whose
//! outcomes arrive after a random delay.
//!
//! Units enter over calendar time, are randomized to control or treatment,
//! and contribute an outcome when their event fires. The crate estimates the
//! cumulative reward path of each arm and their difference, with confidence
//! sequences that hold uniformly over time.
//!
//! ```
//! use avdelay::{ipw_paths, Arm, Bounds, ObservedDataset, ObservedUnit};
//!
//! let units = vec![
//!     ObservedUnit { unit_id: 0, entry_time: 0.0, arm: Arm::Treatment, propensity: 0.5, time: 1.0, value: 0.3 },
//!     ObservedUnit { unit_id: 1, entry_time: 0.5, arm: Arm::Control, propensity: 0.5, time: 2.0, value: 0.2 },
//! ];
//! let obs = ObservedDataset::new(units, Bounds::default()).unwrap();
//! let est = ipw_paths(&obs);
//! assert_eq!(est.reward(Arm::Treatment).eval(1.5), 0.6);
//! ```

pub mod confidence;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod model;
pub mod rng;
pub mod simulation;
pub mod special;
pub mod stats;
pub mod step;

pub use confidence::{
    classical_pointwise, difference_cs, mixture_boundary, p_value_path, relative_width, running_minimum,
    sequential_p_value, single_arm_cs, BandKind, BoundaryConfig, ConfidenceBand,
};
pub use error::{Error, Result};
pub use estimators::{aipw_paths, ipw_paths, observed_paths, oracle_clocks, AugmentationPolicy, EstimatePaths};
pub use model::{
    apply_switching, true_delta_path, true_reward_path, Arm, AssignmentVector, Bounds, ObservedDataset, ObservedUnit,
    PotentialOutcomeTable, PotentialUnit,
};
pub use simulation::{generate_dataset, SimConfig};
pub use step::StepPath;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/confidence.md")]
    mod confidence {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
