//! Potential outcomes, assignments, observed data and the true reward paths.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::StepPath;

/// Treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treatment];

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }

    pub fn from_label(label: i64) -> Result<Arm> {
        match label {
            0 => Ok(Arm::Control),
            1 => Ok(Arm::Treatment),
            other => Err(Error::InvalidArm(other)),
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Treatment,
            Arm::Treatment => Arm::Control,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Outcome and propensity bounds every table and dataset is validated against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// `|y| <= outcome_bound` for every potential outcome.
    pub outcome_bound: f64,
    /// Propensities must lie in `[pi_min, 1 - pi_min]`.
    pub pi_min: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            outcome_bound: 10.0,
            pi_min: 1e-6,
        }
    }
}

impl Bounds {
    pub fn new(outcome_bound: f64, pi_min: f64) -> Result<Self> {
        if !(outcome_bound > 0.0 && outcome_bound.is_finite()) {
            return Err(Error::domain(format!(
                "outcome bound must be positive and finite, got {outcome_bound}"
            )));
        }
        if !(pi_min > 0.0 && pi_min < 0.5) {
            return Err(Error::domain(format!("pi_min must lie in (0, 0.5), got {pi_min}")));
        }
        Ok(Bounds { outcome_bound, pi_min })
    }

    pub(crate) fn check_propensity(&self, unit_id: usize, p: f64) -> Result<()> {
        let (min, max) = (self.pi_min, 1.0 - self.pi_min);
        if p.is_finite() && p >= min && p <= max {
            Ok(())
        } else {
            Err(Error::PropensityOutOfBounds {
                unit_id,
                propensity: p,
                min,
                max,
            })
        }
    }

    pub(crate) fn check_outcome(&self, unit_id: usize, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::NonFinite {
                unit_id,
                field: "outcome",
            });
        }
        if y.abs() > self.outcome_bound {
            return Err(Error::OutcomeOutOfBounds {
                unit_id,
                value: y,
                bound: self.outcome_bound,
            });
        }
        Ok(())
    }

    /// Largest possible single-jump contribution to an estimated variance clock.
    pub fn max_variance_jump(&self) -> f64 {
        (1.0 - self.pi_min) * (2.0 * self.outcome_bound / self.pi_min).powi(2)
    }
}

/// One unit's potential event times and outcomes under both arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialUnit {
    pub unit_id: usize,
    pub entry_time: f64,
    /// Indexed by [`Arm::index`].
    pub event_time: [f64; 2],
    /// Indexed by [`Arm::index`].
    pub outcome: [f64; 2],
    /// Probability of assignment to treatment.
    pub propensity: f64,
}

impl PotentialUnit {
    pub fn event_time(&self, arm: Arm) -> f64 {
        self.event_time[arm.index()]
    }

    pub fn outcome(&self, arm: Arm) -> f64 {
        self.outcome[arm.index()]
    }

    /// Probability of assignment to `arm`.
    pub fn propensity(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Treatment => self.propensity,
            Arm::Control => 1.0 - self.propensity,
        }
    }

    fn validate(&self, bounds: &Bounds) -> Result<()> {
        let id = self.unit_id;
        if !(self.entry_time.is_finite() && self.entry_time >= 0.0) {
            return Err(Error::NonFinite {
                unit_id: id,
                field: "entry_time",
            });
        }
        for arm in Arm::BOTH {
            let t = self.event_time(arm);
            if !t.is_finite() {
                return Err(Error::NonFinite {
                    unit_id: id,
                    field: "event_time",
                });
            }
            if t <= self.entry_time {
                return Err(Error::EventBeforeEntry {
                    unit_id: id,
                    arm,
                    entry: self.entry_time,
                    event: t,
                });
            }
            bounds.check_outcome(id, self.outcome(arm))?;
        }
        bounds.check_propensity(id, self.propensity)
    }
}

/// The full set of potential outcomes, ordered by entry time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialOutcomeTable {
    units: Vec<PotentialUnit>,
    bounds: Bounds,
}

impl PotentialOutcomeTable {
    /// Validates every unit and sorts by `(entry_time, unit_id)`.
    pub fn new(mut units: Vec<PotentialUnit>, bounds: Bounds) -> Result<Self> {
        for u in &units {
            u.validate(&bounds)?;
        }
        units.sort_by(|a, b| a.entry_time.total_cmp(&b.entry_time).then(a.unit_id.cmp(&b.unit_id)));
        check_unique_ids(units.iter().map(|u| u.unit_id))?;
        Ok(PotentialOutcomeTable { units, bounds })
    }

    pub fn units(&self) -> &[PotentialUnit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Latest potential event time over all units and both arms.
    pub fn horizon(&self) -> f64 {
        self.units.iter().flat_map(|u| u.event_time).fold(0.0, f64::max)
    }

    /// Unit indices (table order) sorted by the arm's event time, ties by unit id.
    pub fn event_order(&self, arm: Arm) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.units.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ua, ub) = (&self.units[a], &self.units[b]);
            ua.event_time(arm)
                .total_cmp(&ub.event_time(arm))
                .then(ua.unit_id.cmp(&ub.unit_id))
        });
        idx
    }
}

fn check_unique_ids(ids: impl Iterator<Item = usize>) -> Result<()> {
    let mut seen: Vec<usize> = ids.collect();
    seen.sort_unstable();
    match seen.windows(2).find(|w| w[0] == w[1]) {
        Some(w) => Err(Error::DuplicateUnit(w[0])),
        None => Ok(()),
    }
}

/// Realized arm per unit, aligned with table order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentVector(Vec<Arm>);

impl AssignmentVector {
    pub fn new(arms: Vec<Arm>) -> Self {
        AssignmentVector(arms)
    }

    pub fn from_labels(labels: &[i64]) -> Result<Self> {
        labels
            .iter()
            .map(|&l| Arm::from_label(l))
            .collect::<Result<Vec<_>>>()
            .map(AssignmentVector)
    }

    pub fn arms(&self) -> &[Arm] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Arm {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        if self.0.len() == expected {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected,
                actual: self.0.len(),
            })
        }
    }
}

/// What an analyst sees for one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedUnit {
    pub unit_id: usize,
    pub entry_time: f64,
    pub arm: Arm,
    /// Probability of assignment to treatment.
    pub propensity: f64,
    pub time: f64,
    pub value: f64,
}

impl ObservedUnit {
    pub fn propensity(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Treatment => self.propensity,
            Arm::Control => 1.0 - self.propensity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedDataset {
    units: Vec<ObservedUnit>,
    bounds: Bounds,
}

impl ObservedDataset {
    pub fn new(mut units: Vec<ObservedUnit>, bounds: Bounds) -> Result<Self> {
        for u in &units {
            let id = u.unit_id;
            if !(u.entry_time.is_finite() && u.entry_time >= 0.0) {
                return Err(Error::NonFinite {
                    unit_id: id,
                    field: "entry_time",
                });
            }
            if !u.time.is_finite() {
                return Err(Error::NonFinite {
                    unit_id: id,
                    field: "t_obs",
                });
            }
            if u.time <= u.entry_time {
                return Err(Error::EventBeforeEntry {
                    unit_id: id,
                    arm: u.arm,
                    entry: u.entry_time,
                    event: u.time,
                });
            }
            bounds.check_outcome(id, u.value)?;
            bounds.check_propensity(id, u.propensity)?;
        }
        units.sort_by(|a, b| a.entry_time.total_cmp(&b.entry_time).then(a.unit_id.cmp(&b.unit_id)));
        check_unique_ids(units.iter().map(|u| u.unit_id))?;
        Ok(ObservedDataset { units, bounds })
    }

    pub fn units(&self) -> &[ObservedUnit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn horizon(&self) -> f64 {
        self.units.iter().map(|u| u.time).fold(0.0, f64::max)
    }
}

/// Reveals, for each unit, the event time and outcome of its assigned arm.
pub fn apply_switching(table: &PotentialOutcomeTable, assignment: &AssignmentVector) -> Result<ObservedDataset> {
    assignment.check_len(table.len())?;
    let units = table
        .units()
        .iter()
        .zip(assignment.arms())
        .map(|(u, &arm)| ObservedUnit {
            unit_id: u.unit_id,
            entry_time: u.entry_time,
            arm,
            propensity: u.propensity,
            time: u.event_time(arm),
            value: u.outcome(arm),
        })
        .collect();
    // Table order is already (entry, id) sorted and validated.
    Ok(ObservedDataset {
        units,
        bounds: table.bounds(),
    })
}

/// Exact cumulative reward under `arm`: the sum of `y_i(arm)` over units whose
/// event under that arm has occurred by `t`.
pub fn true_reward_path(table: &PotentialOutcomeTable, arm: Arm) -> StepPath {
    let order = table.event_order(arm);
    StepPath::from_increments(
        0.0,
        order.into_iter().map(|i| {
            let u = &table.units()[i];
            (u.event_time(arm), u.outcome(arm))
        }),
    )
}

/// Exact incremental reward `r_t(1) - r_t(0)`.
pub fn true_delta_path(table: &PotentialOutcomeTable) -> StepPath {
    &true_reward_path(table, Arm::Treatment) - &true_reward_path(table, Arm::Control)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The five printed rows of the worked example table.
    pub const ROWS: [(f64, f64, f64, f64, f64, i64); 5] = [
        (0.0001, 3.39, 0.94, 0.19, 0.28, 1),
        (0.0004, 2.32, 1.40, 0.64, 0.25, 1),
        (0.0029, 4.96, 0.33, 0.96, 0.22, 0),
        (0.0030, 4.56, 1.65, 0.68, 0.09, 1),
        (0.0031, 2.93, 0.64, 0.16, 0.02, 0),
    ];

    pub fn five_rows() -> (PotentialOutcomeTable, AssignmentVector) {
        let units = ROWS
            .iter()
            .enumerate()
            .map(|(i, &(e, t0, t1, y0, y1, _))| PotentialUnit {
                unit_id: i,
                entry_time: e,
                event_time: [t0, t1],
                outcome: [y0, y1],
                propensity: 0.5,
            })
            .collect();
        let table = PotentialOutcomeTable::new(units, Bounds::default()).unwrap();
        let labels: Vec<i64> = ROWS.iter().map(|r| r.5).collect();
        (table, AssignmentVector::from_labels(&labels).unwrap())
    }
}
