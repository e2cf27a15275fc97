//! IPW and event-time-augmented AIPW estimators of the reward processes.
//!
//! An augmentation enters unit `i`'s arm-`w` estimator as
//! `m_it(w) = f_i(w) · 1[t_i(w) <= t]`: zero before that arm's event time and
//! constant afterwards. This is exactly the family under which the arm's
//! estimation error is a martingale in the filtration that reveals `w_i` at
//! `t_i(w)`; [`AugmentationPolicy::from_paths`] rejects anything else.
//!
//! Because the augmentation switches on at the (possibly counterfactual) time
//! `t_i(w)`, augmented estimators need the potential-outcome table and are
//! flagged `oracle`. Observed data alone supports IPW only.

use crate::error::{Error, Result};
use crate::model::{Arm, AssignmentVector, ObservedDataset, PotentialOutcomeTable};
use crate::step::StepPath;

/// How the per-unit augmentation value `f_i(w)` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum AugmentationPolicy {
    /// No augmentation; the estimator is Horvitz-Thompson.
    Zero,
    /// Mean of the outcomes already observed in arm `w` strictly before
    /// `t_i(w)` (0 when none).
    RunningMean,
    /// Externally supplied values, one `[f(0), f(1)]` pair per unit in table order.
    CustomPerUnit(Vec<[f64; 2]>),
}

impl AugmentationPolicy {
    /// Validates general per-unit augmentation paths `m_it(w)` and reduces them
    /// to event-time values.
    ///
    /// `paths[i][w]` is the augmentation for the `i`-th unit in table order.
    /// A path that is nonzero before `t_i(w)` would make the error process
    /// depend on an unrevealed assignment; one that moves after `t_i(w)` would
    /// add a predictable increment. Both are rejected.
    pub fn from_paths(table: &PotentialOutcomeTable, paths: &[[StepPath; 2]]) -> Result<Self> {
        if paths.len() != table.len() {
            return Err(Error::LengthMismatch {
                expected: table.len(),
                actual: paths.len(),
            });
        }
        let mut values = Vec::with_capacity(paths.len());
        for (u, pair) in table.units().iter().zip(paths) {
            let mut f = [0.0; 2];
            for arm in Arm::BOTH {
                let m = &pair[arm.index()];
                let tau = u.event_time(arm);
                if m.initial() != 0.0 {
                    return Err(Error::AugmentationBeforeEvent {
                        unit_id: u.unit_id,
                        arm,
                        time: 0.0,
                        value: m.initial(),
                    });
                }
                let at_event = m.eval(tau);
                for (t, v) in m.jumps() {
                    if t < tau && v != 0.0 {
                        return Err(Error::AugmentationBeforeEvent {
                            unit_id: u.unit_id,
                            arm,
                            time: t,
                            value: v,
                        });
                    }
                    if t > tau && v != at_event {
                        return Err(Error::AugmentationDrift {
                            unit_id: u.unit_id,
                            arm,
                            time: t,
                        });
                    }
                }
                f[arm.index()] = at_event;
            }
            values.push(f);
        }
        Ok(AugmentationPolicy::CustomPerUnit(values))
    }

    /// True when `f_i(w)` does not depend on the realized assignment.
    pub fn is_assignment_independent(&self) -> bool {
        !matches!(self, AugmentationPolicy::RunningMean)
    }

    /// Per-arm augmentation values in table order.
    ///
    /// The running mean depends on the assignment; the other variants ignore it.
    pub fn values(
        &self,
        table: &PotentialOutcomeTable,
        assignment: Option<&AssignmentVector>,
    ) -> Result<[Vec<f64>; 2]> {
        let n = table.len();
        match self {
            AugmentationPolicy::Zero => Ok([vec![0.0; n], vec![0.0; n]]),
            AugmentationPolicy::RunningMean => {
                let a = assignment
                    .ok_or_else(|| Error::domain("running-mean augmentation needs the realized assignment"))?;
                Ok([
                    running_mean_values(table, a, Arm::Control)?,
                    running_mean_values(table, a, Arm::Treatment)?,
                ])
            }
            AugmentationPolicy::CustomPerUnit(v) => {
                if v.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        actual: v.len(),
                    });
                }
                Ok([v.iter().map(|f| f[0]).collect(), v.iter().map(|f| f[1]).collect()])
            }
        }
    }
}

/// Estimated reward processes and variance clocks.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatePaths {
    /// `r̂_t(w)`, indexed by [`Arm::index`].
    pub reward: [StepPath; 2],
    /// `r̂_t(1) - r̂_t(0)`.
    pub delta: StepPath,
    /// Estimated predictable quadratic variation `V̂_t(w)`.
    pub variance: [StepPath; 2],
    /// Unbiased estimate of the variance upper bound `σ̂²_t`.
    pub sigma_sq: StepPath,
    /// Whether potential event times of both arms were used.
    pub oracle: bool,
}

impl EstimatePaths {
    pub fn reward(&self, arm: Arm) -> &StepPath {
        &self.reward[arm.index()]
    }

    pub fn variance(&self, arm: Arm) -> &StepPath {
        &self.variance[arm.index()]
    }
}

// One unit's contribution at its arm-`w` event: the estimator jump, the
// weighted residual ê, and the V̂ jump. Shared by the IPW and AIPW paths so
// that zero augmentation reproduces IPW bit for bit.
fn unit_jump(y: f64, f: f64, assigned: bool, pi: f64) -> (f64, f64, f64) {
    let weighted = if assigned { (y - f) / pi } else { 0.0 };
    (f + weighted, weighted, (1.0 - pi) * weighted * weighted)
}

/// Horvitz-Thompson estimates from observed data.
pub fn ipw_paths(obs: &ObservedDataset) -> EstimatePaths {
    let mut order: Vec<usize> = (0..obs.len()).collect();
    order.sort_by(|&a, &b| {
        let (ua, ub) = (&obs.units()[a], &obs.units()[b]);
        ua.time.total_cmp(&ub.time).then(ua.unit_id.cmp(&ub.unit_id))
    });
    let mut reward: [Vec<(f64, f64)>; 2] = Default::default();
    let mut variance: [Vec<(f64, f64)>; 2] = Default::default();
    let mut sigma = Vec::with_capacity(order.len());
    for i in order {
        let u = &obs.units()[i];
        let (jump, weighted, vjump) = unit_jump(u.value, 0.0, true, u.propensity(u.arm));
        reward[u.arm.index()].push((u.time, jump));
        variance[u.arm.index()].push((u.time, vjump));
        sigma.push((u.time, weighted * weighted));
    }
    assemble(reward, variance, sigma, false)
}

/// Estimates from observed data under `policy`; only [`AugmentationPolicy::Zero`]
/// is computable without the potential-outcome table.
pub fn observed_paths(obs: &ObservedDataset, policy: &AugmentationPolicy) -> Result<EstimatePaths> {
    match policy {
        AugmentationPolicy::Zero => Ok(ipw_paths(obs)),
        _ => Err(Error::OracleRequired),
    }
}

/// Running mean `f_i(arm)` of outcomes observed in `arm` strictly before `t_i(arm)`.
///
/// Only units actually assigned to `arm` contribute; units sharing an event
/// time do not see each other.
pub fn running_mean_values(table: &PotentialOutcomeTable, assignment: &AssignmentVector, arm: Arm) -> Result<Vec<f64>> {
    assignment.check_len(table.len())?;
    let units = table.units();
    let order = table.event_order(arm);
    let mut out = vec![0.0; units.len()];
    let (mut sum, mut count) = (0.0, 0usize);
    let mut k = 0;
    while k < order.len() {
        let t = units[order[k]].event_time(arm);
        let end = k + order[k..]
            .iter()
            .take_while(|&&i| units[i].event_time(arm) == t)
            .count();
        let mean = if count == 0 { 0.0 } else { sum / count as f64 };
        for &i in &order[k..end] {
            out[i] = mean;
        }
        for &i in &order[k..end] {
            if assignment.get(i) == arm {
                sum += units[i].outcome(arm);
                count += 1;
            }
        }
        k = end;
    }
    Ok(out)
}

/// Event-time AIPW estimates. Every unit contributes at `t_i(w)` for both arms,
/// so the result is oracle-flagged.
pub fn aipw_paths(
    table: &PotentialOutcomeTable,
    assignment: &AssignmentVector,
    policy: &AugmentationPolicy,
) -> Result<EstimatePaths> {
    assignment.check_len(table.len())?;
    let f = policy.values(table, Some(assignment))?;
    let units = table.units();
    let mut reward: [Vec<(f64, f64)>; 2] = Default::default();
    let mut variance: [Vec<(f64, f64)>; 2] = Default::default();
    let mut sigma = Vec::with_capacity(2 * units.len());
    for arm in Arm::BOTH {
        let w = arm.index();
        for i in table.event_order(arm) {
            let u = &units[i];
            let t = u.event_time(arm);
            let (jump, weighted, vjump) =
                unit_jump(u.outcome(arm), f[w][i], assignment.get(i) == arm, u.propensity(arm));
            reward[w].push((t, jump));
            variance[w].push((t, vjump));
            sigma.push((t, weighted * weighted));
        }
    }
    Ok(assemble(reward, variance, sigma, true))
}

fn assemble(
    reward: [Vec<(f64, f64)>; 2],
    variance: [Vec<(f64, f64)>; 2],
    sigma: Vec<(f64, f64)>,
    oracle: bool,
) -> EstimatePaths {
    let [r0, r1] = reward.map(|ev| StepPath::from_increments(0.0, ev));
    let variance = variance.map(|ev| StepPath::from_increments(0.0, ev));
    let delta = &r1 - &r0;
    EstimatePaths {
        reward: [r0, r1],
        delta,
        variance,
        sigma_sq: StepPath::from_increments(0.0, sigma),
        oracle,
    }
}

/// True variance clocks, computed from both arms' residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleClocks {
    /// `V_t(w) = Σ (1-π)/π · e²` over units with `t_i(w) <= t`.
    pub variance: [StepPath; 2],
    /// `σ²_t = Σ e(1)²/π(1) + e(0)²/π(0)`.
    pub sigma_sq: StepPath,
}

/// Oracle clocks for the given assignment. For the running mean the residuals
/// are those induced by this assignment.
pub fn oracle_clocks(
    table: &PotentialOutcomeTable,
    assignment: &AssignmentVector,
    policy: &AugmentationPolicy,
) -> Result<OracleClocks> {
    assignment.check_len(table.len())?;
    let f = policy.values(table, Some(assignment))?;
    let units = table.units();
    let mut variance: [Vec<(f64, f64)>; 2] = Default::default();
    let mut sigma = Vec::with_capacity(2 * units.len());
    for arm in Arm::BOTH {
        let w = arm.index();
        for i in table.event_order(arm) {
            let u = &units[i];
            let pi = u.propensity(arm);
            let e = u.outcome(arm) - f[w][i];
            let t = u.event_time(arm);
            variance[w].push((t, (1.0 - pi) / pi * e * e));
            sigma.push((t, e * e / pi));
        }
    }
    Ok(OracleClocks {
        variance: variance.map(|ev| StepPath::from_increments(0.0, ev)),
        sigma_sq: StepPath::from_increments(0.0, sigma),
    })
}

/// Oracle predictable quadratic variation `V_t(arm)`.
pub fn oracle_variance_path(
    table: &PotentialOutcomeTable,
    assignment: &AssignmentVector,
    policy: &AugmentationPolicy,
    arm: Arm,
) -> Result<StepPath> {
    let mut clocks = oracle_clocks(table, assignment, policy)?;
    Ok(std::mem::take(&mut clocks.variance[arm.index()]))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::model::fixtures::five_rows;
    use crate::model::{apply_switching, true_reward_path, Bounds, PotentialUnit};

    fn table_from(rows: &[(f64, [f64; 2], [f64; 2])], pi: f64) -> PotentialOutcomeTable {
        let units = rows
            .iter()
            .enumerate()
            .map(|(i, &(e, t, y))| PotentialUnit {
                unit_id: i,
                entry_time: e,
                event_time: t,
                outcome: y,
                propensity: pi,
            })
            .collect();
        PotentialOutcomeTable::new(units, Bounds::default()).unwrap()
    }

    #[test]
    fn ipw_on_printed_rows() {
        let (table, a) = five_rows();
        let est = ipw_paths(&apply_switching(&table, &a).unwrap());
        assert!(!est.oracle);
        assert!((est.reward(Arm::Treatment).eval(1.0) - 0.56).abs() < 1e-12);
        assert!((est.variance(Arm::Treatment).eval(1.0) - 0.1568).abs() < 1e-12);
        assert_eq!(est.reward(Arm::Control).eval(1.0), 0.0);
        assert_eq!(est.variance(Arm::Control).eval(1.0), 0.0);
        assert_eq!(est.reward(Arm::Treatment).eval(0.5), 0.0);
    }

    #[test]
    fn counting_mode_scales_counts() {
        let rows: Vec<_> = (0..8)
            .map(|i| (i as f64 * 0.1, [1.0 + i as f64, 0.5 + i as f64 * 0.3], [1.0, 1.0]))
            .collect();
        let table = table_from(&rows, 0.5);
        let a = AssignmentVector::from_labels(&[0, 1, 1, 0, 1, 0, 0, 1]).unwrap();
        let obs = apply_switching(&table, &a).unwrap();
        let est = ipw_paths(&obs);
        for t in [0.0, 1.0, 2.5, 4.0, 9.0] {
            for arm in Arm::BOTH {
                let count = obs.units().iter().filter(|u| u.arm == arm && u.time <= t).count();
                assert_eq!(est.reward(arm).eval(t), 2.0 * count as f64);
            }
        }
    }

    #[test]
    fn running_mean_edge_cases() {
        // Arm-1 events in order: unit 0 (assigned 1, y=0.2), unit 1 (assigned 1,
        // y=0.4), unit 2 (assigned 0), unit 3.
        let table = table_from(
            &[
                (0.0, [5.0, 1.0], [1.0, 0.2]),
                (0.0, [5.0, 2.0], [1.0, 0.4]),
                (0.0, [5.0, 3.0], [1.0, 0.9]),
                (0.0, [5.0, 4.0], [1.0, 0.5]),
            ],
            0.5,
        );
        let a = AssignmentVector::from_labels(&[1, 1, 0, 0]).unwrap();
        let f = running_mean_values(&table, &a, Arm::Treatment).unwrap();
        assert_eq!(f[0], 0.0);
        assert!((f[1] - 0.2).abs() < 1e-15);
        assert!((f[2] - 0.3).abs() < 1e-15);
        // Unit 2 was assigned control, so unit 3 still averages only 0.2, 0.4.
        assert!((f[3] - 0.3).abs() < 1e-15);
        // Every arm-0 event shares t = 5, so nobody has a strict past.
        let f0 = running_mean_values(&table, &a, Arm::Control).unwrap();
        assert_eq!(f0, vec![0.0; 4]);
    }

    #[test]
    fn running_mean_ignores_other_arm_past() {
        let table = table_from(
            &[
                (0.0, [5.0, 1.0], [1.0, 0.2]),
                (0.0, [5.0, 2.0], [1.0, 0.4]),
                (0.0, [5.0, 3.0], [1.0, 0.9]),
            ],
            0.5,
        );
        let a = AssignmentVector::from_labels(&[0, 0, 1]).unwrap();
        let f = running_mean_values(&table, &a, Arm::Treatment).unwrap();
        // Brute force: the observed strict past of unit 2 in arm 1.
        let past: Vec<f64> = (0..3)
            .filter(|&j| table.units()[j].event_time[1] < 3.0 && a.get(j) == Arm::Treatment)
            .map(|j| table.units()[j].outcome[1])
            .collect();
        assert!(past.is_empty());
        assert_eq!(f[2], 0.0);
    }

    #[test]
    fn zero_augmentation_is_ipw() {
        let (table, a) = five_rows();
        let ipw = ipw_paths(&apply_switching(&table, &a).unwrap());
        let aipw = aipw_paths(&table, &a, &AugmentationPolicy::Zero).unwrap();
        assert!(aipw.oracle);
        let pairs = [
            (&ipw.reward[0], &aipw.reward[0]),
            (&ipw.reward[1], &aipw.reward[1]),
            (&ipw.variance[0], &aipw.variance[0]),
            (&ipw.variance[1], &aipw.variance[1]),
            (&ipw.delta, &aipw.delta),
            (&ipw.sigma_sq, &aipw.sigma_sq),
        ];
        for (p, q) in pairs {
            for t in crate::step::union_times(&[p, q]) {
                assert_eq!(p.eval(t).to_bits(), q.eval(t).to_bits());
            }
        }
    }

    #[test]
    fn perfect_augmentation_has_zero_variance() {
        let (table, a) = five_rows();
        let f = table.units().iter().map(|u| u.outcome).collect();
        let est = aipw_paths(&table, &a, &AugmentationPolicy::CustomPerUnit(f)).unwrap();
        for arm in Arm::BOTH {
            let truth = true_reward_path(&table, arm);
            assert_eq!(est.reward(arm), &truth);
            assert!(est.variance(arm).jump_values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn oracle_variance_single_unit() {
        let table = table_from(&[(0.0, [3.39, 0.94], [0.19, 0.28])], 0.5);
        let a = AssignmentVector::from_labels(&[0]).unwrap();
        let v = oracle_variance_path(&table, &a, &AugmentationPolicy::Zero, Arm::Treatment).unwrap();
        assert_eq!(v.eval(0.5), 0.0);
        assert!((v.eval(1.0) - 0.0784).abs() < 1e-15);
    }

    #[test]
    fn observed_mode_requires_zero_policy() {
        let (table, a) = five_rows();
        let obs = apply_switching(&table, &a).unwrap();
        assert!(observed_paths(&obs, &AugmentationPolicy::Zero).is_ok());
        assert!(matches!(
            observed_paths(&obs, &AugmentationPolicy::RunningMean),
            Err(Error::OracleRequired)
        ));
        assert!(matches!(
            aipw_paths(&table, &a, &AugmentationPolicy::CustomPerUnit(vec![[0.0; 2]; 2])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn event_time_paths_are_accepted() {
        let (table, _) = five_rows();
        let paths: Vec<[StepPath; 2]> = table
            .units()
            .iter()
            .map(|u| {
                Arm::BOTH.map(|arm| {
                    let f = 0.1 + arm.index() as f64;
                    StepPath::from_jumps(0.0, [(u.event_time(arm), f)]).unwrap()
                })
            })
            .collect();
        let policy = AugmentationPolicy::from_paths(&table, &paths).unwrap();
        let AugmentationPolicy::CustomPerUnit(v) = policy else {
            panic!("expected custom values")
        };
        assert!(v.iter().all(|f| *f == [0.1, 1.1]));
    }

    #[test]
    fn augmentation_before_event_is_rejected() {
        let (table, _) = five_rows();
        let mut paths: Vec<[StepPath; 2]> = table
            .units()
            .iter()
            .map(|u| Arm::BOTH.map(|arm| StepPath::from_jumps(0.0, [(u.event_time(arm), 0.5)]).unwrap()))
            .collect();
        // Unit 1 arm 0: m = 0.3 on [1.0, t_1(0)).
        let tau = table.units()[1].event_time[0];
        paths[1][0] = StepPath::from_jumps(0.0, [(1.0, 0.3), (tau, 0.5)]).unwrap();
        assert!(matches!(
            AugmentationPolicy::from_paths(&table, &paths),
            Err(Error::AugmentationBeforeEvent {
                unit_id: 1,
                arm: Arm::Control,
                ..
            })
        ));
        paths[1][0] = StepPath::constant(0.2);
        assert!(matches!(
            AugmentationPolicy::from_paths(&table, &paths),
            Err(Error::AugmentationBeforeEvent { unit_id: 1, .. })
        ));
    }

    #[test]
    fn augmentation_drift_is_rejected() {
        let (table, _) = five_rows();
        let mut paths: Vec<[StepPath; 2]> = table
            .units()
            .iter()
            .map(|u| Arm::BOTH.map(|arm| StepPath::from_jumps(0.0, [(u.event_time(arm), 0.5)]).unwrap()))
            .collect();
        let tau = table.units()[3].event_time[1];
        paths[3][1] = StepPath::from_jumps(0.0, [(tau, 0.5), (tau + 1.0, 0.7)]).unwrap();
        assert!(matches!(
            AugmentationPolicy::from_paths(&table, &paths),
            Err(Error::AugmentationDrift {
                unit_id: 3,
                arm: Arm::Treatment,
                ..
            })
        ));
    }

    #[test]
    fn pre_event_augmentation_exposes_unrevealed_assignment() {
        // With m = c on [s, t_i(w)), the estimator at s is c + 1[w_i = w](0 - c)/π,
        // which differs between the two assignments of the still-pending unit.
        let (c, pi) = (0.4, 0.5);
        let value = |assigned: bool| c + if assigned { (0.0 - c) / pi } else { 0.0 };
        assert_ne!(value(true), value(false));
        // Under event-time augmentation the pre-event value is zero either way.
        let (j1, _, _) = unit_jump(0.0, 0.0, true, pi);
        let (j0, _, _) = unit_jump(0.0, 0.0, false, pi);
        assert_eq!(j1, j0);
    }

    fn arb_case() -> impl Strategy<Value = (PotentialOutcomeTable, AssignmentVector)> {
        prop::collection::vec(
            (
                0.0..10.0f64,
                0.01..20.0f64,
                0.01..20.0f64,
                -10.0..10.0f64,
                -10.0..10.0f64,
                0.01..0.99f64,
                any::<bool>(),
            ),
            1..40,
        )
        .prop_map(|rows| {
            let arms = rows
                .iter()
                .map(|r| if r.6 { Arm::Treatment } else { Arm::Control })
                .collect();
            let units = rows
                .into_iter()
                .enumerate()
                .map(|(i, (e, d0, d1, y0, y1, p, _))| PotentialUnit {
                    unit_id: i,
                    entry_time: e,
                    event_time: [e + d0, e + d1],
                    outcome: [y0, y1],
                    propensity: p,
                })
                .collect();
            (
                PotentialOutcomeTable::new(units, Bounds::new(10.0, 0.01).unwrap()).unwrap(),
                AssignmentVector::new(arms),
            )
        })
    }

    proptest! {
        #[test]
        fn clocks_nondecreasing_and_bounded((table, a) in arb_case()) {
            let bound = table.bounds().max_variance_jump();
            for policy in [AugmentationPolicy::Zero, AugmentationPolicy::RunningMean] {
                let est = aipw_paths(&table, &a, &policy).unwrap();
                for arm in Arm::BOTH {
                    prop_assert!(est.variance(arm).is_nondecreasing());
                    prop_assert!(est.variance(arm).max_jump() <= bound);
                }
                prop_assert!(est.sigma_sq.is_nondecreasing());
                for t in crate::step::union_times(&[&est.reward[0], &est.reward[1]]) {
                    prop_assert_eq!(est.delta.eval(t), est.reward[1].eval(t) - est.reward[0].eval(t));
                }
            }
        }
    }
}
