//! Design-based second moments and Monte Carlo over assignments.
//!
//! A square-integrable martingale started at zero satisfies
//! `Cov(M_s, M_t) = Var(M_s)` for `s <= t`. For the difference error
//! `Δ̂_t - Δ_t` the exact randomization moments break this identity whenever a
//! unit has one arm's event before `s` and the other's in `(s, t]`, so no
//! filtration can make it a martingale. [`violation_surface`] evaluates the gap
//! exactly; the Monte Carlo helpers check the same moments empirically.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{aipw_paths, AugmentationPolicy};
use crate::model::{true_delta_path, true_reward_path, Arm, AssignmentVector, PotentialOutcomeTable};
use crate::rng::{domain, stream_rng};
use crate::stats::{compensated_sum, covariance, MeanEstimate};

/// Exact and Monte Carlo second moments at a pair of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub s: f64,
    pub t: f64,
    pub exact: Option<ExactMoments>,
    pub mc: Option<McMoments>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub covariance: f64,
    pub variance: f64,
    /// `covariance - variance`.
    pub violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McMoments {
    pub covariance: MeanEstimate,
    pub variance: MeanEstimate,
    pub violation: MeanEstimate,
    pub reps: usize,
}

fn fixed_residuals(table: &PotentialOutcomeTable, policy: &AugmentationPolicy) -> Result<[Vec<f64>; 2]> {
    if !policy.is_assignment_independent() {
        return Err(Error::domain(
            "exact moments need assignment-independent augmentation (Zero or CustomPerUnit)",
        ));
    }
    let f = policy.values(table, None)?;
    let r = |w: usize| -> Vec<f64> {
        table
            .units()
            .iter()
            .zip(&f[w])
            .map(|(u, fi)| u.outcome[w] - fi)
            .collect()
    };
    Ok([r(0), r(1)])
}

// Residual e_it(w) of the step-form augmentation.
#[inline]
fn residual_at(event_time: f64, post_event: f64, t: f64) -> f64 {
    if event_time <= t {
        post_event
    } else {
        0.0
    }
}

fn cov_with(table: &PotentialOutcomeTable, resid: &[Vec<f64>; 2], s: f64, t: f64) -> f64 {
    compensated_sum(
        table
            .units()
            .iter()
            .enumerate()
            .filter(|(_, u)| u.entry_time <= t)
            .map(|(i, u)| {
                let es = Arm::BOTH.map(|a| residual_at(u.event_time(a), resid[a.index()][i], s));
                let et = Arm::BOTH.map(|a| residual_at(u.event_time(a), resid[a.index()][i], t));
                es[1] * et[1] / u.propensity(Arm::Treatment) + es[0] * et[0] / u.propensity(Arm::Control)
                    - (es[1] - es[0]) * (et[1] - et[0])
            }),
    )
}

/// Exact `Cov(Δ̂_s, Δ̂_t)` for `s <= t`.
pub fn delta_cov_exact(table: &PotentialOutcomeTable, policy: &AugmentationPolicy, s: f64, t: f64) -> Result<f64> {
    if s > t {
        return Err(Error::domain(format!("covariance needs s <= t, got s={s}, t={t}")));
    }
    let resid = fixed_residuals(table, policy)?;
    Ok(cov_with(table, &resid, s, t))
}

/// Exact `Var(Δ̂_s)`.
pub fn delta_var_exact(table: &PotentialOutcomeTable, policy: &AugmentationPolicy, s: f64) -> Result<f64> {
    let resid = fixed_residuals(table, policy)?;
    Ok(cov_with(table, &resid, s, s))
}

/// Exact moments of the single-arm error `M_t(w) = r̂_t(w) - r_t(w)`.
pub fn arm_moments_exact(
    table: &PotentialOutcomeTable,
    policy: &AugmentationPolicy,
    arm: Arm,
    s: f64,
    t: f64,
) -> Result<ExactMoments> {
    if s > t {
        return Err(Error::domain(format!("covariance needs s <= t, got s={s}, t={t}")));
    }
    let resid = fixed_residuals(table, policy)?;
    let w = arm.index();
    let term = |a: f64, b: f64| {
        compensated_sum(table.units().iter().enumerate().map(|(i, u)| {
            let pi = u.propensity(arm);
            (1.0 - pi) / pi
                * residual_at(u.event_time(arm), resid[w][i], a)
                * residual_at(u.event_time(arm), resid[w][i], b)
        }))
    };
    let (covariance, variance) = (term(s, t), term(s, s));
    Ok(ExactMoments {
        covariance,
        variance,
        violation: covariance - variance,
    })
}

/// `Cov(Δ̂_s, Δ̂_t) - Var(Δ̂_min(s,t))` on a grid of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationSurface {
    pub times: Vec<f64>,
    /// `values[a][b]` for `(times[a], times[b])`.
    pub values: Vec<Vec<f64>>,
}

impl ViolationSurface {
    pub fn max_off_diagonal(&self) -> f64 {
        let mut best = 0.0f64;
        for (a, row) in self.values.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                if a != b {
                    best = best.max(v.abs());
                }
            }
        }
        best
    }
}

pub fn violation_surface(
    table: &PotentialOutcomeTable,
    policy: &AugmentationPolicy,
    grid: &[f64],
) -> Result<ViolationSurface> {
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::domain("violation grid must be sorted"));
    }
    let resid = fixed_residuals(table, policy)?;
    let var: Vec<f64> = grid.iter().map(|&s| cov_with(table, &resid, s, s)).collect();
    let n = grid.len();
    let mut values = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let v = cov_with(table, &resid, grid[a], grid[b]) - var[a];
            values[a][b] = v;
            values[b][a] = v;
        }
    }
    Ok(ViolationSurface {
        times: grid.to_vec(),
        values,
    })
}

/// Independent Bernoulli assignment for replication `rep`.
pub fn draw_assignment(table: &PotentialOutcomeTable, master_seed: u64, rep: u64) -> AssignmentVector {
    let mut rng = stream_rng(master_seed, domain::ASSIGNMENT, rep);
    AssignmentVector::new(
        table
            .units()
            .iter()
            .map(|u| {
                if rng.gen::<f64>() < u.propensity {
                    Arm::Treatment
                } else {
                    Arm::Control
                }
            })
            .collect(),
    )
}

/// Runs `f` on `reps` independent assignment draws, in parallel, returning
/// results in replication order.
pub fn replicate<T, F>(table: &PotentialOutcomeTable, master_seed: u64, reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &AssignmentVector) -> Result<T> + Sync,
{
    if reps < 2 {
        return Err(Error::domain(format!("need at least 2 replications, got {reps}")));
    }
    (0..reps)
        .into_par_iter()
        .map(|r| f(r, &draw_assignment(table, master_seed, r as u64)))
        .collect()
}

/// Augmentation values drawn once per unit from a uniform range per arm.
pub fn uniform_augmentation(table: &PotentialOutcomeTable, seed: u64, ranges: [(f64, f64); 2]) -> AugmentationPolicy {
    let mut rng = stream_rng(seed, domain::AUGMENTATION, 0);
    let values = (0..table.len())
        .map(|_| ranges.map(|(lo, hi)| rng.gen_range(lo..hi)))
        .collect();
    AugmentationPolicy::CustomPerUnit(values)
}

/// Deciles of the event-time range followed by the final horizon.
pub fn default_probes(table: &PotentialOutcomeTable) -> Vec<f64> {
    let times = table.units().iter().flat_map(|u| u.event_time);
    let (lo, hi) = times.fold((f64::INFINITY, 0.0f64), |(lo, hi), t| (lo.min(t), hi.max(t)));
    if table.is_empty() {
        return vec![0.0];
    }
    (1..=10)
        .map(|k| if k == 10 { hi } else { lo + (hi - lo) * k as f64 / 10.0 })
        .collect()
}

/// Monte Carlo mean of each estimator against its truth at one probe time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeMoments {
    pub time: f64,
    /// Truth for `r(0)`, `r(1)`, `Δ`.
    pub truth: [f64; 3],
    pub mean: [MeanEstimate; 3],
}

impl ProbeMoments {
    pub fn max_z(&self) -> f64 {
        (0..3).map(|k| self.mean[k].z_score(self.truth[k])).fold(0.0, f64::max)
    }
}

pub fn estimator_moments(
    table: &PotentialOutcomeTable,
    policy: &AugmentationPolicy,
    reps: usize,
    master_seed: u64,
    probes: &[f64],
) -> Result<Vec<ProbeMoments>> {
    check_probes(probes)?;
    let draws = replicate(table, master_seed, reps, |_, a| {
        let est = aipw_paths(table, a, policy)?;
        Ok([
            est.reward[0].sample_sorted(probes),
            est.reward[1].sample_sorted(probes),
            est.delta.sample_sorted(probes),
        ])
    })?;
    let truth = [
        true_reward_path(table, Arm::Control).sample_sorted(probes),
        true_reward_path(table, Arm::Treatment).sample_sorted(probes),
        true_delta_path(table).sample_sorted(probes),
    ];
    Ok(probes
        .iter()
        .enumerate()
        .map(|(k, &time)| {
            let col = |j: usize| draws.iter().map(|d| d[j][k]).collect::<Vec<f64>>();
            ProbeMoments {
                time,
                truth: [truth[0][k], truth[1][k], truth[2][k]],
                mean: [0, 1, 2].map(|j| MeanEstimate::from_samples(&col(j))),
            }
        })
        .collect())
}

fn check_probes(probes: &[f64]) -> Result<()> {
    if probes.is_empty() {
        return Err(Error::domain("probe list is empty"));
    }
    if probes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::domain("probe times must be sorted"));
    }
    Ok(())
}

fn mc_moments(xs: &[f64], ys: &[f64]) -> McMoments {
    let n = xs.len();
    let mx = compensated_sum(xs.iter().copied()) / n as f64;
    let my = compensated_sum(ys.iter().copied()) / n as f64;
    // Per-draw contribution to cov - var; its mean is the violation estimate.
    let gap: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * ((y - my) - (x - mx)))
        .collect();
    McMoments {
        covariance: covariance(xs, ys),
        variance: covariance(xs, xs),
        violation: MeanEstimate::from_samples(&gap),
        reps: n,
    }
}

fn sorted_pairs(pairs: &[(f64, f64)]) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::domain("probe list is empty"));
    }
    if let Some(&(s, t)) = pairs.iter().find(|(s, t)| s > t) {
        return Err(Error::domain(format!("pairs need s <= t, got ({s}, {t})")));
    }
    let mut times: Vec<f64> = pairs.iter().flat_map(|&(s, t)| [s, t]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times)
}

/// Exact and Monte Carlo moments of `Δ̂` at each `(s, t)` pair.
pub fn delta_moments(
    table: &PotentialOutcomeTable,
    policy: &AugmentationPolicy,
    reps: usize,
    master_seed: u64,
    pairs: &[(f64, f64)],
) -> Result<Vec<MomentReport>> {
    let times = sorted_pairs(pairs)?;
    let draws = replicate(table, master_seed, reps, |_, a| {
        Ok(aipw_paths(table, a, policy)?.delta.sample_sorted(&times))
    })?;
    let exact = policy.is_assignment_independent();
    pairs
        .iter()
        .map(|&(s, t)| {
            let (ks, kt) = (index_of(&times, s), index_of(&times, t));
            let xs: Vec<f64> = draws.iter().map(|d| d[ks]).collect();
            let ys: Vec<f64> = draws.iter().map(|d| d[kt]).collect();
            let exact = if exact {
                let covariance = delta_cov_exact(table, policy, s, t)?;
                let variance = delta_var_exact(table, policy, s)?;
                Some(ExactMoments {
                    covariance,
                    variance,
                    violation: covariance - variance,
                })
            } else {
                None
            };
            Ok(MomentReport {
                s,
                t,
                exact,
                mc: Some(mc_moments(&xs, &ys)),
            })
        })
        .collect()
}

/// Exact (when available) and Monte Carlo moments of the single-arm error.
pub fn arm_moments(
    table: &PotentialOutcomeTable,
    policy: &AugmentationPolicy,
    arm: Arm,
    reps: usize,
    master_seed: u64,
    pairs: &[(f64, f64)],
) -> Result<Vec<MomentReport>> {
    let times = sorted_pairs(pairs)?;
    let truth = true_reward_path(table, arm).sample_sorted(&times);
    let draws = replicate(table, master_seed, reps, |_, a| {
        let est = aipw_paths(table, a, policy)?.reward[arm.index()].sample_sorted(&times);
        Ok(est.iter().zip(&truth).map(|(e, r)| e - r).collect::<Vec<f64>>())
    })?;
    pairs
        .iter()
        .map(|&(s, t)| {
            let (ks, kt) = (index_of(&times, s), index_of(&times, t));
            let xs: Vec<f64> = draws.iter().map(|d| d[ks]).collect();
            let ys: Vec<f64> = draws.iter().map(|d| d[kt]).collect();
            let exact = if policy.is_assignment_independent() {
                Some(arm_moments_exact(table, policy, arm, s, t)?)
            } else {
                None
            };
            Ok(MomentReport {
                s,
                t,
                exact,
                mc: Some(mc_moments(&xs, &ys)),
            })
        })
        .collect()
}

fn index_of(times: &[f64], t: f64) -> usize {
    times.partition_point(|&x| x < t)
}

/// Monte Carlo mean of one unit's jump in the arm's error process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpMean {
    pub unit_id: usize,
    pub event_time: f64,
    pub mean: MeanEstimate,
}

/// Mean of each jump `(1[w_i = w]/π_i(w) - 1)(y_i(w) - f_i(w))` of `M_t(arm)`,
/// which is zero for every admissible augmentation.
pub fn jump_means(
    table: &PotentialOutcomeTable,
    policy: &AugmentationPolicy,
    arm: Arm,
    reps: usize,
    master_seed: u64,
) -> Result<Vec<JumpMean>> {
    let order = table.event_order(arm);
    let draws = replicate(table, master_seed, reps, |_, a| {
        let f = policy.values(table, Some(a))?;
        Ok(order
            .iter()
            .map(|&i| {
                let u = &table.units()[i];
                let pi = u.propensity(arm);
                let z = if a.get(i) == arm { 1.0 / pi } else { 0.0 } - 1.0;
                z * (u.outcome(arm) - f[arm.index()][i])
            })
            .collect::<Vec<f64>>())
    })?;
    Ok(order
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
            JumpMean {
                unit_id: table.units()[i].unit_id,
                event_time: table.units()[i].event_time(arm),
                mean: MeanEstimate::from_samples(&col),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bounds, PotentialUnit};

    fn single(t: [f64; 2], y: [f64; 2]) -> PotentialOutcomeTable {
        PotentialOutcomeTable::new(
            vec![PotentialUnit {
                unit_id: 0,
                entry_time: 0.0,
                event_time: t,
                outcome: y,
                propensity: 0.5,
            }],
            Bounds::default(),
        )
        .unwrap()
    }

    #[test]
    fn variance_single_unit() {
        let table = single([3.39, 0.94], [0.19, 0.28]);
        let v = delta_var_exact(&table, &AugmentationPolicy::Zero, 4.0).unwrap();
        assert!((v - 0.2209).abs() < 1e-12);
        assert_eq!(delta_var_exact(&table, &AugmentationPolicy::Zero, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn variance_matches_unit_decomposition() {
        // (1-π1)/π1 e1² + (1-π0)/π0 e0² + 2 e1 e0 against the cross-term form.
        for (e1, e0, p) in [(0.28, 0.19, 0.5), (1.3, -0.4, 0.2), (-2.0, 0.7, 0.9)] {
            let table = PotentialOutcomeTable::new(
                vec![PotentialUnit {
                    unit_id: 0,
                    entry_time: 0.0,
                    event_time: [1.0, 1.0],
                    outcome: [e0, e1],
                    propensity: p,
                }],
                Bounds::default(),
            )
            .unwrap();
            let q = 1.0 - p;
            let expanded = q / p * e1 * e1 + p / q * e0 * e0 + 2.0 * e1 * e0;
            let v = delta_var_exact(&table, &AugmentationPolicy::Zero, 2.0).unwrap();
            assert!((v - expanded).abs() < 1e-12);
        }
    }

    #[test]
    fn covariance_before_events_is_zero() {
        let table = single([3.0, 2.0], [0.5, 0.4]);
        assert_eq!(
            delta_cov_exact(&table, &AugmentationPolicy::Zero, 1.0, 5.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn covariance_errors() {
        let table = single([3.0, 2.0], [0.5, 0.4]);
        assert!(delta_cov_exact(&table, &AugmentationPolicy::Zero, 5.0, 1.0).is_err());
        assert!(delta_cov_exact(&table, &AugmentationPolicy::RunningMean, 1.0, 5.0).is_err());
        assert!(violation_surface(&table, &AugmentationPolicy::Zero, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn straddling_unit_violates() {
        // Arm-1 event at 1, arm-0 event at 3: with s = 2, t = 4 the gap is
        // -(e_s(1) - e_s(0))·((e_t(1) - e_s(1)) - (e_t(0) - e_s(0))) = -(0.4)(-0.5) = 0.2.
        let table = single([3.0, 1.0], [0.5, 0.4]);
        let surf = violation_surface(&table, &AugmentationPolicy::Zero, &[2.0, 4.0]).unwrap();
        assert!((surf.values[0][1] - 0.2).abs() < 1e-12);
        assert_eq!(surf.values[0][0], 0.0);
        assert_eq!(surf.values[1][1], 0.0);
        // Single-arm errors satisfy the martingale identity exactly.
        for arm in Arm::BOTH {
            let m = arm_moments_exact(&table, &AugmentationPolicy::Zero, arm, 2.0, 4.0).unwrap();
            assert_eq!(m.violation, 0.0);
        }
    }

    #[test]
    fn synchronized_identical_units_do_not_violate() {
        // Equal times and outcomes: both residuals move together, so the gap is zero.
        let table = single([2.0, 2.0], [0.7, 0.7]);
        let surf = violation_surface(&table, &AugmentationPolicy::Zero, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(surf.max_off_diagonal(), 0.0);
    }

    #[test]
    fn replicate_needs_two() {
        let table = single([2.0, 2.0], [0.7, 0.7]);
        assert!(replicate(&table, 1, 1, |_, _| Ok(())).is_err());
        assert!(estimator_moments(&table, &AugmentationPolicy::Zero, 10, 1, &[]).is_err());
    }

    #[test]
    fn assignments_are_deterministic() {
        let table = single([2.0, 2.0], [0.7, 0.7]);
        assert_eq!(draw_assignment(&table, 3, 17), draw_assignment(&table, 3, 17));
        let draws: Vec<_> = (0..64).map(|r| draw_assignment(&table, 3, r).get(0)).collect();
        assert!(draws.contains(&Arm::Control) && draws.contains(&Arm::Treatment));
    }

    #[test]
    fn probes_are_deciles_plus_horizon() {
        let table = single([2.0, 12.0], [0.7, 0.7]);
        let p = default_probes(&table);
        assert_eq!(p.len(), 10);
        assert!((p[0] - 3.0).abs() < 1e-12);
        assert_eq!(*p.last().unwrap(), 12.0);
    }
}
