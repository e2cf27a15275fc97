//! Property tests for boundaries, bands, p-values and exact moments.

use avdelay::diagnostics::{arm_moments_exact, delta_cov_exact, delta_var_exact, violation_surface};
use avdelay::{
    aipw_paths, difference_cs, mixture_boundary, relative_width, sequential_p_value, single_arm_cs, Arm,
    AssignmentVector, AugmentationPolicy, BoundaryConfig, Bounds, PotentialOutcomeTable, PotentialUnit, StepPath,
};
use proptest::prelude::*;

fn arb_case() -> impl Strategy<Value = (PotentialOutcomeTable, AssignmentVector)> {
    prop::collection::vec(
        (
            0.0..10.0f64,
            0.01..20.0f64,
            0.01..20.0f64,
            -5.0..5.0f64,
            -5.0..5.0f64,
            0.05..0.95f64,
            any::<bool>(),
        ),
        1..30,
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
            PotentialOutcomeTable::new(units, Bounds::default()).unwrap(),
            AssignmentVector::new(arms),
        )
    })
}

fn custom_policy(table: &PotentialOutcomeTable, seed: f64) -> AugmentationPolicy {
    AugmentationPolicy::CustomPerUnit(
        (0..table.len())
            .map(|i| [(seed + i as f64).sin(), (seed * 2.0 + i as f64).cos()])
            .collect(),
    )
}

proptest! {
    #[test]
    fn boundary_monotone(v in 0.0..1e8f64, dv in 1e-3..1e6f64, a in 1e-6..0.9f64, da in 1e-4..0.09f64, eta in 1e-3..10.0f64) {
        let b = mixture_boundary(v, a, eta).unwrap();
        prop_assert!(b > 0.0);
        prop_assert!(mixture_boundary(v + dv, a, eta).unwrap() > b);
        prop_assert!(mixture_boundary(v, a + da, eta).unwrap() < b);
    }

    #[test]
    fn bands_bracket_center_and_nest((table, a) in arb_case()) {
        let est = aipw_paths(&table, &a, &AugmentationPolicy::RunningMean).unwrap();
        let wide = BoundaryConfig::new(1.0 / 16.0, 0.01).unwrap();
        let narrow = BoundaryConfig::new(1.0 / 16.0, 0.05).unwrap();
        let pairs = [
            (single_arm_cs(&est.reward[0], &est.variance[0], &wide), single_arm_cs(&est.reward[0], &est.variance[0], &narrow)),
            (single_arm_cs(&est.reward[1], &est.variance[1], &wide), single_arm_cs(&est.reward[1], &est.variance[1], &narrow)),
            (difference_cs(&est.delta, &est.variance[0], &est.variance[1], &wide), difference_cs(&est.delta, &est.variance[0], &est.variance[1], &narrow)),
        ];
        for (w, n) in &pairs {
            let mut times = vec![0.0];
            times.extend(avdelay::step::union_times(&[&w.lower, &n.lower]));
            for t in times {
                let c = w.center.eval(t);
                prop_assert!(w.lower.eval(t) <= c && c <= w.upper.eval(t));
                prop_assert!(w.lower.eval(t) <= n.lower.eval(t) && n.upper.eval(t) <= w.upper.eval(t));
            }
        }
    }

    #[test]
    fn p_value_nonincreasing_in_statistic(d in 0.0..200.0f64, dd in 0.0..50.0f64, v0 in 0.0..1e4f64, v1 in 0.0..1e4f64) {
        let p = sequential_p_value(d, v0, v1, 1.0 / 16.0).unwrap();
        let q = sequential_p_value(d + dd, v0, v1, 1.0 / 16.0).unwrap();
        prop_assert!(q <= p);
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert_eq!(sequential_p_value(-d, v0, v1, 1.0 / 16.0).unwrap(), p);
    }

    #[test]
    fn diagonal_identity_and_symmetry((table, _) in arb_case(), s in 0.0..30.0f64, dt in 0.0..20.0f64, seed in 0.0..10.0f64) {
        for policy in [AugmentationPolicy::Zero, custom_policy(&table, seed)] {
            prop_assert_eq!(delta_cov_exact(&table, &policy, s, s).unwrap(), delta_var_exact(&table, &policy, s).unwrap());
            let surf = violation_surface(&table, &policy, &[s, s + dt]).unwrap();
            prop_assert_eq!(surf.values[0][0], 0.0);
            prop_assert_eq!(surf.values[1][1], 0.0);
            prop_assert_eq!(surf.values[0][1], surf.values[1][0]);
            for arm in Arm::BOTH {
                prop_assert_eq!(arm_moments_exact(&table, &policy, arm, s, s + dt).unwrap().violation, 0.0);
            }
        }
    }

    #[test]
    fn synchronized_arms_never_violate((table, _) in arb_case(), s in 0.0..30.0f64, dt in 0.0..20.0f64) {
        // Identical event times in both arms: residual differences only move at
        // a common time, so no unit straddles (s, t].
        let units = table.units().iter().map(|u| PotentialUnit { event_time: [u.event_time[0]; 2], ..u.clone() }).collect();
        let sync = PotentialOutcomeTable::new(units, Bounds::default()).unwrap();
        let surf = violation_surface(&sync, &AugmentationPolicy::Zero, &[s, s + dt]).unwrap();
        prop_assert!(surf.values[0][1].abs() < 1e-9);
    }

    #[test]
    fn relative_width_is_positive(v0 in 0.0..1e9f64, v1 in 0.0..1e9f64, pi in 0.01..0.99f64) {
        let r = relative_width(v0, v1, pi, 0.05, 1.0 / 16.0).unwrap();
        prop_assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn step_subtraction_pointwise(a in prop::collection::vec((0.0..10.0f64, -3.0..3.0f64), 0..20),
                                  b in prop::collection::vec((0.0..10.0f64, -3.0..3.0f64), 0..20)) {
        let p = StepPath::from_increments(0.0, a);
        let q = StepPath::from_increments(1.0, b);
        let d = &p - &q;
        let mut probes: Vec<f64> = (0..=200).map(|k| k as f64 * 0.055).collect();
        probes.extend(avdelay::step::union_times(&[&p, &q]));
        for t in probes {
            prop_assert!((d.eval(t) - (p.eval(t) - q.eval(t))).abs() < 1e-12);
        }
    }
}

#[test]
fn relative_width_at_zero_clocks() {
    let r = relative_width(0.0, 0.0, 0.5, 0.05, 1.0 / 16.0).unwrap();
    let b = |a: f64| mixture_boundary(0.0, a, 1.0 / 16.0).unwrap();
    assert!((r - 2.0 * b(0.025) / b(0.05)).abs() < 1e-12);
    assert!(r > 1.0);
}
