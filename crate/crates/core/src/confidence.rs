//! Normal-mixture boundaries and the confidence bands built from them.
//!
//! The boundary for an error process with variance clock `V` is
//!
//! ```text
//! b(V; α) = sqrt( (V η² + 1)/η² · log((V η² + 1)/α²) )
//! ```
//!
//! Arm-level sequences use `r̂_t(w) ± b(V̂_t(w); α)`. The difference of arms is
//! not a martingale under any filtration, so its sequence combines the two arm
//! boundaries at `α/2` each.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::chi_square_1_quantile;
use crate::step::{union_times, StepPath};

/// Mixture variance and level for a boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConfig {
    pub eta_sq: f64,
    pub alpha: f64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            eta_sq: 1.0 / 16.0,
            alpha: 0.05,
        }
    }
}

impl BoundaryConfig {
    pub fn new(eta_sq: f64, alpha: f64) -> Result<Self> {
        check_eta(eta_sq)?;
        check_alpha(alpha)?;
        Ok(BoundaryConfig { eta_sq, alpha })
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        BoundaryConfig::new(self.eta_sq, alpha)
    }

    /// `b(v; α)` at this configuration.
    pub fn boundary(&self, v: f64) -> f64 {
        boundary_unchecked(v, self.alpha, self.eta_sq)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

fn check_eta(eta_sq: f64) -> Result<()> {
    if eta_sq > 0.0 && eta_sq.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "eta_sq must be positive and finite, got {eta_sq}"
        )))
    }
}

#[inline]
fn boundary_unchecked(v: f64, alpha: f64, eta_sq: f64) -> f64 {
    let a = v * eta_sq;
    // log((Vη²+1)/α²) in log space so tiny α cannot overflow the ratio.
    let log_term = a.ln_1p() - 2.0 * alpha.ln();
    ((a + 1.0) / eta_sq * log_term).sqrt()
}

/// Normal-mixture boundary `b(v; α)` with mixture variance `eta_sq`.
pub fn mixture_boundary(v: f64, alpha: f64, eta_sq: f64) -> Result<f64> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::domain(format!(
            "variance clock must be finite and >= 0, got {v}"
        )));
    }
    check_alpha(alpha)?;
    check_eta(eta_sq)?;
    Ok(boundary_unchecked(v, alpha, eta_sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandKind {
    SingleArm,
    DifferenceUnion,
    ClassicalPointwise,
}

/// A center path with lower and upper envelopes, all materialized at the
/// union of the jump times of the center and its clock(s).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub center: StepPath,
    pub lower: StepPath,
    pub upper: StepPath,
    /// Nominal coverage `1 - α`.
    pub level: f64,
    pub kind: BandKind,
}

impl ConfidenceBand {
    fn build(
        center: &StepPath,
        clocks: &[&StepPath],
        half_width: impl Fn(&[f64]) -> f64,
        level: f64,
        kind: BandKind,
    ) -> Self {
        let mut all: Vec<&StepPath> = vec![center];
        all.extend_from_slice(clocks);
        let times = union_times(&all);
        let c = center.sample_sorted(&times);
        let clock_vals: Vec<Vec<f64>> = clocks.iter().map(|p| p.sample_sorted(&times)).collect();
        let init_clocks: Vec<f64> = clocks.iter().map(|p| p.initial()).collect();
        let h0 = half_width(&init_clocks);

        let mut lower = Vec::with_capacity(times.len());
        let mut upper = Vec::with_capacity(times.len());
        let mut buf = vec![0.0; clocks.len()];
        for (k, &t) in times.iter().enumerate() {
            for (slot, vals) in buf.iter_mut().zip(&clock_vals) {
                *slot = vals[k];
            }
            let h = half_width(&buf);
            lower.push((t, c[k] - h));
            upper.push((t, c[k] + h));
        }
        ConfidenceBand {
            center: center.clone(),
            lower: StepPath::from_jumps(center.initial() - h0, lower).expect("sorted union"),
            upper: StepPath::from_jumps(center.initial() + h0, upper).expect("sorted union"),
            level,
            kind,
        }
    }

    pub fn half_width_at(&self, t: f64) -> f64 {
        0.5 * (self.upper.eval(t) - self.lower.eval(t))
    }

    pub fn contains(&self, t: f64, value: f64) -> bool {
        self.lower.eval(t) <= value && value <= self.upper.eval(t)
    }

    /// Whether `truth` lies inside the band at every time.
    ///
    /// All paths are right-continuous steps, so checking the initial segment
    /// and every jump time of truth and band is exact.
    pub fn covers(&self, truth: &StepPath) -> bool {
        self.first_miss(truth).is_none()
    }

    /// Earliest time at which `truth` leaves the band, if any.
    pub fn first_miss(&self, truth: &StepPath) -> Option<f64> {
        if !(self.lower.initial() <= truth.initial() && truth.initial() <= self.upper.initial()) {
            return Some(0.0);
        }
        let times = union_times(&[truth, &self.lower, &self.upper]);
        let tv = truth.sample_sorted(&times);
        let lo = self.lower.sample_sorted(&times);
        let hi = self.upper.sample_sorted(&times);
        (0..times.len())
            .find(|&k| !(lo[k] <= tv[k] && tv[k] <= hi[k]))
            .map(|k| times[k])
    }
}

/// Arm-level confidence sequence `r̂ ± b(V̂; α)` at level `1 - α`.
pub fn single_arm_cs(r_hat: &StepPath, v_hat: &StepPath, cfg: &BoundaryConfig) -> ConfidenceBand {
    let cfg = *cfg;
    ConfidenceBand::build(
        r_hat,
        &[v_hat],
        move |v| cfg.boundary(v[0]),
        1.0 - cfg.alpha,
        BandKind::SingleArm,
    )
}

/// Difference sequence `Δ̂ ± (b(V̂₀; α/2) + b(V̂₁; α/2))` at level `1 - α`.
pub fn difference_cs(
    delta_hat: &StepPath,
    v_hat_0: &StepPath,
    v_hat_1: &StepPath,
    cfg: &BoundaryConfig,
) -> ConfidenceBand {
    let half = BoundaryConfig {
        eta_sq: cfg.eta_sq,
        alpha: cfg.alpha / 2.0,
    };
    ConfidenceBand::build(
        delta_hat,
        &[v_hat_0, v_hat_1],
        move |v| half.boundary(v[0]) + half.boundary(v[1]),
        1.0 - cfg.alpha,
        BandKind::DifferenceUnion,
    )
}

/// Fixed-time intervals `center ± sqrt(χ²₁,α · clock)`; valid only pointwise.
pub fn classical_pointwise(center: &StepPath, clock: &StepPath, alpha: f64) -> Result<ConfidenceBand> {
    let chi2 = chi_square_1_quantile(1.0 - alpha)?;
    Ok(ConfidenceBand::build(
        center,
        &[clock],
        move |v| (chi2 * v[0].max(0.0)).sqrt(),
        1.0 - alpha,
        BandKind::ClassicalPointwise,
    ))
}

const P_FLOOR: f64 = 1e-12;

/// Smallest `α` at which the difference sequence excludes zero.
///
/// The union half-width is strictly decreasing in `α`, so the crossing is found
/// by bisection on `log α` over `(1e-12, 1)`. Returns `1` when even `α → 1`
/// does not exclude zero and the floor `1e-12` when every `α` does.
pub fn sequential_p_value(delta_hat: f64, v0: f64, v1: f64, eta_sq: f64) -> Result<f64> {
    for v in [v0, v1] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::domain(format!(
                "variance clocks must be finite and >= 0, got {v}"
            )));
        }
    }
    check_eta(eta_sq)?;
    if !delta_hat.is_finite() {
        return Err(Error::domain("non-finite difference estimate"));
    }
    let stat = delta_hat.abs();
    let width = |alpha: f64| boundary_unchecked(v0, alpha / 2.0, eta_sq) + boundary_unchecked(v1, alpha / 2.0, eta_sq);
    if stat <= width(1.0) {
        return Ok(1.0);
    }
    if stat > width(P_FLOOR) {
        return Ok(P_FLOOR);
    }
    // Invariant: width(lo) >= stat > width(hi).
    let (mut lo, mut hi) = (P_FLOOR.ln(), 0.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if width(mid.exp()) >= stat {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi.exp() - lo.exp() <= 1e-9 * lo.exp().min(1e-3) {
            break;
        }
    }
    Ok(hi.exp())
}

/// Instantaneous p-value process over the jump times of the inputs.
pub fn p_value_path(delta_hat: &StepPath, v_hat_0: &StepPath, v_hat_1: &StepPath, eta_sq: f64) -> Result<StepPath> {
    let times = union_times(&[delta_hat, v_hat_0, v_hat_1]);
    let d = delta_hat.sample_sorted(&times);
    let a = v_hat_0.sample_sorted(&times);
    let b = v_hat_1.sample_sorted(&times);
    let initial = sequential_p_value(delta_hat.initial(), v_hat_0.initial(), v_hat_1.initial(), eta_sq)?;
    let jumps = (0..times.len())
        .map(|k| Ok((times[k], sequential_p_value(d[k], a[k], b[k], eta_sq)?)))
        .collect::<Result<Vec<_>>>()?;
    StepPath::from_jumps(initial, jumps)
}

/// Running minimum of a p-value process.
pub fn running_minimum(path: &StepPath) -> StepPath {
    let mut best = path.initial();
    let jumps: Vec<(f64, f64)> = path
        .jumps()
        .map(|(t, v)| {
            best = best.min(v);
            (t, best)
        })
        .collect();
    StepPath::from_jumps(path.initial(), jumps).expect("same jump times")
}

/// Ratio of the union half-width to the variance-upper-bound half-width,
/// `[b(v0; α/2) + b(v1; α/2)] / b(v1/(1-π) + v0/π; α)`.
pub fn relative_width(v0: f64, v1: f64, pi: f64, alpha: f64, eta_sq: f64) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::domain(format!("pi must lie in (0,1), got {pi}")));
    }
    let num = mixture_boundary(v0, alpha / 2.0, eta_sq)? + mixture_boundary(v1, alpha / 2.0, eta_sq)?;
    let den = mixture_boundary(v1 / (1.0 - pi) + v0 / pi, alpha, eta_sq)?;
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ETA: f64 = 1.0 / 16.0;

    #[test]
    fn boundary_reference_values() {
        let b0 = mixture_boundary(0.0, 0.05, ETA).unwrap();
        assert!((b0 - (16.0 * 400f64.ln()).sqrt()).abs() < 1e-12);
        assert!((b0 - 9.7910).abs() < 1e-4);
        let b16 = mixture_boundary(16.0, 0.05, ETA).unwrap();
        assert!((b16 - (32.0 * 800f64.ln()).sqrt()).abs() < 1e-12);
        assert!((b16 - 14.626).abs() < 1e-3);
        let b16_10 = mixture_boundary(16.0, 0.1, ETA).unwrap();
        assert!((b16_10 - 13.02).abs() < 5e-3);
        assert!(b16_10 < b16);
    }

    #[test]
    fn boundary_domain_errors() {
        assert!(mixture_boundary(-1.0, 0.05, ETA).is_err());
        assert!(mixture_boundary(1.0, 0.0, ETA).is_err());
        assert!(mixture_boundary(1.0, 1.0, ETA).is_err());
        assert!(mixture_boundary(1.0, 0.05, 0.0).is_err());
        assert!(BoundaryConfig::new(ETA, 1.5).is_err());
    }

    #[test]
    fn boundary_monotone_on_grid() {
        let vs = [0.0, 0.1, 1.0, 10.0, 100.0, 1e4, 1e8];
        for eta in [0.01, ETA, 1.0] {
            for alpha in [1e-6, 0.01, 0.05, 0.5] {
                for w in vs.windows(2) {
                    assert!(mixture_boundary(w[0], alpha, eta).unwrap() < mixture_boundary(w[1], alpha, eta).unwrap());
                }
            }
            for v in vs {
                let a = mixture_boundary(v, 0.01, eta).unwrap();
                let b = mixture_boundary(v, 0.05, eta).unwrap();
                assert!(a > b);
            }
        }
    }

    #[test]
    fn tiny_alpha_does_not_overflow() {
        let b = mixture_boundary(1e300, 1e-300, ETA).unwrap();
        assert!(b.is_finite());
    }

    #[test]
    fn zero_band_is_constant() {
        let cfg = BoundaryConfig::new(ETA, 0.05).unwrap();
        let band = single_arm_cs(&StepPath::default(), &StepPath::default(), &cfg);
        let b0 = cfg.boundary(0.0);
        assert_eq!(band.upper.eval(7.0), b0);
        assert_eq!(band.lower.eval(0.0), -b0);
        assert_eq!(band.kind, BandKind::SingleArm);
    }

    fn sample_paths() -> (StepPath, StepPath, StepPath) {
        let r = StepPath::from_increments(0.0, [(1.0, 2.0), (2.0, 0.0), (3.5, 4.0)]);
        let v0 = StepPath::from_increments(0.0, [(1.0, 1.0), (2.5, 3.0)]);
        let v1 = StepPath::from_increments(0.0, [(0.5, 9.0), (3.5, 16.0)]);
        (r, v0, v1)
    }

    #[test]
    fn bands_nest_in_alpha() {
        let (r, v0, v1) = sample_paths();
        let wide = BoundaryConfig::new(ETA, 0.01).unwrap();
        let narrow = BoundaryConfig::new(ETA, 0.10).unwrap();
        let pairs = [
            (single_arm_cs(&r, &v0, &wide), single_arm_cs(&r, &v0, &narrow)),
            (difference_cs(&r, &v0, &v1, &wide), difference_cs(&r, &v0, &v1, &narrow)),
        ];
        for (w, n) in pairs {
            for t in union_times(&[&w.lower, &n.lower]).into_iter().chain([0.0]) {
                assert!(w.lower.eval(t) <= n.lower.eval(t));
                assert!(w.upper.eval(t) >= n.upper.eval(t));
                assert!(w.lower.eval(t) <= w.center.eval(t) && w.center.eval(t) <= w.upper.eval(t));
            }
        }
    }

    #[test]
    fn band_jump_times_are_union() {
        let (r, v0, v1) = sample_paths();
        let band = difference_cs(&r, &v0, &v1, &BoundaryConfig::default());
        assert_eq!(band.upper.jump_times(), union_times(&[&r, &v0, &v1]).as_slice());
    }

    #[test]
    fn difference_half_widths() {
        let cfg = BoundaryConfig::new(ETA, 0.05).unwrap();
        let v = StepPath::from_increments(0.0, [(1.0, 5.0)]);
        let zero = StepPath::default();
        let center = StepPath::default();
        let sym = difference_cs(&center, &v, &v, &cfg);
        let b = |x| mixture_boundary(x, 0.025, ETA).unwrap();
        assert!((sym.half_width_at(2.0) - 2.0 * b(5.0)).abs() < 1e-12);
        let asym = difference_cs(&center, &zero, &v, &cfg);
        assert!((asym.half_width_at(2.0) - (b(0.0) + b(5.0))).abs() < 1e-12);
        assert_eq!(asym.level, 0.95);
    }

    #[test]
    fn classical_band_widths() {
        let clock = StepPath::from_increments(0.0, [(1.0, 1.0)]);
        let band = classical_pointwise(&StepPath::default(), &clock, 0.05).unwrap();
        assert!((band.half_width_at(1.0) - 1.959_964).abs() < 1e-6);
        assert_eq!(band.half_width_at(0.5), 0.0);
        assert_eq!(band.kind, BandKind::ClassicalPointwise);
    }

    #[test]
    fn coverage_check_detects_misses() {
        let cfg = BoundaryConfig::new(ETA, 0.05).unwrap();
        let band = single_arm_cs(&StepPath::default(), &StepPath::default(), &cfg);
        let inside = StepPath::from_increments(0.0, [(1.0, 5.0)]);
        let outside = StepPath::from_increments(0.0, [(1.0, 5.0), (2.0, 20.0)]);
        assert!(band.covers(&inside));
        assert_eq!(band.first_miss(&outside), Some(2.0));
    }

    #[test]
    fn p_value_edge_cases() {
        assert_eq!(sequential_p_value(0.0, 3.0, 4.0, ETA).unwrap(), 1.0);
        let w1 = mixture_boundary(2.0, 0.5, ETA).unwrap() + mixture_boundary(3.0, 0.5, ETA).unwrap();
        assert_eq!(sequential_p_value(0.99 * w1, 2.0, 3.0, ETA).unwrap(), 1.0);
        assert!(sequential_p_value(1.0, -1.0, 0.0, ETA).is_err());
        assert_eq!(sequential_p_value(1e9, 0.0, 0.0, ETA).unwrap(), P_FLOOR);
    }

    #[test]
    fn p_value_plug_back() {
        let b = |v, a| mixture_boundary(v, a, ETA).unwrap();
        for stat in [25.0, 30.0, 40.0, 60.0, -45.0] {
            let p = sequential_p_value(stat, 16.0, 16.0, ETA).unwrap();
            assert!(p < 1.0 && p > P_FLOOR);
            let w = b(16.0, p / 2.0) + b(16.0, p / 2.0);
            assert!(((w - f64::abs(stat)) / stat).abs() < 1e-6, "stat={stat}");
        }
    }

    #[test]
    fn p_value_monotone_in_statistic() {
        let mut prev = 1.0;
        for k in 0..200 {
            let p = sequential_p_value(k as f64 * 0.5, 16.0, 40.0, ETA).unwrap();
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn running_min_is_nonincreasing() {
        let p = StepPath::from_jumps(1.0, [(1.0, 0.5), (2.0, 0.7), (3.0, 0.2), (4.0, 0.9)]).unwrap();
        let m = running_minimum(&p);
        assert_eq!(m.jump_values(), &[0.5, 0.5, 0.2, 0.2]);
    }

    #[test]
    fn relative_width_limits() {
        let sym = relative_width(1e8, 1e8, 0.5, 0.05, ETA).unwrap();
        assert!((sym - 1.0).abs() < 0.02, "{sym}");
        let asym = relative_width(1e2, 1e10, 0.5, 0.05, ETA).unwrap();
        assert!((asym - 0.5f64.sqrt()).abs() < 0.02, "{asym}");
        let origin = relative_width(0.0, 0.0, 0.5, 0.05, ETA).unwrap();
        let direct = 2.0 * mixture_boundary(0.0, 0.025, ETA).unwrap() / mixture_boundary(0.0, 0.05, ETA).unwrap();
        assert_eq!(origin, direct);
        assert!(origin > 1.0 && origin.is_finite());
        assert!(relative_width(1.0, 1.0, 1.0, 0.05, ETA).is_err());
    }

    #[test]
    fn union_can_beat_variance_bound() {
        let b = |v, a| mixture_boundary(v, a, ETA).unwrap();
        // Asymmetric clocks: union tighter.
        let (v0, v1) = (10.0, 1e5);
        assert!(b(v0, 0.025) + b(v1, 0.025) < b(2.0 * (v0 + v1), 0.05));
        // Symmetric clocks: union wider.
        let v = 1e3;
        assert!(b(v, 0.025) + b(v, 0.025) > b(4.0 * v, 0.05));
    }
}
