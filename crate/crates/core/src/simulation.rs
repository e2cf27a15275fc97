//! Synthetic nonstationary delayed-outcome data.
//!
//! Each unit enters at a uniform calendar time `E` and, under each arm, has an
//! event whose hazard at calendar time `t` is the product of
//!
//! * a log-normal baseline in internal time `s = t - E`,
//! * a calendar cycle `1 + A sin(2πt/P)`,
//! * arm-specific Gaussian shocks `1 + Σ_j a_jw exp(-(t - c_j)²/(2σ_j²))`.
//!
//! Event times are drawn by thinning against a windowed majorant. Outcomes grow
//! with internal time, follow the calendar cycle, and carry one multiplicative
//! noise draw shared by both arms.

use std::f64::consts::PI;

use rand::distributions::{Distribution, Open01, Uniform};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arm, Bounds, PotentialOutcomeTable, PotentialUnit};
use crate::rng::{domain, stream_rng};
use crate::special::normal_hazard;

/// Width of a thinning window in internal time.
pub const WINDOW: f64 = 0.25;
/// Grid points (endpoints included) used to bound the baseline on a window.
pub const WINDOW_GRID: usize = 64;
/// Multiplier applied to the grid supremum of the baseline.
pub const MAJORANT_SAFETY: f64 = 1.05;
/// Internal time beyond which sampling gives up.
pub const INTERNAL_TIME_CAP: f64 = 1e6;
/// Smallest internal time at which the baseline is evaluated.
pub const S_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shock {
    pub center: f64,
    pub width: f64,
    /// Peak multiplicative intensity per arm, indexed by [`Arm::index`].
    pub intensity: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    /// Arm baselines `β_w`.
    pub beta: [f64; 2],
    /// Coefficient on `log(1 + s)`.
    pub log_coef: f64,
    /// Amplitude of the calendar cycle in the outcome.
    pub cycle_coef: f64,
    /// Support of the shared multiplicative noise.
    pub noise: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_units: usize,
    pub entry_range: (f64, f64),
    /// Baseline log-normal parameters per arm.
    pub baseline: [LogNormal; 2],
    pub cycle_amplitude: f64,
    pub cycle_period: f64,
    pub shocks: Vec<Shock>,
    pub outcome: OutcomeModel,
    /// Probability of assignment to treatment, shared by all units.
    pub propensity: f64,
    /// Replace every outcome by 1, turning rewards into event counts.
    pub counting: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_units: 500,
            entry_range: (0.0, 10.0),
            baseline: [LogNormal { mu: 2.5, sigma: 0.5 }, LogNormal { mu: 0.3, sigma: 0.3 }],
            cycle_amplitude: 0.2,
            cycle_period: 7.0,
            shocks: vec![
                Shock {
                    center: 8.0,
                    width: 0.5,
                    intensity: [1.5, 2.0],
                },
                Shock {
                    center: 15.0,
                    width: 0.3,
                    intensity: [1.0, 0.8],
                },
            ],
            outcome: OutcomeModel {
                beta: [1.0, 0.6],
                log_coef: 0.15,
                cycle_coef: 0.1,
                noise: (0.9, 1.1),
            },
            propensity: 0.5,
            counting: false,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Same configuration with the calendar cycle and shocks switched off, so
    /// holding times are exactly log-normal.
    pub fn baseline_only(mut self) -> Self {
        self.cycle_amplitude = 0.0;
        self.shocks.clear();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::domain(m));
        if self.n_units == 0 {
            return bad("n_units must be at least 1".into());
        }
        let (lo, hi) = self.entry_range;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return bad(format!("invalid entry range [{lo}, {hi}]"));
        }
        for b in &self.baseline {
            if !(b.sigma > 0.0 && b.mu.is_finite() && b.sigma.is_finite()) {
                return bad(format!("invalid log-normal parameters ({}, {})", b.mu, b.sigma));
            }
        }
        if !(self.cycle_amplitude >= 0.0 && self.cycle_amplitude < 1.0) {
            return bad(format!(
                "cycle amplitude must lie in [0, 1), got {}",
                self.cycle_amplitude
            ));
        }
        if !(self.cycle_period > 0.0) {
            return bad(format!("cycle period must be positive, got {}", self.cycle_period));
        }
        for s in &self.shocks {
            if !(s.width > 0.0 && s.intensity.iter().all(|&a| a >= 0.0) && s.center.is_finite()) {
                return bad(format!("invalid shock {s:?}"));
            }
        }
        let o = &self.outcome;
        if !(o.noise.0 > 0.0 && o.noise.1 >= o.noise.0) {
            return bad(format!("invalid noise range {:?}", o.noise));
        }
        if !(o.log_coef >= 0.0 && o.cycle_coef >= 0.0 && o.cycle_coef < 1.0) {
            return bad("outcome coefficients must be nonnegative with cycle < 1".into());
        }
        if !(self.propensity > 0.0 && self.propensity < 1.0) {
            return bad(format!("propensity must lie in (0,1), got {}", self.propensity));
        }
        Ok(())
    }

    fn cycle(&self, t: f64) -> f64 {
        1.0 + self.cycle_amplitude * (2.0 * PI * t / self.cycle_period).sin()
    }

    fn shock(&self, t: f64, arm: Arm) -> f64 {
        1.0 + self
            .shocks
            .iter()
            .map(|s| s.intensity[arm.index()] * (-(t - s.center).powi(2) / (2.0 * s.width * s.width)).exp())
            .sum::<f64>()
    }

    /// Upper bound of the calendar factors `cycle · shock` for `arm`.
    fn calendar_ceiling(&self, arm: Arm) -> f64 {
        (1.0 + self.cycle_amplitude) * (1.0 + self.shocks.iter().map(|s| s.intensity[arm.index()]).sum::<f64>())
    }
}

/// Hazard of a log-normal holding time at internal time `s`.
pub fn lognormal_hazard(s: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("internal time must be positive, got {s}")));
    }
    Ok(baseline_hazard(s, mu, sigma))
}

fn baseline_hazard(s: f64, mu: f64, sigma: f64) -> f64 {
    let s = s.max(S_FLOOR);
    let z = (s.ln() - mu) / sigma;
    normal_hazard(z) / (s * sigma)
}

/// Full multiplicative hazard at calendar time `t` for a unit that entered at `entry`.
pub fn total_hazard(t: f64, entry: f64, arm: Arm, cfg: &SimConfig) -> Result<f64> {
    if !(t > entry) {
        return Err(Error::domain(format!(
            "hazard needs t > entry, got t={t}, entry={entry}"
        )));
    }
    Ok(hazard_unchecked(t, entry, arm, cfg))
}

fn hazard_unchecked(t: f64, entry: f64, arm: Arm, cfg: &SimConfig) -> f64 {
    let b = cfg.baseline[arm.index()];
    baseline_hazard(t - entry, b.mu, b.sigma) * cfg.cycle(t) * cfg.shock(t, arm)
}

/// Outcome for an event at internal time `s` and calendar time `t` with noise `eps`.
pub fn outcome_value(arm: Arm, s: f64, t: f64, eps: f64, model: &OutcomeModel, period: f64) -> f64 {
    model.beta[arm.index()]
        * (1.0 + model.log_coef * s.ln_1p())
        * (1.0 + model.cycle_coef * (2.0 * PI * t / period).sin())
        * eps
}

/// Thinning sampler for one arm. Window majorants depend only on internal
/// time, so they are cached and shared across units.
#[derive(Debug, Clone)]
pub struct ThinningSampler<'a> {
    cfg: &'a SimConfig,
    arm: Arm,
    majorants: Vec<f64>,
}

impl<'a> ThinningSampler<'a> {
    pub fn new(cfg: &'a SimConfig, arm: Arm) -> Self {
        ThinningSampler {
            cfg,
            arm,
            majorants: Vec::new(),
        }
    }

    /// Dominating rate on internal-time window `k`.
    pub fn majorant(&mut self, k: usize) -> f64 {
        while self.majorants.len() <= k {
            let j = self.majorants.len();
            let m = self.window_majorant(j);
            self.majorants.push(m);
        }
        self.majorants[k]
    }

    fn window_majorant(&self, k: usize) -> f64 {
        let b = self.cfg.baseline[self.arm.index()];
        let start = k as f64 * WINDOW;
        let step = WINDOW / (WINDOW_GRID - 1) as f64;
        // The log-normal hazard is unimodal: monotone stretches peak at an
        // endpoint, and near the mode it is flat enough for the safety factor.
        let sup = (0..WINDOW_GRID)
            .map(|j| baseline_hazard(start + j as f64 * step, b.mu, b.sigma))
            .fold(0.0, f64::max);
        MAJORANT_SAFETY * sup * self.cfg.calendar_ceiling(self.arm)
    }

    /// Draws the event time of a unit that entered at `entry`.
    pub fn sample<R: Rng + ?Sized>(&mut self, entry: f64, rng: &mut R) -> Result<f64> {
        let mut k = 0usize;
        loop {
            let (lo, hi) = (k as f64 * WINDOW, (k + 1) as f64 * WINDOW);
            if lo > INTERNAL_TIME_CAP {
                return Err(Error::ThinningCapExceeded { cap: INTERNAL_TIME_CAP });
            }
            let bound = self.majorant(k);
            if bound > 0.0 {
                let mut s = lo;
                loop {
                    let u: f64 = Open01.sample(rng);
                    s -= u.ln() / bound;
                    if s >= hi {
                        break;
                    }
                    let t = entry + s;
                    let hazard = hazard_unchecked(t, entry, self.arm, self.cfg);
                    if hazard > bound {
                        return Err(Error::MajorantViolated { s, hazard, bound });
                    }
                    let accept: f64 = rng.gen();
                    if accept * bound < hazard {
                        return Ok(t);
                    }
                }
            }
            k += 1;
        }
    }
}

/// Generates a potential-outcome table under `cfg`.
///
/// Entry times are drawn from one stream and sorted, so unit ids follow entry
/// order. Unit `i` then draws its noise, arm-0 event and arm-1 event from three
/// separate streams; changing one arm's parameters leaves the other arm's
/// draws untouched.
pub fn generate_dataset(cfg: &SimConfig) -> Result<PotentialOutcomeTable> {
    cfg.validate()?;
    let mut entry_rng = stream_rng(cfg.seed, domain::ENTRY, 0);
    let entry_dist = Uniform::new(cfg.entry_range.0, cfg.entry_range.1);
    let mut entries: Vec<f64> = (0..cfg.n_units).map(|_| entry_dist.sample(&mut entry_rng)).collect();
    entries.sort_by(f64::total_cmp);

    let noise = Uniform::new_inclusive(cfg.outcome.noise.0, cfg.outcome.noise.1);
    let samplers = || {
        [
            ThinningSampler::new(cfg, Arm::Control),
            ThinningSampler::new(cfg, Arm::Treatment),
        ]
    };
    let units = entries
        .par_iter()
        .enumerate()
        .map_init(samplers, |samplers, (i, &entry)| -> Result<PotentialUnit> {
            let base = 3 * i as u64;
            let eps = noise.sample(&mut stream_rng(cfg.seed, domain::UNIT, base));
            let mut event_time = [0.0; 2];
            let mut outcome = [0.0; 2];
            for arm in Arm::BOTH {
                let w = arm.index();
                let mut rng = stream_rng(cfg.seed, domain::UNIT, base + 1 + w as u64);
                let t = samplers[w].sample(entry, &mut rng)?;
                event_time[w] = t;
                outcome[w] = if cfg.counting {
                    1.0
                } else {
                    outcome_value(arm, t - entry, t, eps, &cfg.outcome, cfg.cycle_period)
                };
            }
            Ok(PotentialUnit {
                unit_id: i,
                entry_time: entry,
                event_time,
                outcome,
                propensity: cfg.propensity,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let s_max = units
        .iter()
        .flat_map(|u| [u.event_time[0] - u.entry_time, u.event_time[1] - u.entry_time])
        .fold(0.0, f64::max);
    let bound = if cfg.counting {
        1.0
    } else {
        outcome_bound(&cfg.outcome, s_max)
    };
    PotentialOutcomeTable::new(units, Bounds::new(bound, Bounds::default().pi_min)?)
}

/// Largest possible `|y|` for events up to internal time `s_max`.
pub fn outcome_bound(model: &OutcomeModel, s_max: f64) -> f64 {
    let beta = model.beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    beta * (1.0 + model.log_coef * s_max.ln_1p()) * (1.0 + model.cycle_coef) * model.noise.1
}
