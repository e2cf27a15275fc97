//! Right-continuous piecewise-constant paths of calendar time.
//!
//! Every estimand, estimator and variance clock in this crate changes value
//! only at event times, so they are all stored exactly as [`StepPath`]s: an
//! initial value on `[0, first jump)` followed by strictly increasing jump
//! times, each carrying the value the path takes from that instant onward.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A right-continuous step function of time.
///
/// `eval(t)` returns the value set by the last jump at or before `t`, so a
/// path that jumps at `2.0` already has its new value at `t = 2.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPath {
    initial: f64,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl StepPath {
    pub fn constant(value: f64) -> Self {
        StepPath {
            initial: value,
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a path from explicit `(time, new_value)` jumps.
    ///
    /// Jump times must be finite and strictly increasing.
    pub fn from_jumps(initial: f64, jumps: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (times, values): (Vec<f64>, Vec<f64>) = jumps.into_iter().unzip();
        if let Some(bad) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::domain(format!("non-finite jump time {bad}")));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("jump times must be strictly increasing"));
        }
        Ok(StepPath { initial, times, values })
    }

    /// Accumulates `(time, increment)` events into a cumulative path.
    ///
    /// Events are stably sorted by time, so the caller's order decides how
    /// increments at a shared time are summed. Simultaneous events collapse
    /// into one jump whose value is the post-event total.
    pub fn from_increments(initial: f64, events: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut events: Vec<(f64, f64)> = events.into_iter().collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut times: Vec<f64> = Vec::with_capacity(events.len());
        let mut values: Vec<f64> = Vec::with_capacity(events.len());
        let mut total = initial;
        for (t, inc) in events {
            total += inc;
            match times.last() {
                Some(&last) if last == t => *values.last_mut().expect("paired") = total,
                _ => {
                    times.push(t);
                    values.push(total);
                }
            }
        }
        StepPath { initial, times, values }
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    /// Values taken at each jump time, aligned with [`jump_times`](Self::jump_times).
    pub fn jump_values(&self) -> &[f64] {
        &self.values
    }

    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.initial)
    }

    pub fn last_jump_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    /// Right-continuous evaluation by binary search.
    pub fn eval(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => self.initial,
            k => self.values[k - 1],
        }
    }

    /// Evaluates at a nondecreasing sequence of times in one linear sweep.
    pub fn sample_sorted(&self, times: &[f64]) -> Vec<f64> {
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        let mut out = Vec::with_capacity(times.len());
        let mut k = 0;
        let mut current = self.initial;
        for &t in times {
            while k < self.times.len() && self.times[k] <= t {
                current = self.values[k];
                k += 1;
            }
            out.push(current);
        }
        out
    }

    /// Applies `f` to every value; jump times are unchanged.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> StepPath {
        StepPath {
            initial: f(self.initial),
            times: self.times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Combines two paths pointwise on the union of their jump times.
    pub fn zip_with(&self, other: &StepPath, f: impl Fn(f64, f64) -> f64) -> StepPath {
        let times = union_times(&[self, other]);
        let a = self.sample_sorted(&times);
        let b = other.sample_sorted(&times);
        StepPath {
            initial: f(self.initial, other.initial),
            values: a.iter().zip(&b).map(|(&x, &y)| f(x, y)).collect(),
            times,
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        let mut prev = self.initial;
        for &v in &self.values {
            if v < prev {
                return false;
            }
            prev = v;
        }
        true
    }

    /// Largest absolute change across any single jump.
    pub fn max_jump(&self) -> f64 {
        let mut prev = self.initial;
        let mut best = 0.0f64;
        for &v in &self.values {
            best = best.max((v - prev).abs());
            prev = v;
        }
        best
    }
}

impl Default for StepPath {
    fn default() -> Self {
        StepPath::constant(0.0)
    }
}

impl Sub for &StepPath {
    type Output = StepPath;

    fn sub(self, rhs: &StepPath) -> StepPath {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Add for &StepPath {
    type Output = StepPath;

    fn add(self, rhs: &StepPath) -> StepPath {
        self.zip_with(rhs, |a, b| a + b)
    }
}

/// Sorted, deduplicated union of the jump times of several paths.
pub fn union_times(paths: &[&StepPath]) -> Vec<f64> {
    let mut all: Vec<f64> = paths.iter().flat_map(|p| p.times.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}
