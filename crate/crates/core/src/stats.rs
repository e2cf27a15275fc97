//! Small summary statistics for Monte Carlo output.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated sum.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 2, "need at least two samples");
        let mean = compensated_sum(xs.iter().copied()) / n as f64;
        let var = compensated_sum(xs.iter().map(|&x| (x - mean).powi(2))) / (n - 1) as f64;
        MeanEstimate {
            mean,
            se: (var / n as f64).sqrt(),
            n,
        }
    }

    /// `|mean - target|` measured in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.se == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target).abs() / self.se
        }
    }
}

/// Sample covariance of paired draws with a delta-method standard error
/// (the standard error of the mean of centered products).
pub fn covariance(xs: &[f64], ys: &[f64]) -> MeanEstimate {
    assert_eq!(xs.len(), ys.len());
    let mx = compensated_sum(xs.iter().copied()) / xs.len() as f64;
    let my = compensated_sum(ys.iter().copied()) / ys.len() as f64;
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    MeanEstimate::from_samples(&prods)
}
