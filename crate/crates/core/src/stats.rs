//! Least squares and Monte Carlo summary statistics.

use serde::Serialize;

/// Straight-line least squares fit `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
}

pub fn ols(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_se = if points.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    LineFit { intercept, slope, slope_se }
}

pub fn ols_slope(points: &[(f64, f64)]) -> (f64, f64) {
    let f = ols(points);
    (f.slope, f.slope_se)
}

/// Mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Number of standard errors separating two independent estimates.
    pub fn z_against(&self, other: &Estimate) -> f64 {
        let se = (self.se * self.se + other.se * other.se).sqrt();
        if se == 0.0 {
            if self.mean == other.mean {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - other.mean).abs() / se
        }
    }

    /// Number of standard errors separating the estimate from an exact value.
    pub fn z_exact(&self, exact: f64) -> f64 {
        self.z_against(&Estimate { mean: exact, se: 0.0 })
    }
}

/// Minimum number of batches used for batch-means standard errors.
pub const MIN_BATCHES: usize = 20;

/// Batch-means estimate over replicate values in replicate order, with
/// `max(MIN_BATCHES, sqrt(n))` batches.
pub fn batch_means(values: &[f64]) -> Estimate {
    let n = values.len();
    batch_means_in(values, ((n as f64).sqrt().floor() as usize).max(MIN_BATCHES))
}

/// Batch-means estimate over a fixed number of contiguous batches (capped at
/// one value per batch).
pub fn batch_means_in(values: &[f64], batches: usize) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, se: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate { mean, se: f64::INFINITY };
    }
    let b = batches.clamp(2, n);
    let means: Vec<f64> = (0..b)
        .map(|k| {
            let (lo, hi) = (k * n / b, (k + 1) * n / b);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let mb = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - mb).powi(2)).sum::<f64>() / (b - 1) as f64;
    Estimate { mean, se: (var / b as f64).sqrt() }
}

/// Sample variance (unbiased).
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        let f = ols(&pts);
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!(f.slope_se < 1e-10);
    }

    #[test]
    fn batch_means_of_constant_has_zero_se() {
        let e = batch_means(&[2.0; 400]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
    }
}
