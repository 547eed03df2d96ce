use crate::error::{Error, Result};
use crate::quad::{self, QuadConfig};
use crate::special::{abs_normal_mean, norm_pdf};

/// Gauss–Hermite degree per axis for [`abs_moment_gauss_hermite`].
pub const GH_DEGREE: usize = 64;
pub const GH_DEGREE_VALIDATION: usize = 128;

/// `(Y1, Y2)` Gaussian with unit variances, means `m1, m2`, correlation `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateAbsMomentQuery {
    pub m1: f64,
    pub m2: f64,
    pub rho: f64,
}

impl BivariateAbsMomentQuery {
    pub fn new(m1: f64, m2: f64, rho: f64) -> Result<Self> {
        if !(rho.abs() <= 1.0) || !m1.is_finite() || !m2.is_finite() {
            return Err(Error::InvalidParameter(format!("need finite means and |rho| <= 1, got ({m1}, {m2}, {rho})")));
        }
        Ok(BivariateAbsMomentQuery { m1, m2, rho })
    }
}

const Z_MAX: f64 = 40.0;

/// `E|Y1 Y2|`.
///
/// Writing `Y1 = m1 + Z`, `Y2 = m2 + rho Z + sqrt(1 - rho^2) W`, the inner
/// expectation over `W` is `E|N(m2 + rho z, 1 - rho^2)|` in closed form and
/// the outer one is an adaptive integral in `z` split at the kinks.
pub fn abs_moment(q: &BivariateAbsMomentQuery) -> f64 {
    let rho = q.rho.clamp(-1.0, 1.0);
    let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let mut g = |z: f64| (q.m1 + z).abs() * abs_normal_mean(q.m2 + rho * z, s) * norm_pdf(z);
    let mut breaks = vec![-Z_MAX, -8.0, 0.0, 8.0, Z_MAX];
    for k in [-q.m1, if rho != 0.0 { -q.m2 / rho } else { f64::NAN }] {
        if k.abs() < Z_MAX {
            breaks.push(k);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let cfg = QuadConfig { abs_tol: 1e-15, rel_tol: 1e-12, max_intervals: 400 };
    quad::integrate_breaks(&mut g, &breaks, &cfg).value
}

/// `E|Y1 Y2|` by tensorized Gauss–Hermite quadrature of degree `n` per axis.
/// Slower and less accurate than [`abs_moment`] (the integrand has kinks);
/// kept as an independent cross-check.
pub fn abs_moment_gauss_hermite(q: &BivariateAbsMomentQuery, n: usize) -> f64 {
    let rule = quad::gauss_hermite(n);
    let rho = q.rho.clamp(-1.0, 1.0);
    let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let mut terms = Vec::with_capacity(n * n);
    for (z, wz) in rule.nodes.iter().zip(&rule.weights) {
        let y1 = (q.m1 + z).abs();
        if s == 0.0 {
            terms.push(wz * y1 * (q.m2 + rho * z).abs());
            continue;
        }
        for (w, ww) in rule.nodes.iter().zip(&rule.weights) {
            terms.push(wz * ww * y1 * (q.m2 + rho * z + s * w).abs());
        }
    }
    quad::compensated_sum(terms)
}
