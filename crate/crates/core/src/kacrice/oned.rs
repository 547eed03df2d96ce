use serde::{Deserialize, Serialize};

use super::classify::{geman_classify, ClassifierConfig, DyadicGrid, GemanClass, GemanReport};
use super::MomentReport;
use crate::covmodels::{Moment, StationaryCovariance};
use crate::error::{Error, Result};
use crate::gausscond::{abs_moment, pair_regression, BivariateAbsMomentQuery};
use crate::quad::{self, QuadConfig};

/// Expected number of crossings of `u` on `[0, T]`: `(T / pi) sqrt(l2) e^{-u^2/2}`.
pub fn rice_mean_1d<C: StationaryCovariance + ?Sized>(cov: &C, u: f64, t: f64) -> f64 {
    t / std::f64::consts::PI * cov.lambda2().sqrt() * (-0.5 * u * u).exp()
}

/// Settings of the one-dimensional second-moment computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OneDConfig {
    pub quad: QuadConfig,
    pub grid: DyadicGrid,
    pub classifier: ClassifierConfig,
    /// The logarithmic substitution covers lags down to `T e^{-y_max}` (and
    /// not below the finest classifier lag); the remainder below is
    /// extrapolated from the classifier's fit.
    pub y_max: f64,
}

impl Default for OneDConfig {
    fn default() -> Self {
        OneDConfig {
            quad: QuadConfig { abs_tol: 1e-14, rel_tol: 1e-9, max_intervals: 2000 },
            grid: DyadicGrid::default(),
            classifier: ClassifierConfig::default(),
            y_max: 60.0,
        }
    }
}

/// The integrand `(1/pi) (T - t) E_C|X'(0) X'(t)| e^{-u^2/(1+r)} / sqrt(1 - r^2)`
/// of the second factorial moment, with `C = {X(0) = X(t) = u}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KacRiceIntegrand1D {
    pub tau: f64,
    pub value: f64,
    /// `E[X'(t) | C]`; the mean of `X'(0)` is `-mu1`.
    pub mu1: f64,
    pub sigma2: f64,
    /// Conditional correlation of `(X'(0), X'(t))`; absent when `sigma2 = 0`.
    pub correlation: Option<f64>,
    /// `E_C|X'(0) X'(t)|`.
    pub abs_moment: f64,
    /// `e^{-u^2/(1+r)} / (2 pi sqrt(1 - r^2))`, the density of `(X(0), X(t))` at `(u, u)`.
    pub density: f64,
}

pub fn integrand_1d<C: StationaryCovariance + ?Sized>(cov: &C, u: f64, t_len: f64, tau: f64) -> Result<KacRiceIntegrand1D> {
    let reg = pair_regression(cov, tau, u)?;
    let correlation = reg.correlation();
    let abs_m = match correlation {
        None => (reg.mu1 * reg.mu2).abs(),
        Some(rho) => {
            let s = reg.sigma2.sqrt();
            reg.sigma2 * abs_moment(&BivariateAbsMomentQuery { m1: reg.mu2 / s, m2: reg.mu1 / s, rho })
        }
    };
    let one_plus_r = 2.0 - cov.one_minus_r(tau)?;
    let density = (-u * u / one_plus_r).exp() / (2.0 * std::f64::consts::PI * reg.det.sqrt());
    let value = 2.0 * (t_len - tau) * abs_m * density;
    Ok(KacRiceIntegrand1D { tau, value, mu1: reg.mu1, sigma2: reg.sigma2, correlation, abs_moment: abs_m, density })
}

/// `E[N(N - 1)]` for the crossings of `u` on `[0, T]`.
///
/// The classifier is consulted first: a divergent Geman integral gives an
/// infinite moment without quadrature. Otherwise the integrand is integrated
/// in `y = log(T / t)`, and the part below `T e^{-y_max}` is extrapolated from
/// the fitted small-lag behaviour of `sigma2`.
pub fn second_factorial_moment_1d<C: StationaryCovariance + ?Sized>(
    cov: &C,
    u: f64,
    t_len: f64,
    cfg: &OneDConfig,
) -> Result<(MomentReport, GemanReport)> {
    if !(t_len > 0.0) || !t_len.is_finite() || !u.is_finite() {
        return Err(Error::InvalidParameter(format!("need finite u and T > 0, got u={u}, T={t_len}")));
    }
    let det = cov.det_pair(t_len)?;
    if !(det > 0.0) {
        return Err(Error::DegenerateLag { lag: t_len, det });
    }
    let geman = geman_classify(cov, &cfg.grid, &cfg.classifier)?;
    let mean = rice_mean_1d(cov, u, t_len);
    if geman.class == GemanClass::Diverges {
        let report = MomentReport {
            mean,
            second_factorial: Moment::Infinite,
            second_moment: Moment::Infinite,
            quad_error: 0.0,
            geman: geman.summary(),
            inner_mc_se: 0.0,
        };
        return Ok((report, geman));
    }
    let identically_zero = cov.is_sine_cosine() && u == 0.0;
    let (value, error) = if identically_zero {
        (0.0, 0.0)
    } else {
        let mut failure = None;
        let f = |tau: f64| match integrand_1d(cov, u, t_len, tau) {
            Ok(p) => p.value,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        // stay within the lags the classifier has examined
        let finest = 2f64.powi(-cfg.grid.k_max);
        let y_max = cfg.y_max.min((t_len / finest).ln()).max(1.0);
        let res = quad::integrate_from_zero_to(f, t_len, y_max, &cfg.quad);
        if let Some(e) = failure {
            return Err(e);
        }
        let tol = cfg.quad.abs_tol.max(cfg.quad.rel_tol * res.value.abs());
        if !res.converged && res.error > 100.0 * tol {
            return Err(Error::QuadratureNonConvergent { value: res.value, error: res.error });
        }
        let cut = t_len * (-y_max).exp();
        let rest = remainder(cov, u, t_len, cut, &geman)?;
        (res.value + rest, res.error + 0.5 * rest.abs())
    };
    let report = MomentReport {
        mean,
        second_factorial: Moment::Finite(value),
        second_moment: Moment::Finite(value + mean),
        quad_error: error,
        geman: geman.summary(),
        inner_mc_se: 0.0,
    };
    Ok((report, geman))
}

/// `int_0^cut f`, assuming `f(t) t` behaves like `sigma2(t)`: `t^alpha` or
/// `|log t|^-beta`, with the exponent taken from the classifier.
fn remainder<C: StationaryCovariance + ?Sized>(cov: &C, u: f64, t_len: f64, cut: f64, geman: &GemanReport) -> Result<f64> {
    let ft = integrand_1d(cov, u, t_len, cut)?.value * cut;
    if ft == 0.0 {
        return Ok(0.0);
    }
    let fit = &geman.sigma2_form;
    match (fit.alpha, fit.beta) {
        (_, Some(beta)) if beta > 1.0 => Ok(ft * (-cut.ln()) / (beta - 1.0)),
        (Some(alpha), None) if alpha > 0.0 => Ok(ft / alpha),
        _ => Ok(ft),
    }
}
