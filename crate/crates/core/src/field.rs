//! Stationary Gaussian fields on `R^d` described through their covariance
//! `C(h) = Cov(Y(t + h), Y(t))`.
//!
//! Isotropic coordinates are given by a radial profile `rho` of the squared
//! distance, `C(h) = rho(|h|^2)`. Partial derivatives of `C` up to total order
//! four are available, which is what the joint laws of `(Y, Y', Y'')` at two
//! points require.

use serde::{Deserialize, Serialize};

use crate::covmodels::{CovValues, Moment, StationaryCovariance};
use crate::error::{Error, Result};

/// Highest derivative order of `rho` (and total order of `C`) supported.
pub const MAX_ORDER: usize = 4;

/// Radial profile `rho(s)`, `s = |h|^2`, with `rho(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", deny_unknown_fields)]
pub enum RadialProfile {
    /// `exp(-s / (2 l^2))`
    GaussianExp {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `(1 + s / l^2)^(-beta)`
    Cauchy {
        #[serde(default = "one")]
        scale: f64,
        beta: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl RadialProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadialProfile::GaussianExp { scale } => scale > 0.0 && scale.is_finite(),
            RadialProfile::Cauchy { scale, beta } => scale > 0.0 && scale.is_finite() && beta > 0.0 && beta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid radial profile {self:?}")))
        }
    }

    /// `rho^{(k)}(s)` for `k = 0..=MAX_ORDER`.
    pub fn derivs(&self, s: f64) -> [f64; MAX_ORDER + 1] {
        let mut out = [0.0; MAX_ORDER + 1];
        match *self {
            RadialProfile::GaussianExp { scale } => {
                let a = -0.5 / (scale * scale);
                let mut v = (a * s).exp();
                for d in out.iter_mut() {
                    *d = v;
                    v *= a;
                }
            }
            RadialProfile::Cauchy { scale, beta } => {
                let l2 = scale * scale;
                let base = 1.0 + s / l2;
                let mut coef = 1.0;
                for (k, d) in out.iter_mut().enumerate() {
                    let e = -beta - k as f64;
                    *d = coef * base.powf(e);
                    coef *= e / l2;
                }
            }
        }
        out
    }

    /// `rho'(0)`, which is `-Var(dY/dt_j) / 2`.
    pub fn slope_at_zero(&self) -> f64 {
        self.derivs(0.0)[1]
    }

    /// `1 - rho(s)` without cancellation.
    pub fn one_minus(&self, s: f64) -> f64 {
        match *self {
            RadialProfile::GaussianExp { scale } => -(-0.5 * s / (scale * scale)).exp_m1(),
            RadialProfile::Cauchy { scale, beta } => -(-beta * (s / (scale * scale)).ln_1p()).exp_m1(),
        }
    }

    /// `rho'(s) - rho'(0)` without cancellation.
    pub fn slope_increment(&self, s: f64) -> f64 {
        match *self {
            RadialProfile::GaussianExp { scale } => {
                let a = 0.5 / (scale * scale);
                -a * (-a * s).exp_m1()
            }
            RadialProfile::Cauchy { scale, beta } => {
                let l2 = scale * scale;
                -(beta / l2) * (-(beta + 1.0) * (s / l2).ln_1p()).exp_m1()
            }
        }
    }

    /// Restriction `r(t) = rho(t^2)` to a line through the origin.
    pub fn line(&self) -> RadialLine {
        RadialLine { profile: *self }
    }
}

/// Coefficient of `(2x)^{2m-a} f^{(m)}(x^2)` in `d^a/dx^a f(x^2)`.
fn chain_coef(a: usize, m: usize) -> f64 {
    let fact = |n: usize| (1..=n).product::<usize>() as f64;
    fact(a) / (fact(2 * m - a) * fact(a - m))
}

/// Partial derivative `d^alpha C(h)` of `C(h) = rho(|h|^2)`, `|alpha| <= 4`.
pub fn isotropic_partial(profile: &RadialProfile, h: &[f64], alpha: &[usize]) -> f64 {
    debug_assert_eq!(h.len(), alpha.len());
    assert!(alpha.iter().sum::<usize>() <= MAX_ORDER, "derivative order above {MAX_ORDER}");
    let s: f64 = h.iter().map(|x| x * x).sum();
    let rho = profile.derivs(s);
    // Expand coordinate by coordinate; each term carries the total order of
    // rho reached so far.
    let mut terms: Vec<(usize, f64)> = vec![(0, 1.0)];
    for (&x, &a) in h.iter().zip(alpha) {
        let mut next = Vec::new();
        for &(m0, c0) in &terms {
            for m in a.div_ceil(2)..=a {
                let p = 2 * m - a;
                let factor = if p == 0 { 1.0 } else { (2.0 * x).powi(p as i32) };
                next.push((m0 + m, c0 * chain_coef(a, m) * factor));
            }
        }
        terms = next;
    }
    terms.iter().map(|&(m, c)| c * rho[m]).sum()
}

/// Covariance of a stationary scalar field with derivatives up to order four.
pub trait FieldCovariance: Send + Sync {
    fn dim(&self) -> usize;
    /// `d^alpha C(h)`.
    fn partial(&self, h: &[f64], alpha: &[usize]) -> f64;
}

/// One isotropic coordinate in a given dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicCoordinate {
    pub profile: RadialProfile,
    pub dim: usize,
}

impl FieldCovariance for IsotropicCoordinate {
    fn dim(&self) -> usize {
        self.dim
    }
    fn partial(&self, h: &[f64], alpha: &[usize]) -> f64 {
        isotropic_partial(&self.profile, h, alpha)
    }
}

/// `Y(t) = sum_j (xi_j cos(w t_j) + eta_j sin(w t_j)) / sqrt(d)`: finitely many
/// random amplitudes, stationary but not isotropic, with
/// `C(h) = sum_j cos(w h_j) / d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineField {
    pub w: f64,
    pub dim: usize,
}

impl FieldCovariance for CosineField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn partial(&self, h: &[f64], alpha: &[usize]) -> f64 {
        let active: Vec<usize> = (0..self.dim).filter(|&j| alpha[j] > 0).collect();
        let d = self.dim as f64;
        match active.len() {
            0 => h.iter().map(|x| (self.w * x).cos()).sum::<f64>() / d,
            1 => {
                let j = active[0];
                let a = alpha[j];
                let phase = (self.w * h[j]) + a as f64 * std::f64::consts::FRAC_PI_2;
                self.w.powi(a as i32) * phase.cos() / d
            }
            _ => 0.0,
        }
    }
}

/// `d` independent isotropic coordinates on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsotropicFieldModel {
    pub coords: Vec<RadialProfile>,
}

impl IsotropicFieldModel {
    pub fn new(coords: Vec<RadialProfile>) -> Result<Self> {
        if coords.is_empty() || coords.len() > 3 {
            return Err(Error::InvalidParameter(format!("field dimension {} not in 1..=3", coords.len())));
        }
        for c in &coords {
            c.validate()?;
        }
        Ok(IsotropicFieldModel { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coordinate(&self, i: usize) -> IsotropicCoordinate {
        IsotropicCoordinate { profile: self.coords[i], dim: self.dim() }
    }
}

/// `r(t) = rho(t^2)` as a process on the line. Its `sigma2` is the
/// conditional variance of the along-line derivative of the field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialLine {
    pub profile: RadialProfile,
}

impl StationaryCovariance for RadialLine {
    fn eval(&self, tau: f64) -> Result<CovValues> {
        if !(tau >= 0.0) {
            return Err(Error::InvalidParameter(format!("lag must be nonnegative, got {tau}")));
        }
        let s = tau * tau;
        let d = self.profile.derivs(s);
        Ok(CovValues { r: d[0], dr: 2.0 * tau * d[1], d2r: 2.0 * d[1] + 4.0 * s * d[2] })
    }

    fn one_minus_r(&self, tau: f64) -> Result<f64> {
        Ok(self.profile.one_minus(tau * tau))
    }

    fn lambda2_plus_r2(&self, tau: f64) -> Result<f64> {
        let s = tau * tau;
        let d = self.profile.derivs(s);
        Ok(2.0 * self.profile.slope_increment(s) + 4.0 * s * d[2])
    }

    fn lambda2(&self) -> f64 {
        -2.0 * self.profile.slope_at_zero()
    }

    /// `l_{2k} = (-1)^k (2k)! / k! rho^{(k)}(0)`.
    fn moment(&self, k: u32) -> Result<Moment> {
        if k % 2 == 1 || k == 0 || k as usize > 2 * MAX_ORDER {
            return Err(Error::InvalidParameter(format!("moment order {k} must be even in 2..=8")));
        }
        let half = (k / 2) as usize;
        let d = self.profile.derivs(0.0)[half];
        let ratio: f64 = ((half + 1)..=(2 * half)).map(|n| n as f64).product();
        let sign = if half % 2 == 0 { 1.0 } else { -1.0 };
        Ok(Moment::Finite(sign * ratio * d))
    }
}
