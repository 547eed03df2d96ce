//! Stationary unit-variance covariance models on the line.
//!
//! Every model exposes `r`, `r'`, `r''`, the spectral moments, and the
//! small-lag quantities the second-moment theory is built on:
//!
//! * `sigma2(t) = Var(X'(0) | X(0), X(t)) = l2 - r'(t)^2 / (1 - r(t)^2)`
//! * `l2 + r''(t)`
//!
//! Both vanish at `t = 0` and both are differences of nearly equal numbers
//! there, so each model provides cancellation-free forms (`expm1`, half-angle
//! sines) and `sigma2` switches to a Taylor expansion below [`TAU_MIN`] when
//! the fourth spectral moment is finite.

mod spectral;
mod table;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{hurwitz_zeta, odd_double_factorial};

pub(crate) use spectral::{Osc, SpectralIntegrator};
pub use table::{SpectralDensity, TailExponent};

/// Lag below which `sigma2` uses the Taylor expansion of `r`.
pub const TAU_MIN: f64 = 1e-3;

/// A spectral moment, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }
    pub fn is_finite(self) -> bool {
        matches!(self, Moment::Finite(_))
    }
}

impl Serialize for Moment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Moment::Finite(v) => s.serialize_f64(*v),
            Moment::Infinite => s.serialize_str("inf"),
        }
    }
}

/// `(r, r', r'')` at one lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovValues {
    pub r: f64,
    pub dr: f64,
    pub d2r: f64,
}

/// Anything that behaves like a stationary unit-variance covariance on the line.
///
/// Implemented by [`CovarianceModel1D`] and by the restriction of an isotropic
/// field profile to a line (see `field`).
pub trait StationaryCovariance: Send + Sync {
    fn eval(&self, tau: f64) -> Result<CovValues>;

    /// `1 - r(tau)` without cancellation.
    fn one_minus_r(&self, tau: f64) -> Result<f64>;

    /// `l2 + r''(tau)` without cancellation.
    fn lambda2_plus_r2(&self, tau: f64) -> Result<f64>;

    fn lambda2(&self) -> f64;

    /// Spectral moment of even order `k`.
    fn moment(&self, k: u32) -> Result<Moment>;

    /// True for the sine-cosine process, whose `sigma2` vanishes identically.
    fn is_sine_cosine(&self) -> bool {
        false
    }

    fn sigma2(&self, tau: f64) -> Result<f64> {
        sigma2_generic(self, tau)
    }

    /// `det Var(X(0), X(tau)) = 1 - r^2`.
    fn det_pair(&self, tau: f64) -> Result<f64> {
        let a = self.one_minus_r(tau)?;
        Ok(a * (2.0 - a))
    }
}

fn check_lag<C: StationaryCovariance + ?Sized>(cov: &C, tau: f64) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("lag must be positive, got {tau}")));
    }
    let det = cov.det_pair(tau)?;
    let scale = (cov.lambda2() * tau * tau).min(1.0);
    if !(det > 1e-12 * scale) {
        return Err(Error::DegenerateLag { lag: tau, det });
    }
    Ok(det)
}

/// `sigma2` from `(1 - r, r')` with the final subtraction done by fused
/// multiply-adds, or from the Taylor expansion of `r` below [`TAU_MIN`].
pub fn sigma2_generic<C: StationaryCovariance + ?Sized>(cov: &C, tau: f64) -> Result<f64> {
    let det = check_lag(cov, tau)?;
    let l2 = cov.lambda2();
    if cov.is_sine_cosine() {
        return Ok(0.0);
    }
    if tau < TAU_MIN {
        let moments = taylor_moments(cov)?;
        if moments.len() >= 2 {
            return Ok(sigma2_taylor(&moments, tau).clamp(0.0, l2));
        }
    }
    let v = cov.eval(tau)?;
    let a = cov.one_minus_r(tau)?;
    // l2 (1 - r)(1 + r) - r'^2, compensating the product r'^2.
    let p = v.dr * v.dr;
    let e = v.dr.mul_add(v.dr, -p);
    let num = (l2 * a).mul_add(2.0 - a, -p) - e;
    Ok((num / det).clamp(0.0, l2))
}

/// Finite spectral moments `l2, l4, ...` (at most up to `l8`).
fn taylor_moments<C: StationaryCovariance + ?Sized>(cov: &C) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for k in 1..=4u32 {
        match cov.moment(2 * k) {
            Ok(Moment::Finite(v)) => out.push(v),
            _ => break,
        }
    }
    Ok(out)
}

/// Taylor evaluation of `sigma2` from spectral moments `[l2, l4, ...]`.
///
/// With `x = tau^2`, `1 - r = x P(x)` and `r' = tau Q(x)`; the numerator
/// `l2 (1 - r^2) - r'^2 = x (2 l2 P - Q^2 - l2 x P^2)` has a constant term
/// that cancels identically and is dropped symbolically.
pub fn sigma2_taylor(moments: &[f64], tau: f64) -> f64 {
    let kmax = moments.len();
    assert!(kmax >= 2);
    let l2 = moments[0];
    let x = tau * tau;
    // c_k = (-1)^k l_{2k} / (2k)!
    let mut c = vec![1.0];
    let mut fact = 1.0;
    for k in 1..=kmax {
        fact *= ((2 * k - 1) * (2 * k)) as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        c.push(sign * moments[k - 1] / fact);
    }
    let p: Vec<f64> = (0..kmax).map(|j| -c[j + 1]).collect();
    let q: Vec<f64> = (0..kmax).map(|j| 2.0 * (j + 1) as f64 * c[j + 1]).collect();
    let mut s = vec![0.0; kmax];
    for j in 1..kmax {
        let mut v = 2.0 * l2 * p[j];
        for a in 0..=j {
            v -= q[a] * q[j - a];
        }
        for a in 0..j {
            v -= l2 * p[a] * p[j - 1 - a];
        }
        s[j] = v;
    }
    let horner = |coef: &[f64]| coef.iter().rev().fold(0.0, |acc, &cf| acc * x + cf);
    let r_poly = horner(&s[1..]);
    let p_val = horner(&p);
    x * r_poly / (p_val * (2.0 - x * p_val))
}

/// JSON description of a model: `{"kind": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", deny_unknown_fields)]
pub enum ModelSpec {
    GaussianExp {
        #[serde(default = "default_scale")]
        scale: f64,
    },
    SineCosine {
        w: f64,
    },
    MaternLike {
        nu: f64,
    },
    SpectralTable {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frequencies: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_exponent: Option<f64>,
    },
    ScaleMixture {
        #[serde(default = "default_base")]
        base: f64,
        decay: f64,
    },
}

fn default_scale() -> f64 {
    1.0
}
fn default_base() -> f64 {
    2.0
}

/// The parametric family of a [`CovarianceModel1D`].
#[derive(Debug, Clone)]
pub enum CovKind {
    /// `r = exp(-t^2 / (2 scale^2))`.
    GaussianExp {
        scale: f64,
    },
    /// `r = cos(w t)`: the process `xi1 sin(wt) + xi2 cos(wt)`.
    SineCosine {
        w: f64,
    },
    /// Spectral density proportional to `(1 + l^2)^{-nu - 1/2}`.
    MaternLike {
        nu: f64,
    },
    SpectralTable(SpectralDensity),
    /// Mixture of Gaussian covariances with precisions `base^{2k}` and
    /// weights `w_k` with `w_k base^{2k}` proportional to `(k+1)^{-decay}`.
    /// `l2` is finite for `decay > 1` while `l4` is always infinite, and
    /// `l2 + r''(t)` decays like `|log t|^{1 - decay}`.
    ScaleMixture {
        base: f64,
        decay: f64,
    },
}

const MATERN_TAIL_START: f64 = 1e4;

/// A normalized stationary covariance with cached `l2` and `l4`.
#[derive(Debug, Clone)]
pub struct CovarianceModel1D {
    kind: CovKind,
    lambda2: f64,
    lambda4: Moment,
    /// Normalizing constant of the spectral density (Matérn) or mixture.
    norm: f64,
}

impl CovarianceModel1D {
    pub fn gaussian_exp(scale: f64) -> Result<Self> {
        Self::new(CovKind::GaussianExp { scale })
    }
    pub fn sine_cosine(w: f64) -> Result<Self> {
        Self::new(CovKind::SineCosine { w })
    }
    pub fn matern_like(nu: f64) -> Result<Self> {
        Self::new(CovKind::MaternLike { nu })
    }
    pub fn scale_mixture(base: f64, decay: f64) -> Result<Self> {
        Self::new(CovKind::ScaleMixture { base, decay })
    }
    pub fn spectral_table(density: SpectralDensity) -> Result<Self> {
        Self::new(CovKind::SpectralTable(density))
    }

    pub fn new(kind: CovKind) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        let norm = match &kind {
            CovKind::GaussianExp { scale } if !(*scale > 0.0) => return bad("scale must be positive"),
            CovKind::SineCosine { w } if !(*w > 0.0) => return bad("w must be positive"),
            CovKind::MaternLike { nu } if !(*nu > 1.0) => return bad("nu must exceed 1 for a finite l2"),
            CovKind::MaternLike { nu } => 2.0 * (libm::lgamma(nu + 0.5) - libm::lgamma(*nu)).exp() / std::f64::consts::PI.sqrt(),
            CovKind::ScaleMixture { base, decay } => {
                if !(*base > 1.0) || !(*decay > 1.0) {
                    return bad("scale mixture needs base > 1 and decay > 1");
                }
                let total: f64 =
                    (0..200).map(|k| (k as f64 + 1.0).powf(-decay) * base.powi(-2 * k)).take_while(|v| *v > 1e-300).sum();
                1.0 / total
            }
            _ => 1.0,
        };
        let mut model = CovarianceModel1D { kind, lambda2: f64::NAN, lambda4: Moment::Infinite, norm };
        model.lambda2 = match model.spectral_moment(2)? {
            Moment::Finite(v) if v > 0.0 => v,
            _ => return bad("second spectral moment must be positive and finite"),
        };
        model.lambda4 = model.spectral_moment(4)?;
        Ok(model)
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        match spec {
            ModelSpec::GaussianExp { scale } => Self::gaussian_exp(*scale),
            ModelSpec::SineCosine { w } => Self::sine_cosine(*w),
            ModelSpec::MaternLike { nu } => Self::matern_like(*nu),
            ModelSpec::ScaleMixture { base, decay } => Self::scale_mixture(*base, *decay),
            ModelSpec::SpectralTable { frequencies, density, csv, tail_exponent } => {
                let table = match (frequencies, density, csv) {
                    (Some(f), Some(d), None) => SpectralDensity::new(f.clone(), d.clone(), *tail_exponent)?,
                    (None, None, Some(path)) => SpectralDensity::from_csv_path(path, *tail_exponent)?,
                    _ => return Err(Error::InvalidParameter("SpectralTable needs either frequencies+density or csv".into())),
                };
                Self::spectral_table(table)
            }
        }
    }

    pub fn to_spec(&self) -> ModelSpec {
        match &self.kind {
            CovKind::GaussianExp { scale } => ModelSpec::GaussianExp { scale: *scale },
            CovKind::SineCosine { w } => ModelSpec::SineCosine { w: *w },
            CovKind::MaternLike { nu } => ModelSpec::MaternLike { nu: *nu },
            CovKind::ScaleMixture { base, decay } => ModelSpec::ScaleMixture { base: *base, decay: *decay },
            CovKind::SpectralTable(t) => ModelSpec::SpectralTable {
                frequencies: Some(t.frequencies().to_vec()),
                density: Some(t.raw_values().to_vec()),
                csv: None,
                tail_exponent: Some(t.tail().exponent),
            },
        }
    }

    pub fn kind(&self) -> &CovKind {
        &self.kind
    }

    pub fn lambda4(&self) -> Moment {
        self.lambda4
    }

    /// One-sided normalized spectral density, for spectral kinds.
    pub fn spectral_density(&self, l: f64) -> Option<f64> {
        match &self.kind {
            CovKind::MaternLike { nu } => Some(self.norm * (1.0 + l * l).powf(-nu - 0.5)),
            CovKind::SpectralTable(t) => Some(t.density(l)),
            _ => None,
        }
    }

    fn with_integrator<T>(&self, f: impl FnOnce(&SpectralIntegrator) -> T) -> Option<T> {
        match &self.kind {
            CovKind::MaternLike { nu } => {
                let norm = self.norm;
                let nu = *nu;
                let dens = move |l: f64| norm * (1.0 + l * l).powf(-nu - 0.5);
                let integ = SpectralIntegrator {
                    density: &dens,
                    breaks: &[1.0],
                    tail_start: MATERN_TAIL_START,
                    tail_amplitude: norm,
                    tail_exponent: 2.0 * nu + 1.0,
                };
                Some(f(&integ))
            }
            CovKind::SpectralTable(t) => {
                let dens = |l: f64| t.density(l);
                let integ = SpectralIntegrator {
                    density: &dens,
                    breaks: t.frequencies(),
                    tail_start: t.tail_start(),
                    tail_amplitude: t.tail_amplitude(),
                    tail_exponent: t.tail().exponent,
                };
                Some(f(&integ))
            }
            _ => None,
        }
    }

    fn spectral(&self, m: u32, osc: Osc, t: f64) -> Result<f64> {
        self.with_integrator(|i| i.integral(m, osc, t)).expect("spectral kind")?.ok_or(Error::NonSmooth { lag: t })
    }

    /// Spectral moment `l_k` for even `k`; `Infinite` when the tail integral diverges.
    pub fn spectral_moment(&self, k: u32) -> Result<Moment> {
        if k % 2 == 1 {
            return Err(Error::InvalidParameter(format!("moment order {k} must be even")));
        }
        let half = k / 2;
        Ok(match &self.kind {
            CovKind::GaussianExp { scale } => Moment::Finite(odd_double_factorial(half) / scale.powi(k as i32)),
            CovKind::SineCosine { w } => Moment::Finite(w.powi(k as i32)),
            CovKind::MaternLike { nu } => {
                // Scaled Student t with 2 nu degrees of freedom.
                let d = 2.0 * nu;
                if d <= k as f64 {
                    Moment::Infinite
                } else {
                    let mut v = odd_double_factorial(half);
                    for j in 1..=half {
                        v /= d - 2.0 * j as f64;
                    }
                    Moment::Finite(v)
                }
            }
            CovKind::ScaleMixture { base, decay } => match k {
                0 => Moment::Finite(1.0),
                2 => Moment::Finite(self.norm * hurwitz_zeta(*decay, 1.0)),
                _ => {
                    let _ = base;
                    Moment::Infinite
                }
            },
            CovKind::SpectralTable(t) => {
                let te = t.tail();
                let margin = te.exponent - (k as f64 + 1.0);
                if te.se > 0.0 && margin.abs() < 3.0 * te.se {
                    return Err(Error::InconclusiveTail { order: k, exponent: te.exponent, se: te.se });
                }
                if margin <= 0.0 {
                    Moment::Infinite
                } else {
                    match self.with_integrator(|i| i.integral(k, Osc::One, 0.0)).unwrap()? {
                        Some(v) => Moment::Finite(v),
                        None => Moment::Infinite,
                    }
                }
            }
        })
    }

    /// Per-component `(weight * precision, precision)` terms of a scale mixture
    /// that matter at lag `tau`, plus the index of the first neglected term.
    fn mixture_terms(&self, base: f64, decay: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let norm = self.norm;
        (0..400usize).map(move |k| {
            let prec = base.powi(2 * k as i32);
            let ws = norm * (k as f64 + 1.0).powf(-decay);
            (ws, prec, k as f64)
        })
    }
}

impl StationaryCovariance for CovarianceModel1D {
    fn eval(&self, tau: f64) -> Result<CovValues> {
        let t = tau;
        Ok(match &self.kind {
            CovKind::GaussianExp { scale } => {
                let il2 = 1.0 / (scale * scale);
                let r = (-0.5 * t * t * il2).exp();
                CovValues { r, dr: -t * il2 * r, d2r: (t * t * il2 - 1.0) * il2 * r }
            }
            CovKind::SineCosine { w } => {
                let (s, c) = (w * t).sin_cos();
                CovValues { r: c, dr: -w * s, d2r: -w * w * c }
            }
            CovKind::ScaleMixture { base, decay } => {
                let mut dr = 0.0;
                let mut d2r = 0.0;
                for (ws, prec, _) in self.mixture_terms(*base, *decay) {
                    let x = 0.5 * prec * t * t;
                    if x > 745.0 || ws < 1e-300 {
                        break;
                    }
                    let e = (-x).exp();
                    dr -= t * ws * e;
                    d2r += ws * (2.0 * x - 1.0) * e;
                }
                CovValues { r: 1.0 - self.one_minus_r(t)?, dr, d2r }
            }
            CovKind::MaternLike { .. } | CovKind::SpectralTable(_) => CovValues {
                r: 1.0 - self.spectral(0, Osc::OneMinusCos, t)?,
                dr: -self.spectral(1, Osc::Sin, t)?,
                d2r: -self.spectral(2, Osc::Cos, t)?,
            },
        })
    }

    fn one_minus_r(&self, tau: f64) -> Result<f64> {
        let t = tau;
        Ok(match &self.kind {
            CovKind::GaussianExp { scale } => -(-0.5 * t * t / (scale * scale)).exp_m1(),
            CovKind::SineCosine { w } => {
                let s = (0.5 * w * t).sin();
                2.0 * s * s
            }
            CovKind::ScaleMixture { base, decay } => {
                let mut acc = 0.0;
                for (ws, prec, _) in self.mixture_terms(*base, *decay) {
                    let weight = ws / prec;
                    if weight < 1e-300 {
                        break;
                    }
                    acc += weight * -(-0.5 * prec * t * t).exp_m1();
                }
                acc
            }
            _ => self.spectral(0, Osc::OneMinusCos, t)?,
        })
    }

    fn lambda2_plus_r2(&self, tau: f64) -> Result<f64> {
        let t = tau;
        Ok(match &self.kind {
            CovKind::GaussianExp { scale } => {
                let il2 = 1.0 / (scale * scale);
                let x = 0.5 * t * t * il2;
                il2 * (-(-x).exp_m1() + 2.0 * x * (-x).exp())
            }
            CovKind::SineCosine { w } => {
                let s = (0.5 * w * t).sin();
                2.0 * w * w * s * s
            }
            CovKind::ScaleMixture { base, decay } => {
                let mut acc = 0.0;
                let mut last = 0usize;
                for (ws, prec, k) in self.mixture_terms(*base, *decay) {
                    let x = 0.5 * prec * t * t;
                    last = k as usize;
                    if x > 60.0 {
                        break;
                    }
                    acc += ws * (-(-x).exp_m1() + 2.0 * x * (-x).exp());
                }
                // Remaining terms have 1 - e^{-x} + 2x e^{-x} = 1 to machine precision.
                acc + self.norm * hurwitz_zeta(*decay, last as f64 + 1.0)
            }
            _ => self.spectral(2, Osc::OneMinusCos, t)?,
        })
    }

    fn lambda2(&self) -> f64 {
        self.lambda2
    }

    fn moment(&self, k: u32) -> Result<Moment> {
        match k {
            2 => Ok(Moment::Finite(self.lambda2)),
            4 => Ok(self.lambda4),
            _ => self.spectral_moment(k),
        }
    }

    fn is_sine_cosine(&self) -> bool {
        matches!(self.kind, CovKind::SineCosine { .. })
    }

    fn sigma2(&self, tau: f64) -> Result<f64> {
        match &self.kind {
            CovKind::MaternLike { .. } | CovKind::SpectralTable(_) => {
                let det = check_lag(self, tau)?;
                self.sigma2_residual(tau, det)
            }
            _ => sigma2_generic(self, tau),
        }
    }
}

impl CovarianceModel1D {
    /// `sigma2` as the spectral integral of the squared regression residual
    /// `|i l - a - b e^{i l tau}|^2`, which is pointwise nonnegative. Errors in
    /// the regression coefficients enter only quadratically.
    fn sigma2_residual(&self, tau: f64, det: f64) -> Result<f64> {
        let one_m_r = self.one_minus_r(tau)?;
        let dr = -self.spectral(1, Osc::Sin, tau)?;
        let alpha = -dr / (2.0 - one_m_r); // a + b
        let b = -dr / det;
        let h = move |l: f64| {
            let x = l * tau;
            let s2 = (0.5 * x).sin();
            let re = alpha - b * 2.0 * s2 * s2;
            let im = l - b * x.sin();
            re * re + im * im
        };
        let (body, l_end, tails) = self
            .with_integrator(|i| -> Result<_> {
                let (body, l_end) = i.body(tau, &h)?;
                let t0 = i.tail(0, Osc::One, tau, l_end).unwrap_or(0.0);
                let t0c = i.tail(0, Osc::OneMinusCos, tau, l_end).unwrap_or(0.0);
                let t2 = i.tail(2, Osc::One, tau, l_end).unwrap_or(0.0);
                let t1s = i.tail(1, Osc::Sin, tau, l_end).unwrap_or(0.0);
                Ok((body, l_end, [t0, t0c, t2, t1s]))
            })
            .unwrap()?;
        let _ = l_end;
        let [t0, t0c, t2, t1s] = tails;
        // Expanded residual on the algebraic tail:
        // a'^2 + (2 b^2 - 2 a' b)(1 - cos) + l^2 - 2 b l sin.
        let rem = alpha * alpha * t0 + (2.0 * b * b - 2.0 * alpha * b) * t0c + t2 - 2.0 * b * t1s;
        Ok((body + rem).clamp(0.0, self.lambda2))
    }
}

/// `(sigma2(tau)/tau, (l2 + r''(tau))/tau)`: the two integrands whose
/// convergence at zero is equivalent.
pub fn geman_integrands<C: StationaryCovariance + ?Sized>(cov: &C, tau: f64) -> Result<(f64, f64)> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("lag must be positive, got {tau}")));
    }
    let s2 = cov.sigma2(tau)?;
    let g = cov.lambda2_plus_r2(tau)?;
    Ok((s2 / tau, g / tau))
}

/// `(r, r', r'')` at a nonnegative lag.
pub fn eval_cov<C: StationaryCovariance + ?Sized>(cov: &C, tau: f64) -> Result<CovValues> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("lag must be nonnegative, got {tau}")));
    }
    cov.eval(tau)
}

#[cfg(test)]
mod tests;
