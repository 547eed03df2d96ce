//! Integrals against a one-sided spectral density.
//!
//! With `f` normalized so that `int_0^inf f = 1`, a stationary unit-variance
//! covariance is `r(t) = int_0^inf cos(l t) f(l) dl`. Beyond `tail_start` the
//! density is treated as `A l^{-p}`, which gives closed-form remainders for
//! the moment and oscillatory integrals.

use crate::error::{Error, Result};
use crate::quad::{self, QuadConfig};

/// Trigonometric weight applied to `l^m f(l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Osc {
    One,
    Cos,
    Sin,
    /// `1 - cos(l t)`, evaluated as `2 sin^2(l t / 2)`.
    OneMinusCos,
}

impl Osc {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Osc::One => 1.0,
            Osc::Cos => x.cos(),
            Osc::Sin => x.sin(),
            Osc::OneMinusCos => {
                let s = (0.5 * x).sin();
                2.0 * s * s
            }
        }
    }
}

/// A density on `[0, inf)` with an algebraic tail.
pub(crate) struct SpectralIntegrator<'a> {
    pub density: &'a (dyn Fn(f64) -> f64 + Sync),
    /// Interior points where the density is only piecewise smooth.
    pub breaks: &'a [f64],
    pub tail_start: f64,
    pub tail_amplitude: f64,
    pub tail_exponent: f64,
}

const PERIODS_DIRECT: f64 = 40.0;
const PERIODS_OSC: f64 = 400.0;

fn cfg() -> QuadConfig {
    QuadConfig { abs_tol: 1e-300, rel_tol: 1e-13, max_intervals: 4000 }
}

impl<'a> SpectralIntegrator<'a> {
    /// `int_0^L h(l) f(l) dl` where `L` is returned alongside. For `t > 0`,
    /// `L t` is a whole number of periods and `L >= tail_start`, so the
    /// remainder can be taken from [`Self::tail`].
    pub fn body(&self, t: f64, h: &dyn Fn(f64) -> f64) -> Result<(f64, f64)> {
        let l_direct =
            if t > 0.0 { (PERIODS_DIRECT * 2.0 * std::f64::consts::PI / t).min(self.tail_start) } else { self.tail_start };
        let mut pts = vec![0.0];
        let mut x = 1e-3_f64.min(l_direct);
        while x < l_direct {
            pts.push(x);
            x *= 4.0;
        }
        pts.extend(self.breaks.iter().copied().filter(|&b| b > 0.0 && b < l_direct));
        pts.push(l_direct);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let mut g = |l: f64| h(l) * (self.density)(l);
        let body = quad::integrate_breaks(&mut g, &pts, &cfg());
        if !body.converged && body.error > 1e-8 * body.value.abs().max(1e-300) {
            return Err(Error::QuadratureNonConvergent { value: body.value, error: body.error });
        }
        if t <= 0.0 {
            return Ok((body.value, self.tail_start));
        }

        // Half-period panels in x = l t.
        let two_pi = 2.0 * std::f64::consts::PI;
        let x_start = l_direct * t;
        let x_end_min = (self.tail_start * t).max(x_start + PERIODS_OSC * two_pi);
        let x_end = (x_end_min / two_pi).ceil() * two_pi;
        let rule = quad::gauss_legendre(24);
        let mut terms = vec![body.value];
        let mut a = x_start;
        while a < x_end {
            let b = (a + std::f64::consts::PI).min(x_end);
            let v = rule.integrate_on(a, b, |x| {
                let l = x / t;
                h(l) * (self.density)(l)
            }) / t;
            terms.push(v);
            a = b;
        }
        Ok((quad::compensated_sum(terms), x_end / t))
    }

    /// `int_L^inf l^m osc(l t) A l^{-p} dl`, with `L t` a multiple of `2 pi`
    /// when `t > 0`. `None` when divergent.
    pub fn tail(&self, m: u32, osc: Osc, t: f64, l_end: f64) -> Option<f64> {
        let s = self.tail_exponent - m as f64;
        let a = self.tail_amplitude;
        let one = if s > 1.0 { Some(l_end.powf(1.0 - s) / (s - 1.0)) } else { None };
        if t <= 0.0 || osc == Osc::One {
            return match osc {
                Osc::One | Osc::Cos => one.map(|v| a * v),
                _ => Some(0.0),
            };
        }
        let xe = l_end * t;
        let amp = a * t.powf(s - 1.0);
        let cos_tail = -s * xe.powf(-s - 1.0) + s * (s + 1.0) * (s + 2.0) * xe.powf(-s - 3.0);
        let sin_tail = xe.powf(-s) - s * (s + 1.0) * xe.powf(-s - 2.0);
        match osc {
            Osc::Cos => Some(amp * cos_tail),
            Osc::Sin => Some(amp * sin_tail),
            Osc::OneMinusCos => one.map(|v| a * v - amp * cos_tail),
            Osc::One => unreachable!(),
        }
    }

    /// `int_0^inf l^m osc(l t) f(l) dl`; `Ok(None)` when it diverges.
    pub fn integral(&self, m: u32, osc: Osc, t: f64) -> Result<Option<f64>> {
        let osc = match (osc, t == 0.0) {
            (Osc::Cos, true) => Osc::One,
            (Osc::Sin | Osc::OneMinusCos, true) => return Ok(Some(0.0)),
            (o, _) => o,
        };
        let s = self.tail_exponent - m as f64;
        if matches!(osc, Osc::One | Osc::OneMinusCos) && s <= 1.0 {
            return Ok(None);
        }
        let mf = m as i32;
        let t_body = if osc == Osc::One { 0.0 } else { t };
        let h = move |l: f64| l.powi(mf) * osc.eval(l * t);
        let (body, l_end) = self.body(t_body, &h)?;
        Ok(self.tail(m, osc, t_body, l_end).map(|tail| body + tail))
    }
}
