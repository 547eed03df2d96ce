//! Second moment of the number of critical points of a scalar field `Y`.
//!
//! The critical points are the zeros of `X = grad Y`, and the role of
//! `sigma2` is taken by the conditional variance of the Hessian in a
//! direction `l`, `Var(Y''(0) l | Y'(0), Y'(l r))`, maximized over rows and
//! directions.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::classify::{classify_form, ClassifierConfig, DyadicGrid, FormFit};
use crate::error::{Error, Result};
use crate::field::FieldCovariance;
use crate::gausscond::{condition, derivative_joint_cov, PointDerivative};

/// What the Hessian at the origin is conditioned on, besides `Y'(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CriticalConditioning {
    /// `Y'(l r)`: both points are zeros of the gradient.
    #[default]
    Gradient,
    /// `Y''(l r)`, as literally displayed in the statement of the condition.
    Hessian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalReport {
    pub conditioning: CriticalConditioning,
    pub fit: FormFit,
    /// `(r, S^2_max(r))` on the grid.
    pub table: Vec<(f64, f64)>,
}

/// Unit directions used for the maximization, chosen off the coordinate axes
/// (for fields built from axis-aligned waves the axis directions make the
/// observed block singular).
fn directions(d: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0]],
        2 => (0..8)
            .map(|j| {
                let t = std::f64::consts::PI * (j as f64 + 0.5) / 8.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci points on the upper hemisphere
            let n = 16;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|j| {
                    let z = 1.0 - (j as f64 + 0.5) / n as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let phi = golden * j as f64 + 0.1;
                    vec![rho * phi.cos(), rho * phi.sin(), z]
                })
                .collect()
        }
    }
}

fn multi(d: usize, idx: &[usize]) -> Vec<usize> {
    let mut a = vec![0; d];
    for &i in idx {
        a[i] += 1;
    }
    a
}

/// `S^2_max(r) = max_i max_l Var(sum_j l_j Y''_ij(0) | Y'(0), Y'(l r))`.
pub fn critical_variance<F: FieldCovariance + ?Sized>(field: &F, r: f64, mode: CriticalConditioning) -> Result<f64> {
    let d = field.dim();
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidParameter(format!("dimension {d} not supported")));
    }
    let mut best: f64 = 0.0;
    for l in directions(d) {
        let origin = vec![0.0; d];
        let far: Vec<f64> = l.iter().map(|x| x * r).collect();
        let mut items = Vec::new();
        for i in 0..d {
            for j in 0..d {
                items.push(PointDerivative::new(origin.clone(), multi(d, &[i, j])));
            }
        }
        let n_target = items.len();
        for i in 0..d {
            items.push(PointDerivative::new(origin.clone(), multi(d, &[i])));
        }
        match mode {
            CriticalConditioning::Gradient => {
                for i in 0..d {
                    items.push(PointDerivative::new(far.clone(), multi(d, &[i])));
                }
            }
            CriticalConditioning::Hessian => {
                for i in 0..d {
                    for j in i..d {
                        items.push(PointDerivative::new(far.clone(), multi(d, &[i, j])));
                    }
                }
            }
        }
        let joint = derivative_joint_cov(field, &items);
        let observed: Vec<usize> = (n_target..items.len()).collect();
        let zeros = vec![0.0; observed.len()];
        let c = condition(&DVector::zeros(items.len()), &joint, &observed, &zeros)?;
        for i in 0..d {
            let mut v = 0.0;
            for j in 0..d {
                for k in 0..d {
                    v += l[j] * l[k] * c.cov[(i * d + j, i * d + k)];
                }
            }
            best = best.max(v);
        }
    }
    Ok(best)
}

/// Classify the convergence at 0 of `int S^2_max(r) / r dr`.
pub fn critical_condition<F: FieldCovariance + ?Sized>(
    field: &F,
    grid: &DyadicGrid,
    mode: CriticalConditioning,
    cfg: &ClassifierConfig,
) -> Result<CriticalReport> {
    let lags = grid.lags();
    let vals = lags.iter().map(|&r| critical_variance(field, r, mode)).collect::<Result<Vec<_>>>()?;
    // unconditional scale: the largest Hessian entry variance
    let d = field.dim();
    let scale = (0..d).map(|i| field.partial(&vec![0.0; d], &multi(d, &[i, i, i, i]))).fold(0.0, f64::max);
    let cfg = ClassifierConfig { zero_tol: cfg.zero_tol.max(1e-8), ..*cfg };
    let fit = classify_form(&lags, &vals, scale, &cfg);
    Ok(CriticalReport { conditioning: mode, fit, table: lags.into_iter().zip(vals).collect() })
}
