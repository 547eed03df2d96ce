//! Gaussian linear conditioning and the closed-form regression quantities of
//! level-crossing pairs.

mod absmoment;
mod hermite;

use nalgebra::{DMatrix, DVector};

use crate::covmodels::StationaryCovariance;
use crate::error::{Error, Result};
use crate::field::{FieldCovariance, RadialProfile};

pub use absmoment::{abs_moment, abs_moment_gauss_hermite, BivariateAbsMomentQuery, GH_DEGREE, GH_DEGREE_VALIDATION};
pub use hermite::{hermite, mehler_covariance, product_variance_lower};

/// Diagonal jitters tried in turn (relative to the largest observed variance).
const JITTERS: [f64; 3] = [0.0, 1e-12, 1e-10];
/// Largest accepted ratio of extreme squared Cholesky pivots.
const CONDITION_CAP: f64 = 1e15;

/// Law of the unobserved coordinates given the observed ones.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConditional {
    /// Indices (into the joint vector) of the target coordinates, in order.
    pub targets: Vec<usize>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Jitter that had to be added to the observed block (0 when none).
    pub jitter: f64,
}

/// Condition `N(joint_mean, joint_cov)` on `x[observed[k]] = values[k]`.
///
/// The covariance is the Schur complement and does not depend on `values`.
pub fn condition(
    joint_mean: &DVector<f64>,
    joint_cov: &DMatrix<f64>,
    observed: &[usize],
    values: &[f64],
) -> Result<GaussianConditional> {
    let n = joint_mean.len();
    if joint_cov.nrows() != n || joint_cov.ncols() != n {
        return Err(Error::InvalidParameter(format!(
            "covariance is {}x{}, mean has {n} entries",
            joint_cov.nrows(),
            joint_cov.ncols()
        )));
    }
    if observed.len() != values.len() {
        return Err(Error::InvalidParameter("observed indices and values differ in length".into()));
    }
    let mut seen = vec![false; n];
    for &i in observed {
        if i >= n || seen[i] {
            return Err(Error::InvalidParameter(format!("observed index {i} out of range or repeated")));
        }
        seen[i] = true;
    }
    let targets: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
    let (no, nt) = (observed.len(), targets.len());
    let s_oo = DMatrix::from_fn(no, no, |a, b| joint_cov[(observed[a], observed[b])]);
    let s_ot = DMatrix::from_fn(no, nt, |a, b| joint_cov[(observed[a], targets[b])]);
    let s_tt = DMatrix::from_fn(nt, nt, |a, b| joint_cov[(targets[a], targets[b])]);
    let resid = DVector::from_fn(no, |a, _| values[a] - joint_mean[observed[a]]);
    let m_t = DVector::from_fn(nt, |a, _| joint_mean[targets[a]]);
    if no == 0 {
        return Ok(GaussianConditional { targets, mean: m_t, cov: s_tt, jitter: 0.0 });
    }

    let scale = (0..no).map(|i| s_oo[(i, i)]).fold(0.0, f64::max);
    let mut worst = 0.0;
    for j in JITTERS {
        let mut a = s_oo.clone();
        for i in 0..no {
            a[(i, i)] += j * scale;
        }
        let Some(chol) = a.cholesky() else { continue };
        let l = chol.l_dirty();
        let diag: Vec<f64> = (0..no).map(|i| l[(i, i)] * l[(i, i)]).collect();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        worst = lo / scale;
        if !(hi / lo < CONDITION_CAP) {
            continue;
        }
        // W = L^{-1} S_ot, so the Schur complement is S_tt - W^T W.
        let w = l.solve_lower_triangular(&s_ot).expect("nonsingular factor");
        let z = l.solve_lower_triangular(&resid).expect("nonsingular factor");
        let mean = m_t + w.transpose() * z;
        let mut cov = s_tt - w.transpose() * &w;
        for a in 0..nt {
            for b in 0..a {
                let v = 0.5 * (cov[(a, b)] + cov[(b, a)]);
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        return Ok(GaussianConditional { targets, mean, cov, jitter: j * scale });
    }
    Err(Error::DegenerateObservation { pivot: worst })
}

/// [`condition`] with matrices given as row-major arrays of dimension `n`.
pub fn condition_row_major(
    n: usize,
    joint_mean: &[f64],
    joint_cov: &[f64],
    observed: &[usize],
    values: &[f64],
) -> Result<GaussianConditional> {
    if joint_mean.len() != n || joint_cov.len() != n * n {
        return Err(Error::InvalidParameter(format!("expected {n} means and {} covariance entries", n * n)));
    }
    condition(&DVector::from_column_slice(joint_mean), &DMatrix::from_row_slice(n, n, joint_cov), observed, values)
}

/// Conditional law of `(X'(0), X'(t))` given `X(0) = X(t) = u` on the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRegression {
    /// `E[X'(t) | C] = r'(t) u / (1 + r(t))`.
    pub mu1: f64,
    /// `E[X'(0) | C] = -mu1`.
    pub mu2: f64,
    /// Common conditional variance `l2 - r'^2 / (1 - r^2)`.
    pub sigma2: f64,
    /// Conditional covariance `-r'' - r r'^2 / (1 - r^2)`.
    pub cross: f64,
    /// `det Var(X(0), X(t)) = 1 - r^2`.
    pub det: f64,
}

impl PairRegression {
    /// Conditional correlation, clamped to `[-1, 1]`; `None` when `sigma2 = 0`.
    pub fn correlation(&self) -> Option<f64> {
        (self.sigma2 > 0.0).then(|| (self.cross / self.sigma2).clamp(-1.0, 1.0))
    }
}

/// Closed-form regression of the derivative pair on the level condition.
pub fn pair_regression<C: StationaryCovariance + ?Sized>(cov: &C, tau: f64, u: f64) -> Result<PairRegression> {
    let sigma2 = cov.sigma2(tau)?;
    let v = cov.eval(tau)?;
    let a = cov.one_minus_r(tau)?;
    let det = a * (2.0 - a);
    let onep = 2.0 - a;
    let mu1 = v.dr * u / onep;
    // sigma2 - cross = (l2 + r'') - r'^2 / (1 + r), free of the O(1) cancellation.
    let gap = cov.lambda2_plus_r2(tau)? - v.dr * v.dr / onep;
    let cross = if cov.is_sine_cosine() { 0.0 } else { sigma2 - gap };
    Ok(PairRegression { mu1, mu2: -mu1, sigma2, cross, det })
}

/// Joint covariance of `(X(0), X(t), X'(0), X'(t))`.
pub fn pair_joint_cov<C: StationaryCovariance + ?Sized>(cov: &C, tau: f64) -> Result<DMatrix<f64>> {
    let v = cov.eval(tau)?;
    let l2 = cov.lambda2();
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        1.0,   v.r,   0.0,    v.dr,
        v.r,   1.0,   -v.dr,  0.0,
        0.0,   -v.dr, l2,     -v.d2r,
        v.dr,  0.0,   -v.d2r, l2,
    ]);
    Ok(m)
}

/// Generic Schur conditioning of the derivative pair, as `(mean of X'(0),
/// mean of X'(t), 2x2 covariance)`.
pub fn pair_regression_generic<C: StationaryCovariance + ?Sized>(cov: &C, tau: f64, u: f64) -> Result<GaussianConditional> {
    let joint = pair_joint_cov(cov, tau)?;
    condition(&DVector::zeros(4), &joint, &[0, 1], &[u, u])
}

/// Multi-index with a single entry.
fn unit(d: usize, j: usize, order: usize) -> Vec<usize> {
    let mut a = vec![0; d];
    a[j] += order;
    a
}

fn add(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// A linear functional of a scalar field: the derivative `d^alpha Y(point)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDerivative {
    pub point: Vec<f64>,
    pub alpha: Vec<usize>,
}

impl PointDerivative {
    pub fn new(point: Vec<f64>, alpha: Vec<usize>) -> Self {
        PointDerivative { point, alpha }
    }
}

/// Joint covariance of derivatives of a stationary field at given points:
/// `Cov(d^a Y(x), d^b Y(y)) = (-1)^{|b|} d^{a+b} C(x - y)`.
pub fn derivative_joint_cov<F: FieldCovariance + ?Sized>(field: &F, items: &[PointDerivative]) -> DMatrix<f64> {
    let n = items.len();
    let mut m = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..=a {
            let h: Vec<f64> = items[a].point.iter().zip(&items[b].point).map(|(x, y)| x - y).collect();
            let order_b: usize = items[b].alpha.iter().sum();
            let sign = if order_b % 2 == 0 { 1.0 } else { -1.0 };
            let v = sign * field.partial(&h, &add(&items[a].alpha, &items[b].alpha));
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    m
}

/// Items `(X(0), X(r e1), grad X(0), grad X(r e1))` in dimension `d`.
pub fn pair_gradient_items(d: usize, r: f64) -> Vec<PointDerivative> {
    let origin = vec![0.0; d];
    let mut far = vec![0.0; d];
    far[0] = r;
    let mut items = vec![PointDerivative::new(origin.clone(), vec![0; d]), PointDerivative::new(far.clone(), vec![0; d])];
    for p in [&origin, &far] {
        for j in 0..d {
            items.push(PointDerivative::new(p.clone(), unit(d, j, 1)));
        }
    }
    items
}

/// Along-axis regression quantities of one isotropic coordinate at distance `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisRegression {
    /// `sigma_i^2(r) = -2 rho'(0) - 4 r^2 rho'(r^2)^2 / (1 - rho(r^2)^2)`.
    pub sigma2: f64,
    /// `b_i(r) sigma_i(r)`, the conditional covariance of the two along-axis
    /// derivatives.
    pub b_sigma: f64,
    /// Conditional covariance of each transverse derivative pair, `-2 rho'(r^2)`.
    pub transverse_cross: f64,
    /// Unconditional gradient variance `-2 rho'(0)`.
    pub grad_var: f64,
    /// `E[X'_{i,1}(r e1) | X(0) = X(r e1) = u] / u = 2 r rho'(r^2) / (1 + rho(r^2))`.
    pub mean_slope: f64,
}

pub fn axis_regression(profile: &RadialProfile, r: f64) -> Result<AxisRegression> {
    let line = profile.line();
    let sigma2 = line.sigma2(r)?;
    let reg = pair_regression(&line, r, 1.0)?;
    let s = r * r;
    let d = profile.derivs(s);
    Ok(AxisRegression {
        sigma2,
        b_sigma: reg.cross,
        transverse_cross: -2.0 * d[1],
        grad_var: -2.0 * profile.slope_at_zero(),
        mean_slope: reg.mu1,
    })
}

/// Conditional covariance of `(grad X_i(0), grad X_i(r e1))` given
/// `X_i(0) = X_i(r e1)`, in closed form (`2d x 2d`).
///
/// Along-axis entries carry `sigma_i^2(r)` on the diagonal and the single
/// coupling `b_i(r) sigma_i(r)`; each transverse direction `j >= 2` keeps the
/// variance `-2 rho'(0)` and is coupled to its partner at the other point by
/// `-2 rho'(r^2)`. All other entries vanish.
pub fn lcov_closed_form(profile: &RadialProfile, d: usize, r: f64) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let a = axis_regression(profile, r)?;
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    m[(0, 0)] = a.sigma2;
    m[(d, d)] = a.sigma2;
    m[(0, d)] = a.b_sigma;
    m[(d, 0)] = a.b_sigma;
    for j in 1..d {
        m[(j, j)] = a.grad_var;
        m[(d + j, d + j)] = a.grad_var;
        m[(j, d + j)] = a.transverse_cross;
        m[(d + j, j)] = a.transverse_cross;
    }
    Ok(m)
}

/// Conditional mean of `(grad X_i(0), grad X_i(r e1))` given the level `u`.
pub fn lmean_closed_form(profile: &RadialProfile, d: usize, r: f64, u: f64) -> Result<DVector<f64>> {
    let a = axis_regression(profile, r)?;
    let mut m = DVector::zeros(2 * d);
    m[0] = -a.mean_slope * u;
    m[d] = a.mean_slope * u;
    Ok(m)
}

/// The same law by generic conditioning of the `(2d + 2)`-dimensional joint.
pub fn lcov_generic(profile: &RadialProfile, d: usize, r: f64, u: f64) -> Result<GaussianConditional> {
    let coord = crate::field::IsotropicCoordinate { profile: *profile, dim: d };
    let items = pair_gradient_items(d, r);
    let joint = derivative_joint_cov(&coord, &items);
    condition(&DVector::zeros(items.len()), &joint, &[0, 1], &[u, u])
}

#[cfg(test)]
mod tests;
