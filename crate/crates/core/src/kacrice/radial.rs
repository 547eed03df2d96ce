//! Second moments over a rectangle for isotropic fields on the plane.
//!
//! By stationarity and isotropy the double integral over `S x S` reduces to
//! `int_0^diam r G(r) p(r) A(r) dr`, where `G` is the angular integral of the
//! overlap area `|S cap (S + h)|`, `p` the density of `(X(0), X(h))` at the
//! level and `A` the conditional expectation of the Jacobian factor. `A` is
//! estimated by Monte Carlo with the same normal draws at every radial node,
//! so the whole radial sum is one Monte Carlo average with an honest
//! standard error.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::{classify_form, ClassifierConfig, DyadicGrid, FormFit, GemanClass, GemanSummary};
use super::MomentReport;
use crate::covmodels::{Moment, StationaryCovariance};
use crate::error::{Error, Result};
use crate::field::{IsotropicFieldModel, RadialProfile};
use crate::gausscond::{axis_regression, AxisRegression};
use crate::quad;
use crate::special::norm_pdf;

/// Axis-aligned rectangle `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }
    pub fn diameter(&self) -> f64 {
        self.width.hypot(self.height)
    }
    fn validate(&self) -> Result<()> {
        if self.width >= 0.0 && self.height >= 0.0 && self.width.is_finite() && self.height.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid rectangle {self:?}")))
        }
    }
}

/// `G(r) = int_0^{2 pi} |S cap (S + r e_theta)| d theta` for a rectangle, in
/// closed form. `int_0^inf r G(r) dr = |S|^2`.
pub fn overlap_kernel(rect: &Rect, r: f64) -> f64 {
    let (a, b) = (rect.width, rect.height);
    if r <= 0.0 {
        return 2.0 * std::f64::consts::PI * a * b;
    }
    let lo = if r > a { (a / r).acos() } else { 0.0 };
    let hi = if r > b { (b / r).asin() } else { std::f64::consts::FRAC_PI_2 };
    if lo >= hi {
        return 0.0;
    }
    // antiderivative of (a - r cos t)(b - r sin t)
    let f = |t: f64| a * b * t + a * r * t.cos() - b * r * t.sin() + 0.5 * r * r * t.sin().powi(2);
    4.0 * (f(hi) - f(lo))
}

/// Density of `(X(0), X(h))` at `(u, u)` for `|h| = r`:
/// `prod_i exp(-u_i^2 / (1 + rho_i)) / (2 pi sqrt(1 - rho_i^2))`.
pub fn pair_density(field: &IsotropicFieldModel, u: &[f64], r: f64) -> f64 {
    field
        .coords
        .iter()
        .zip(u)
        .map(|(p, &ui)| {
            let a = p.one_minus(r * r);
            (-ui * ui / (2.0 - a)).exp() / (2.0 * std::f64::consts::PI * (a * (2.0 - a)).sqrt())
        })
        .product()
}

/// `max_i sigma_i^2(r)`, the largest conditional along-axis derivative variance.
pub fn sigma2_max(field: &IsotropicFieldModel, r: f64) -> Result<f64> {
    let mut best: f64 = 0.0;
    for p in &field.coords {
        best = best.max(p.line().sigma2(r)?);
    }
    Ok(best)
}

/// `E|det X'(0)|` for `d` independent coordinates with gradient variances
/// `v_i`: `prod_i sqrt(v_i) prod_{k<=d} E chi_k`.
pub fn expected_abs_det(field: &IsotropicFieldModel) -> f64 {
    let d = field.dim();
    let chi: f64 = (1..=d)
        .map(|k| {
            let k = k as f64;
            std::f64::consts::SQRT_2 * (libm::lgamma(0.5 * (k + 1.0)) - libm::lgamma(0.5 * k)).exp()
        })
        .product();
    let v: f64 = field.coords.iter().map(|p| (-2.0 * p.slope_at_zero()).sqrt()).product();
    chi * v
}

/// Kac-Rice first moment of the number of roots of `X - u` in `S`.
pub fn mean_roots_2d(field: &IsotropicFieldModel, u: &[f64], rect: &Rect) -> f64 {
    rect.area() * expected_abs_det(field) * u.iter().map(|&x| norm_pdf(x)).product::<f64>()
}

/// Kac-Rice first moment of the length of `{X = u}` in `K` for a scalar field.
pub fn mean_length_2d(profile: &RadialProfile, u: f64, rect: &Rect) -> f64 {
    let v = -2.0 * profile.slope_at_zero();
    rect.area() * (v * std::f64::consts::FRAC_PI_2).sqrt() * norm_pdf(u)
}

/// Inner Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerMcConfig {
    pub seed: u64,
    /// Target relative standard error of the radial sum.
    pub target_rel_se: f64,
    /// Cap on the number of draws (each antithetic pair counts as two).
    pub max_draws: usize,
    /// Antithetic pairs per batch; batches are independent RNG streams.
    pub batch_pairs: usize,
    /// Batches evaluated between stopping checks.
    pub batches_per_round: usize,
}

impl Default for InnerMcConfig {
    fn default() -> Self {
        InnerMcConfig { seed: 0x5eed, target_rel_se: 0.01, max_draws: 1_000_000, batch_pairs: 2048, batches_per_round: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadialConfig {
    /// Gauss–Legendre nodes per radial panel; half as many give the error estimate.
    pub nodes_per_panel: usize,
    pub inner: InnerMcConfig,
    pub grid: DyadicGrid,
    pub classifier: ClassifierConfig,
}

impl Default for RadialConfig {
    fn default() -> Self {
        RadialConfig {
            nodes_per_panel: 16,
            inner: InnerMcConfig::default(),
            grid: DyadicGrid { k_min: 4, k_max: 30 },
            classifier: ClassifierConfig::default(),
        }
    }
}

/// Per-node diagnostics of the radial integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialRow {
    pub r: f64,
    pub kernel: f64,
    pub density: f64,
    /// Conditional expectation of the Jacobian factor and its standard error.
    pub a: f64,
    pub a_se: f64,
    pub sigma2_max: f64,
    /// Cauchy–Schwarz bound on `a` from exact conditional second moments.
    pub cs_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldMomentReport {
    #[serde(flatten)]
    pub report: MomentReport,
    pub radial: Vec<RadialRow>,
}

/// Which Jacobian factor the inner expectation is taken of.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Jacobian {
    /// `|det X'(0) det X'(h)|` for `X: R^2 -> R^2`.
    Det,
    /// `|grad X(0)| |grad X(h)|` for `X: R^2 -> R`.
    GradNorm,
}

/// Exact conditional law of the gradients of one coordinate at `0` and `r e1`.
#[derive(Debug, Clone, Copy)]
struct PairLaw {
    mean0: f64,
    mean1: f64,
    /// Square roots of the eigenvalues of the along-axis 2x2 block.
    axis_plus: f64,
    axis_minus: f64,
    trans_plus: f64,
    trans_minus: f64,
    reg: AxisRegression,
}

impl PairLaw {
    fn new(profile: &RadialProfile, r: f64, u: f64) -> Result<Self> {
        let reg = axis_regression(profile, r)?;
        let half = |x: f64| (0.5 * x).max(0.0).sqrt();
        Ok(PairLaw {
            mean0: -reg.mean_slope * u,
            mean1: reg.mean_slope * u,
            axis_plus: half(reg.sigma2 + reg.b_sigma),
            axis_minus: half(reg.sigma2 - reg.b_sigma),
            trans_plus: half(reg.grad_var + reg.transverse_cross),
            trans_minus: half(reg.grad_var - reg.transverse_cross),
            reg,
        })
    }

    /// Gradients `([x0, y0], [x1, y1])` from four standard normals.
    fn sample(&self, z: &[f64], sign: f64) -> ([f64; 2], [f64; 2]) {
        let (a, b) = (sign * self.axis_plus * z[0], sign * self.axis_minus * z[1]);
        let (c, d) = (sign * self.trans_plus * z[2], sign * self.trans_minus * z[3]);
        ([self.mean0 + a + b, c + d], [self.mean1 + a - b, c - d])
    }

    /// `E[|grad|^2]` at either point.
    fn second_moment(&self) -> f64 {
        self.reg.sigma2 + self.mean0 * self.mean0 + self.reg.grad_var
    }
}

struct Node {
    r: f64,
    /// Fine-rule weight times `r G(r) p(r)`, and the same for the coarse rule.
    w_fine: f64,
    w_coarse: f64,
    kernel: f64,
    density: f64,
    laws: Vec<PairLaw>,
}

fn jacobian_value(kind: Jacobian, laws: &[PairLaw], z: &[f64], sign: f64) -> f64 {
    match kind {
        Jacobian::Det => {
            let (p0, p1) = laws[0].sample(&z[0..4], sign);
            let (q0, q1) = laws[1].sample(&z[4..8], sign);
            let d0 = p0[0] * q0[1] - p0[1] * q0[0];
            let d1 = p1[0] * q1[1] - p1[1] * q1[0];
            (d0 * d1).abs()
        }
        Jacobian::GradNorm => {
            let (g0, g1) = laws[0].sample(&z[0..4], sign);
            g0[0].hypot(g0[1]) * g1[0].hypot(g1[1])
        }
    }
}

/// Cauchy–Schwarz bound `E_C[F^2]^{1/2}`-type value for the node, from exact
/// second moments: `E[det^2]` with independent rows, or `E|grad|^2`.
fn cs_bound(kind: Jacobian, laws: &[PairLaw]) -> f64 {
    match kind {
        Jacobian::Det => {
            // rows independent with uncorrelated entries; E[(ad - bc)^2] = Ea^2 Ed^2 + Eb^2 Ec^2
            let row = |l: &PairLaw| (l.reg.sigma2 + l.mean0 * l.mean0, l.reg.grad_var);
            let (a2, b2) = row(&laws[0]);
            let (c2, d2) = row(&laws[1]);
            a2 * d2 + b2 * c2
        }
        Jacobian::GradNorm => laws[0].second_moment(),
    }
}

#[derive(Clone, Default)]
struct Acc {
    pairs: usize,
    s: f64,
    s2: f64,
    coarse: f64,
    node: Vec<(f64, f64)>,
}

impl Acc {
    fn merge(&mut self, o: &Acc) {
        self.pairs += o.pairs;
        self.s += o.s;
        self.s2 += o.s2;
        self.coarse += o.coarse;
        if self.node.is_empty() {
            self.node = vec![(0.0, 0.0); o.node.len()];
        }
        for (a, b) in self.node.iter_mut().zip(&o.node) {
            a.0 += b.0;
            a.1 += b.1;
        }
    }
}

fn radial_nodes(rect: &Rect, n: usize, mut weight: impl FnMut(f64) -> Result<(f64, f64, Vec<PairLaw>)>) -> Result<Vec<Node>> {
    let (a, b) = (rect.width.min(rect.height), rect.width.max(rect.height));
    let mut breaks = vec![0.0, a, b, rect.diameter()];
    breaks.dedup();
    let fine = quad::gauss_legendre(n);
    let coarse = quad::gauss_legendre((n / 2).max(2));
    let mut nodes = Vec::new();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let half = 0.5 * (hi - lo);
        for (rule, is_fine) in [(&fine, true), (&coarse, false)] {
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                let r = lo + half * (x + 1.0);
                let (kernel, density, laws) = weight(r)?;
                let base = half * wt * r * kernel * density;
                nodes.push(Node {
                    r,
                    w_fine: if is_fine { base } else { 0.0 },
                    w_coarse: if is_fine { 0.0 } else { base },
                    kernel,
                    density,
                    laws,
                });
            }
        }
    }
    Ok(nodes)
}

fn run_batch(kind: Jacobian, nodes: &[Node], n_normals: usize, seed: u64, batch: u64, pairs: usize) -> Acc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    let mut acc = Acc { node: vec![(0.0, 0.0); nodes.len()], ..Default::default() };
    let mut z = vec![0.0; n_normals];
    for _ in 0..pairs {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let (mut s, mut c) = (0.0, 0.0);
        for (k, node) in nodes.iter().enumerate() {
            let f = 0.5 * (jacobian_value(kind, &node.laws, &z, 1.0) + jacobian_value(kind, &node.laws, &z, -1.0));
            s += node.w_fine * f;
            c += node.w_coarse * f;
            acc.node[k].0 += f;
            acc.node[k].1 += f * f;
        }
        acc.pairs += 1;
        acc.s += s;
        acc.s2 += s * s;
        acc.coarse += c;
    }
    acc
}

struct RadialOutcome {
    value: f64,
    se: f64,
    quad_error: f64,
    rows: Vec<RadialRow>,
}

fn radial_integral(
    kind: Jacobian,
    nodes: Vec<Node>,
    n_normals: usize,
    sig2: impl Fn(f64) -> f64,
    cfg: &InnerMcConfig,
) -> Result<RadialOutcome> {
    if cfg.batch_pairs == 0 || cfg.batches_per_round == 0 || !(cfg.target_rel_se > 0.0) {
        return Err(Error::InvalidParameter("inner Monte Carlo needs positive batch sizes and target".into()));
    }
    let mut total = Acc::default();
    let mut next_batch = 0u64;
    loop {
        let round: Vec<Acc> = (next_batch..next_batch + cfg.batches_per_round as u64)
            .into_par_iter()
            .map(|b| run_batch(kind, &nodes, n_normals, cfg.seed, b, cfg.batch_pairs))
            .collect();
        next_batch += cfg.batches_per_round as u64;
        for a in &round {
            total.merge(a);
        }
        let n = total.pairs as f64;
        let mean = total.s / n;
        let var = (total.s2 / n - mean * mean).max(0.0);
        let se = (var / n).sqrt();
        let draws = 2 * total.pairs;
        if se <= cfg.target_rel_se * mean.abs() || mean == 0.0 {
            let rows = nodes
                .iter()
                .zip(&total.node)
                .filter(|(nd, _)| nd.w_fine != 0.0)
                .map(|(nd, &(s1, s2))| {
                    let a = s1 / n;
                    RadialRow {
                        r: nd.r,
                        kernel: nd.kernel,
                        density: nd.density,
                        a,
                        a_se: ((s2 / n - a * a).max(0.0) / n).sqrt(),
                        sigma2_max: sig2(nd.r),
                        cs_bound: cs_bound(kind, &nd.laws),
                    }
                })
                .collect();
            return Ok(RadialOutcome { value: mean, se, quad_error: (mean - total.coarse / n).abs(), rows });
        }
        if draws >= cfg.max_draws {
            return Err(Error::InnerMCBudgetExceeded { draws, rel_se: se / mean.abs() });
        }
    }
}

fn field_geman(field: &IsotropicFieldModel, grid: &DyadicGrid, cfg: &ClassifierConfig) -> Result<FormFit> {
    let lags = grid.lags();
    let vals = lags.iter().map(|&r| sigma2_max(field, r)).collect::<Result<Vec<_>>>()?;
    let scale = field.coords.iter().map(|p| -2.0 * p.slope_at_zero()).fold(0.0, f64::max);
    Ok(classify_form(&lags, &vals, scale, cfg))
}

fn summary(fit: &FormFit) -> GemanSummary {
    GemanSummary { class: fit.class, alpha: fit.alpha, alpha_se: fit.alpha_se }
}

/// `E[N(N - 1)]` for the roots of `X - u` in a rectangle, `X: R^2 -> R^2`
/// with independent isotropic coordinates.
pub fn second_moment_2d_zero(
    field: &IsotropicFieldModel,
    u: &[f64],
    rect: &Rect,
    cfg: &RadialConfig,
) -> Result<FieldMomentReport> {
    if field.dim() != 2 || u.len() != 2 {
        return Err(Error::InvalidParameter("root moments need a two-coordinate field and a 2-vector level".into()));
    }
    rect.validate()?;
    let fit = field_geman(field, &cfg.grid, &cfg.classifier)?;
    let mean = mean_roots_2d(field, u, rect);
    if fit.class == GemanClass::Diverges {
        let report = MomentReport {
            mean,
            second_factorial: Moment::Infinite,
            second_moment: Moment::Infinite,
            quad_error: 0.0,
            geman: summary(&fit),
            inner_mc_se: 0.0,
        };
        return Ok(FieldMomentReport { report, radial: vec![] });
    }
    if rect.area() == 0.0 {
        return Ok(zero_report(mean, &fit));
    }
    let nodes = radial_nodes(rect, cfg.nodes_per_panel, |r| {
        let laws = field.coords.iter().zip(u).map(|(p, &ui)| PairLaw::new(p, r, ui)).collect::<Result<Vec<_>>>()?;
        Ok((overlap_kernel(rect, r), pair_density(field, u, r), laws))
    })?;
    let out = radial_integral(Jacobian::Det, nodes, 8, |r| sigma2_max(field, r).unwrap_or(f64::NAN), &cfg.inner)?;
    Ok(finish(mean, out, &fit))
}

/// `E[L^2]` for the length `L` of `{X = u}` in a rectangle, `X: R^2 -> R`
/// isotropic with profile `profile`.
pub fn length_second_moment_2d_to_1d(
    profile: &RadialProfile,
    u: f64,
    rect: &Rect,
    cfg: &RadialConfig,
) -> Result<FieldMomentReport> {
    rect.validate()?;
    let field = IsotropicFieldModel::new(vec![*profile])?;
    let fit = field_geman(&field, &cfg.grid, &cfg.classifier)?;
    let mean = mean_length_2d(profile, u, rect);
    if rect.area() == 0.0 {
        return Ok(zero_report(mean, &fit));
    }
    let nodes = radial_nodes(rect, cfg.nodes_per_panel, |r| {
        Ok((overlap_kernel(rect, r), pair_density(&field, &[u], r), vec![PairLaw::new(profile, r, u)?]))
    })?;
    let out = radial_integral(Jacobian::GradNorm, nodes, 4, |r| sigma2_max(&field, r).unwrap_or(f64::NAN), &cfg.inner)?;
    let mut rep = finish(mean, out, &fit);
    // a measure has no diagonal atom: E[L^2] is the double integral itself
    rep.report.second_moment = rep.report.second_factorial;
    Ok(rep)
}

fn zero_report(mean: f64, fit: &FormFit) -> FieldMomentReport {
    let report = MomentReport {
        mean,
        second_factorial: Moment::Finite(0.0),
        second_moment: Moment::Finite(mean),
        quad_error: 0.0,
        geman: summary(fit),
        inner_mc_se: 0.0,
    };
    FieldMomentReport { report, radial: vec![] }
}

fn finish(mean: f64, out: RadialOutcome, fit: &FormFit) -> FieldMomentReport {
    let report = MomentReport {
        mean,
        second_factorial: Moment::Finite(out.value),
        second_moment: Moment::Finite(out.value + mean),
        quad_error: out.quad_error,
        geman: summary(fit),
        inner_mc_se: out.se,
    };
    FieldMomentReport { report, radial: out.rows }
}
