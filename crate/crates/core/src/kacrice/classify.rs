use serde::Serialize;

use crate::covmodels::StationaryCovariance;
use crate::error::{Error, Result};
use crate::stats::ols;

/// Convergence class of `int_0 f(t) / t dt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GemanClass {
    Converges,
    Diverges,
    Inconclusive,
}

/// Dyadic lags `2^-k`, `k = k_min..=k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DyadicGrid {
    pub k_min: i32,
    pub k_max: i32,
}

impl Default for DyadicGrid {
    fn default() -> Self {
        DyadicGrid { k_min: 4, k_max: 40 }
    }
}

impl DyadicGrid {
    pub fn lags(&self) -> Vec<f64> {
        (self.k_min..=self.k_max).map(|k| 2f64.powi(-k)).collect()
    }
}

/// Thresholds of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    /// Minimum power-law exponent accepted as convergent.
    pub alpha_tol: f64,
    /// Maximum standard error of the fitted exponent.
    pub se_max: f64,
    /// Half-width of the undecided band around the critical log exponent 1.
    pub beta_tol: f64,
    /// Values at or below `zero_tol` times the largest unconditional variance
    /// count as zero.
    pub zero_tol: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { alpha_tol: 0.25, se_max: 0.1, beta_tol: 0.25, zero_tol: 0.0 }
    }
}

/// Classification of one integrand form `f` (the integral is of `f(t) / t`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormFit {
    pub class: GemanClass,
    /// Fitted exponent of `f ~ C t^alpha` on the finest half of the grid.
    pub alpha: Option<f64>,
    pub alpha_se: Option<f64>,
    /// Fitted exponent of `f ~ C |log t|^-beta`, when the power fit was undecided.
    pub beta: Option<f64>,
    pub beta_se: Option<f64>,
    pub identically_zero: bool,
}

/// Classify `int_0 f(t) / t dt` from samples of `f` on a dyadic grid.
pub fn classify_form(lags: &[f64], values: &[f64], scale: f64, cfg: &ClassifierConfig) -> FormFit {
    let mut fit = FormFit {
        class: GemanClass::Inconclusive,
        alpha: None,
        alpha_se: None,
        beta: None,
        beta_se: None,
        identically_zero: false,
    };
    let zero = cfg.zero_tol * scale;
    if values.iter().all(|v| v.abs() <= zero) {
        fit.class = GemanClass::Converges;
        fit.identically_zero = true;
        return fit;
    }
    // finest half, by lag
    let mut pts: Vec<(f64, f64)> = lags.iter().copied().zip(values.iter().copied()).collect();
    pts.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let fine = &pts[pts.len() / 2..];
    if fine.iter().any(|p| !(p.1 > zero)) || fine.len() < 3 {
        return fit;
    }
    let power = ols(&fine.iter().map(|&(t, v)| (t.ln(), v.ln())).collect::<Vec<_>>());
    fit.alpha = Some(power.slope);
    fit.alpha_se = Some(power.slope_se);
    if power.slope_se < cfg.se_max {
        if power.slope >= cfg.alpha_tol {
            fit.class = GemanClass::Converges;
            return fit;
        }
        if power.slope <= -cfg.alpha_tol {
            fit.class = GemanClass::Diverges;
            return fit;
        }
    }
    // int dt / (t |log t|^beta) converges at 0 iff beta > 1
    if fine.iter().any(|p| p.0 >= 1.0) {
        return fit;
    }
    let loglog = ols(&fine.iter().map(|&(t, v)| ((-t.ln()).ln(), v.ln())).collect::<Vec<_>>());
    let beta = -loglog.slope;
    fit.beta = Some(beta);
    fit.beta_se = Some(loglog.slope_se);
    if loglog.slope_se < cfg.beta_tol {
        if beta > 1.0 + cfg.beta_tol {
            fit.class = GemanClass::Converges;
        } else if beta < 1.0 - cfg.beta_tol {
            fit.class = GemanClass::Diverges;
        }
    }
    fit
}

/// One row of the dyadic table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GemanRow {
    pub tau: f64,
    pub sigma2: f64,
    pub lambda2_plus_r2: f64,
}

/// Both integrand forms classified on the same grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GemanReport {
    pub class: GemanClass,
    pub sigma2_form: FormFit,
    pub lambda_form: FormFit,
    pub forms_agree: bool,
    pub table: Vec<GemanRow>,
    /// Set when a model evaluation failed; the class is then Inconclusive.
    pub note: Option<String>,
}

/// Compact form embedded in moment reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GemanSummary {
    pub class: GemanClass,
    pub alpha: Option<f64>,
    pub alpha_se: Option<f64>,
}

impl GemanReport {
    pub fn summary(&self) -> GemanSummary {
        GemanSummary { class: self.class, alpha: self.sigma2_form.alpha, alpha_se: self.sigma2_form.alpha_se }
    }

    fn inconclusive(note: String) -> Self {
        let f = classify_form(&[], &[], 0.0, &ClassifierConfig { zero_tol: -1.0, ..Default::default() });
        GemanReport {
            class: GemanClass::Inconclusive,
            sigma2_form: f,
            lambda_form: f,
            forms_agree: true,
            table: vec![],
            note: Some(note),
        }
    }
}

/// Classify the convergence at 0 of `int sigma2(t) / t` and of
/// `int (l2 + r''(t)) / t` on a dyadic grid.
///
/// Failures to evaluate the model (undecidable spectral tails, quadrature
/// failures) give `Inconclusive`; degenerate lags are errors, since the grid
/// must lie in the valid range.
pub fn geman_classify<C: StationaryCovariance + ?Sized>(
    cov: &C,
    grid: &DyadicGrid,
    cfg: &ClassifierConfig,
) -> Result<GemanReport> {
    let lags = grid.lags();
    if lags.len() < 6 {
        return Err(Error::InvalidParameter("dyadic grid needs at least 6 lags".into()));
    }
    let mut table = Vec::with_capacity(lags.len());
    for &tau in &lags {
        let row = cov.sigma2(tau).and_then(|s| Ok(GemanRow { tau, sigma2: s, lambda2_plus_r2: cov.lambda2_plus_r2(tau)? }));
        match row {
            Ok(r) => table.push(r),
            Err(e @ Error::DegenerateLag { .. }) | Err(e @ Error::InvalidParameter(_)) => return Err(e),
            Err(e) => return Ok(GemanReport::inconclusive(format!("lag {tau:e}: {e}"))),
        }
    }
    let l2 = cov.lambda2();
    let s: Vec<f64> = table.iter().map(|r| r.sigma2).collect();
    let g: Vec<f64> = table.iter().map(|r| r.lambda2_plus_r2).collect();
    let sigma2_form = classify_form(&lags, &s, l2, cfg);
    let lambda_form = classify_form(&lags, &g, l2, cfg);
    let forms_agree = sigma2_form.class == lambda_form.class;
    let class = if forms_agree { sigma2_form.class } else { GemanClass::Inconclusive };
    Ok(GemanReport { class, sigma2_form, lambda_form, forms_agree, table, note: None })
}
