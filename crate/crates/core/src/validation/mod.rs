//! The acceptance matrix: closed forms against generic conditioning,
//! quadrature against Monte Carlo, and the divergence signature. Shared by
//! the `validate` command and the acceptance test.

mod analytic;
mod monte_carlo;

use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Problem sizes. `Desk` is what the `validate` command runs: criteria 1-6 as
/// stated and reduced versions of 7-8. `Full` runs 7-9 at their stated sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationConfig {
    pub seed: u64,
    /// Run only the checks whose id or group name equals this.
    pub filter: Option<String>,
    pub scale: Scale,
    /// Multiplies every tolerance; 0 makes every check fail.
    pub tolerance_scale: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig { seed: 1, filter: None, scale: Scale::Desk, tolerance_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubCheck {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub group: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub seconds: f64,
    pub subchecks: Vec<SubCheck>,
}

impl CheckResult {
    /// One line: id, group, PASS/FAIL, time, and the failing sub-checks.
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("[{status}] criterion {:>2} {:<11} {:>8.1} s  {}", self.id, self.group, self.seconds, self.title);
        for c in self.subchecks.iter().filter(|c| !c.passed) {
            s.push_str(&format!("\n        failed: {}: {}", c.label, c.detail));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    pub seconds: f64,
}

impl ValidationReport {
    pub fn table(&self) -> String {
        let mut s: String = self.checks.iter().map(|c| c.line() + "\n").collect();
        let n_pass = self.checks.iter().filter(|c| c.passed).count();
        s.push_str(&format!("{n_pass}/{} checks passed in {:.1} s\n", self.checks.len(), self.seconds));
        s
    }
}

/// Collects sub-check outcomes, with tolerances scaled by the hook.
pub(crate) struct Checker {
    scale: f64,
    subchecks: Vec<SubCheck>,
}

impl Checker {
    fn new(scale: f64) -> Self {
        Checker { scale, subchecks: Vec::new() }
    }

    /// `value < tol` with the tolerance scaled.
    pub(crate) fn below(&mut self, label: impl Into<String>, value: f64, tol: f64, detail: impl Into<String>) -> bool {
        let passed = value < tol * self.scale;
        self.push(label, passed, format!("{} ({value:.3e} vs tolerance {:.3e})", detail.into(), tol * self.scale))
    }

    /// A condition without a tolerance; fails under a zero tolerance scale.
    pub(crate) fn holds(&mut self, label: impl Into<String>, ok: bool, detail: impl Into<String>) -> bool {
        self.push(label, ok && self.scale > 0.0, detail.into())
    }

    fn push(&mut self, label: impl Into<String>, passed: bool, detail: String) -> bool {
        self.subchecks.push(SubCheck { label: label.into(), passed, detail });
        passed
    }

    fn error(&mut self, e: crate::Error) {
        self.push("evaluation", false, e.to_string());
    }
}

type CheckFn = fn(&ValidationConfig, &mut Checker) -> crate::Result<()>;

/// `(id, group, title, run)`.
const CHECKS: [(u32, &str, &str, CheckFn); 9] = [
    (1, "regression", "pair regression closed forms vs generic conditioning", analytic::regression),
    (2, "lcov", "gradient-pair covariance closed form vs generic conditioning", analytic::lcov),
    (3, "mehler", "Hermite orthogonality and product variance bound", analytic::mehler),
    (4, "absmoment", "E|Y1 Y2| closed form and bounds", analytic::abs_moments),
    (5, "moments1d", "1D Kac-Rice moments vs Monte Carlo", monte_carlo::moments_1d),
    (6, "geman", "convergence classifier on reference models", analytic::geman),
    (7, "roots2d", "planar root-count moments vs Monte Carlo", monte_carlo::roots_2d),
    (8, "length2d", "level-curve length moments vs Monte Carlo", monte_carlo::length_2d),
    (9, "divergence", "resolution signature of divergent and convergent models", monte_carlo::divergence),
];

/// Group names accepted by the filter, in order.
pub fn check_groups() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.1).collect()
}

fn selected(cfg: &ValidationConfig, id: u32, group: &str) -> bool {
    match &cfg.filter {
        Some(f) => f == group || f.parse::<u32>() == Ok(id),
        // the divergence signature is part of the full-size matrix only
        None => id != 9 || cfg.scale == Scale::Full,
    }
}

/// Run one check by id.
pub fn run_check(cfg: &ValidationConfig, id: u32) -> Option<CheckResult> {
    let &(id, group, title, f) = CHECKS.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let mut checker = Checker::new(cfg.tolerance_scale);
    if let Err(e) = f(cfg, &mut checker) {
        checker.error(e);
    }
    let passed = !checker.subchecks.is_empty() && checker.subchecks.iter().all(|c| c.passed);
    Some(CheckResult { id, group, title, passed, seconds: start.elapsed().as_secs_f64(), subchecks: checker.subchecks })
}

/// Run every selected check, in id order. An unknown filter selects nothing.
pub fn run_validation(cfg: &ValidationConfig) -> ValidationReport {
    let start = Instant::now();
    let checks: Vec<CheckResult> =
        CHECKS.iter().filter(|c| selected(cfg, c.0, c.1)).filter_map(|c| run_check(cfg, c.0)).collect();
    let passed = !checks.is_empty() && checks.iter().all(|c| c.passed);
    ValidationReport { config: cfg.clone(), checks, passed, seconds: start.elapsed().as_secs_f64() }
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub(crate) fn rel_diff(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}
