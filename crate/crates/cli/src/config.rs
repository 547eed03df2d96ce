use std::path::{Path, PathBuf};

use crossmoments::covmodels::ModelSpec;
use crossmoments::field::RadialProfile;
use crossmoments::kacrice::{OneDConfig, RadialConfig, Rect};
use crossmoments::simulate::{EnsembleConfig, EnsembleTarget, Level, SamplerOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a command reads. Omitted fields take the defaults, which are
/// written back into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Covariance of a process on an interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    /// Radial profiles of a planar field: two coordinates for roots, one for
    /// level-curve length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<Vec<RadialProfile>>,
    /// Levels `u`; scalars, or one entry per coordinate for roots.
    #[serde(default)]
    pub levels: Vec<Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    #[serde(default)]
    pub monte_carlo: MonteCarloSettings,
    #[serde(default)]
    pub output: OutputSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Interval { t_len: f64 },
    Rect(Rect),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSettings {
    pub one_d: OneDConfig,
    pub radial: RadialConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSettings {
    pub replicates: usize,
    pub resolution: usize,
    pub seed: u64,
    pub batches: usize,
    pub coarsenings: usize,
    pub sampler: SamplerOptions,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        MonteCarloSettings {
            replicates: 1000,
            resolution: 1024,
            seed: 0,
            batches: 20,
            coarsenings: 1,
            sampler: SamplerOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    /// Directory for CSV and JSON outputs; nothing is written when unset.
    pub dir: Option<PathBuf>,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub resolution: Option<usize>,
    pub out: Option<PathBuf>,
}

/// What the configuration describes.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Crossings { model: ModelSpec, t_len: f64 },
    Roots { coords: Vec<RadialProfile>, rect: Rect },
    Length { profile: RadialProfile, rect: Rect },
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let de = &mut serde_json::Deserializer::from_str(&text);
                serde_path_to_error::deserialize(de).map_err(|e| {
                    let key = e.path().to_string();
                    let key = if key == "." { "config".to_string() } else { key };
                    CliError::Config(format!("{key}: {}", e.into_inner()))
                })?
            }
            None => ExperimentConfig::empty(),
        };
        cfg.apply(overrides);
        cfg.fill_defaults();
        Ok(cfg)
    }

    fn empty() -> Self {
        ExperimentConfig {
            model: None,
            field: None,
            levels: vec![],
            domain: None,
            quadrature: QuadratureSettings::default(),
            monte_carlo: MonteCarloSettings::default(),
            output: OutputSettings::default(),
        }
    }

    fn apply(&mut self, o: &Overrides) {
        let mc = &mut self.monte_carlo;
        mc.seed = o.seed.unwrap_or(mc.seed);
        mc.replicates = o.replicates.unwrap_or(mc.replicates);
        mc.resolution = o.resolution.unwrap_or(mc.resolution);
        if o.out.is_some() {
            self.output.dir = o.out.clone();
        }
    }

    fn fill_defaults(&mut self) {
        let planar = self.field.is_some() && self.model.is_none();
        if self.domain.is_none() {
            self.domain =
                Some(if planar { Domain::Rect(Rect { width: 1.0, height: 1.0 }) } else { Domain::Interval { t_len: 1.0 } });
        }
        if self.levels.is_empty() {
            let coords = self.field.as_ref().map_or(1, |f| f.len());
            self.levels = vec![if planar && coords > 1 { Level::Vector(vec![0.0; coords]) } else { Level::Scalar(0.0) }];
        }
    }

    /// The 1D model, for commands that need one.
    pub fn model(&self) -> Result<&ModelSpec, CliError> {
        self.model.as_ref().ok_or_else(|| bad("model", "a process model is required"))
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        match (self.domain.unwrap_or(Domain::Interval { t_len: 1.0 }), &self.model, &self.field) {
            (_, Some(_), Some(_)) => Err(bad("field", "give either model or field, not both")),
            (Domain::Interval { t_len }, Some(model), None) => {
                if !(t_len > 0.0 && t_len.is_finite()) {
                    return Err(bad("domain.interval.t_len", format!("must be positive and finite, got {t_len}")));
                }
                Ok(Problem::Crossings { model: model.clone(), t_len })
            }
            (Domain::Rect(rect), None, Some(coords)) => {
                if !(rect.width > 0.0 && rect.height > 0.0 && rect.width.is_finite() && rect.height.is_finite()) {
                    return Err(bad("domain.rect", format!("needs positive finite width and height, got {rect:?}")));
                }
                match coords.as_slice() {
                    [profile] => Ok(Problem::Length { profile: *profile, rect }),
                    [_, _] => Ok(Problem::Roots { coords: coords.clone(), rect }),
                    _ => Err(bad("field", format!("needs 1 (length) or 2 (roots) profiles, got {}", coords.len()))),
                }
            }
            (Domain::Interval { .. }, None, _) => Err(bad("model", "an interval domain needs a process model")),
            (Domain::Rect(_), _, None) => Err(bad("field", "a rectangle domain needs field profiles")),
        }
    }

    /// Levels checked against the problem's dimension.
    pub fn levels(&self, problem: &Problem) -> Result<Vec<Vec<f64>>, CliError> {
        let want = match problem {
            Problem::Roots { coords, .. } => coords.len(),
            _ => 1,
        };
        self.levels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let v = match l {
                    Level::Scalar(u) => vec![*u],
                    Level::Vector(v) => v.clone(),
                };
                if v.len() != want || v.iter().any(|u| !u.is_finite()) {
                    return Err(bad(&format!("levels[{i}]"), format!("needs {want} finite component(s), got {v:?}")));
                }
                Ok(v)
            })
            .collect()
    }

    pub fn ensemble(&self, problem: &Problem) -> Result<EnsembleConfig, CliError> {
        let mc = &self.monte_carlo;
        if mc.replicates < 2 {
            return Err(bad("monte_carlo.replicates", format!("must be at least 2, got {}", mc.replicates)));
        }
        if mc.batches < 2 || mc.batches > mc.replicates {
            return Err(bad("monte_carlo.batches", format!("must be in 2..=replicates, got {}", mc.batches)));
        }
        if mc.resolution == 0 || !mc.resolution.is_multiple_of(1 << mc.coarsenings) {
            return Err(bad(
                "monte_carlo.resolution",
                format!("must be a positive multiple of 2^coarsenings = {}, got {}", 1usize << mc.coarsenings, mc.resolution),
            ));
        }
        self.levels(problem)?;
        let target = match problem.clone() {
            Problem::Crossings { model, t_len } => EnsembleTarget::Crossings { model, t_len },
            Problem::Roots { coords, rect } => EnsembleTarget::Roots { coords, rect },
            Problem::Length { profile, rect } => EnsembleTarget::Length { profile, rect },
        };
        let mut e = EnsembleConfig::new(target, self.levels.clone(), mc.replicates, mc.resolution, mc.seed);
        e.batches = mc.batches;
        e.coarsenings = mc.coarsenings;
        e.sampler = mc.sampler;
        Ok(e)
    }
}
