use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::count::{contour_length, count_crossings_strided, count_roots_2d};
use super::sample1d::{ProcessSampler1D, SamplerOptions};
use super::sample2d::FieldSampler2D;
use super::{stream_rng, GridField};
use crate::covmodels::{CovarianceModel1D, ModelSpec};
use crate::error::{Error, Result};
use crate::field::RadialProfile;
use crate::kacrice::Rect;
use crate::stats::{batch_means_in, Estimate};

/// What each replicate measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum EnsembleTarget {
    /// Crossings of a process on `[0, t_len]`.
    Crossings { model: ModelSpec, t_len: f64 },
    /// Roots of a planar field with independent isotropic coordinates.
    Roots { coords: Vec<RadialProfile>, rect: Rect },
    /// Length of a level curve of a scalar planar field.
    Length { profile: RadialProfile, rect: Rect },
}

/// A level: scalar for crossings and lengths, one entry per coordinate for roots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Level {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Level {
    fn as_vec(&self) -> Vec<f64> {
        match self {
            Level::Scalar(u) => vec![*u],
            Level::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub target: EnsembleTarget,
    pub levels: Vec<Level>,
    pub replicates: usize,
    /// Grid intervals over `[0, T]`, or along the rectangle's width.
    pub resolution: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Each statistic is also computed on the grids coarsened by `2, 4, ...,
    /// 2^coarsenings` of the same sample.
    #[serde(default = "default_coarsenings")]
    pub coarsenings: usize,
    #[serde(default)]
    pub sampler: SamplerOptions,
}

fn default_batches() -> usize {
    20
}
fn default_coarsenings() -> usize {
    1
}

impl EnsembleConfig {
    pub fn new(target: EnsembleTarget, levels: Vec<Level>, replicates: usize, resolution: usize, seed: u64) -> Self {
        EnsembleConfig {
            target,
            levels,
            replicates,
            resolution,
            seed,
            batches: default_batches(),
            coarsenings: default_coarsenings(),
            sampler: SamplerOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.replicates < 2 {
            return bad(format!("need at least 2 replicates, got {}", self.replicates));
        }
        if self.levels.is_empty() {
            return bad("need at least one level".into());
        }
        if self.batches < 2 {
            return bad("need at least 2 batches".into());
        }
        let step = 1usize << self.coarsenings;
        if self.resolution == 0 || self.resolution % step != 0 {
            return bad(format!("resolution {} must be a positive multiple of 2^{}", self.resolution, self.coarsenings));
        }
        let want = match &self.target {
            EnsembleTarget::Roots { coords, .. } => coords.len(),
            _ => 1,
        };
        if self.levels.iter().any(|l| l.as_vec().len() != want) {
            return bad(format!("every level needs {want} component(s)"));
        }
        match &self.target {
            EnsembleTarget::Crossings { t_len, .. } if !(*t_len > 0.0 && t_len.is_finite()) => {
                bad(format!("invalid interval length {t_len}"))
            }
            EnsembleTarget::Roots { coords, .. } if coords.len() != 2 => bad("root counting needs exactly 2 coordinates".into()),
            EnsembleTarget::Roots { rect, .. } | EnsembleTarget::Length { rect, .. } => {
                let ny = rect.height / rect.width * self.resolution as f64;
                if !(rect.width > 0.0 && rect.height > 0.0) || (ny - ny.round()).abs() > 1e-9 || (ny.round() as usize) % step != 0
                {
                    return bad(format!(
                        "rectangle {rect:?} must hold a whole number of cells divisible by 2^{}",
                        self.coarsenings
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// One CSV row: a statistic of one replicate at one level and grid spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate_id: usize,
    pub level_index: usize,
    pub delta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionAggregate {
    pub delta: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    /// `E[N(N - 1)]` for counts, `E[L^2]` for lengths.
    pub second_factorial: f64,
    pub second_factorial_se: f64,
    pub second_moment: f64,
    pub second_moment_se: f64,
    /// Change of `second_factorial` from the next coarser grid, computed on
    /// the same samples, with its batch-means SE.
    pub increment_from_coarser: Option<f64>,
    pub increment_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelAggregate {
    pub level: Level,
    /// Finest grid first.
    pub per_resolution: Vec<ResolutionAggregate>,
    /// `2 m(delta) - m(2 delta)` for the mean, removing the `O(delta)` bias.
    pub richardson_mean: Option<f64>,
    pub richardson_bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationEnsemble {
    pub config: EnsembleConfig,
    /// Grid spacings, finest first.
    pub deltas: Vec<f64>,
    pub sampler: String,
    pub failed_replicates: usize,
    pub aggregates: Vec<LevelAggregate>,
    #[serde(skip)]
    pub records: Vec<ReplicateRecord>,
}

fn coarsen(field: &GridField, step: usize) -> GridField {
    if step == 1 {
        return field.clone();
    }
    let (nx, ny) = (field.nx(), field.ny());
    let (cx, cy) = ((nx - 1) / step + 1, (ny - 1) / step + 1);
    let layers =
        field.layers.iter().map(|l| (0..cy).flat_map(|j| (0..cx).map(move |i| l[j * step * nx + i * step])).collect()).collect();
    GridField { shape: vec![cx, cy], spacing: field.spacing * step as f64, layers }
}

/// Per-replicate values indexed `[level][resolution]`, plus whether the replicate errored.
type ReplicateValues = (Vec<Vec<f64>>, bool);

/// Runs the ensemble. Replicates are drawn from counter-based substreams of
/// the master seed and reduced in replicate order, so the output does not
/// depend on the number of worker threads.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<SimulationEnsemble> {
    cfg.validate()?;
    let steps: Vec<usize> = (0..=cfg.coarsenings).map(|c| 1 << c).collect();
    let levels: Vec<Vec<f64>> = cfg.levels.iter().map(Level::as_vec).collect();
    let (values, delta, sampler_desc, is_count): (Vec<ReplicateValues>, f64, String, bool) = match &cfg.target {
        EnsembleTarget::Crossings { model, t_len } => {
            let model = CovarianceModel1D::from_spec(model)?;
            let n = cfg.resolution;
            let delta = t_len / n as f64;
            // one draw covers up to 2^20 points, tiled into windows
            let want = (n * cfg.replicates.div_ceil(2)).next_power_of_two().min(1 << 20);
            let sampler = ProcessSampler1D::with_min_size(&model, delta, n + 1, want, &cfg.sampler)?;
            let per = sampler.windows_per_draw();
            let draws = cfg.replicates.div_ceil(per);
            let mut all: Vec<ReplicateValues> = (0..draws)
                .into_par_iter()
                .flat_map_iter(|d| {
                    let mut rng = stream_rng(cfg.seed, d as u64);
                    sampler
                        .sample_windows(&mut rng)
                        .into_iter()
                        .map(|w| {
                            let v = levels
                                .iter()
                                .map(|u| steps.iter().map(|&s| count_crossings_strided(&w, u[0], s) as f64).collect())
                                .collect();
                            (v, false)
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            all.truncate(cfg.replicates);
            (all, delta, format!("{sampler:?}"), true)
        }
        EnsembleTarget::Roots { rect, .. } | EnsembleTarget::Length { rect, .. } => {
            let (profiles, is_roots) = match &cfg.target {
                EnsembleTarget::Roots { coords, .. } => (coords.clone(), true),
                EnsembleTarget::Length { profile, .. } => (vec![*profile], false),
                _ => unreachable!(),
            };
            let sampler = FieldSampler2D::for_profiles(&profiles, rect, cfg.resolution, &cfg.sampler)?;
            let all = (0..cfg.replicates)
                .into_par_iter()
                .map(|r| -> Result<ReplicateValues> {
                    let field = sampler.sample(&mut stream_rng(cfg.seed, r as u64))?;
                    let grids: Vec<GridField> = steps.iter().map(|&s| coarsen(&field, s)).collect();
                    let mut failed = false;
                    let mut v = Vec::with_capacity(levels.len());
                    for u in &levels {
                        let mut row = Vec::with_capacity(grids.len());
                        for g in &grids {
                            if is_roots {
                                let rc = count_roots_2d(g, u)?;
                                failed |= !rc.stalled_cells.is_empty();
                                row.push(rc.count as f64);
                            } else {
                                row.push(contour_length(g, u[0])?);
                            }
                        }
                        v.push(row);
                    }
                    Ok((v, failed))
                })
                .collect::<Result<Vec<_>>>()?;
            (all, sampler.delta, format!("{:?}", sampler), is_roots)
        }
    };
    let failed = values.iter().filter(|v| v.1).count();
    if failed * 100 > cfg.replicates {
        return Err(Error::ReplicateFailures { failed, total: cfg.replicates, first: "Newton polish stalled".into() });
    }
    let deltas: Vec<f64> = steps.iter().map(|&s| delta * s as f64).collect();
    let mut records = Vec::with_capacity(values.len() * levels.len() * steps.len());
    for (rid, (v, _)) in values.iter().enumerate() {
        for (li, row) in v.iter().enumerate() {
            for (ri, &x) in row.iter().enumerate() {
                records.push(ReplicateRecord { replicate_id: rid, level_index: li, delta: deltas[ri], value: x });
            }
        }
    }
    let aggregates = (0..levels.len())
        .map(|li| {
            let column = |ri: usize| -> Vec<f64> { values.iter().map(|(v, _)| v[li][ri]).collect() };
            let sf = |x: f64| if is_count { x * (x - 1.0) } else { x * x };
            let per_resolution: Vec<ResolutionAggregate> = (0..steps.len())
                .map(|ri| {
                    let x = column(ri);
                    let n = x.len() as f64;
                    let Estimate { mean, se: mean_se } = batch_means_in(&x, cfg.batches);
                    let variance = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                    let Estimate { mean: second_factorial, se: second_factorial_se } =
                        batch_means_in(&x.iter().map(|&v| sf(v)).collect::<Vec<_>>(), cfg.batches);
                    let Estimate { mean: second_moment, se: second_moment_se } =
                        batch_means_in(&x.iter().map(|&v| v * v).collect::<Vec<_>>(), cfg.batches);
                    let (increment_from_coarser, increment_se) = if ri + 1 < steps.len() {
                        let c = column(ri + 1);
                        let d: Vec<f64> = x.iter().zip(&c).map(|(&a, &b)| sf(a) - sf(b)).collect();
                        let Estimate { mean: m, se } = batch_means_in(&d, cfg.batches);
                        (Some(m), Some(se))
                    } else {
                        (None, None)
                    };
                    ResolutionAggregate {
                        delta: deltas[ri],
                        mean,
                        mean_se,
                        variance,
                        second_factorial,
                        second_factorial_se,
                        second_moment,
                        second_moment_se,
                        increment_from_coarser,
                        increment_se,
                    }
                })
                .collect();
            let (richardson_mean, richardson_bias) = match per_resolution.as_slice() {
                [fine, coarse, ..] => (Some(2.0 * fine.mean - coarse.mean), Some(fine.mean - coarse.mean)),
                _ => (None, None),
            };
            LevelAggregate { level: cfg.levels[li].clone(), per_resolution, richardson_mean, richardson_bias }
        })
        .collect();
    Ok(SimulationEnsemble { config: cfg.clone(), deltas, sampler: sampler_desc, failed_replicates: failed, aggregates, records })
}

impl SimulationEnsemble {
    /// Per-replicate rows: `replicate_id,level_index,delta,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Aggregates, the configuration and the grid spacings as JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble serializes")
    }
}
