use std::time::Instant;

use super::{Checker, Scale, ValidationConfig};
use crate::covmodels::{CovarianceModel1D, ModelSpec, Moment};
use crate::error::{Error, Result};
use crate::field::{IsotropicFieldModel, RadialProfile};
use crate::kacrice::{
    length_second_moment_2d_to_1d, mean_roots_2d, rice_mean_1d, second_factorial_moment_1d, second_moment_2d_zero, OneDConfig,
    RadialConfig, Rect,
};
use crate::simulate::{run_ensemble, EnsembleConfig, EnsembleTarget, Level, SimulationEnsemble};
use crate::stats::batch_means_in;

fn runtime(ck: &mut Checker, start: Instant, limit: f64) {
    let t = start.elapsed().as_secs_f64();
    ck.holds("runtime", t < limit, format!("{t:.1} s, limit {limit} s"));
}

fn finite(m: Moment) -> Result<f64> {
    m.finite().ok_or_else(|| Error::InvalidParameter("expected a finite reference moment".into()))
}

fn ensemble(
    cfg: &ValidationConfig,
    stream: u64,
    target: EnsembleTarget,
    levels: Vec<Level>,
    replicates: usize,
    resolution: usize,
    coarsenings: usize,
) -> Result<SimulationEnsemble> {
    let mut e = EnsembleConfig::new(target, levels, replicates, resolution, cfg.seed.wrapping_mul(1000).wrapping_add(stream));
    e.coarsenings = coarsenings;
    run_ensemble(&e)
}

pub(super) fn moments_1d(cfg: &ValidationConfig, ck: &mut Checker) -> Result<()> {
    let start = Instant::now();
    let model = CovarianceModel1D::gaussian_exp(1.0)?;
    for (k, t_len) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let target = EnsembleTarget::Crossings { model: ModelSpec::GaussianExp { scale: 1.0 }, t_len };
        let ens = ensemble(cfg, 50 + k as u64, target, vec![Level::Scalar(0.0), Level::Scalar(1.0)], 100_000, 1 << 14, 0)?;
        for (agg, u) in ens.aggregates.iter().zip([0.0, 1.0]) {
            let mc = &agg.per_resolution[0];
            let (kr, _) = second_factorial_moment_1d(&model, u, t_len, &OneDConfig::default())?;
            let sf = finite(kr.second_factorial)?;
            let se = mc.second_factorial_se.hypot(kr.quad_error);
            ck.below(
                format!("E[N(N-1)] u={u} T={t_len}"),
                (mc.second_factorial - sf).abs() / se,
                3.0,
                format!("MC {:.5} +- {:.5}, Kac-Rice {sf:.5}; z", mc.second_factorial, mc.second_factorial_se),
            );
            let rice = rice_mean_1d(&model, u, t_len);
            ck.below(
                format!("E[N] u={u} T={t_len}"),
                (mc.mean - rice).abs() / mc.mean_se,
                3.0,
                format!("MC {:.5} +- {:.5}, Rice {rice:.5}; z", mc.mean, mc.mean_se),
            );
        }
    }
    runtime(ck, start, 300.0);
    Ok(())
}

const UNIT_SQUARE: Rect = Rect { width: 1.0, height: 1.0 };
const PROFILE: RadialProfile = RadialProfile::GaussianExp { scale: 1.0 };
/// Constant in `A(r, u) <= C sigma2_max(r)` on the radial grid.
const MAJORANT: f64 = 4.0;

pub(super) fn roots_2d(cfg: &ValidationConfig, ck: &mut Checker) -> Result<()> {
    let start = Instant::now();
    let (replicates, resolution) = match cfg.scale {
        Scale::Desk => (300, 256),
        Scale::Full => (1000, 512),
    };
    let coords = vec![PROFILE, PROFILE];
    let field = IsotropicFieldModel::new(coords.clone())?;
    let levels = [vec![0.0, 0.0], vec![1.0, 1.0]];
    let target = EnsembleTarget::Roots { coords, rect: UNIT_SQUARE };
    let ens = ensemble(cfg, 70, target, levels.iter().cloned().map(Level::Vector).collect(), replicates, resolution, 0)?;
    for (agg, u) in ens.aggregates.iter().zip(&levels) {
        let mc = &agg.per_resolution[0];
        let mean = mean_roots_2d(&field, u, &UNIT_SQUARE);
        ck.below(
            format!("E[N] u={u:?}"),
            (mc.mean - mean).abs() / mc.mean_se,
            3.0,
            format!("MC {:.5} +- {:.5}, Kac-Rice {mean:.5}; z", mc.mean, mc.mean_se),
        );
        let kr = second_moment_2d_zero(&field, u, &UNIT_SQUARE, &RadialConfig::default())?;
        let sf = finite(kr.report.second_factorial)?;
        let se = (mc.second_factorial_se.powi(2) + kr.report.inner_mc_se.powi(2) + kr.report.quad_error.powi(2)).sqrt();
        ck.below(
            format!("E[N(N-1)] u={u:?}"),
            (mc.second_factorial - sf).abs() / se,
            3.0,
            format!(
                "MC {:.5} +- {:.5}, Kac-Rice {sf:.5} +- {:.5}; z",
                mc.second_factorial, mc.second_factorial_se, kr.report.inner_mc_se
            ),
        );
        let ratio = kr.radial.iter().filter(|row| row.sigma2_max > 0.0).map(|row| row.a / row.sigma2_max).fold(0.0, f64::max);
        ck.below(
            format!("A <= C sigma2_max u={u:?}"),
            ratio,
            MAJORANT,
            format!("max A / sigma2_max over {} radial nodes", kr.radial.len()),
        );
    }
    if cfg.scale == Scale::Full {
        runtime(ck, start, 1200.0);
    }
    Ok(())
}

pub(super) fn length_2d(cfg: &ValidationConfig, ck: &mut Checker) -> Result<()> {
    let start = Instant::now();
    let (replicates, resolution) = match cfg.scale {
        Scale::Desk => (300, 512),
        Scale::Full => (1000, 1024),
    };
    let levels = [0.0, 1.0];
    let target = EnsembleTarget::Length { profile: PROFILE, rect: UNIT_SQUARE };
    let ens = ensemble(cfg, 80, target, levels.iter().map(|&u| Level::Scalar(u)).collect(), replicates, resolution, 2)?;
    for (agg, u) in ens.aggregates.iter().zip(levels) {
        let res = &agg.per_resolution;
        let fine = res[0].second_factorial;
        let spread = res[1..].iter().map(|r| (r.second_factorial - fine).abs() / fine).fold(0.0, f64::max);
        ck.below(
            format!("E[L^2] stable u={u}"),
            spread,
            0.05,
            format!(
                "{:.5} / {:.5} / {:.5} at {} / {} / {} intervals; max relative change",
                fine,
                res[1].second_factorial,
                res[2].second_factorial,
                resolution,
                resolution / 2,
                resolution / 4
            ),
        );
        let kr = length_second_moment_2d_to_1d(&PROFILE, u, &UNIT_SQUARE, &RadialConfig::default())?;
        let l2 = finite(kr.report.second_moment)?;
        let se = (res[0].second_factorial_se.powi(2) + kr.report.inner_mc_se.powi(2) + kr.report.quad_error.powi(2)).sqrt();
        ck.below(
            format!("E[L^2] u={u}"),
            (fine - l2).abs() / se,
            3.0,
            format!("MC {fine:.5} +- {:.5}, Kac-Rice {l2:.5} +- {:.5}; z", res[0].second_factorial_se, kr.report.inner_mc_se),
        );
    }
    if cfg.scale == Scale::Full {
        runtime(ck, start, 900.0);
    }
    Ok(())
}

pub(super) fn divergence(cfg: &ValidationConfig, ck: &mut Checker) -> Result<()> {
    const REPLICATES: usize = 20_000;
    const COARSENINGS: usize = 3;
    let models = [
        ("ScaleMixture(2, 1.5)", ModelSpec::ScaleMixture { base: 2.0, decay: 1.5 }, true),
        ("ScaleMixture(2, 3)", ModelSpec::ScaleMixture { base: 2.0, decay: 3.0 }, false),
        ("GaussianExp(1)", ModelSpec::GaussianExp { scale: 1.0 }, false),
        ("SineCosine(2 pi)", ModelSpec::SineCosine { w: 2.0 * std::f64::consts::PI }, false),
    ];
    for (k, (name, model, divergent)) in models.into_iter().enumerate() {
        let target = EnsembleTarget::Crossings { model, t_len: 1.0 };
        let ens = ensemble(cfg, 90 + k as u64, target, vec![Level::Scalar(0.0)], REPLICATES, 1 << 14, COARSENINGS)?;
        let res = &ens.aggregates[0].per_resolution;
        let table = res.iter().map(|r| format!("{:.4}", r.second_factorial)).collect::<Vec<_>>().join(" / ");
        if divergent {
            let incs: Vec<f64> = res.iter().filter_map(|r| r.increment_from_coarser).collect();
            ck.holds(
                format!("{name} increases at every doubling"),
                incs.len() == COARSENINGS && incs.iter().all(|&d| d > 0.0),
                format!("E[N(N-1)] finest first: {table}"),
            );
            // paired change from the coarsest to the finest grid
            let stride = COARSENINGS + 1;
            let sf = |x: f64| x * (x - 1.0);
            let total: Vec<f64> = ens.records.chunks(stride).map(|c| sf(c[0].value) - sf(c[COARSENINGS].value)).collect();
            let est = batch_means_in(&total, ens.config.batches);
            ck.holds(
                format!("{name} does not stabilize"),
                est.mean > 3.0 * est.se,
                format!("total increase {:.4} +- {:.4} over {COARSENINGS} doublings", est.mean, est.se),
            );
        } else {
            let (inc, se) = (res[0].increment_from_coarser.unwrap_or(f64::NAN), res[0].increment_se.unwrap_or(f64::NAN));
            ck.holds(
                format!("{name} stabilizes"),
                inc.abs() <= 3.0 * se,
                format!("finest increment {inc:.5} +- {se:.5}; E[N(N-1)] finest first: {table}"),
            );
        }
    }
    Ok(())
}
