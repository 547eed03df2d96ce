use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{rel_diff, Checker, ValidationConfig};
use crate::covmodels::{CovarianceModel1D, StationaryCovariance};
use crate::error::Result;
use crate::field::RadialProfile;
use crate::gausscond::{
    abs_moment, axis_regression, hermite, lcov_closed_form, lcov_generic, lmean_closed_form, mehler_covariance, pair_regression,
    pair_regression_generic, product_variance_lower, BivariateAbsMomentQuery,
};
use crate::kacrice::{geman_classify, ClassifierConfig, DyadicGrid, GemanClass};
use crate::simulate::stream_rng;
use crate::stats::batch_means_in;

fn runtime(ck: &mut Checker, start: Instant, limit: f64) {
    let t = start.elapsed().as_secs_f64();
    ck.holds("runtime", t < limit, format!("{t:.2} s, limit {limit} s"));
}

fn random_model(rng: &mut impl Rng) -> Result<Box<dyn StationaryCovariance>> {
    Ok(match rng.gen_range(0..4) {
        0 => Box::new(CovarianceModel1D::gaussian_exp(rng.gen_range(0.5..2.0))?),
        1 => Box::new(CovarianceModel1D::matern_like(rng.gen_range(2.5..5.0))?),
        2 => Box::new(CovarianceModel1D::scale_mixture(2.0, rng.gen_range(2.5..4.0))?),
        _ => Box::new(RadialProfile::Cauchy { scale: rng.gen_range(0.5..2.0), beta: rng.gen_range(0.5..3.0) }.line()),
    })
}

pub(super) fn regression(cfg: &ValidationConfig, ck: &mut Checker) -> Result<()> {
    let start = Instant::now();
    let mut rng = stream_rng(cfg.seed, 1);
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        let model = random_model(&mut rng)?;
        let tau = rng.gen_range(0.1..2.0) / model.lambda2().sqrt();
        let u = rng.gen_range(-3.0..3.0);
        let reg = pair_regression(model.as_ref(), tau, u)?;
        let g = pair_regression_generic(model.as_ref(), tau, u)?;
        let r = model.eval(tau)?.r;
        // generic targets are (X'(0), X'(t))
        let diffs = [
            rel_diff(reg.mu1, g.mean[1]),
            rel_diff(reg.mu2, g.mean[0]).max(rel_diff(reg.mu2, -reg.mu1)),
            rel_diff(reg.sigma2, g.cov[(0, 0)]).max(rel_diff(reg.sigma2, g.cov[(1, 1)])),
            rel_diff(reg.det, 1.0 - r * r),
        ];
        for (w, d) in worst.iter_mut().zip(diffs) {
            *w = w.max(d);
        }
    }
    for (name, w) in ["mu1", "mu2 = -mu1", "sigma2", "det = 1 - r^2"].iter().zip(worst) {
        ck.below(*name, w, 1e-10, "max relative difference over 100 triples");
    }
    runtime(ck, start, 5.0);
    Ok(())
}

pub(super) fn lcov(cfg: &ValidationConfig, ck: &mut Checker) -> Result<()> {
    let start = Instant::now();
    let mut rng = stream_rng(cfg.seed, 2);
    let (mut cov_err, mut mean_err, mut coupling_err) = (0.0f64, 0.0f64, 0.0f64);
    let (mut pattern_bad, mut extra_coupling) = (0, 0);
    for _ in 0..100 {
        let scale = rng.gen_range(0.3..3.0);
        let p = if rng.gen_bool(0.5) {
            RadialProfile::GaussianExp { scale }
        } else {
            RadialProfile::Cauchy { scale, beta: rng.gen_range(0.3..4.0) }
        };
        let d = rng.gen_range(1..=3);
        let r = scale * rng.gen_range(0.1..2.0);
        let u = rng.gen_range(-2.0..2.0);
        let closed = lcov_closed_form(&p, d, r)?;
        let mean = lmean_closed_form(&p, d, r, u)?;
        let g = lcov_generic(&p, d, r, u)?;
        for a in 0..2 * d {
            mean_err = mean_err.max((mean[a] - g.mean[a]).abs());
            for b in 0..2 * d {
                cov_err = cov_err.max((closed[(a, b)] - g.cov[(a, b)]).abs());
                if closed[(a, b)] == 0.0 && g.cov[(a, b)].abs() > 1e-12 {
                    pattern_bad += 1;
                }
            }
        }
        // along-axis derivatives couple only with each other
        for b in (0..2 * d).filter(|&b| b != 0 && b != d) {
            extra_coupling += (closed[(0, b)] != 0.0) as usize + (closed[(d, b)] != 0.0) as usize;
        }
        coupling_err = coupling_err.max((closed[(0, d)] - axis_regression(&p, r)?.b_sigma).abs());
    }
    ck.below("covariance", cov_err, 1e-10, "max absolute difference over 100 pairs");
    ck.below("mean", mean_err, 1e-10, "max absolute difference over 100 pairs");
    ck.holds("zero pattern", pattern_bad == 0, format!("{pattern_bad} entries zero in closed form but not in generic law"));
    ck.holds("single coupling", extra_coupling == 0, format!("{extra_coupling} along-axis couplings besides b sigma"));
    ck.below("b sigma entry", coupling_err, 1e-15, "closed form vs axis regression");
    runtime(ck, start, 10.0);
    Ok(())
}

fn normal_pairs(seed: u64, stream: u64, n: usize, rho: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, stream);
    let c = (1.0 - rho * rho).sqrt();
    (0..n)
        .map(|_| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            (z1, rho * z1 + c * z2)
        })
        .unzip()
}

pub(super) fn mehler(cfg: &ValidationConfig, ck: &mut Checker) -> Result<()> {
    const N: usize = 1_000_000;
    for (k, rho) in [0.0, 0.3, -0.3, 0.9, -0.9].into_iter().enumerate() {
        let (y1, y2) = normal_pairs(cfg.seed, 30 + k as u64, N, rho);
        let h1: Vec<Vec<f64>> = (0..=4).map(|i| y1.iter().map(|&y| hermite(i, y)).collect()).collect();
        let h2: Vec<Vec<f64>> = (0..=4).map(|i| y2.iter().map(|&y| hermite(i, y)).collect()).collect();
        let mut worst = (0.0f64, 0, 0);
        for i in 0..=4 {
            for j in 0..=4 {
                let prod: Vec<f64> = h1[i].iter().zip(&h2[j]).map(|(a, b)| a * b).collect();
                let z = batch_means_in(&prod, 100).z_exact(mehler_covariance(i, j, rho));
                if z > worst.0 {
                    worst = (z, i, j);
                }
            }
        }
        ck.below(
            format!("mehler rho={rho}"),
            worst.0,
            3.0,
            format!("largest |MC - exact| / SE over i, j <= 4, at (i, j) = ({}, {})", worst.1, worst.2),
        );
    }

    // Var(Y1 Y2) with Y = m + standard pair, on a 5 x 5 x 5 grid
    const M: usize = 100_000;
    let ms = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut spec_bound = (0usize, f64::INFINITY, String::new());
    let (mut exact_worst, mut floor_bad) = (0.0f64, 0usize);
    for (k, rho) in [-0.9, -0.5, 0.0, 0.5, 0.9].into_iter().enumerate() {
        let (z1, z2) = normal_pairs(cfg.seed, 40 + k as u64, M, rho);
        for &m1 in &ms {
            for &m2 in &ms {
                let w: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| (m1 + a) * (m2 + b)).collect();
                let mean = w.iter().sum::<f64>() / M as f64;
                let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (M - 1) as f64;
                let m4 = w.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / M as f64;
                let se = ((m4 - var * var) / M as f64).sqrt();
                let margin = (var - (product_variance_lower(rho) - 3.0 * se)) / se;
                if margin < 0.0 {
                    spec_bound.0 += 1;
                }
                if margin < spec_bound.1 {
                    spec_bound = (spec_bound.0, margin, format!("m=({m1}, {m2}) rho={rho}: Var {var:.4} +- {se:.4}"));
                }
                let exact = m1 * m1 + m2 * m2 + 2.0 * rho * m1 * m2 + 1.0 + rho * rho;
                exact_worst = exact_worst.max((var - exact).abs() / se);
                if var < 1.0 + rho * rho - 3.0 * se {
                    floor_bad += 1;
                }
            }
        }
    }
    ck.holds(
        "Var >= 1 + 2 rho^2 - 3 SE",
        spec_bound.0 == 0,
        format!("{} of 125 grid points violate the bound; worst {}", spec_bound.0, spec_bound.2),
    );
    ck.holds("Var >= 1 + rho^2 - 3 SE", floor_bad == 0, format!("{floor_bad} of 125 grid points violate the bound"));
    ck.below("Var = m1^2 + m2^2 + 2 rho m1 m2 + 1 + rho^2", exact_worst, 3.0, "largest |MC - exact| / SE over the grid");
    Ok(())
}

pub(super) fn abs_moments(_cfg: &ValidationConfig, ck: &mut Checker) -> Result<()> {
    let mut worst = 0.0f64;
    for k in 0..50 {
        let rho = -0.98 + 1.96 * k as f64 / 49.0;
        let closed = 2.0 / std::f64::consts::PI * ((1.0 - rho * rho).sqrt() + rho * rho.asin());
        worst = worst.max((abs_moment(&BivariateAbsMomentQuery::new(0.0, 0.0, rho)?) - closed).abs());
    }
    ck.below("centred closed form", worst, 1e-8, "max absolute difference over 50 rho");

    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for a in 0..13 {
        for b in 0..13 {
            for c in 0..21 {
                let q = BivariateAbsMomentQuery::new(-3.0 + 0.5 * a as f64, -3.0 + 0.5 * b as f64, -1.0 + 0.1 * c as f64)?;
                let v = abs_moment(&q);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    ck.holds("bounded on |m| <= 3", lo > 0.0 && hi.is_finite(), format!("c = {lo:.6}, C = {hi:.6} on a 13 x 13 x 21 grid"));
    Ok(())
}

/// `(k, sigma2(2^-k))` for `ScaleMixture(2, 1.5)`, from the 60-digit mpmath
/// evaluation in `tests/oracles/covariance_oracles.py`.
const DIVERGENT_ORACLE: [(i32, f64); 4] =
    [(4, 0.866941597242924903), (12, 0.515268522344431491), (24, 0.367300839199344805), (40, 0.285420027096564546)];

pub(super) fn geman(_cfg: &ValidationConfig, ck: &mut Checker) -> Result<()> {
    let start = Instant::now();
    let (grid, ccfg) = (DyadicGrid::default(), ClassifierConfig::default());

    let g = geman_classify(&CovarianceModel1D::gaussian_exp(1.0)?, &grid, &ccfg)?;
    let alpha = g.sigma2_form.alpha.unwrap_or(f64::NAN);
    ck.holds("GaussianExp converges", g.class == GemanClass::Converges, format!("{:?}", g.class));
    ck.below("GaussianExp alpha", (alpha - 2.0).abs(), 0.1, format!("alpha = {alpha:.4}"));
    ck.holds("GaussianExp forms agree", g.forms_agree, format!("{:?} / {:?}", g.sigma2_form.class, g.lambda_form.class));

    let g = geman_classify(&CovarianceModel1D::sine_cosine(1.0)?, &grid, &ccfg)?;
    ck.holds("SineCosine converges", g.class == GemanClass::Converges, format!("{:?}", g.class));
    ck.holds("SineCosine forms agree", g.forms_agree, format!("{:?} / {:?}", g.sigma2_form.class, g.lambda_form.class));

    let m = CovarianceModel1D::scale_mixture(2.0, 1.5)?;
    let g = geman_classify(&m, &grid, &ccfg)?;
    ck.holds("ScaleMixture(2, 1.5) diverges", g.class == GemanClass::Diverges, format!("{:?}", g.class));
    ck.holds("ScaleMixture(2, 1.5) forms agree", g.forms_agree, format!("{:?} / {:?}", g.sigma2_form.class, g.lambda_form.class));
    let mut worst = 0.0f64;
    for (k, s2) in DIVERGENT_ORACLE {
        worst = worst.max(rel_diff(m.sigma2(2f64.powi(-k))?, s2));
    }
    ck.below("divergent model matches oracle", worst, 1e-9, "max relative difference of sigma2 at 2^-4 .. 2^-40");
    // the oracle alone: sigma2 ~ |log t|^-beta with beta <= 1 makes int sigma2 / t diverge
    let (k1, s1) = DIVERGENT_ORACLE[1];
    let (k2, s2) = DIVERGENT_ORACLE[3];
    let beta = (s1 / s2).ln() / (k2 as f64 / k1 as f64).ln();
    ck.holds("oracle decay exponent", beta < 1.0, format!("beta = {beta:.3} from the oracle values at 2^-12 and 2^-40"));
    runtime(ck, start, 60.0);
    Ok(())
}
