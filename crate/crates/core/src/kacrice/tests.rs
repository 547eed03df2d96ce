use super::*;
use crate::covmodels::{CovarianceModel1D, StationaryCovariance};
use crate::field::{CosineField, IsotropicCoordinate, IsotropicFieldModel, RadialProfile};
use crate::gausscond::lcov_closed_form;
use approx::assert_relative_eq;
use std::f64::consts::PI;

fn gauss() -> CovarianceModel1D {
    CovarianceModel1D::gaussian_exp(1.0).unwrap()
}

fn divergent() -> CovarianceModel1D {
    CovarianceModel1D::scale_mixture(2.0, 1.5).unwrap()
}

fn convergent_mixture() -> CovarianceModel1D {
    CovarianceModel1D::scale_mixture(2.0, 3.0).unwrap()
}

fn quick_radial() -> RadialConfig {
    RadialConfig {
        nodes_per_panel: 8,
        inner: InnerMcConfig { target_rel_se: 0.03, max_draws: 200_000, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn rice_mean_examples() {
    assert_relative_eq!(rice_mean_1d(&gauss(), 0.0, PI), 1.0, epsilon = 1e-15);
    let w = 3.0;
    let sc = CovarianceModel1D::sine_cosine(w).unwrap();
    assert_relative_eq!(rice_mean_1d(&sc, 0.0, 2.0 * PI / w), 2.0, epsilon = 1e-14);
    let means: Vec<f64> = (0..40).map(|k| rice_mean_1d(&gauss(), 0.25 * k as f64, 1.0)).collect();
    assert!(means.windows(2).all(|w| w[1] < w[0]));
    assert!(*means.last().unwrap() < 1e-20);
}

#[test]
fn classify_form_on_synthetic_shapes() {
    let grid = DyadicGrid::default();
    let lags = grid.lags();
    let cfg = ClassifierConfig::default();
    let fit = |f: &dyn Fn(f64) -> f64| classify_form(&lags, &lags.iter().map(|&t| f(t)).collect::<Vec<_>>(), 1.0, &cfg);
    let lin = fit(&|t| 3.0 * t);
    assert_eq!(lin.class, GemanClass::Converges);
    assert_relative_eq!(lin.alpha.unwrap(), 1.0, epsilon = 1e-10);
    assert_eq!(fit(&|t| t.powf(-0.5)).class, GemanClass::Diverges);
    assert_eq!(fit(&|_| 0.7).class, GemanClass::Diverges);
    let slow = fit(&|t| (-t.ln()).powf(-2.0));
    assert_eq!(slow.class, GemanClass::Converges);
    assert_relative_eq!(slow.beta.unwrap(), 2.0, epsilon = 1e-10);
    assert_eq!(fit(&|t| (-t.ln()).powf(-0.5)).class, GemanClass::Diverges);
    assert_eq!(fit(&|t| 1.0 / (-t.ln())).class, GemanClass::Inconclusive);
    let zero = fit(&|_| 0.0);
    assert_eq!(zero.class, GemanClass::Converges);
    assert!(zero.identically_zero);
}

#[test]
fn geman_classification_of_shipped_models() {
    let grid = DyadicGrid::default();
    let cfg = ClassifierConfig::default();
    let g = geman_classify(&gauss(), &grid, &cfg).unwrap();
    assert_eq!(g.class, GemanClass::Converges);
    assert!((g.sigma2_form.alpha.unwrap() - 2.0).abs() < 0.1);
    assert!(g.forms_agree);
    assert_eq!(g.table.len(), 37);

    let sc = geman_classify(&CovarianceModel1D::sine_cosine(2.0).unwrap(), &grid, &cfg).unwrap();
    assert_eq!(sc.class, GemanClass::Converges);
    assert!(sc.sigma2_form.identically_zero);
    assert!(sc.table.iter().all(|r| r.sigma2 == 0.0));

    let d = geman_classify(&divergent(), &grid, &cfg).unwrap();
    assert_eq!(d.class, GemanClass::Diverges);
    assert!(d.forms_agree);

    let c = geman_classify(&convergent_mixture(), &grid, &cfg).unwrap();
    assert_eq!(c.class, GemanClass::Converges);
    assert!(c.forms_agree);
}

#[test]
fn integrand_tracks_sigma2_over_tau() {
    for (cov, u) in [(gauss(), 0.0), (gauss(), 1.0), (convergent_mixture(), 0.0), (convergent_mixture(), 1.5)] {
        let ratios: Vec<f64> = DyadicGrid { k_min: 3, k_max: 30 }
            .lags()
            .into_iter()
            .map(|t| {
                let p = integrand_1d(&cov, u, 1.0, t).unwrap();
                p.value * t / p.sigma2
            })
            .collect();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.01 && hi < 10.0, "u={u}: ratio in [{lo}, {hi}]");
    }
}

#[test]
fn integrand_endpoint_means_are_opposite() {
    let p = integrand_1d(&gauss(), 1.3, 1.0, 0.4).unwrap();
    let r = (-0.08f64).exp();
    let r1 = -0.4 * r;
    assert_relative_eq!(p.mu1, r1 * 1.3 / (1.0 + r), epsilon = 1e-14);
    assert!(p.value > 0.0);
}

// independent oracle for u = 0: both conditional means vanish and the
// centered absolute moment has the closed form (2/pi)(sqrt(1-c^2) + c asin c)
fn centered_oracle(t_len: f64) -> f64 {
    let f = |t: f64| {
        let x = t * t;
        let r = (-0.5 * x).exp();
        let det = -(-x).exp_m1();
        // x / (e^x - 1) by its Bernoulli series near 0
        let bern = if x < 1e-3 { 1.0 - x / 2.0 + x * x / 12.0 - x.powi(4) / 720.0 } else { x / x.exp_m1() };
        let var = 1.0 - bern;
        let var = if x < 1e-3 { x / 2.0 - x * x / 12.0 + x.powi(4) / 720.0 } else { var };
        let cross = r * (1.0 - x - bern);
        let c = (cross / var).clamp(-1.0, 1.0);
        let abs = var * 2.0 / PI * ((1.0 - c * c).sqrt() + c * c.asin());
        2.0 * (t_len - t) * abs / (2.0 * PI * det.sqrt())
    };
    // composite Simpson on [1e-5, T]; the part below is O(1e-10)
    let n = 200_000;
    let (a, b) = (1e-5, t_len);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn second_factorial_matches_centered_oracle() {
    for t_len in [0.5, 1.0, 2.0] {
        let (rep, _) = second_factorial_moment_1d(&gauss(), 0.0, t_len, &OneDConfig::default()).unwrap();
        let v = rep.second_factorial.finite().unwrap();
        assert_relative_eq!(v, centered_oracle(t_len), max_relative = 1e-6);
        assert_relative_eq!(rep.second_moment.finite().unwrap(), v + rep.mean, epsilon = 1e-15);
    }
}

#[test]
fn second_factorial_special_cases() {
    let sc = CovarianceModel1D::sine_cosine(2.0).unwrap();
    let (rep, _) = second_factorial_moment_1d(&sc, 0.0, 1.0, &OneDConfig::default()).unwrap();
    assert_eq!(rep.second_factorial, crate::covmodels::Moment::Finite(0.0));
    let (rep, g) = second_factorial_moment_1d(&divergent(), 0.5, 1.0, &OneDConfig::default()).unwrap();
    assert_eq!(g.class, GemanClass::Diverges);
    assert_eq!(rep.second_factorial, crate::covmodels::Moment::Infinite);
    assert_eq!(rep.geman.class, GemanClass::Diverges);
    assert!(second_factorial_moment_1d(&gauss(), 0.0, -1.0, &OneDConfig::default()).is_err());
    let per = second_factorial_moment_1d(&sc, 0.0, PI / 2.0, &OneDConfig::default());
    assert!(matches!(per, Err(crate::Error::DegenerateLag { .. })));
}

#[test]
fn second_factorial_is_monotone_and_patches() {
    for u in [0.0, 1.0] {
        let vals: Vec<(f64, f64)> = [0.25, 0.5, 1.0, 2.0]
            .iter()
            .map(|&t| {
                let (r, _) = second_factorial_moment_1d(&gauss(), u, t, &OneDConfig::default()).unwrap();
                (r.second_factorial.finite().unwrap(), r.mean)
            })
            .collect();
        for w in vals.windows(2) {
            let ((sf, m), (sf2, _)) = (w[0], w[1]);
            assert!(sf2 >= sf);
            // E[N1 N2] <= sqrt(E N1^2 E N2^2) = sf + m by stationarity
            assert!(sf2 <= 2.0 * sf + 2.0 * (sf + m));
        }
    }
}

#[test]
fn moment_report_serializes_with_stable_keys() {
    let (rep, _) = second_factorial_moment_1d(&gauss(), 0.0, 1.0, &OneDConfig::default()).unwrap();
    let v = serde_json::to_value(&rep).unwrap();
    for k in ["mean", "second_factorial", "second_moment", "quad_error", "geman", "inner_mc_se"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
    for k in ["class", "alpha", "alpha_se"] {
        assert!(v["geman"].get(k).is_some(), "missing geman.{k}");
    }
}

#[test]
fn overlap_kernel_integrates_to_squared_area() {
    for rect in [Rect { width: 1.0, height: 1.0 }, Rect { width: 2.0, height: 0.5 }] {
        let n = 200_000;
        let h = rect.diameter() / n as f64;
        let s: f64 = (0..n).map(|i| (i as f64 + 0.5) * h).map(|r| r * overlap_kernel(&rect, r)).sum::<f64>() * h;
        assert_relative_eq!(s, rect.area().powi(2), max_relative = 1e-6);
        assert_eq!(overlap_kernel(&rect, rect.diameter() * 1.0001), 0.0);
    }
}

#[test]
fn pair_density_scales_like_inverse_r_squared() {
    let p = RadialProfile::GaussianExp { scale: 1.0 };
    let f = IsotropicFieldModel::new(vec![p, RadialProfile::Cauchy { scale: 1.0, beta: 2.0 }]).unwrap();
    for u in [[0.0, 0.0], [1.0, -0.5]] {
        let v: Vec<f64> = DyadicGrid { k_min: 2, k_max: 25 }.lags().iter().map(|&r| pair_density(&f, &u, r) * r * r).collect();
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo < 10.0);
    }
}

#[test]
fn sigma2_max_examples() {
    let p1 = RadialProfile::GaussianExp { scale: 1.0 };
    let p2 = RadialProfile::GaussianExp { scale: 2.0 };
    for r in [0.05, 0.3, 1.0] {
        let per = |p: &RadialProfile| lcov_closed_form(p, 2, r).unwrap()[(0, 0)];
        let single = IsotropicFieldModel::new(vec![p2]).unwrap();
        assert_relative_eq!(sigma2_max(&single, r).unwrap(), per(&p2), max_relative = 1e-12);
        let twin = IsotropicFieldModel::new(vec![p1, p1]).unwrap();
        assert_relative_eq!(sigma2_max(&twin, r).unwrap(), per(&p1), max_relative = 1e-12);
        let mixed = IsotropicFieldModel::new(vec![p1, p2]).unwrap();
        assert_relative_eq!(sigma2_max(&mixed, r).unwrap(), per(&p1).max(per(&p2)), max_relative = 1e-12);
    }
}

#[test]
fn first_moments_in_two_dimensions() {
    let p = RadialProfile::GaussianExp { scale: 1.0 };
    let f = IsotropicFieldModel::new(vec![p, p]).unwrap();
    let unit = Rect { width: 1.0, height: 1.0 };
    // E|det| of a 2x2 matrix of iid N(0,1) entries is 1
    assert_relative_eq!(expected_abs_det(&f), 1.0, epsilon = 1e-14);
    assert_relative_eq!(mean_roots_2d(&f, &[0.0, 0.0], &unit), 1.0 / (2.0 * PI), epsilon = 1e-14);
    assert_relative_eq!(mean_length_2d(&p, 0.0, &unit), 0.5, epsilon = 1e-14);
    assert_relative_eq!(mean_length_2d(&p, 2.0, &unit) / mean_length_2d(&p, 0.0, &unit), (-2.0f64).exp(), epsilon = 1e-14);
}

#[test]
fn roots_second_moment_bounds_and_limits() {
    let p = RadialProfile::GaussianExp { scale: 1.0 };
    let f = IsotropicFieldModel::new(vec![p, p]).unwrap();
    let unit = Rect { width: 1.0, height: 1.0 };
    for u in [[0.0, 0.0], [1.0, 1.0]] {
        let rep = second_moment_2d_zero(&f, &u, &unit, &quick_radial()).unwrap();
        assert!(rep.report.second_factorial.finite().unwrap() > 0.0);
        assert_eq!(rep.report.geman.class, GemanClass::Converges);
        for row in &rep.radial {
            // constant fitted once on this grid and frozen
            assert!(row.a <= 4.0 * row.sigma2_max, "r={} A={} s2={}", row.r, row.a, row.sigma2_max);
            assert!(row.a <= row.cs_bound + 4.0 * row.a_se);
        }
    }
    let tiny = Rect { width: 1e-3, height: 1e-3 };
    let rep = second_moment_2d_zero(&f, &[0.0, 0.0], &tiny, &quick_radial()).unwrap();
    assert!(rep.report.second_factorial.finite().unwrap() < 1e-6);
}

#[test]
fn radial_results_are_reproducible() {
    let p = RadialProfile::GaussianExp { scale: 1.0 };
    let unit = Rect { width: 1.0, height: 1.0 };
    let a = length_second_moment_2d_to_1d(&p, 0.0, &unit, &quick_radial()).unwrap();
    let b = length_second_moment_2d_to_1d(&p, 0.0, &unit, &quick_radial()).unwrap();
    assert_eq!(a, b);
    let m = a.report.second_factorial.finite().unwrap();
    // E[L^2] >= E[L]^2
    assert!(m >= a.report.mean.powi(2));
    let tiny = Rect { width: 1e-3, height: 1e-3 };
    let t = length_second_moment_2d_to_1d(&p, 0.0, &tiny, &quick_radial()).unwrap();
    assert!(t.report.second_factorial.finite().unwrap() < 1e-5);
}

#[test]
fn critical_point_condition_examples() {
    let grid = DyadicGrid { k_min: 2, k_max: 12 };
    let cfg = ClassifierConfig::default();
    let y = IsotropicCoordinate { profile: RadialProfile::GaussianExp { scale: 1.0 }, dim: 2 };
    let rep = critical_condition(&y, &grid, CriticalConditioning::Gradient, &cfg).unwrap();
    assert_eq!(rep.fit.class, GemanClass::Converges);
    assert!((rep.fit.alpha.unwrap() - 2.0).abs() < 0.1);
    assert!(rep.table.iter().all(|&(_, v)| v >= 0.0));
    assert!(rep.table.windows(2).all(|w| w[1].1 < w[0].1));
    let hess = critical_condition(&y, &grid, CriticalConditioning::Hessian, &cfg).unwrap();
    assert_eq!(hess.fit.class, GemanClass::Converges);
    let cos = critical_condition(&CosineField { w: 2.0, dim: 2 }, &grid, CriticalConditioning::Gradient, &cfg).unwrap();
    assert_eq!(cos.fit.class, GemanClass::Converges);
    assert!(cos.fit.identically_zero);
}

#[test]
fn matern_models_have_finite_second_moments() {
    let m = CovarianceModel1D::matern_like(2.5).unwrap();
    let (rep, g) = second_factorial_moment_1d(&m, 0.0, 1.0, &OneDConfig::default()).unwrap();
    assert_eq!(g.class, GemanClass::Converges);
    let v = rep.second_factorial.finite().unwrap();
    assert!(v > 0.0 && v < 1.0);
    let _ = m.lambda2();
}
