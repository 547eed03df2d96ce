use super::*;
use approx::assert_relative_eq;
use proptest::prelude::*;

fn shipped_models() -> Vec<CovarianceModel1D> {
    vec![
        CovarianceModel1D::gaussian_exp(1.0).unwrap(),
        CovarianceModel1D::gaussian_exp(0.5).unwrap(),
        CovarianceModel1D::sine_cosine(2.0).unwrap(),
        CovarianceModel1D::matern_like(2.5).unwrap(),
        CovarianceModel1D::matern_like(1.5).unwrap(),
        CovarianceModel1D::scale_mixture(2.0, 1.5).unwrap(),
        CovarianceModel1D::scale_mixture(2.0, 3.0).unwrap(),
    ]
}

#[test]
fn gaussian_exp_values_at_zero_and_one() {
    let m = CovarianceModel1D::gaussian_exp(1.0).unwrap();
    let v = eval_cov(&m, 0.0).unwrap();
    assert_eq!((v.r, v.dr, v.d2r), (1.0, 0.0, -1.0));
    let v = eval_cov(&m, 1.0).unwrap();
    let e = (-0.5f64).exp();
    assert_relative_eq!(v.r, e, max_relative = 1e-15);
    assert_relative_eq!(v.dr, -e, max_relative = 1e-15);
    assert!(v.d2r.abs() < 1e-16);
}

#[test]
fn sine_cosine_values() {
    let m = CovarianceModel1D::sine_cosine(2.0).unwrap();
    let v = eval_cov(&m, 0.0).unwrap();
    assert_eq!((v.r, v.dr, v.d2r), (1.0, 0.0, -4.0));
    assert_eq!(m.spectral_moment(4).unwrap(), Moment::Finite(16.0));
    assert_eq!(m.lambda4(), Moment::Finite(m.lambda2() * m.lambda2()));
}

#[test]
fn gaussian_exp_moments() {
    let m = CovarianceModel1D::gaussian_exp(1.0).unwrap();
    assert_eq!(m.spectral_moment(2).unwrap(), Moment::Finite(1.0));
    assert_eq!(m.spectral_moment(4).unwrap(), Moment::Finite(3.0));
    assert!(m.spectral_moment(3).is_err());
}

#[test]
fn negative_lag_rejected() {
    let m = CovarianceModel1D::gaussian_exp(1.0).unwrap();
    assert!(eval_cov(&m, -1.0).is_err());
    assert!(m.sigma2(0.0).is_err());
}

#[test]
fn sigma2_closed_forms() {
    let m = CovarianceModel1D::gaussian_exp(1.0).unwrap();
    let e = (-1.0f64).exp();
    assert_relative_eq!(m.sigma2(1.0).unwrap(), 1.0 - e / (1.0 - e), max_relative = 1e-14);
    // mpmath, 60 digits (tests/oracles/covariance_oracles.py)
    assert_relative_eq!(m.sigma2(1.0).unwrap(), 0.41802329313067357561, max_relative = 1e-13);
    assert_relative_eq!(m.sigma2(0.5).unwrap(), 0.11979708395305038394, max_relative = 1e-12);
    assert_relative_eq!(m.sigma2(1e-3).unwrap(), 4.9999991666666666667e-7, max_relative = 1e-8);
    // just above the Taylor switch the direct formula is still accurate
    let direct = m.sigma2(1.0001e-3).unwrap();
    let taylor = sigma2_taylor(&[1.0, 3.0, 15.0, 105.0], 1.0001e-3);
    assert_relative_eq!(direct, taylor, max_relative = 1e-8);
}

#[test]
fn sigma2_sine_cosine_vanishes_and_degenerates_at_half_period() {
    let w = 2.0;
    let m = CovarianceModel1D::sine_cosine(w).unwrap();
    for tau in [0.01, 0.3, 1.0, 1.5] {
        assert_eq!(m.sigma2(tau).unwrap(), 0.0);
    }
    let half = std::f64::consts::PI / w;
    assert!(matches!(m.sigma2(half), Err(Error::DegenerateLag { .. })));
}

#[test]
fn geman_integrand_examples() {
    let w = 3.0;
    let m = CovarianceModel1D::sine_cosine(w).unwrap();
    let (a, b) = geman_integrands(&m, 0.1).unwrap();
    assert_eq!(a, 0.0);
    assert_relative_eq!(b, w * w * (1.0 - (0.1 * w).cos()) / 0.1, max_relative = 1e-12);

    let g = CovarianceModel1D::gaussian_exp(1.0).unwrap();
    let (a, b) = geman_integrands(&g, 0.5).unwrap();
    assert_relative_eq!(a, 0.11979708395305038394 / 0.5, max_relative = 1e-12);
    assert_relative_eq!(b, 0.33812732306155344785 / 0.5, max_relative = 1e-12);
    let ratio = a / b;
    assert!(ratio > 0.1 && ratio < 10.0);
    // both vanish linearly: sigma2 ~ t^2/2, l2 + r'' ~ 3 t^2 / 2
    for k in 10..30 {
        let t = 2f64.powi(-k);
        let (a, b) = geman_integrands(&g, t).unwrap();
        assert_relative_eq!(a / t, 0.5, max_relative = 1e-3);
        assert_relative_eq!(b / t, 1.5, max_relative = 1e-3);
    }
}

#[test]
fn matern_against_bessel_oracle() {
    // mpmath besselk closed forms
    let cases = [
        (2.5, 0.25, 0.989725995153243687, -0.0811250815699380071, -0.308275309965764427, 0.0113916186552142468),
        (2.5, 1.0, 0.858385362733365417, -0.245252960780961548, -0.122626480390480774, 0.104781558782813618),
        (1.5, 0.25, 0.973500978839256085, -0.194700195767851217, -0.584100587303553651, 0.275120866434793694),
        (1.5, 1.0, 0.735758882342884643, -0.367879441171442322, 0.0, 0.704932591609938158),
    ];
    for (nu, tau, r, dr, d2r, s2) in cases {
        let m = CovarianceModel1D::matern_like(nu).unwrap();
        let v = m.eval(tau).unwrap();
        assert_relative_eq!(v.r, r, max_relative = 1e-9);
        assert_relative_eq!(v.dr, dr, max_relative = 1e-8);
        assert!((v.d2r - d2r).abs() < 1e-8, "nu {nu} tau {tau}: {} vs {d2r}", v.d2r);
        assert_relative_eq!(m.sigma2(tau).unwrap(), s2, max_relative = 1e-8);
    }
    let m = CovarianceModel1D::matern_like(2.5).unwrap();
    assert_relative_eq!(m.lambda2(), 1.0 / 3.0, max_relative = 1e-14);
    assert_eq!(CovarianceModel1D::matern_like(1.5).unwrap().lambda4(), Moment::Infinite);
}

#[test]
fn mixture_against_extended_precision() {
    let m = CovarianceModel1D::scale_mixture(2.0, 1.5).unwrap();
    let frozen = [
        (4, 0.866941597242924903, 0.945950662691000305),
        (12, 0.515268522344431491, 0.53055268313054001),
        (24, 0.367300839199344805, 0.37282408308895078),
        (40, 0.285420027096564546, 0.288011202489901205),
    ];
    for (k, s2, g) in frozen {
        let t = 2f64.powi(-k);
        assert_relative_eq!(m.sigma2(t).unwrap(), s2, max_relative = 1e-9);
        assert_relative_eq!(m.lambda2_plus_r2(t).unwrap(), g, max_relative = 1e-12);
    }
    let m = CovarianceModel1D::scale_mixture(2.0, 3.0).unwrap();
    assert_relative_eq!(m.sigma2(2f64.powi(-20)).unwrap(), 0.00116341831633081645, max_relative = 1e-7);
    assert_eq!(m.lambda4(), Moment::Infinite);
}

#[test]
fn spectral_table_reproduces_matern() {
    // Tabulate the nu = 2.5 density on a log grid and let the table carry the tail.
    let nu = 2.5;
    let freqs: Vec<f64> = (0..=2000).map(|i| 1e-3 * 10f64.powf(i as f64 * 7.0 / 2000.0)).collect();
    let dens: Vec<f64> = freqs.iter().map(|l| (1.0 + l * l).powf(-nu - 0.5)).collect();
    let table = SpectralDensity::new(freqs, dens, Some(2.0 * nu + 1.0)).unwrap();
    let m = CovarianceModel1D::spectral_table(table).unwrap();
    assert_relative_eq!(m.lambda2(), 1.0 / 3.0, max_relative = 1e-4);
    let v = m.eval(1.0).unwrap();
    assert_relative_eq!(v.r, 0.858385362733365417, max_relative = 1e-4);
    assert_relative_eq!(m.sigma2(1.0).unwrap(), 0.104781558782813618, max_relative = 1e-4);
}

#[test]
fn spectral_table_tail_decides_moments() {
    let freqs: Vec<f64> = (0..50).map(|i| 0.1 * 1.2f64.powi(i)).collect();
    let heavy: Vec<f64> = freqs.iter().map(|l| (1.0 + l * l).powf(-2.25)).collect();
    let t = SpectralDensity::new(freqs.clone(), heavy.clone(), Some(4.5)).unwrap();
    let m = CovarianceModel1D::spectral_table(t).unwrap();
    assert_eq!(m.lambda4(), Moment::Infinite);

    // fitted exponent right at the l4 boundary (p = 5) cannot decide
    let edge: Vec<f64> =
        freqs.iter().enumerate().map(|(i, l)| (1.0 + l * l).powf(-2.5) * (0.4 * (7.0 * i as f64).sin()).exp()).collect();
    let t = SpectralDensity::new(freqs.clone(), edge, None).unwrap();
    assert!((t.tail().exponent - 5.0).abs() < 3.0 * t.tail().se);
    assert!(matches!(CovarianceModel1D::spectral_table(t), Err(Error::InconclusiveTail { order: 4, .. })));
}

#[test]
fn spectral_table_csv_reader() {
    let csv = "frequency,density\n0.5,1.0\n1.0,0.5\n2.0,0.1\n4.0,0.01\n";
    let t = SpectralDensity::from_csv_reader(csv.as_bytes(), Some(4.0)).unwrap();
    assert_eq!(t.frequencies(), &[0.5, 1.0, 2.0, 4.0]);
    let bad = "0.5,1.0\n1.0,x\n";
    assert!(SpectralDensity::from_csv_reader(bad.as_bytes(), Some(4.0)).is_err());
}

#[test]
fn spec_json_roundtrip_and_unknown_keys() {
    let s: ModelSpec = serde_json::from_str(r#"{"kind":"GaussianExp","params":{"scale":2.0}}"#).unwrap();
    assert_eq!(s, ModelSpec::GaussianExp { scale: 2.0 });
    let m = CovarianceModel1D::from_spec(&s).unwrap();
    assert_eq!(serde_json::to_string(&m.to_spec()).unwrap(), r#"{"kind":"GaussianExp","params":{"scale":2.0}}"#);
    let err = serde_json::from_str::<ModelSpec>(r#"{"kind":"GaussianExp","params":{"scael":2.0}}"#);
    assert!(err.unwrap_err().to_string().contains("scael"));
}

#[test]
fn lambda4_dominates_lambda2_squared() {
    for m in shipped_models() {
        match m.lambda4() {
            Moment::Finite(l4) => {
                let l2 = m.lambda2();
                if m.is_sine_cosine() {
                    assert_eq!(l4, l2 * l2);
                } else {
                    assert!(l4 > l2 * l2 * (1.0 + 1e-9));
                }
            }
            Moment::Infinite => {}
        }
    }
}

#[test]
fn det_pair_scales_like_lambda2_tau_squared() {
    for m in shipped_models() {
        for k in 8..20 {
            let t = 2f64.powi(-k);
            let ratio = m.det_pair(t).unwrap() / (t * t);
            // always comparable to l2; the limit is only fast when l4 is finite
            assert!(ratio <= m.lambda2() * (1.0 + 1e-12) && ratio >= 0.5 * m.lambda2());
            if m.lambda4().is_finite() {
                assert_relative_eq!(ratio, m.lambda2(), max_relative = 1e-3);
            }
        }
    }
}

#[test]
fn conditional_mean_over_sigma_bounded_by_level() {
    // |mu_1| / sigma = |r' u / (1 + r)| / sigma <= C |u| for lambda4 finite;
    // limit value l2 |u| / sqrt(l4 - l2^2) / ... with l2 = 1, l4 = 3 gives 1/sqrt(2).
    let m = CovarianceModel1D::gaussian_exp(1.0).unwrap();
    const C: f64 = 0.71;
    let mut worst: f64 = 0.0;
    for i in 1..=200 {
        let t = i as f64 / 200.0;
        let v = m.eval(t).unwrap();
        let mu = (v.dr / (1.0 + v.r)).abs();
        worst = worst.max(mu / m.sigma2(t).unwrap().sqrt());
    }
    assert!(worst <= C, "{worst}");
    assert!(worst > 0.6);
}

fn gram_min_eigenvalue(m: &CovarianceModel1D, pts: &[f64]) -> f64 {
    let n = pts.len();
    let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| m.eval((pts[i] - pts[j]).abs()).unwrap().r);
    mat.symmetric_eigen().eigenvalues.min()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gram_matrices_are_psd(pts in proptest::collection::vec(0.0f64..8.0, 2..32), which in 0usize..7) {
        let m = &shipped_models()[which];
        prop_assert!(gram_min_eigenvalue(m, &pts) >= -1e-8);
    }

    #[test]
    fn covariance_bounded_and_sigma2_contracts(tau in 1e-6f64..1.4, which in 0usize..7) {
        let m = &shipped_models()[which];
        let v = m.eval(tau).unwrap();
        prop_assert!(v.r.abs() <= 1.0 + 1e-12);
        let s2 = m.sigma2(tau).unwrap();
        prop_assert!(s2 >= 0.0 && s2 <= m.lambda2());
        let g = m.lambda2_plus_r2(tau).unwrap();
        prop_assert!((g - (m.lambda2() + v.d2r)).abs() <= 1e-7 * m.lambda2().max(1.0));
    }
}
