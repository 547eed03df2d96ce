use super::*;
use crate::covmodels::CovarianceModel1D;
use crate::field::CosineField;
use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.3
}

#[test]
fn identity_covariance_is_unchanged_by_observation() {
    let mean = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
    let cov = DMatrix::identity(4, 4);
    let c = condition(&mean, &cov, &[1, 3], &[7.0, -9.0]).unwrap();
    assert_eq!(c.targets, vec![0, 2]);
    assert_eq!(c.mean.as_slice(), &[1.0, 0.5]);
    assert_eq!(c.cov, DMatrix::identity(2, 2));
}

#[test]
fn singular_observation_is_rejected() {
    // observed block [[1, 1.01], [1.01, 1]] is indefinite
    let cov = DMatrix::from_row_slice(3, 3, &[1.0, 1.01, 0.2, 1.01, 1.0, 0.2, 0.2, 0.2, 1.0]);
    let r = condition(&DVector::zeros(3), &cov, &[0, 1], &[0.0, 0.0]);
    assert!(matches!(r, Err(Error::DegenerateObservation { .. })));
}

#[test]
fn pair_regression_example() {
    let m = CovarianceModel1D::gaussian_exp(1.0).unwrap();
    let (tau, u) = (0.7, 1.3);
    let reg = pair_regression(&m, tau, u).unwrap();
    let v = m.eval(tau).unwrap();
    assert_relative_eq!(reg.mu1, v.dr * u / (1.0 + v.r), max_relative = 1e-14);
    assert_eq!(reg.mu2, -reg.mu1);
    let g = pair_regression_generic(&m, tau, u).unwrap();
    // targets are X'(0), X'(t)
    assert_relative_eq!(g.mean[1], reg.mu1, max_relative = 1e-12);
    assert_relative_eq!(g.mean[0], reg.mu2, max_relative = 1e-12);
    assert_relative_eq!(g.cov[(0, 0)], reg.sigma2, max_relative = 1e-11);
    assert_relative_eq!(g.cov[(1, 1)], reg.sigma2, max_relative = 1e-11);
    assert_relative_eq!(g.cov[(0, 1)], reg.cross, max_relative = 1e-11);
}

#[test]
fn sine_cosine_pair_is_deterministic_given_levels() {
    let m = CovarianceModel1D::sine_cosine(2.0).unwrap();
    let reg = pair_regression(&m, 0.4, 1.0).unwrap();
    assert_eq!(reg.sigma2, 0.0);
    assert_eq!(reg.cross, 0.0);
    assert_eq!(reg.correlation(), None);
}

/// Conditional moments of a 5-dim Gaussian by brute-force quadrature of the
/// joint density over the two free coordinates.
#[test]
fn conditioning_matches_grid_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cov = random_psd(5, &mut rng);
    let mean = DVector::from_fn(5, |_, _| rng.gen_range(-1.0..1.0));
    let observed = [0, 2, 4];
    let values = [0.4, -1.1, 0.9];
    let c = condition(&mean, &cov, &observed, &values).unwrap();

    let prec = cov.clone().try_inverse().unwrap();
    let free = [1usize, 3];
    let half: Vec<f64> = free.iter().map(|&i| 12.0 * cov[(i, i)].sqrt()).collect();
    let n = 600;
    let mut x = DVector::zeros(5);
    for (k, &i) in observed.iter().enumerate() {
        x[i] = values[k];
    }
    let (mut z, mut m1, mut m2) = (0.0, [0.0; 2], [[0.0; 2]; 2]);
    for a in 0..=n {
        for b in 0..=n {
            let p = [
                mean[free[0]] - half[0] + 2.0 * half[0] * a as f64 / n as f64,
                mean[free[1]] - half[1] + 2.0 * half[1] * b as f64 / n as f64,
            ];
            x[free[0]] = p[0];
            x[free[1]] = p[1];
            let d = &x - &mean;
            let q = (d.transpose() * &prec * &d)[(0, 0)];
            let w = (-0.5 * q).exp();
            z += w;
            for i in 0..2 {
                m1[i] += w * p[i];
                for j in 0..2 {
                    m2[i][j] += w * p[i] * p[j];
                }
            }
        }
    }
    for i in 0..2 {
        let mi = m1[i] / z;
        assert!((mi - c.mean[i]).abs() < 1e-6, "mean {i}: {mi} vs {}", c.mean[i]);
        for j in 0..2 {
            let cij = m2[i][j] / z - mi * m1[j] / z;
            assert!((cij - c.cov[(i, j)]).abs() < 1e-6, "cov {i}{j}: {cij} vs {}", c.cov[(i, j)]);
        }
    }
}

fn random_profile(rng: &mut ChaCha8Rng) -> RadialProfile {
    let scale = rng.gen_range(0.3..3.0);
    if rng.gen_bool(0.5) {
        RadialProfile::GaussianExp { scale }
    } else {
        RadialProfile::Cauchy { scale, beta: rng.gen_range(0.3..4.0) }
    }
}

#[test]
fn lcov_closed_form_matches_generic_conditioning() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let p = random_profile(&mut rng);
        let d = rng.gen_range(1..=3);
        let scale = match p {
            RadialProfile::GaussianExp { scale } | RadialProfile::Cauchy { scale, .. } => scale,
        };
        let r = scale * rng.gen_range(0.1..2.0);
        let u = rng.gen_range(-2.0..2.0);
        let closed = lcov_closed_form(&p, d, r).unwrap();
        let mean = lmean_closed_form(&p, d, r, u).unwrap();
        let g = lcov_generic(&p, d, r, u).unwrap();
        for a in 0..2 * d {
            assert!((mean[a] - g.mean[a]).abs() < 1e-10, "{p:?} d={d} r={r}: mean {a}");
            for b in 0..2 * d {
                assert!((closed[(a, b)] - g.cov[(a, b)]).abs() < 1e-10, "{p:?} d={d} r={r}: ({a},{b})");
            }
        }
    }
}

#[test]
fn lcov_zero_pattern_and_small_distance_limit() {
    let p = RadialProfile::GaussianExp { scale: 1.0 };
    let d = 3;
    let m = lcov_closed_form(&p, d, 0.01).unwrap();
    for j in 1..d {
        assert_eq!(m[(0, j)], 0.0);
        assert_eq!(m[(0, d + j)], 0.0);
        assert_eq!(m[(d, j)], 0.0);
    }
    assert!(m[(0, 0)] < 1e-4);
    for j in 1..d {
        assert_eq!(m[(j, j)], 1.0);
        assert_relative_eq!(m[(j, d + j)], 1.0, max_relative = 1e-4);
    }
    let g = lcov_generic(&p, d, 0.01, 1.5).unwrap();
    for j in 1..d {
        assert!(g.mean[j].abs() < 1e-14 && g.mean[d + j].abs() < 1e-14);
    }
}

#[test]
fn cosine_field_joint_is_consistent() {
    let c = CosineField { w: 2.0, dim: 2 };
    let items = pair_gradient_items(2, 0.3);
    let joint = derivative_joint_cov(&c, &items);
    assert!(joint.clone().symmetric_eigenvalues().min() > -1e-12);
    assert_relative_eq!(joint[(0, 0)], 1.0);
    assert_relative_eq!(joint[(2, 2)], 2.0);
}

#[test]
fn abs_moment_examples() {
    let q = |m1, m2, rho| BivariateAbsMomentQuery::new(m1, m2, rho).unwrap();
    let pi = std::f64::consts::PI;
    assert_relative_eq!(abs_moment(&q(0.0, 0.0, 0.0)), 2.0 / pi, max_relative = 1e-12);
    assert_relative_eq!(abs_moment(&q(0.0, 0.0, 1.0)), 1.0, max_relative = 1e-12);
    assert_relative_eq!(abs_moment(&q(0.0, 0.0, -1.0)), 1.0, max_relative = 1e-12);
    let rho: f64 = 0.5;
    let exact = 2.0 / pi * ((1.0 - rho * rho).sqrt() + rho * rho.asin());
    assert_relative_eq!(abs_moment(&q(0.0, 0.0, rho)), exact, max_relative = 1e-12);
    // large means: |Y1 Y2| ~ Y1 Y2, whose mean is m1 m2 + rho
    assert_relative_eq!(abs_moment(&q(9.0, 8.0, 0.3)), 72.3, max_relative = 1e-12);
    assert!(BivariateAbsMomentQuery::new(0.0, 0.0, 1.5).is_err());
}

#[test]
fn gauss_hermite_cross_check() {
    for (m1, m2, rho) in [(0.0, 0.0, 0.5), (0.7, -1.2, -0.4), (2.0, 1.0, 0.95), (0.3, 0.3, 1.0)] {
        let q = BivariateAbsMomentQuery { m1, m2, rho };
        let a = abs_moment(&q);
        let g = abs_moment_gauss_hermite(&q, GH_DEGREE_VALIDATION);
        assert!((a - g).abs() < 5e-3 * a, "{q:?}: {a} vs {g}");
    }
}

#[test]
fn hermite_and_mehler() {
    assert_eq!(hermite(0, 3.0), 1.0);
    assert_eq!(hermite(2, 3.0), 8.0);
    assert_eq!(hermite(3, 2.0), 2.0);
    assert_relative_eq!(mehler_covariance(2, 2, 0.3), 0.18, max_relative = 1e-15);
    assert_eq!(mehler_covariance(1, 2, 0.7), 0.0);
    assert_eq!(mehler_covariance(0, 0, -0.4), 1.0);
    assert_eq!(product_variance_lower(0.0), 1.0);
    assert_eq!(product_variance_lower(1.0), 3.0);
}

#[test]
fn mehler_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200_000;
    let rho: f64 = 0.6;
    let s = (1.0 - rho * rho).sqrt();
    let mut acc = vec![[0.0f64; 2]; 9];
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let w: f64 = rng.sample(StandardNormal);
        let y2 = rho * z + s * w;
        for i in 0..3 {
            for j in 0..3 {
                let v = hermite(i, z) * hermite(j, y2);
                acc[3 * i + j][0] += v;
                acc[3 * i + j][1] += v * v;
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let [s1, s2] = acc[3 * i + j];
            let mean = s1 / n as f64;
            let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - mehler_covariance(i, j, rho)).abs() <= 4.0 * se + 1e-12, "{i}{j}: {mean} +- {se}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conditional_covariance_ignores_values(seed in 0u64..1000, vals in prop::collection::vec(-5.0f64..5.0, 30)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cov = random_psd(6, &mut rng);
        let mean = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
        let base = condition(&mean, &cov, &[0, 3, 5], &[0.0, 0.0, 0.0]).unwrap();
        for chunk in vals.chunks(3) {
            let c = condition(&mean, &cov, &[0, 3, 5], chunk).unwrap();
            prop_assert_eq!(&c.cov, &base.cov);
        }
        prop_assert!(base.cov.clone().symmetric_eigenvalues().min() > -1e-10);
    }

    #[test]
    fn abs_moment_is_bounded_on_compact_box(m1 in -3.0f64..3.0, m2 in -3.0f64..3.0, rho in -1.0f64..1.0) {
        let v = abs_moment(&BivariateAbsMomentQuery { m1, m2, rho });
        // E|Y1 Y2| >= |E Y1 Y2| and <= sqrt(E Y1^2 E Y2^2)
        prop_assert!(v >= (m1 * m2 + rho).abs() - 1e-10);
        prop_assert!(v <= ((1.0 + m1 * m1) * (1.0 + m2 * m2)).sqrt() + 1e-10);
        prop_assert!(v > 0.1);
    }
}
