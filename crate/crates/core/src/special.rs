//! Small special-function helpers.

use libm::{erf, erfc};

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `E|N(m, s^2)|`.
pub fn abs_normal_mean(m: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return m.abs();
    }
    let z = m / s;
    // m (1 - 2 Phi(-m/s)) + 2 s phi(m/s)
    m * erf(z / std::f64::consts::SQRT_2) + 2.0 * s * norm_pdf(z)
}

/// Hurwitz zeta `sum_{n >= 0} (n + a)^{-s}` for `s > 1`, `a > 0`.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0);
    const N: usize = 12;
    // Bernoulli numbers B_2 .. B_16
    const B2K: [f64; 8] =
        [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0, -3617.0 / 510.0];
    let mut sum = 0.0;
    for n in 0..N {
        sum += (n as f64 + a).powf(-s);
    }
    let x = N as f64 + a;
    sum += x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // Euler-Maclaurin corrections.
    let mut fact = 1.0; // (2k)!
    let mut rising = s; // s (s+1) ... (s+2k-2)
    let mut xpow = x.powf(-s - 1.0);
    for (k, b) in B2K.iter().enumerate() {
        let k1 = k + 1;
        fact *= (2 * k1 - 1) as f64 * (2 * k1) as f64;
        sum += b / fact * rising * xpow;
        rising *= (s + (2 * k1 - 1) as f64) * (s + (2 * k1) as f64);
        xpow /= x * x;
    }
    sum
}

/// Double factorial `(2k - 1)!!`, with `(-1)!! = 1`.
pub fn odd_double_factorial(k: u32) -> f64 {
    (1..=k).map(|j| (2 * j - 1) as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zeta_matches_known_values() {
        assert_relative_eq!(hurwitz_zeta(2.0, 1.0), std::f64::consts::PI.powi(2) / 6.0, max_relative = 1e-14);
        assert_relative_eq!(hurwitz_zeta(1.5, 1.0), 2.612375348685488, max_relative = 1e-13);
        // zeta(2, 3) = pi^2/6 - 1 - 1/4
        assert_relative_eq!(hurwitz_zeta(2.0, 3.0), std::f64::consts::PI.powi(2) / 6.0 - 1.25, max_relative = 1e-14);
    }

    #[test]
    fn abs_normal_mean_limits() {
        assert_relative_eq!(abs_normal_mean(0.0, 1.0), (2.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(abs_normal_mean(10.0, 1.0), 10.0, max_relative = 1e-15);
        assert_relative_eq!(abs_normal_mean(-3.0, 0.0), 3.0);
    }

    #[test]
    fn tail_cdf() {
        assert!(norm_cdf(-30.0) > 0.0);
        assert_relative_eq!(norm_cdf(0.0), 0.5, max_relative = 1e-15);
    }
}
