/// Probabilists' Hermite polynomial `He_n(x)` (`He_2 = x^2 - 1`).
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `E[He_i(Y1) He_j(Y2)] = delta_ij rho^i i!` for standard pairs with correlation `rho`.
pub fn mehler_covariance(i: usize, j: usize, rho: f64) -> f64 {
    if i != j {
        return 0.0;
    }
    let fact: f64 = (1..=i).map(|k| k as f64).product();
    rho.powi(i as i32) * fact
}

/// `1 + 2 rho^2`, the variance of the centred product, which bounds
/// `Var(Y1 Y2)` from below for any means.
pub fn product_variance_lower(rho: f64) -> f64 {
    1.0 + 2.0 * rho * rho
}
