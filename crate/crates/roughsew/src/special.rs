//! Riemann zeta and Gamma for the bound constants.

use crate::error::{Error, Result};

/// Bernoulli numbers `B_2, B_4, ..., B_14`.
const BERNOULLI: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// Riemann zeta `ζ(s)` for real `s > 1`.
///
/// Direct summation of the first `n - 1` terms followed by an
/// Euler-Maclaurin tail with seven Bernoulli corrections.
pub fn zeta(s: f64) -> Result<f64> {
    if s <= 1.0 || !s.is_finite() {
        return Err(Error::InvalidArgument(format!("zeta needs s > 1, got {s}")));
    }
    let n = 24usize;
    let mut head = 0.0;
    for k in (1..n).rev() {
        head += (k as f64).powf(-s);
    }
    let nf = n as f64;
    let mut tail = nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // term_k = B_2k/(2k)! * s(s+1)...(s+2k-2) * n^(-s-2k+1)
    let mut rising = s; // s(s+1)...(s+2k-2)
    let mut fact = 2.0; // (2k)!
    let mut power = nf.powf(-s - 1.0);
    for (k, b) in BERNOULLI.iter().enumerate() {
        tail += b / fact * rising * power;
        let k2 = 2.0 * (k as f64 + 1.0);
        rising *= (s + k2 - 1.0) * (s + k2);
        fact *= (k2 + 1.0) * (k2 + 2.0);
        power /= nf * nf;
    }
    Ok(head + tail)
}

/// `Γ(x)` (Lanczos approximation).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}
