//! Discrete Fourier helpers for cross-checking characteristic functions
//! against count laws.
//!
//! A law supported on `{0, ..., M-1}` is recovered exactly from its
//! characteristic function sampled on the `M`-point grid `u_m = 2 pi m / M`;
//! with `M = 64` and the count laws in this crate the wrap-around error is
//! below the certified truncation tails. The grids stay tiny, so the plain
//! `O(M^2)` transform is used.

use num_complex::Complex64;

/// The standard inversion grid `u_m = 2 pi m / M`.
pub fn unit_grid(m: usize) -> Vec<f64> {
    (0..m)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / m as f64)
        .collect()
}

/// `sum_k masses[k] e^{i u k}`.
pub fn fourier_sum(masses: &[f64], u: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &p) in masses.iter().enumerate() {
        let phase = u * k as f64;
        acc += p * Complex64::new(phase.cos(), phase.sin());
    }
    acc
}

/// Inverts characteristic-function values sampled on [`unit_grid`]`(M)`
/// back to masses on `{0, ..., M-1}`:
/// `p_k = (1/M) sum_m cf[m] e^{-i u_m k}`. Returns the real parts; the
/// imaginary parts vanish up to rounding for genuine count laws.
pub fn invert_to_masses(cf_at_grid: &[Complex64]) -> Vec<f64> {
    let m = cf_at_grid.len();
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &phi) in cf_at_grid.iter().enumerate() {
            let phase = -2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64;
            acc += phi * Complex64::new(phase.cos(), phase.sin());
        }
        out.push(acc.re / m as f64);
    }
    out
}
