//! Negative-order Sobolev norms via the discrete Fourier transform.
//!
//! With `û_k = n^{−N} Σ_j u_j e^{−2πi j·k/n}` the discrete Parseval identity
//! reads `Σ_k |û_k|² = Δx^N Σ_j |u_j|²`, i.e. the spectral sum matches the
//! `L²` norm of the field exactly.

use super::ScalarField;
use crate::error::{Error, Result};
use rustfft::{num_complex::Complex, FftPlanner};

/// Forward DFT normalized so that a constant field c has `û_0 = c`.
fn fourier_coefficients(field: &ScalarField) -> Vec<Complex<f64>> {
    let grid = field.grid();
    let n = grid.points_per_axis();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut data: Vec<Complex<f64>> = field
        .values()
        .iter()
        .map(|v| Complex::new(*v, 0.0))
        .collect();
    match grid.dim() {
        1 => fft.process(&mut data),
        _ => {
            // rows (contiguous), then columns via transpose
            for row in data.chunks_mut(n) {
                fft.process(row);
            }
            let mut t = vec![Complex::new(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    t[j * n + i] = data[i * n + j];
                }
            }
            for row in t.chunks_mut(n) {
                fft.process(row);
            }
            for i in 0..n {
                for j in 0..n {
                    data[i * n + j] = t[j * n + i];
                }
            }
        }
    }
    let scale = 1.0 / grid.cells() as f64;
    for c in data.iter_mut() {
        *c *= scale;
    }
    data
}

/// Signed integer frequency for DFT bin `k` of an axis of length `n`.
fn frequency(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// `H^{−s}` norm: `(Σ_k (1 + |2πk|²)^{−s} |û_k|²)^{1/2}`, `s > 0`.
///
/// Monotone in `s`: larger `s` weighs high modes down harder.
pub fn h_negative_norm(field: &ScalarField, s: f64) -> Result<f64> {
    if s <= 0.0 {
        return Err(Error::InvalidExponent {
            value: s,
            constraint: "negative-norm order must be positive",
        });
    }
    let grid = field.grid();
    let n = grid.points_per_axis();
    let coeffs = fourier_coefficients(field);
    let two_pi_sq = (2.0 * std::f64::consts::PI).powi(2);
    let mut total = 0.0;
    match grid.dim() {
        1 => {
            for (k, c) in coeffs.iter().enumerate() {
                let f = frequency(k, n) as f64;
                total += (1.0 + two_pi_sq * f * f).powf(-s) * c.norm_sqr();
            }
        }
        _ => {
            for k0 in 0..n {
                let f0 = frequency(k0, n) as f64;
                for k1 in 0..n {
                    let f1 = frequency(k1, n) as f64;
                    let w = (1.0 + two_pi_sq * (f0 * f0 + f1 * f1)).powf(-s);
                    total += w * coeffs[k0 * n + k1].norm_sqr();
                }
            }
        }
    }
    Ok(total.sqrt())
}

/// The Parseval route to the `L²` norm, `(Σ_k |û_k|²)^{1/2}`.
pub fn spectral_l2(field: &ScalarField) -> f64 {
    fourier_coefficients(field)
        .iter()
        .map(|c| c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `(|k|², |û_k|²)` per mode; `Σ` of the energies is the squared `L²` norm.
pub fn spectral_mode_energies(field: &ScalarField) -> Vec<(f64, f64)> {
    let grid = field.grid();
    let n = grid.points_per_axis();
    let coeffs = fourier_coefficients(field);
    match grid.dim() {
        1 => coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let f = frequency(k, n) as f64;
                (f * f, c.norm_sqr())
            })
            .collect(),
        _ => {
            let mut out = Vec::with_capacity(n * n);
            for k0 in 0..n {
                let f0 = frequency(k0, n) as f64;
                for k1 in 0..n {
                    let f1 = frequency(k1, n) as f64;
                    out.push((f0 * f0 + f1 * f1, coeffs[k0 * n + k1].norm_sqr()));
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{lp_norm, TorusGrid};
    use std::f64::consts::PI;

    #[test]
    fn constant_field_norm_is_its_value() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let c = ScalarField::constant(grid, -4.5);
        for s in [0.5, 1.0, 2.0, 3.0] {
            assert!((h_negative_norm(&c, s).unwrap() - 4.5).abs() < 1e-12);
        }
        let z = ScalarField::zeros(grid);
        assert_eq!(h_negative_norm(&z, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn sine_single_mode_oracle() {
        let grid = TorusGrid::new(1, 128).unwrap();
        let u = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
        let got = h_negative_norm(&u, 2.0).unwrap();
        let expect = (0.5f64).sqrt() / (1.0 + 4.0 * PI * PI);
        assert!((got - expect).abs() < 1e-6, "got {got}, expect {expect}");
    }

    #[test]
    fn monotone_in_order() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let u = ScalarField::from_fn(grid, |x| {
            (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos() + 0.2
        });
        let n1 = h_negative_norm(&u, 0.5).unwrap();
        let n2 = h_negative_norm(&u, 1.5).unwrap();
        let n3 = h_negative_norm(&u, 2.5).unwrap();
        assert!(n1 >= n2 && n2 >= n3);
    }

    #[test]
    fn parseval_matches_lp_norm() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for dim in [1usize, 2] {
            let grid = TorusGrid::new(dim, 32).unwrap();
            let values: Vec<f64> = (0..grid.cells()).map(|_| next()).collect();
            let u = ScalarField::from_values(grid, values).unwrap();
            let direct = lp_norm(&u, 2.0).unwrap();
            let spectral = spectral_l2(&u);
            assert!(
                (direct - spectral).abs() <= 1e-10 * direct.max(1e-300),
                "dim {dim}: direct {direct} vs spectral {spectral}"
            );
        }
    }
}
