//! Uniform-grid quadrature helpers.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Trapezoid integral of uniformly sampled values with an error estimate from
/// the coarse (every-other-point) rule. Both ends are assumed to be in the
/// decayed tail, so the trapezoid rule is spectrally accurate there.
pub fn trapezoid(values: &[Complex64], dx: f64) -> (Complex64, f64) {
    let n = values.len();
    if n < 2 {
        return (Complex64::default(), 0.0);
    }
    let fine: Complex64 = dx * (values.iter().sum::<Complex64>() - 0.5 * (values[0] + values[n - 1]));
    let m = (n - 1) / 2 * 2;
    let coarse_pts: Vec<Complex64> = values[..=m].iter().step_by(2).copied().collect();
    let fine_m: Complex64 = dx * (values[..=m].iter().sum::<Complex64>() - 0.5 * (values[0] + values[m]));
    let coarse = 2.0 * dx * (coarse_pts.iter().sum::<Complex64>() - 0.5 * (coarse_pts[0] + coarse_pts[coarse_pts.len() - 1]));
    (fine, (fine_m - coarse).norm())
}

/// Integral with checks: error estimate against `tol` and the integrated
/// magnitude over the outer 5% of the grid at each end against `tail_tol`.
pub fn checked_overlap(values: &[Complex64], dx: f64, tol: f64, tail_tol: f64) -> Result<Complex64> {
    let (v, err) = trapezoid(values, dx);
    let n = values.len();
    let k = (n / 20).max(1);
    let tail = dx * values[..k].iter().chain(&values[n - k..]).map(|c| c.norm()).sum::<f64>();
    if tail > tail_tol {
        return Err(Error::TruncatedSupport { edge_mass: tail });
    }
    if err > tol.max(1e-300) * (1.0 + v.norm()) {
        return Err(Error::Inconsistency {
            what: "overlap quadrature".into(),
            deviation: err,
            bound: tol,
        });
    }
    Ok(v)
}

/// Weights of the 6-point Lagrange rule over one cell `[x_i, x_{i+1}]`, for a
/// stencil whose first node sits `shift` cells left of `x_i`.
fn cell_weights(shift: usize) -> [f64; 6] {
    // 3-point Gauss-Legendre is exact for the quintic basis polynomials
    let g = [
        (0.5 - 0.5 * (0.6f64).sqrt(), 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 + 0.5 * (0.6f64).sqrt(), 5.0 / 18.0),
    ];
    let mut w = [0.0; 6];
    for (k, wk) in w.iter_mut().enumerate() {
        for &(t, gw) in &g {
            let x = t + shift as f64;
            let mut l = 1.0;
            for j in 0..6 {
                if j != k {
                    l *= (x - j as f64) / (k as f64 - j as f64);
                }
            }
            *wk += gw * l;
        }
    }
    w
}

/// Cumulative integral `I[i] = int_{x_0}^{x_i} f` of uniformly sampled data,
/// sixth order. Falls back to trapezoid cells for fewer than six samples.
pub fn cumulative(values: &[Complex64], dx: f64) -> Vec<Complex64> {
    let n = values.len();
    let mut out = vec![Complex64::default(); n];
    if n < 6 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * dx * (values[i - 1] + values[i]);
        }
        return out;
    }
    let weights: Vec<[f64; 6]> = (0..5).map(cell_weights).collect();
    for i in 0..n - 1 {
        // centre the stencil on the cell where possible
        let start = i.saturating_sub(2).min(n - 6);
        let w = &weights[i - start];
        let cell: Complex64 = (0..6).map(|k| w[k] * values[start + k]).sum();
        out[i + 1] = out[i] + dx * cell;
    }
    out
}
