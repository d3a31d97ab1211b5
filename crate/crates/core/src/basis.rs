//! Exact zero-order states of the parametric forced oscillator, asymptotic
//! out-states, and grid inner products.

use crate::classical::{ClassicalPoint, ClassicalSolution};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::special::{hermite_functions, DEFAULT_N_MAX};
use num_complex::Complex64;
use std::io::Write;
use std::sync::Arc;

/// Uniform periodic grid `x_i = -X + i dx`, `dx = 2X/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub half_width: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) || n < 16 {
            return Err(Error::InvalidParameter(format!(
                "grid needs half_width > 0 and at least 16 points (got {half_width}, {n})"
            )));
        }
        Ok(Self { half_width, n })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

/// Default number of grid points for wavefunction work.
pub const DEFAULT_GRID_POINTS: usize = 2048;

/// Grid half-width covering the moving, breathing packet of level `n`:
/// the maximum over the trajectory of `|eta| + 8 |zeta| / sqrt(Omega_in) sqrt(2n + 1)`.
pub fn default_half_width(sol: &ClassicalSolution, n: usize) -> f64 {
    let spread = 8.0 * ((2 * n + 1) as f64).sqrt() / sol.omega_in().sqrt();
    (0..sol.num_samples())
        .map(|i| {
            let p = sol.sample(i);
            p.eta.abs() + spread * p.zeta_mod()
        })
        .fold(0.0, f64::max)
}

/// Exact solution of the harmonic problem that starts in level `n` of the in-oscillator.
#[derive(Debug, Clone)]
pub struct ZeroOrderState {
    n: usize,
    sol: Arc<ClassicalSolution>,
}

/// Instantaneous parameters of a zero-order state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateParams {
    pub point: ClassicalPoint,
    /// `|zeta| / sqrt(Omega_in)`: the width scale relating `x - eta` and `y`.
    pub scale: f64,
    pub a1: Complex64,
    pub a2: Complex64,
    /// Modulus of the normalization `K`.
    pub k_abs: f64,
    /// Accumulated phase `int L_cl - (n + 1/2) int kappa0`.
    pub phase: f64,
}

impl ZeroOrderState {
    pub fn new(sol: Arc<ClassicalSolution>, n: usize) -> Result<Self> {
        if n > DEFAULT_N_MAX {
            return Err(Error::Capacity(format!("level {n} exceeds n_max = {DEFAULT_N_MAX}")));
        }
        Ok(Self { n, sol })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn classical(&self) -> &Arc<ClassicalSolution> {
        &self.sol
    }

    pub fn params(&self, tau: f64) -> Result<StateParams> {
        Ok(self.params_at(self.sol.at(tau)?))
    }

    pub fn params_at(&self, p: ClassicalPoint) -> StateParams {
        let wi = self.sol.omega_in();
        let zm = p.zeta_mod();
        let scale = zm / wi.sqrt();
        let a1 = Complex64::new(0.0, p.eta_dot * scale);
        let a2 = Complex64::new(-0.5, zm * p.zeta_mod_dot() / (2.0 * wi));
        let energy = (self.n as f64 + 0.5) * p.theta;
        StateParams {
            point: p,
            scale,
            a1,
            a2,
            k_abs: scale.powf(-0.5),
            phase: p.action - energy,
        }
    }

    /// Scaled coordinate `y = sqrt(Omega_in) (x - eta) / |zeta|`.
    pub fn y(&self, x: f64, tau: f64) -> Result<f64> {
        let p = self.params(tau)?;
        Ok((x - p.point.eta) / p.scale)
    }

    pub fn eval(&self, x: f64, tau: f64) -> Result<Complex64> {
        let p = self.params(tau)?;
        let mut h = vec![0.0; self.n + 1];
        Ok(self.eval_with(&p, x, &mut h))
    }

    fn eval_with(&self, p: &StateParams, x: f64, h: &mut [f64]) -> Complex64 {
        let y = (x - p.point.eta) / p.scale;
        hermite_functions(self.n, y, h);
        // the Gaussian part of a2 (Re a2 = -1/2) lives inside the Hermite function
        let phase = p.a1.im * y + p.a2.im * y * y + p.phase;
        p.k_abs * h[self.n] * Complex64::from_polar(1.0, phase)
    }

    pub fn eval_on_grid(&self, xs: &[f64], tau: f64) -> Result<Vec<Complex64>> {
        let p = self.params(tau)?;
        let mut h = vec![0.0; self.n + 1];
        Ok(xs.iter().map(|&x| self.eval_with(&p, x, &mut h)).collect())
    }
}

/// `f0(n; x, tau)`; errors when `tau` is outside the trajectory span.
pub fn eval_f0(state: &ZeroOrderState, x: f64, tau: f64) -> Result<Complex64> {
    state.eval(x, tau)
}

/// Eigenstate `m` of the out-oscillator with its stationary phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutState {
    pub m: usize,
    pub omega_out: f64,
}

impl OutState {
    pub fn new(m: usize, omega_out: f64) -> Result<Self> {
        if m > DEFAULT_N_MAX {
            return Err(Error::Capacity(format!("level {m} exceeds n_max = {DEFAULT_N_MAX}")));
        }
        if !(omega_out > 0.0) {
            return Err(Error::InvalidParameter(format!("omega_out must be positive (got {omega_out})")));
        }
        Ok(Self { m, omega_out })
    }

    /// Time-independent part `phi(m; Omega_out; x)`.
    pub fn phi(&self, x: f64) -> f64 {
        let mut h = vec![0.0; self.m + 1];
        hermite_functions(self.m, self.omega_out.sqrt() * x, &mut h);
        self.omega_out.powf(0.25) * h[self.m]
    }

    pub fn eval(&self, x: f64, tau: f64) -> Complex64 {
        self.phi(x) * Complex64::from_polar(1.0, -(self.m as f64 + 0.5) * self.omega_out * tau)
    }

    pub fn eval_on_grid(&self, xs: &[f64], tau: f64) -> Vec<Complex64> {
        let ph = Complex64::from_polar(1.0, -(self.m as f64 + 0.5) * self.omega_out * tau);
        let mut h = vec![0.0; self.m + 1];
        let s = self.omega_out.sqrt();
        let c = self.omega_out.powf(0.25);
        xs.iter()
            .map(|&x| {
                hermite_functions(self.m, s * x, &mut h);
                c * h[self.m] * ph
            })
            .collect()
    }
}

/// Integrated tail magnitude allowed at the grid edges.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Inner product with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub value: Complex64,
    pub error: f64,
}

/// `int conj(bra) ket dx` on a shared uniform grid.
pub fn overlap(bra: &[Complex64], ket: &[Complex64], dx: f64) -> Result<Overlap> {
    if bra.len() != ket.len() {
        return Err(Error::InvalidParameter(format!(
            "overlap of samples with different lengths ({} vs {})",
            bra.len(),
            ket.len()
        )));
    }
    let prod: Vec<Complex64> = bra.iter().zip(ket).map(|(b, k)| b.conj() * k).collect();
    let value = quadrature::checked_overlap(&prod, dx, f64::INFINITY, TAIL_TOLERANCE)?;
    let (_, error) = quadrature::trapezoid(&prod, dx);
    Ok(Overlap { value, error })
}

/// Columnar dump: x, Re psi, Im psi.
pub fn write_wavefunction<W: Write>(mut w: W, xs: &[f64], psi: &[Complex64]) -> std::io::Result<()> {
    writeln!(w, "x,re_psi,im_psi")?;
    for (x, p) in xs.iter().zip(psi) {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", x, p.re, p.im)?;
    }
    Ok(())
}
