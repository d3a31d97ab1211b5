//! Harmonic S-matrix `S0`, its first-order corrections and transition
//! probabilities, plus closed forms for the unforced parametric oscillator.

use crate::basis::{overlap, Grid, OutState, ZeroOrderState};
use crate::classical::ScatteringParams;
use crate::error::{Error, Result};
use crate::firstorder::{AmplitudeCorrection, FinalStateCoeffs};
use crate::special::assoc_legendre;
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;

type C = Complex64;

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho = {rho} outside [0, 1)")));
    }
    Ok(())
}

/// `S0_mn` for `m, n <= size - 1` from the Taylor coefficients of the
/// generating function `(1-rho)^{1/4} exp(a z1^2 - a z2^2 + b z1 z2)`,
/// `a = sqrt(rho)/2`, `b = sqrt(1-rho)`, by exact recursion on
/// `D_mn = sqrt(m! n!) [z1^m z2^n]`.
pub fn s0_generating_table(size: usize, rho: f64) -> Result<Vec<Vec<f64>>> {
    check_rho(rho)?;
    let a = 0.5 * rho.sqrt();
    let b = (1.0 - rho).sqrt();
    let mut d = vec![vec![0.0; size]; size];
    if size == 0 {
        return Ok(d);
    }
    d[0][0] = 1.0;
    for n in 0..size {
        if n >= 1 {
            // first row from the z2 derivative: D_{0,n} = -2a sqrt((n-1)/n) D_{0,n-2}
            let nf = n as f64;
            d[0][n] = if n >= 2 { -2.0 * a * ((nf - 1.0) / nf).sqrt() * d[0][n - 2] } else { 0.0 };
        }
        for m in 0..size - 1 {
            let (mf, nf) = (m as f64, n as f64);
            let mut v = 0.0;
            if m >= 1 {
                v += 2.0 * a * (mf / (mf + 1.0)).sqrt() * d[m - 1][n];
            }
            if n >= 1 {
                v += b * (nf / (mf + 1.0)).sqrt() * d[m][n - 1];
            }
            d[m + 1][n] = v;
        }
    }
    let pre = (1.0 - rho).powf(0.25);
    for row in d.iter_mut() {
        for x in row.iter_mut() {
            *x *= pre;
        }
    }
    Ok(d)
}

/// Single generating-function element.
pub fn s0_generating(m: usize, n: usize, rho: f64) -> Result<f64> {
    Ok(s0_generating_table(m.max(n) + 1, rho)?[m][n])
}

/// `W0_mn = (n<! / n>!) sqrt(1-rho) |P^{(n>-n<)/2}_{(n<+n>)/2}(sqrt(1-rho))|^2`;
/// zero for odd `m + n`.
pub fn w0_legendre(m: usize, n: usize, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if (m + n) % 2 == 1 {
        return Ok(0.0);
    }
    let (lo, hi) = (m.min(n), m.max(n));
    let x = (1.0 - rho).sqrt();
    let p = assoc_legendre((lo + hi) / 2, (hi - lo) / 2, x)?;
    let ratio: f64 = ((lo + 1)..=hi).map(|k| 1.0 / k as f64).product();
    Ok(ratio * x * p * p)
}

/// Evaluation instants for the asymptotic overlap: `count` points spread over
/// the trailing `window` of the span.
pub fn default_tau_set(end: f64, window: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| end - window * (count - 1 - i) as f64 / (count - 1).max(1) as f64)
        .collect()
}

/// Maximum allowed spread of the overlap across the evaluation instants.
pub const LIMIT_TOLERANCE: f64 = 1e-6;

/// `<phi_f(m) | f0(n)>` at each instant; the overlaps must agree (the
/// asymptotic limit has been reached) and the value at the last instant is returned.
pub fn s0_quadrature(m: usize, state: &ZeroOrderState, omega_out: f64, grid: &Grid, tau_set: &[f64]) -> Result<C> {
    Ok(s0_quadrature_matrix(m + 1, &[state.clone()], omega_out, grid, tau_set)?[m][0])
}

/// `S0` by quadrature for rows `m < rows` and the given states (one column each).
pub fn s0_quadrature_matrix(rows: usize, states: &[ZeroOrderState], omega_out: f64, grid: &Grid, tau_set: &[f64]) -> Result<Vec<Vec<C>>> {
    if tau_set.is_empty() {
        return Err(Error::InvalidParameter("empty evaluation set".into()));
    }
    let xs = grid.points();
    let per_tau: Vec<Vec<Vec<C>>> = tau_set
        .par_iter()
        .map(|&t| {
            let outs: Vec<Vec<C>> = (0..rows)
                .map(|m| OutState::new(m, omega_out).map(|o| o.eval_on_grid(&xs, t)))
                .collect::<Result<_>>()?;
            let mut cols = Vec::with_capacity(states.len());
            for st in states {
                let f = st.eval_on_grid(&xs, t)?;
                let col: Vec<C> = outs.iter().map(|o| overlap(o, &f, grid.dx()).map(|v| v.value)).collect::<Result<_>>()?;
                cols.push(col);
            }
            Ok(cols)
        })
        .collect::<Result<_>>()?;
    let last = per_tau.last().unwrap();
    let mut variation: f64 = 0.0;
    for cols in &per_tau {
        for (c, lc) in cols.iter().zip(last) {
            for (a, b) in c.iter().zip(lc) {
                variation = variation.max((a - b).norm());
            }
        }
    }
    if variation > LIMIT_TOLERANCE {
        return Err(Error::LimitNotReached { variation });
    }
    Ok((0..rows).map(|m| last.iter().map(|col| col[m]).collect()).collect())
}

/// Generating-function `S0` carrying the phases of the actual overlaps of an
/// unforced scenario: `S0_mn = G_mn exp(i[-d1/2 + n(pi-d1-d2)/2 - m(pi+d1-d2)/2])`
/// with `d1 = arg c1`, `d2 = arg c2`.
pub fn s0_generating_phased(size: usize, sp: &ScatteringParams) -> Result<Vec<Vec<C>>> {
    let g = s0_generating_table(size, sp.rho)?;
    let pi = std::f64::consts::PI;
    let (d1, d2) = (sp.delta1, sp.delta2);
    Ok(g.iter()
        .enumerate()
        .map(|(m, row)| {
            row.iter()
                .enumerate()
                .map(|(n, &v)| {
                    let ph = -0.5 * d1 + 0.5 * n as f64 * (pi - d1 - d2) - 0.5 * m as f64 * (pi + d1 - d2);
                    v * C::from_polar(1.0, ph)
                })
                .collect()
        })
        .collect())
}

/// Index shift reach of the first-order corrections.
pub const PADDING: usize = 4;

/// First-order corrections at `tau`:
/// `S1_mn = sum_l conj(wbar_l^f(m)) S0_{m-l,n} - sum_p conj(ubar_p^f(m)) S0_{m-p,n}`,
/// `S2_mn = sum_l wbar_l(n) S0_{m,n-l} - sum_p ubar_p(n) S0_{m,n-p}`.
/// `s0` must cover `m, n <= n_max + 4`; `finals[m]` and `amps[n]` cover `0..=n_max`.
pub fn first_order_smatrix(s0: &[Vec<C>], finals: &[FinalStateCoeffs], amps: &[AmplitudeCorrection], tau: f64) -> Result<(Vec<Vec<C>>, Vec<Vec<C>>)> {
    let rows = finals.len();
    let cols = amps.len();
    let need = rows.max(cols) + PADDING;
    if s0.len() < need || s0.iter().any(|r| r.len() < need) {
        return Err(Error::Capacity(format!(
            "S0 must be padded to {need} x {need} for corrections up to level {}",
            rows.max(cols).saturating_sub(1)
        )));
    }
    let at = |m: i64, n: i64| -> C {
        if m < 0 || n < 0 {
            C::default()
        } else {
            s0[m as usize][n as usize]
        }
    };
    let fin: Vec<([C; 5], [C; 9])> = finals.iter().map(|f| (f.w_bar(tau), f.u_bar(tau))).collect();
    let mut s1 = vec![vec![C::default(); cols]; rows];
    let mut s2 = vec![vec![C::default(); cols]; rows];
    for m in 0..rows {
        let (wf, uf) = &fin[m];
        for n in 0..cols {
            let a = &amps[n];
            let (mi, ni) = (m as i64, n as i64);
            let mut x = C::default();
            let mut y = C::default();
            for l in 1..=4i64 {
                x += wf[l as usize].conj() * at(mi - l, ni);
                y += a.w_plus[l as usize] * at(mi, ni - l);
            }
            for p in -4i64..=4 {
                let k = (p + 4) as usize;
                x -= uf[k].conj() * at(mi - p, ni);
                y -= a.ubar_plus[k] * at(mi, ni - p);
            }
            s1[m][n] = x;
            s2[m][n] = y;
        }
    }
    Ok((s1, s2))
}

/// Convention for the exponential prefactor of the first-order probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentVariant {
    /// `exp(-2 lambda Re v0)`.
    A,
    /// `exp(-lambda Re v0)`.
    B,
}

impl ExponentVariant {
    pub fn factor(self) -> f64 {
        match self {
            Self::A => 2.0,
            Self::B => 1.0,
        }
    }
}

/// Default floor on `|S0|` below which the first-order ratio is not formed.
pub const S0_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EntryFlags {
    /// `|S0| < floor`: the reported probability is the zero-order one.
    pub indeterminate: bool,
    /// First-order truncation pushed the value outside `[0, 1]`.
    pub out_of_bounds: bool,
}

impl EntryFlags {
    pub fn label(&self) -> String {
        let mut v = Vec::new();
        if self.indeterminate {
            v.push("indeterminate");
        }
        if self.out_of_bounds {
            v.push("out-of-bounds");
        }
        if v.is_empty() {
            "ok".into()
        } else {
            v.join("|")
        }
    }
}

/// `W_mn = exp(-k lambda Re v0(n)) [1 + 2 lambda Re((S1 + S2)/S0)] |S0|^2`, `k` per variant.
pub fn transition_probability(
    s0: &[Vec<C>],
    s1: &[Vec<C>],
    s2: &[Vec<C>],
    lambda: f64,
    v0_plus_re: &[f64],
    variant: ExponentVariant,
    floor: f64,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<EntryFlags>>)> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0 (got {lambda})")));
    }
    let rows = s1.len();
    let cols = s1.first().map_or(0, |r| r.len());
    if v0_plus_re.len() < cols {
        return Err(Error::InvalidParameter("need Re v0 for every column".into()));
    }
    let mut w = vec![vec![0.0; cols]; rows];
    let mut flags = vec![vec![EntryFlags::default(); cols]; rows];
    for m in 0..rows {
        for n in 0..cols {
            let s = s0[m][n];
            let pre = (-variant.factor() * lambda * v0_plus_re[n]).exp();
            let base = s.norm_sqr();
            let val = if s.norm() < floor {
                flags[m][n].indeterminate = true;
                pre * base
            } else {
                pre * (1.0 + 2.0 * lambda * ((s1[m][n] + s2[m][n]) / s).re) * base
            };
            flags[m][n].out_of_bounds = !(0.0..=1.0).contains(&val);
            w[m][n] = val;
        }
    }
    Ok((w, flags))
}

/// `v0+(rho) = ((1 + rho)/(1 - rho))^3`.
pub fn v0_plus_of_rho(rho: f64) -> f64 {
    ((1.0 + rho) / (1.0 - rho)).powi(3)
}

/// Closed form of the ground-state persistence probability:
/// `sqrt(1-rho) {1 - lt [1 - v0+(rho)] (1 - rho/3)} exp(-k lt v0+(rho))`
/// with `k = 1` (reference form) or `k = 2` when `double_exponent` is set.
pub fn w00_closed_form(lambda_tilde: f64, rho: f64, double_exponent: bool) -> Result<f64> {
    check_rho(rho)?;
    if !(lambda_tilde >= 0.0 && lambda_tilde.is_finite()) {
        return Err(Error::Domain(format!("lambda_tilde = {lambda_tilde} must be >= 0")));
    }
    let v = v0_plus_of_rho(rho);
    let k = if double_exponent { 2.0 } else { 1.0 };
    Ok((1.0 - rho).sqrt() * (1.0 - lambda_tilde * (1.0 - v) * (1.0 - rho / 3.0)) * (-k * lambda_tilde * v).exp())
}

/// Rescaled coupling `3 beta+ lambda / (8 Omega_out^3)`.
pub fn lambda_tilde(lambda: f64, beta_plus: f64, omega_out: f64) -> f64 {
    3.0 * beta_plus * lambda / (8.0 * omega_out.powi(3))
}

/// `[S0_00]^{-1} sum_{k=0..2} (u^f_{-2k} S0_{2k,0} + u^+_{-2k} S0_{0,2k})`.
pub fn lambda_rho(u_final: &[C; 9], u_plus: &[C; 9], s0: &[Vec<C>]) -> Result<C> {
    if s0.len() < 5 || s0[0].len() < 5 {
        return Err(Error::Capacity("lambda_rho needs S0 up to index 4".into()));
    }
    let mut acc = C::default();
    for k in 0..=2 {
        let i = 4 - 2 * k;
        acc += u_final[i] * s0[2 * k][0] + u_plus[i] * s0[0][2 * k];
    }
    Ok(acc / s0[0][0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S0Method {
    Quadrature,
    GeneratingFunction,
    Legendre,
}

impl S0Method {
    pub fn label(self) -> &'static str {
        match self {
            Self::Quadrature => "quadrature",
            Self::GeneratingFunction => "generating-function",
            Self::Legendre => "legendre",
        }
    }
}

/// Transition data for `m, n <= n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    pub n_max: usize,
    pub lambda: f64,
    pub variant: ExponentVariant,
    /// Padded to `n_max + 4`.
    pub s0: Vec<Vec<C>>,
    pub s1: Vec<Vec<C>>,
    pub s2: Vec<Vec<C>>,
    pub w: Vec<Vec<f64>>,
    pub method: S0Method,
    pub flags: Vec<Vec<EntryFlags>>,
    pub v0_plus: Vec<C>,
}

impl TransitionTable {
    /// Column `n` summed over final levels.
    pub fn column_sum(&self, n: usize) -> f64 {
        self.w.iter().map(|r| r[n]).sum()
    }

    /// Columnar dump: m, n, Re S0, Im S0, Re S1, Im S1, Re S2, Im S2, W, method, flags.
    pub fn write_csv<Wr: Write>(&self, mut w: Wr) -> std::io::Result<()> {
        writeln!(w, "m,n,re_s0,im_s0,re_s1,im_s1,re_s2,im_s2,w,method,flags")?;
        for m in 0..=self.n_max {
            for n in 0..=self.n_max {
                let (a, b, c) = (self.s0[m][n], self.s1[m][n], self.s2[m][n]);
                writeln!(
                    w,
                    "{m},{n},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                    a.re,
                    a.im,
                    b.re,
                    b.im,
                    c.re,
                    c.im,
                    self.w[m][n],
                    self.method.label(),
                    self.flags[m][n].label()
                )?;
            }
        }
        Ok(())
    }
}
