//! First-order correction coefficients: the polynomial phase `Phi_1 = sum v_k y^k`,
//! the amplitude correction `f_1 = sum wbar_j f_0(n - j)`, the expansion of
//! `Phi_1 f_0(n)` over neighbouring levels, and the final-state analogues.

use crate::classical::{self, ClassicalPoint, ClassicalSolution};
use crate::error::{Error, Result};
use crate::ode::{integrate, DenseTrajectory, OdeOptions};
use crate::profiles::Scenario;
use crate::quadrature;
use crate::special::HermiteSeries;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Sign and phase conventions of the first-order equations.
///
/// `Derived` follows from substituting the ansatz into the Schrödinger
/// equation (coupling terms enter the sources with a minus sign, the
/// amplitude sources carry `exp(-i j theta)`). `Printed` keeps the plus signs,
/// the `exp(+i j theta)` phase and the `v_2` coefficient of the reference
/// formulas; it reproduces the reference closed forms for the asymptotic
/// coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    #[default]
    Derived,
    Printed,
}

impl Convention {
    fn coupling_sign(self) -> f64 {
        match self {
            Self::Derived => -1.0,
            Self::Printed => 1.0,
        }
    }

    /// Sign `s` of the amplitude-source phase `exp(s i j theta)`.
    fn phase_sign(self) -> f64 {
        match self {
            Self::Derived => -1.0,
            Self::Printed => 1.0,
        }
    }
}

/// Coefficients of `alpha x^3 + beta x^4 = sum b_m y^m` with `x = eta + |zeta| y / sqrt(Omega_in)`.
pub fn b_coeffs(alpha: f64, beta: f64, eta: f64, zeta_mod: f64, omega_in: f64) -> [f64; 5] {
    let s = zeta_mod / omega_in.sqrt();
    [
        eta.powi(3) * (beta * eta + alpha),
        s * eta * eta * (4.0 * beta * eta + 3.0 * alpha),
        3.0 * s * s * eta * (2.0 * beta * eta + alpha),
        s.powi(3) * (4.0 * beta * eta + alpha),
        beta * s.powi(4),
    ]
}

/// Sources `d_j` of `i v_j' = j kappa0 v_j + d_j`.
pub fn d_coeffs(conv: Convention, n: usize, kappa: f64, b: &[f64; 5], v: &[C; 5]) -> [C; 5] {
    let s = conv.coupling_sign() * kappa;
    let nf = n as f64;
    [
        b[0] + s * ((2.0 * nf + 1.0) * v[2] + 2.0 * nf * (nf - 1.0) * v[4]),
        b[1] + s * 3.0 * (nf + 1.0) * v[3],
        b[2] + s * 2.0 * (2.0 * nf + 3.0) * v[4],
        C::from(b[3]),
        C::from(b[4]),
    ]
}

fn factorial_ratio_sqrt(n: usize, j: usize) -> f64 {
    // sqrt(n! / (n-j)!)
    ((n - j + 1)..=n).map(|k| k as f64).product::<f64>().sqrt()
}

/// Amplitude sources `ebar_j` (index 1..=4; index 0 unused) without the
/// `exp(s i j theta)` phase. Zero whenever `n < j`.
pub fn e_bar_amplitudes(conv: Convention, n: usize, kappa: f64, v: &[C; 5]) -> [C; 5] {
    let mut e = [ZERO; 5];
    let nf = n as f64;
    if n >= 4 {
        e[4] = 2.0 * kappa * v[4] * factorial_ratio_sqrt(n, 4);
    }
    if n >= 3 {
        e[3] = 3.0 * kappa * v[3] * (0.5 * factorial_ratio_sqrt(n, 3).powi(2)).sqrt();
    }
    if n >= 2 {
        let bracket = match conv {
            Convention::Derived => 2.0 * (v[2] + (2.0 * nf - 3.0) * v[4]),
            Convention::Printed => v[2] + 2.0 * (2.0 * nf - 3.0) * v[4],
        };
        e[2] = kappa * bracket * factorial_ratio_sqrt(n, 2);
    }
    if n >= 1 {
        e[1] = kappa * (2.0 * v[1] + 3.0 * (nf - 1.0) * v[3]) * (0.5 * nf).sqrt();
    }
    e
}

/// Steady (adiabatic) values `v_j = -d_j / (j kappa)` for constant sources; `v_0 = 0`.
pub fn steady_v(conv: Convention, n: usize, kappa: f64, b: &[f64; 5]) -> [C; 5] {
    let mut v = [ZERO; 5];
    for j in (1..=4).rev() {
        let d = d_coeffs(conv, n, kappa, b, &v);
        v[j] = -d[j] / (j as f64 * kappa);
    }
    v
}

/// Steady amplitude coefficients belonging to constant `ebar` amplitudes.
fn steady_w(conv: Convention, kappa: f64, e: &[C; 5]) -> [C; 5] {
    let mut w = [ZERO; 5];
    for j in 1..=4 {
        w[j] = -conv.phase_sign() * e[j] / (j as f64 * kappa);
    }
    w
}

/// Expansion `(Phi_1 - v_0) H_n = sum_p chi_p H_{n-p}` and its normalized form
/// `u_p = [(n-p)!/(2^p n!)]^{1/2} chi_p`, for `p = -4..=4` (index `p + 4`).
/// `v_0` is excluded: it enters the probabilities as a separate exponential factor.
pub fn chi_u_coeffs(v: &[C; 5], n: usize) -> ([C; 9], [C; 9]) {
    let mut poly = *v;
    poly[0] = ZERO;
    let series = HermiteSeries::basis(n).times_poly(&poly);
    let mut chi = [ZERO; 9];
    let mut u = [ZERO; 9];
    for p in -4i64..=4 {
        let k = n as i64 - p;
        if k < 0 {
            continue;
        }
        let c = series.coeff(k as usize);
        chi[(p + 4) as usize] = c;
        // (n-p)!/(2^p n!) = 2^{-p} (k!/n!)
        let ln_ratio = ln_fact(k as usize) - ln_fact(n) - p as f64 * std::f64::consts::LN_2;
        u[(p + 4) as usize] = c * (0.5 * ln_ratio).exp();
    }
    (chi, u)
}

fn ln_fact(n: usize) -> f64 {
    crate::special::ln_factorial(n)
}

/// Regularizer coefficients `sigma_k` of `Q_1 = sum sigma_k y^k` (diagnostic).
pub fn sigma_coeffs(n: usize, kappa: f64, a1: C, a2: C, v: &[C; 5]) -> [C; 5] {
    let nf = n as f64;
    [
        kappa * (a1 * v[1] + 2.0 * nf * v[2] + 2.0 * nf * (nf - 1.0) * v[4]),
        2.0 * kappa * (a2 * v[1] + a1 * v[2] + 1.5 * nf * v[3]),
        4.0 * kappa * (a2 * v[2] + 0.75 * a1 * v[3] + nf * v[4]),
        6.0 * kappa * (a2 * v[3] + 2.0 / 3.0 * a1 * v[4]),
        8.0 * kappa * a2 * v[4],
    ]
}

// augmented state: classical channels, then v_0..v_4, then wbar_1..wbar_4
const V0: usize = classical::DIM;
const W0: usize = V0 + 10;
const DIM_V: usize = W0;
const DIM_W: usize = W0 + 8;

fn get_c(y: &[f64], off: usize, k: usize) -> C {
    C::new(y[off + 2 * k], y[off + 2 * k + 1])
}

fn put_c(dy: &mut [f64], off: usize, k: usize, c: C) {
    dy[off + 2 * k] = c.re;
    dy[off + 2 * k + 1] = c.im;
}

fn v_of(y: &[f64]) -> [C; 5] {
    std::array::from_fn(|k| get_c(y, V0, k))
}

fn wbar_of(y: &[f64]) -> [C; 5] {
    let mut w = [ZERO; 5];
    for j in 1..=4 {
        w[j] = get_c(y, W0, j - 1);
    }
    w
}

struct Rhs<'a> {
    s: &'a Scenario,
    conv: Convention,
    n: usize,
    omega_in: f64,
}

impl Rhs<'_> {
    fn b_at(&self, t: f64, p: &ClassicalPoint) -> [f64; 5] {
        b_coeffs(self.s.alpha.value(t), self.s.beta.value(t), p.eta, p.zeta_mod(), self.omega_in)
    }

    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64], with_w: bool) {
        classical::rhs(&self.s.omega, &self.s.force, self.omega_in, t, y, dy);
        let p = ClassicalPoint::from_state(t, y);
        let kappa = p.kappa0(self.omega_in);
        let v = v_of(y);
        let d = d_coeffs(self.conv, self.n, kappa, &self.b_at(t, &p), &v);
        for j in 0..5 {
            put_c(dy, V0, j, -C::i() * (j as f64 * kappa * v[j] + d[j]));
        }
        if with_w {
            let e = e_bar_amplitudes(self.conv, self.n, kappa, &v);
            for j in 1..=4 {
                let ph = C::from_polar(1.0, self.conv.phase_sign() * j as f64 * p.theta);
                put_c(dy, W0, j - 1, -C::i() * e[j] * ph);
            }
        }
    }

    fn initial(&self, with_w: bool) -> (Vec<f64>, [C; 5], [C; 5]) {
        let t0 = self.s.start();
        let cl = classical::initial_state(self.omega_in, t0);
        let p = ClassicalPoint::from_state(t0, &cl);
        let kappa = p.kappa0(self.omega_in);
        let v = steady_v(self.conv, self.n, kappa, &self.b_at(t0, &p));
        let mut y = vec![0.0; if with_w { DIM_W } else { DIM_V }];
        y[..classical::DIM].copy_from_slice(&cl);
        for (j, c) in v.iter().enumerate() {
            put_c(&mut y, V0, j, *c);
        }
        let mut wbar = [ZERO; 5];
        if with_w {
            let e = e_bar_amplitudes(self.conv, self.n, kappa, &v);
            let w = steady_w(self.conv, kappa, &e);
            for j in 1..=4 {
                wbar[j] = w[j] * C::from_polar(1.0, self.conv.phase_sign() * j as f64 * p.theta);
                put_c(&mut y, W0, j - 1, wbar[j]);
            }
        }
        (y, v, wbar)
    }
}

fn check_inputs(s: &Scenario, classical: &ClassicalSolution, tol: f64) -> Result<()> {
    s.validate()?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be in (0, 1), got {tol}")));
    }
    if classical.start() != s.start() || classical.end() != s.end() {
        return Err(Error::InvalidSpan(format!(
            "classical solution spans [{}, {}], scenario [{}, {}]",
            classical.start(),
            classical.end(),
            s.start(),
            s.end()
        )));
    }
    Ok(())
}

fn ode_options(tol: f64) -> OdeOptions {
    OdeOptions::with_tol((0.01 * tol).max(1e-14))
}

/// Polynomial phase correction `Phi_1 = sum_k v_k(tau) y^k` for level `n`.
#[derive(Debug, Clone)]
pub struct PolyPhaseCorrection {
    pub n: usize,
    pub convention: Convention,
    omega_in: f64,
    traj: DenseTrajectory,
    pub v_minus: [C; 5],
    pub v_plus: [C; 5],
    /// Sup-norm difference between the ODE route and the quadrature route.
    pub route_deviation: f64,
    /// Difference between the jointly integrated classical channels and the supplied solution at `tau_end`.
    pub classical_deviation: f64,
}

impl PolyPhaseCorrection {
    pub fn start(&self) -> f64 {
        self.traj.start()
    }

    pub fn end(&self) -> f64 {
        self.traj.end()
    }

    pub fn omega_in(&self) -> f64 {
        self.omega_in
    }

    pub fn point(&self, tau: f64) -> Result<(ClassicalPoint, [C; 5])> {
        let mut y = [0.0; DIM_V];
        self.traj.eval_into(tau, &mut y)?;
        Ok((ClassicalPoint::from_state(tau, &y), v_of(&y)))
    }

    pub fn v(&self, tau: f64) -> Result<[C; 5]> {
        Ok(self.point(tau)?.1)
    }

    pub fn kappa0(&self, tau: f64) -> Result<f64> {
        Ok(self.point(tau)?.0.kappa0(self.omega_in))
    }

    /// Mean of `v_j` over the trailing window `2 pi / (j kbar0)` (`2 pi / kbar0` for `j = 0`).
    pub fn v_plus_averaged(&self, kbar0: f64) -> Result<[C; 5]> {
        let mut out = [ZERO; 5];
        const SAMPLES: usize = 2000;
        for (j, o) in out.iter_mut().enumerate() {
            let period = 2.0 * std::f64::consts::PI / (j.max(1) as f64 * kbar0);
            let t0 = self.end() - period;
            let mut acc = ZERO;
            for i in 0..SAMPLES {
                let t = t0 + period * (i as f64 + 0.5) / SAMPLES as f64;
                acc += self.v(t)?[j];
            }
            *o = acc / SAMPLES as f64;
        }
        Ok(out)
    }

    pub fn sigma(&self, tau: f64) -> Result<[C; 5]> {
        let (p, v) = self.point(tau)?;
        let s = p.zeta_mod() / self.omega_in.sqrt();
        let a1 = C::new(0.0, p.eta_dot * s);
        let a2 = C::new(-0.5, p.zeta_mod() * p.zeta_mod_dot() / (2.0 * self.omega_in));
        Ok(sigma_coeffs(self.n, p.kappa0(self.omega_in), a1, a2, &v))
    }

    pub fn num_samples(&self) -> usize {
        self.traj.times().len()
    }

    pub fn sample(&self, i: usize) -> (f64, [C; 5]) {
        (self.traj.times()[i], v_of(self.traj.state(i)))
    }
}

/// Integrates the phase coefficients in the order v4, v3, v2, v1, v0 (the
/// sources of lower orders only involve higher ones), both as an ODE and by
/// the propagator quadrature, and cross-checks the two.
pub fn solve_v(s: &Scenario, classical: &ClassicalSolution, n: usize, tol: f64, conv: Convention) -> Result<PolyPhaseCorrection> {
    check_inputs(s, classical, tol)?;
    let rhs = Rhs {
        s,
        conv,
        n,
        omega_in: classical.omega_in(),
    };
    let (y0, v_minus, _) = rhs.initial(false);
    let traj = integrate(|t, y, dy| rhs.eval(t, y, dy, false), s.start(), &y0, s.end(), &ode_options(tol))?;
    let fin = ClassicalPoint::from_state(s.end(), traj.final_state());
    let classical_deviation = (fin.zeta - classical.final_point().zeta).norm();
    let v_plus = v_of(traj.final_state());
    let mut corr = PolyPhaseCorrection {
        n,
        convention: conv,
        omega_in: classical.omega_in(),
        traj,
        v_minus,
        v_plus,
        route_deviation: 0.0,
        classical_deviation,
    };
    let (dev, scale) = quadrature_route_deviation(&corr, &rhs)?;
    corr.route_deviation = dev;
    let bound = 100.0 * tol * scale.max(1.0);
    if dev > bound {
        return Err(Error::Inconsistency {
            what: "v (ODE vs propagator quadrature)".into(),
            deviation: dev,
            bound,
        });
    }
    Ok(corr)
}

/// Step of the uniform grid used by the quadrature route.
pub const QUADRATURE_STEP: f64 = 0.005;

fn quadrature_route_deviation(corr: &PolyPhaseCorrection, rhs: &Rhs) -> Result<(f64, f64)> {
    let (t0, t1) = (corr.start(), corr.end());
    let m = ((t1 - t0) / QUADRATURE_STEP).ceil() as usize;
    let h = (t1 - t0) / m as f64;
    let mut pts = Vec::with_capacity(m + 1);
    let mut v_ode = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let t = if i == m { t1 } else { t0 + i as f64 * h };
        let (p, v) = corr.point(t)?;
        pts.push(p);
        v_ode.push(v);
    }
    let theta0 = pts[0].theta;
    let kappas: Vec<f64> = pts.iter().map(|p| p.kappa0(corr.omega_in)).collect();
    let bs: Vec<[f64; 5]> = pts.iter().map(|p| rhs.b_at(p.tau, p)).collect();
    let mut v_q = vec![[ZERO; 5]; m + 1];
    for j in (0..=4).rev() {
        let jf = j as f64;
        // G_j(tau) = exp(-i j (theta - theta0)); v_j = G_j [v_j^- - i int G_j^{-1} d_j]
        let integrand: Vec<C> = (0..=m)
            .map(|i| {
                let d = d_coeffs(rhs.conv, rhs.n, kappas[i], &bs[i], &v_q[i]);
                C::from_polar(1.0, jf * (pts[i].theta - theta0)) * d[j]
            })
            .collect();
        let cum = quadrature::cumulative(&integrand, h);
        for i in 0..=m {
            let g = C::from_polar(1.0, -jf * (pts[i].theta - theta0));
            v_q[i][j] = g * (corr.v_minus[j] - C::i() * cum[i]);
        }
    }
    let mut dev: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..=m {
        for j in 0..5 {
            dev = dev.max((v_q[i][j] - v_ode[i][j]).norm());
            scale = scale.max(v_ode[i][j].norm());
        }
    }
    Ok((dev, scale))
}

/// Amplitude correction `f_1 = sum_j wbar_j f_0(n - j)`.
#[derive(Debug, Clone)]
pub struct AmplitudeCorrection {
    pub n: usize,
    pub convention: Convention,
    omega_in: f64,
    traj: DenseTrajectory,
    pub w_minus: [C; 5],
    /// `wbar_j` at `tau_end` (index 1..=4).
    pub w_plus: [C; 5],
    /// `chi_p`, `u_p` and `ubar_p = u_p exp(-i p theta)` at `tau_end` (index `p + 4`).
    pub chi_plus: [C; 9],
    pub u_plus: [C; 9],
    pub ubar_plus: [C; 9],
    pub v_plus: [C; 5],
}

impl AmplitudeCorrection {
    pub fn start(&self) -> f64 {
        self.traj.start()
    }

    pub fn end(&self) -> f64 {
        self.traj.end()
    }

    pub fn omega_in(&self) -> f64 {
        self.omega_in
    }

    /// Classical point, `v` and `wbar` at `tau`.
    pub fn point(&self, tau: f64) -> Result<(ClassicalPoint, [C; 5], [C; 5])> {
        let mut y = [0.0; DIM_W];
        self.traj.eval_into(tau, &mut y)?;
        Ok((ClassicalPoint::from_state(tau, &y), v_of(&y), wbar_of(&y)))
    }

    pub fn w_bar(&self, tau: f64) -> Result<[C; 5]> {
        Ok(self.point(tau)?.2)
    }

    /// `ebar_j(tau)` including its phase.
    pub fn e_bar(&self, tau: f64) -> Result<[C; 5]> {
        let (p, v, _) = self.point(tau)?;
        let mut e = e_bar_amplitudes(self.convention, self.n, p.kappa0(self.omega_in), &v);
        for (j, ej) in e.iter_mut().enumerate().skip(1) {
            *ej *= C::from_polar(1.0, self.convention.phase_sign() * j as f64 * p.theta);
        }
        Ok(e)
    }

    pub fn num_samples(&self) -> usize {
        self.traj.times().len()
    }

    pub fn sample(&self, i: usize) -> (f64, [C; 5], [C; 5]) {
        let y = self.traj.state(i);
        (self.traj.times()[i], v_of(y), wbar_of(y))
    }

    /// Columnar dump: tau, (Re v_j, Im v_j) for j = 0..4, (Re wbar_j, Im wbar_j) for j = 1..4.
    pub fn write_coefficients<Wr: Write>(&self, mut w: Wr) -> std::io::Result<()> {
        let mut header = vec!["tau".to_string()];
        for j in 0..5 {
            header.push(format!("re_v{j}"));
            header.push(format!("im_v{j}"));
        }
        for j in 1..5 {
            header.push(format!("re_w{j}"));
            header.push(format!("im_w{j}"));
        }
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.num_samples() {
            let (t, v, wb) = self.sample(i);
            let mut row = vec![format!("{t:.16e}")];
            for c in v.iter().chain(&wb[1..]) {
                row.push(format!("{:.16e}", c.re));
                row.push(format!("{:.16e}", c.im));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrates the amplitude coefficients together with the phase
/// coefficients; the latter are checked against `v`.
pub fn solve_w(s: &Scenario, classical: &ClassicalSolution, v: &PolyPhaseCorrection, tol: f64) -> Result<AmplitudeCorrection> {
    check_inputs(s, classical, tol)?;
    let conv = v.convention;
    let n = v.n;
    let rhs = Rhs {
        s,
        conv,
        n,
        omega_in: classical.omega_in(),
    };
    let (y0, _, w_minus) = rhs.initial(true);
    let traj = integrate(|t, y, dy| rhs.eval(t, y, dy, true), s.start(), &y0, s.end(), &ode_options(tol))?;
    let yf = traj.final_state();
    let v_plus = v_of(yf);
    let dev = (0..5).map(|j| (v_plus[j] - v.v_plus[j]).norm()).fold(0.0, f64::max);
    let scale = v.v_plus.iter().map(|c| c.norm()).fold(1.0, f64::max);
    if dev > 100.0 * tol * scale {
        return Err(Error::Inconsistency {
            what: "v (phase-only vs joint amplitude solve)".into(),
            deviation: dev,
            bound: 100.0 * tol * scale,
        });
    }
    let theta = ClassicalPoint::from_state(s.end(), yf).theta;
    let (chi_plus, u_plus) = chi_u_coeffs(&v_plus, n);
    let ubar_plus = std::array::from_fn(|k| u_plus[k] * C::from_polar(1.0, -(k as f64 - 4.0) * theta));
    Ok(AmplitudeCorrection {
        n,
        convention: conv,
        omega_in: classical.omega_in(),
        w_plus: wbar_of(yf),
        traj,
        w_minus,
        chi_plus,
        u_plus,
        ubar_plus,
        v_plus,
    })
}

/// First-order coefficients of the out-state `m` of the final oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalStateCoeffs {
    pub m: usize,
    pub convention: Convention,
    pub omega_out: f64,
    pub v: [C; 5],
    /// `wbar_l^f(tau) = w[l] exp(s i l Omega_out tau)` (index 1..=4).
    pub w: [C; 5],
    pub chi: [C; 9],
    /// `ubar_p^f(tau) = u[p + 4] exp(-i p Omega_out tau)`.
    pub u: [C; 9],
}

impl FinalStateCoeffs {
    pub fn w_bar(&self, tau: f64) -> [C; 5] {
        let s = self.convention.phase_sign();
        std::array::from_fn(|l| self.w[l] * C::from_polar(1.0, s * l as f64 * self.omega_out * tau))
    }

    pub fn u_bar(&self, tau: f64) -> [C; 9] {
        std::array::from_fn(|k| self.u[k] * C::from_polar(1.0, -(k as f64 - 4.0) * self.omega_out * tau))
    }
}

/// Final-state coefficients for level `m`, from the limits of the profiles
/// (`|zeta| = 1`, `eta = 0`, `kappa0 = Omega_out`).
pub fn final_state_coeffs_from_limits(alpha_plus: f64, beta_plus: f64, omega_out: f64, m: usize, conv: Convention) -> FinalStateCoeffs {
    let b = b_coeffs(alpha_plus, beta_plus, 0.0, 1.0, omega_out);
    let v = steady_v(conv, m, omega_out, &b);
    let e = e_bar_amplitudes(conv, m, omega_out, &v);
    let w = steady_w(conv, omega_out, &e);
    let (chi, u) = chi_u_coeffs(&v, m);
    FinalStateCoeffs {
        m,
        convention: conv,
        omega_out,
        v,
        w,
        chi,
        u,
    }
}

/// Final-state coefficients for the scenario; the profiles must be flat at `tau_end`.
pub fn final_state_coeffs(s: &Scenario, m: usize, conv: Convention) -> Result<FinalStateCoeffs> {
    let t = s.end();
    for (name, p) in [("omega", &s.omega), ("alpha", &s.alpha), ("beta", &s.beta), ("force", &s.force)] {
        let lim = p.value_plus();
        let dev = (p.value(t) - lim).abs();
        if dev > 1e-8 * lim.abs().max(1.0) {
            return Err(Error::NotAsymptotic(format!(
                "{name} differs from its limit by {dev:.3e} at tau_end = {t}"
            )));
        }
    }
    Ok(final_state_coeffs_from_limits(s.alpha.value_plus(), s.beta.value_plus(), s.omega_out(), m, conv))
}

/// Reference adiabatic limits `(v4, v2, v0)` for a slowly switched quartic
/// term: `(-beta/4, 3 beta/4, 3 beta/8) / kbar0^3`.
pub fn reference_adiabatic_v(beta_plus: f64, kbar0: f64) -> (f64, f64, f64) {
    let k3 = kbar0.powi(3);
    (-0.25 * beta_plus / k3, 0.75 * beta_plus / k3, 0.375 * beta_plus / k3)
}

/// Reference final-state values for the ground state of a quartic
/// out-oscillator: `v4, v2, v0, u0, u_{-2}, u_{-4}`.
pub fn reference_final_ground_state(beta_plus: f64, omega_out: f64) -> [f64; 6] {
    let r = beta_plus / omega_out.powi(3);
    [-0.25 * r, 0.75 * r, 0.0, 3.0 / 16.0 * r, 0.0, -0.25 * 1.5f64.sqrt() * r]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::solve;
    use crate::profiles::{make_adiabatic_switch, make_tanh_frequency, ScalarProfile};

    #[test]
    fn b_coefficients_reconstruct_the_potential() {
        let mut seed = 0.1234_f64;
        let mut rnd = || {
            seed = (seed * 9301.0 + 0.49297).fract();
            seed
        };
        for _ in 0..20 {
            let (alpha, beta) = (rnd() - 0.5, rnd() - 0.5);
            let (eta, zm, wi) = (4.0 * rnd() - 2.0, 0.3 + 2.0 * rnd(), 0.5 + rnd());
            let x = 6.0 * rnd() - 3.0;
            let y = wi.sqrt() * (x - eta) / zm;
            let b = b_coeffs(alpha, beta, eta, zm, wi);
            let series: f64 = b.iter().enumerate().map(|(m, c)| c * y.powi(m as i32)).sum();
            let direct = alpha * x.powi(3) + beta * x.powi(4);
            assert!((series - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
        let b = b_coeffs(0.3, 0.7, 0.0, 1.0, 2.0);
        assert_eq!(&b[..3], &[0.0, 0.0, 0.0]);
        assert!((b[3] - 0.3 / 2f64.powf(1.5)).abs() < 1e-15);
        assert!((b[4] - 0.7 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn chi_for_ground_state() {
        let v = [C::new(5.0, 1.0), ZERO, C::new(0.4, 0.1), ZERO, C::new(-0.8, 0.2)];
        let (chi, u) = chi_u_coeffs(&v, 0);
        assert!((chi[4] - (0.75 * v[4] + 0.5 * v[2])).norm() < 1e-15);
        assert!((chi[0] - v[4] / 16.0).norm() < 1e-15);
        for p in 1..=4 {
            assert_eq!(chi[p + 4], ZERO);
            assert_eq!(u[p + 4], ZERO);
        }
        assert_eq!(u[4], chi[4]);
    }

    #[test]
    fn reference_final_values_follow_from_printed_convention() {
        let (beta, w) = (-0.7, 1.3);
        let f = final_state_coeffs_from_limits(0.0, beta, w, 0, Convention::Printed);
        let p = reference_final_ground_state(beta, w);
        assert!((f.v[4].re - p[0]).abs() < 1e-14);
        assert!((f.v[2].re - p[1]).abs() < 1e-14);
        assert_eq!(f.v[0], ZERO);
        assert!((f.u[4].re - p[3]).abs() < 1e-14);
        assert!(f.u[2].norm() < 1e-14);
        assert!((f.u[0].re - p[5]).abs() < 1e-14);
        // the derived convention flips v2 and makes chi_0 = -(9/16) beta / Omega^3
        let d = final_state_coeffs_from_limits(0.0, beta, w, 0, Convention::Derived);
        assert!((d.v[2].re + p[1]).abs() < 1e-14);
        assert!((d.chi[4].re + 9.0 / 16.0 * beta / w.powi(3)).abs() < 1e-14);
    }

    #[test]
    fn ebar_for_level_four() {
        let v = [ZERO, ZERO, ZERO, ZERO, C::new(0.3, -0.2)];
        let e = e_bar_amplitudes(Convention::Printed, 4, 1.7, &v);
        assert!((e[4] - 2.0 * 1.7 * v[4] * 24f64.sqrt()).norm() < 1e-14);
        let e0 = e_bar_amplitudes(Convention::Derived, 0, 1.7, &[C::new(1.0, 1.0); 5]);
        assert!(e0.iter().all(|c| *c == ZERO));
    }

    fn quartic_scenario(beta: f64, alpha: f64) -> Scenario {
        let mut s = Scenario::harmonic(make_tanh_frequency(1.0, 1.5, 1.0).unwrap(), [-60.0, 60.0]);
        s.beta = make_adiabatic_switch(beta, 5.0).unwrap();
        s.alpha = make_adiabatic_switch(alpha, 5.0).unwrap();
        s.lambda = 0.05;
        s
    }

    #[test]
    fn zero_perturbation_gives_zero_coefficients() {
        let s = quartic_scenario(0.0, 0.0);
        let cl = solve(&s.omega, &s.force, s.tau_span, 1e-10).unwrap();
        let v = solve_v(&s, &cl, 3, 1e-10, Convention::Derived).unwrap();
        let w = solve_w(&s, &cl, &v, 1e-10).unwrap();
        for i in 0..w.num_samples() {
            let (_, vv, ww) = w.sample(i);
            assert!(vv.iter().chain(&ww).all(|c| *c == ZERO));
        }
    }

    #[test]
    fn dual_route_and_ground_state_amplitudes() {
        let s = quartic_scenario(-0.5, 0.2);
        let cl = solve(&s.omega, &s.force, s.tau_span, 1e-10).unwrap();
        for conv in [Convention::Derived, Convention::Printed] {
            let v = solve_v(&s, &cl, 0, 1e-10, conv).unwrap();
            assert!(v.route_deviation < 1e-8, "{}", v.route_deviation);
            let w = solve_w(&s, &cl, &v, 1e-10).unwrap();
            assert!(w.w_plus.iter().all(|c| *c == ZERO));
        }
    }

    #[test]
    fn static_quartic_matches_rayleigh_schroedinger() {
        // constant Omega = 1 and a slowly switched x^4 term: the static
        // first-order ground state is exp(-g (x^4/4 + 3 x^2/4)) with g = -beta
        let beta = -0.4;
        let mut s = Scenario::harmonic(ScalarProfile::constant(1.0), [-200.0, 200.0]);
        s.beta = make_adiabatic_switch(beta, 20.0).unwrap();
        let cl = solve(&s.omega, &s.force, s.tau_span, 1e-10).unwrap();
        let v = solve_v(&s, &cl, 0, 1e-10, Convention::Derived).unwrap();
        let vp = v.v_plus_averaged(1.0).unwrap();
        assert!((vp[4].re + beta / 4.0).abs() < 1e-4);
        assert!((vp[2].re + 0.75 * beta).abs() < 1e-4);
        assert!(vp[3].norm() < 1e-12 && vp[1].norm() < 1e-12);
    }

    #[test]
    fn regularizer_removes_high_hermite_components() {
        // kappa Phi1'(y) (H_n' + (a1 + 2 a2 y) H_n) - Q1(y) H_n must only contain H_k, k < n
        use crate::special::HermiteSeries;
        let mut seed = 0.377_f64;
        let mut rnd = || {
            seed = (seed * 9301.0 + 0.49297).fract();
            seed - 0.5
        };
        for n in 0..=6 {
            for _ in 0..5 {
                let v: [C; 5] = std::array::from_fn(|_| C::new(rnd(), rnd()));
                let kappa = 1.0 + rnd();
                let a1 = C::new(rnd(), rnd());
                let a2 = C::new(-0.5, rnd());
                let sigma = sigma_coeffs(n, kappa, a1, a2, &v);
                let dphi: Vec<C> = (1..5).map(|k| v[k] * k as f64).collect();
                let hn = HermiteSeries::basis(n);
                let mut df = hn.derivative();
                df.add_scaled(&hn.times_poly(&[a1, 2.0 * a2]), C::new(1.0, 0.0));
                let mut p = df.times_poly(&dphi);
                p.add_scaled(&hn.times_poly(&sigma), C::new(-1.0 / kappa, 0.0));
                let scale = p.0.iter().map(|c| c.norm()).fold(1.0, f64::max);
                for k in n..p.0.len() {
                    assert!(p.coeff(k).norm() < 1e-12 * scale, "n = {n}, k = {k}: {}", p.coeff(k));
                }
                // the remainder after dividing by H_n is the whole series
                let (q, _) = p.div_rem_hermite(n);
                assert!(q.iter().all(|c| c.norm() < 1e-12 * scale));
            }
        }
    }

    #[test]
    fn final_state_requires_flat_profiles() {
        let mut s = quartic_scenario(-0.5, 0.0);
        s.tau_span = [-60.0, 3.0];
        assert!(matches!(final_state_coeffs(&s, 0, Convention::Derived), Err(Error::NotAsymptotic(_))));
    }
}
