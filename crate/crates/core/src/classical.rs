//! Classical auxiliary problems: the mode function `zeta`, the forced
//! trajectory `eta`, the forced amplitude `d`, and asymptotic scattering data.

use crate::error::{Error, Result};
use crate::ode::{integrate, DenseTrajectory, OdeOptions};
use crate::profiles::ScalarProfile;
use num_complex::Complex64;
use std::io::Write;

/// State layout of the classical ODE.
pub(crate) const DIM: usize = 10;
const ZR: usize = 0;
const ZI: usize = 1;
const ZDR: usize = 2;
const ZDI: usize = 3;
const ETA: usize = 4;
const ETAD: usize = 5;
const DR: usize = 6;
const DI: usize = 7;
const SCL: usize = 8;
const THETA: usize = 9;

/// Right-hand side of the classical system. Besides `zeta`, `eta` and `d`
/// it carries the classical action `int L_cl` and the phase `int kappa0`.
pub(crate) fn rhs(omega: &ScalarProfile, force: &ScalarProfile, omega_in: f64, t: f64, y: &[f64], dy: &mut [f64]) {
    let w = omega.value(t);
    let w2 = w * w;
    let f = force.value(t);
    dy[ZR] = y[ZDR];
    dy[ZI] = y[ZDI];
    dy[ZDR] = -w2 * y[ZR];
    dy[ZDI] = -w2 * y[ZI];
    dy[ETA] = y[ETAD];
    dy[ETAD] = f - w2 * y[ETA];
    // d' = (i / sqrt(Omega_in)) zeta F
    let s = f / omega_in.sqrt();
    dy[DR] = -s * y[ZI];
    dy[DI] = s * y[ZR];
    dy[SCL] = 0.5 * y[ETAD] * y[ETAD] - 0.5 * w2 * y[ETA] * y[ETA] + f * y[ETA];
    dy[THETA] = omega_in / (y[ZR] * y[ZR] + y[ZI] * y[ZI]);
}

pub(crate) fn initial_state(omega_in: f64, t0: f64) -> [f64; DIM] {
    let z = Complex64::from_polar(1.0, omega_in * t0);
    let zd = Complex64::i() * omega_in * z;
    // theta starts at Omega_in * t0: the regularized int_{-inf}^{t0} kappa0
    [z.re, z.im, zd.re, zd.im, 0.0, 0.0, 0.0, 0.0, 0.0, omega_in * t0]
}

/// Everything the downstream modules need at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalPoint {
    pub tau: f64,
    pub zeta: Complex64,
    pub zeta_dot: Complex64,
    pub eta: f64,
    pub eta_dot: f64,
    pub d: Complex64,
    /// `int L_cl dtau` from the start of the span.
    pub action: f64,
    /// `int kappa0 dtau`, regularized so that it equals `Omega_in tau` before the switch.
    pub theta: f64,
}

impl ClassicalPoint {
    pub(crate) fn from_state(tau: f64, y: &[f64]) -> Self {
        Self {
            tau,
            zeta: Complex64::new(y[ZR], y[ZI]),
            zeta_dot: Complex64::new(y[ZDR], y[ZDI]),
            eta: y[ETA],
            eta_dot: y[ETAD],
            d: Complex64::new(y[DR], y[DI]),
            action: y[SCL],
            theta: y[THETA],
        }
    }

    pub fn zeta_mod(&self) -> f64 {
        self.zeta.norm()
    }

    /// Signed derivative of `|zeta|`.
    pub fn zeta_mod_dot(&self) -> f64 {
        (self.zeta.conj() * self.zeta_dot).re / self.zeta.norm()
    }

    pub fn wronskian(&self) -> f64 {
        (self.zeta.conj() * self.zeta_dot).im
    }

    pub fn kappa0(&self, omega_in: f64) -> f64 {
        omega_in / self.zeta.norm_sqr()
    }
}

/// Dense classical trajectory over the scenario span.
#[derive(Debug, Clone)]
pub struct ClassicalSolution {
    omega_in: f64,
    traj: DenseTrajectory,
    forced: bool,
    /// Sup-norm difference between the integrated `eta` and its reconstruction from `zeta` and `d`.
    pub eta_route_deviation: f64,
    pub max_wronskian_drift: f64,
}

impl ClassicalSolution {
    pub fn omega_in(&self) -> f64 {
        self.omega_in
    }

    pub fn start(&self) -> f64 {
        self.traj.start()
    }

    pub fn end(&self) -> f64 {
        self.traj.end()
    }

    pub fn tau_grid(&self) -> &[f64] {
        self.traj.times()
    }

    pub fn is_forced(&self) -> bool {
        self.forced
    }

    pub fn num_samples(&self) -> usize {
        self.traj.times().len()
    }

    pub fn sample(&self, i: usize) -> ClassicalPoint {
        ClassicalPoint::from_state(self.traj.times()[i], self.traj.state(i))
    }

    /// Dense-output evaluation; errors outside the span.
    pub fn at(&self, tau: f64) -> Result<ClassicalPoint> {
        let mut y = [0.0; DIM];
        self.traj.eval_into(tau, &mut y)?;
        Ok(ClassicalPoint::from_state(tau, &y))
    }

    pub fn final_point(&self) -> ClassicalPoint {
        self.sample(self.num_samples() - 1)
    }

    /// `eta` rebuilt from `zeta` and `d`: `(zeta d* + zeta* d) / (2 sqrt(Omega_in))`.
    pub fn eta_from_d(&self, p: &ClassicalPoint) -> f64 {
        (p.zeta * p.d.conj()).re / self.omega_in.sqrt()
    }

    /// Columnar dump: tau, Re zeta, Im zeta, Re zeta', Im zeta', eta, eta', Re d, Im d.
    pub fn write_trajectory<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau,re_zeta,im_zeta,re_zeta_dot,im_zeta_dot,eta,eta_dot,re_d,im_d")?;
        for i in 0..self.num_samples() {
            let p = self.sample(i);
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.tau, p.zeta.re, p.zeta.im, p.zeta_dot.re, p.zeta_dot.im, p.eta, p.eta_dot, p.d.re, p.d.im
            )?;
        }
        Ok(())
    }
}

/// Local-error tolerance must be positive and not absurdly small.
fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be in (0, 1), got {tol}")));
    }
    Ok(())
}

fn run(omega: &ScalarProfile, force: &ScalarProfile, tau_span: [f64; 2], tol: f64) -> Result<ClassicalSolution> {
    check_tol(tol)?;
    omega.validate()?;
    force.validate()?;
    let [a, b] = tau_span;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::InvalidSpan(format!("tau_span [{a}, {b}] is not increasing")));
    }
    let omega_in = omega.value_minus();
    if !(omega_in > 0.0) {
        return Err(Error::InvalidParameter("Omega_in must be positive".into()));
    }
    let y0 = initial_state(omega_in, a);
    let mut bad_omega = None;
    let traj = integrate(
        |t, y, dy| {
            if omega.value(t) <= 0.0 && bad_omega.is_none() {
                bad_omega = Some(t);
            }
            rhs(omega, force, omega_in, t, y, dy)
        },
        a,
        &y0,
        b,
        &OdeOptions::with_tol((0.01 * tol).max(1e-14)),
    )?;
    if let Some(t) = bad_omega {
        return Err(Error::InvalidParameter(format!("Omega not positive at tau = {t}")));
    }
    let mut sol = ClassicalSolution {
        omega_in,
        traj,
        forced: !force.is_identically_zero(),
        eta_route_deviation: 0.0,
        max_wronskian_drift: 0.0,
    };
    let mut drift: f64 = 0.0;
    let mut eta_dev: f64 = 0.0;
    let mut eta_scale: f64 = 1.0;
    for i in 0..sol.num_samples() {
        let p = sol.sample(i);
        drift = drift.max((p.wronskian() - omega_in).abs());
        eta_dev = eta_dev.max((p.eta - sol.eta_from_d(&p)).abs());
        eta_scale = eta_scale.max(p.eta.abs());
    }
    sol.max_wronskian_drift = drift;
    sol.eta_route_deviation = eta_dev;
    let bound = 100.0 * tol * omega_in.max(1.0);
    if drift > bound {
        return Err(Error::IntegrationFailure {
            tau: sol.end(),
            reason: format!("Wronskian drift {drift:.3e} exceeds {bound:.3e}"),
        });
    }
    let eta_bound = 100.0 * tol * eta_scale;
    if eta_dev > eta_bound {
        return Err(Error::Inconsistency {
            what: "eta (ODE vs quadrature)".into(),
            deviation: eta_dev,
            bound: eta_bound,
        });
    }
    Ok(sol)
}

/// Mode function `zeta` with `zeta(tau_start) = exp(i Omega_in tau_start)`.
pub fn solve_zeta(omega: &ScalarProfile, tau_span: [f64; 2], tol: f64) -> Result<ClassicalSolution> {
    run(omega, &ScalarProfile::zero(), tau_span, tol)
}

/// Adds the forced trajectory and the forced amplitude `d` to a solved mode
/// function. The forced channels are integrated together with `zeta`; the
/// result is checked against `zeta` and against the reconstruction of `eta`
/// from `d`.
pub fn solve_eta(omega: &ScalarProfile, force: &ScalarProfile, zeta: &ClassicalSolution, tol: f64) -> Result<ClassicalSolution> {
    let sol = run(omega, force, [zeta.start(), zeta.end()], tol)?;
    let (a, b) = (zeta.final_point(), sol.final_point());
    let dev = (a.zeta - b.zeta).norm();
    let bound = 100.0 * tol * a.zeta.norm().max(1.0);
    if dev > bound {
        return Err(Error::Inconsistency {
            what: "zeta (mode-only vs joint solve)".into(),
            deviation: dev,
            bound,
        });
    }
    Ok(sol)
}

/// Convenience: mode function and forced trajectory in one call.
pub fn solve(omega: &ScalarProfile, force: &ScalarProfile, tau_span: [f64; 2], tol: f64) -> Result<ClassicalSolution> {
    run(omega, force, tau_span, tol)
}

/// `Omega_in / |zeta(tau)|^2`.
pub fn kappa0(sol: &ClassicalSolution, tau: f64) -> Result<f64> {
    Ok(sol.at(tau)?.kappa0(sol.omega_in()))
}

/// Asymptotic data of the classical solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringParams {
    pub omega_in: f64,
    pub omega_out: f64,
    pub c1: Complex64,
    pub c2: Complex64,
    pub rho: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub d_plus: Complex64,
    pub nu: f64,
    /// Phase of `d(+inf)`.
    pub beta_phase: f64,
    pub theta: f64,
    /// `Omega_in / (|c1|^2 + |c2|^2)`.
    pub kbar0: f64,
    /// `Omega_out (|c1|^2 - |c2|^2)`; equals `Omega_in` when the Wronskian is conserved.
    pub wronskian_norm: f64,
    /// `|c1|^2 - |c2|^2` itself (equals `Omega_in / Omega_out`, not 1, for unequal frequencies).
    pub c_norm_difference: f64,
    /// Relative RMS residual of the two-exponential fit.
    pub fit_residual: f64,
}

/// Default fit window: four asymptotic periods.
pub fn default_window(omega_out: f64) -> f64 {
    4.0 * 2.0 * std::f64::consts::PI / omega_out
}

/// Fits `zeta ~ c1 e^{i W tau} - c2 e^{-i W tau}` (W = Omega_out) over the
/// trailing `window` by least squares.
pub fn extract_scattering_params(sol: &ClassicalSolution, omega: &ScalarProfile, window: f64) -> Result<ScatteringParams> {
    let w = omega.value_plus();
    let period = 2.0 * std::f64::consts::PI / w;
    if !(window >= 3.0 * period * (1.0 - 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "fit window {window} shorter than three out-periods ({})",
            3.0 * period
        )));
    }
    let t1 = sol.end();
    let t0 = t1 - window;
    if t0 < sol.start() {
        return Err(Error::InvalidSpan(format!("fit window {window} longer than the span")));
    }
    const SAMPLES: usize = 1024;
    let pts: Vec<(f64, Complex64)> = (0..SAMPLES)
        .map(|i| {
            let t = t0 + window * i as f64 / (SAMPLES - 1) as f64;
            sol.at(t).map(|p| (t, p.zeta))
        })
        .collect::<Result<_>>()?;
    // normal equations for the basis {e^{iWt}, -e^{-iWt}}
    let (mut a11, mut a12, mut a22) = (0.0, Complex64::default(), 0.0);
    let (mut r1, mut r2) = (Complex64::default(), Complex64::default());
    for &(t, z) in &pts {
        let e1 = Complex64::from_polar(1.0, w * t);
        let e2 = -Complex64::from_polar(1.0, -w * t);
        a11 += 1.0;
        a22 += 1.0;
        a12 += e1.conj() * e2;
        r1 += e1.conj() * z;
        r2 += e2.conj() * z;
    }
    let det = a11 * a22 - a12.norm_sqr();
    let c1 = (a22 * r1 - a12 * r2) / det;
    // a constant frequency never reflects; keep the fit's round-off out of rho
    let c2 = match omega {
        ScalarProfile::Constant { .. } => Complex64::default(),
        _ => (a11 * r2 - a12.conj() * r1) / det,
    };
    let (mut res, mut norm) = (0.0, 0.0);
    for &(t, z) in &pts {
        let fit = c1 * Complex64::from_polar(1.0, w * t) - c2 * Complex64::from_polar(1.0, -w * t);
        res += (z - fit).norm_sqr();
        norm += z.norm_sqr();
    }
    let fit_residual = (res / norm).sqrt();
    if fit_residual > 1e-6 {
        return Err(Error::NotAsymptotic(format!(
            "two-exponential fit residual {fit_residual:.3e} over [{t0}, {t1}]"
        )));
    }
    let omega_in = sol.omega_in();
    let d_plus = sol.final_point().d;
    let delta1 = c1.arg();
    let delta2 = if c2.norm() > 0.0 { c2.arg() } else { 0.0 };
    let beta_phase = if d_plus.norm() > 0.0 { d_plus.arg() } else { 0.0 };
    let (n1, n2) = (c1.norm_sqr(), c2.norm_sqr());
    Ok(ScatteringParams {
        omega_in,
        omega_out: w,
        c1,
        c2,
        rho: n2 / n1,
        delta1,
        delta2,
        d_plus,
        nu: d_plus.norm_sqr(),
        beta_phase,
        theta: 0.5 * (delta1 + delta2) - beta_phase,
        kbar0: omega_in / (n1 + n2),
        wronskian_norm: w * (n1 - n2),
        c_norm_difference: n1 - n2,
        fit_residual,
    })
}

/// Reflection coefficient of the tanh frequency profile
/// (`Omega^2` interpolated by `(1 + tanh(tau/T))/2`), known in closed form.
pub fn tanh_profile_rho(omega_in: f64, omega_out: f64, ramp_time: f64) -> f64 {
    let pi = std::f64::consts::PI;
    if ramp_time == 0.0 {
        return ((omega_out - omega_in) / (omega_out + omega_in)).powi(2);
    }
    let num = (0.5 * pi * ramp_time * (omega_out - omega_in)).sinh();
    let den = (0.5 * pi * ramp_time * (omega_out + omega_in)).sinh();
    (num / den).powi(2)
}
