//! Adaptive Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! The step-size controller and the fourth-order continuous extension follow
//! the classic DOPRI5 code of Hairer & Wanner. States are flat `f64` vectors;
//! complex quantities are stored as consecutive (re, im) pairs by callers.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrator settings. `rtol` and `atol` bound the local error per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            max_step: 0.25,
            min_step: 1e-12,
            max_steps: 5_000_000,
        }
    }
}

/// Accepted steps of an integration together with the coefficients of the
/// continuous extension on every step.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    // 5 * dim coefficients per step
    cont: Vec<f64>,
    pub rejected_steps: usize,
}

impl DenseTrajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn num_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// State at the `i`-th accepted step boundary.
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }

    /// Evaluates the continuous extension at `t`; `t` must lie in the span.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (start, end) = (self.start(), self.end());
        let lo = start.min(end);
        let hi = start.max(end);
        let slack = 1e-12 * (1.0 + hi.abs().max(lo.abs()));
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::Range {
                tau: t,
                start: lo,
                end: hi,
            });
        }
        let forward = end >= start;
        // index of the step containing t
        let idx = if forward {
            self.times.partition_point(|&s| s <= t)
        } else {
            self.times.partition_point(|&s| s >= t)
        };
        let step = idx.saturating_sub(1).min(self.num_steps().max(1) - 1);
        if self.num_steps() == 0 {
            out.copy_from_slice(self.state(0));
            return Ok(());
        }
        let t0 = self.times[step];
        let h = self.times[step + 1] - t0;
        let theta = ((t - t0) / h).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        let c = &self.cont[step * 5 * self.dim..(step + 1) * 5 * self.dim];
        let d = self.dim;
        for k in 0..d {
            out[k] = c[k]
                + theta
                    * (c[d + k]
                        + theta1 * (c[2 * d + k] + theta * (c[3 * d + k] + theta1 * c[4 * d + k])));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn integrate<F>(mut f: F, t0: f64, y0: &[f64], t1: f64, opts: &OdeOptions) -> Result<DenseTrajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();

    let mut traj = DenseTrajectory {
        dim: n,
        times: vec![t0],
        states: y0.to_vec(),
        cont: Vec::new(),
        rejected_steps: 0,
    };
    if span == 0.0 {
        return Ok(traj);
    }

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];

    f(t0, &y, &mut k1);

    let mut t = t0;
    let mut h = initial_step(&mut f, t0, &y, &k1, dir, opts).min(span);
    let mut facold: f64 = 1e-4;
    let safe = 0.9;
    let beta = 0.04;
    let expo1 = 0.2 - beta * 0.75;
    let (facc1, facc2) = (1.0 / 0.2, 1.0 / 10.0);
    let mut last = false;
    let mut reject = false;
    let mut steps = 0usize;

    loop {
        if steps >= opts.max_steps {
            return Err(Error::IntegrationFailure {
                tau: t,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        if h < opts.min_step {
            return Err(Error::IntegrationFailure {
                tau: t,
                reason: format!("step size underflow (h = {h:.3e})"),
            });
        }
        let remaining = (t1 - t) * dir;
        if h >= remaining * (1.0 - 1e-14) {
            h = remaining;
            last = true;
        }
        let hs = h * dir;

        for i in 0..n {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        f(t + C2 * hs, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * hs, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * hs, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * hs, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] =
                y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + hs, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] =
                y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + hs, &ynew, &mut k7);
        steps += 1;

        let mut err = 0.0;
        for i in 0..n {
            let e = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sk) * (e / sk);
        }
        err = (err / n as f64).sqrt();
        if !err.is_finite() {
            traj.rejected_steps += 1;
            h *= 0.1;
            last = false;
            reject = true;
            continue;
        }

        let fac11 = err.powf(expo1);
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(beta) / safe).clamp(facc2, facc1);
            facold = err.max(1e-4);

            traj.cont.extend_from_slice(&y);
            for i in 0..n {
                traj.cont.push(ynew[i] - y[i]);
            }
            for i in 0..n {
                traj.cont.push(hs * k1[i] - (ynew[i] - y[i]));
            }
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                traj.cont.push(ydiff - hs * k7[i] - bspl);
            }
            for i in 0..n {
                traj.cont.push(
                    hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]),
                );
            }

            k1.copy_from_slice(&k7);
            y.copy_from_slice(&ynew);
            t = if last { t1 } else { t + hs };
            traj.times.push(t);
            traj.states.extend_from_slice(&y);
            if last {
                return Ok(traj);
            }
            let mut hnew = h / fac;
            if reject {
                hnew = hnew.min(h);
            }
            h = hnew.min(opts.max_step);
            reject = false;
        } else {
            traj.rejected_steps += 1;
            h /= (fac11 / safe).min(facc1);
            reject = true;
            last = false;
        }
    }
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], dir: f64, opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..n {
        let sk = opts.atol + opts.rtol * y0[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y0[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(opts.max_step);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + dir * h * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    f(t0 + dir * h, &y1, &mut f1);
    let mut der2 = 0.0;
    for i in 0..n {
        let sk = opts.atol + opts.rtol * y0[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(opts.max_step).max(opts.min_step * 10.0)
}
