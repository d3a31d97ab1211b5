//! Direct time-dependent Schrödinger solver (second-order split operator on
//! a periodic grid) used as ground truth.

use crate::basis::{Grid, OutState};
use crate::error::{Error, Result};
use crate::profiles::Scenario;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::io::Write;
use std::sync::Arc;

type C = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    pub grid: Grid,
    pub psi: Vec<C>,
    pub time: f64,
}

impl GridWavefunction {
    pub fn new(grid: Grid, psi: Vec<C>, time: f64) -> Result<Self> {
        if psi.len() != grid.n {
            return Err(Error::InvalidParameter(format!(
                "wavefunction has {} samples, grid {}",
                psi.len(),
                grid.n
            )));
        }
        Ok(Self { grid, psi, time })
    }

    pub fn xs(&self) -> Vec<f64> {
        self.grid.points()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.dx() * self.psi.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Probability in the outer 5% of the grid at each end.
    pub fn edge_mass(&self) -> f64 {
        edge_mass(&self.psi, self.grid.dx())
    }

    /// `int conj(state) psi dx` (plain sum: the grid is periodic and the tails negligible).
    pub fn project(&self, state: &[C]) -> C {
        self.grid.dx() * state.iter().zip(&self.psi).map(|(s, p)| s.conj() * p).sum::<C>()
    }

    /// `L2` distance to samples of another function on the same grid.
    pub fn l2_distance(&self, other: &[C]) -> f64 {
        (self.grid.dx() * self.psi.iter().zip(other).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn write<W: Write>(&self, w: W) -> std::io::Result<()> {
        crate::basis::write_wavefunction(w, &self.xs(), &self.psi)
    }
}

fn edge_mass(psi: &[C], dx: f64) -> f64 {
    let n = psi.len();
    let k = (n / 20).max(1);
    dx * psi[..k].iter().chain(&psi[n - k..]).map(|c| c.norm_sqr()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub dt: f64,
    /// Allowed norm drift per 10^4 steps.
    pub norm_tolerance: f64,
    /// Allowed probability in the outer 5% of the grid.
    pub tail_tolerance: f64,
    /// Edge mass is checked every this many steps (and at the end).
    pub check_every: usize,
}

impl PropagationOptions {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            dt: 0.005,
            norm_tolerance: 1e-10,
            tail_tolerance: 1e-10,
            check_every: 100,
        }
    }
}

/// Potential `1/2 Omega^2 x^2 - F x - lambda (alpha x^3 + beta x^4)`.
pub fn potential(s: &Scenario, x: f64, t: f64) -> f64 {
    let w = s.omega.value(t);
    let x2 = x * x;
    0.5 * w * w * x2 - s.force.value(t) * x - s.lambda * x2 * x * (s.alpha.value(t) + s.beta.value(t) * x)
}

struct Stepper {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kinetic: Vec<C>,
    scratch: Vec<C>,
}

impl Stepper {
    fn new(grid: &Grid, dt: f64) -> Self {
        let n = grid.n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let dk = 2.0 * std::f64::consts::PI / (n as f64 * grid.dx());
        let inv_n = 1.0 / n as f64;
        let kinetic = (0..n)
            .map(|j| {
                let k = if j < n / 2 { j as f64 } else { j as f64 - n as f64 } * dk;
                // the inverse transform's 1/N is folded in here
                C::from_polar(inv_n, -0.5 * k * k * dt)
            })
            .collect();
        let scratch = vec![C::default(); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
        Self {
            fwd,
            inv,
            kinetic,
            scratch,
        }
    }

    fn kinetic_step(&mut self, psi: &mut [C]) {
        self.fwd.process_with_scratch(psi, &mut self.scratch);
        for (p, k) in psi.iter_mut().zip(&self.kinetic) {
            *p *= k;
        }
        self.inv.process_with_scratch(psi, &mut self.scratch);
    }
}

/// Propagates to `tau_end` of the scenario. `observer(step, time, psi)` is
/// called after every step. The step is adjusted so that an integer number
/// of steps spans the interval exactly.
pub fn propagate_with<F>(psi0: &GridWavefunction, s: &Scenario, opts: &PropagationOptions, mut observer: F) -> Result<GridWavefunction>
where
    F: FnMut(usize, f64, &[C]),
{
    s.validate()?;
    if !(opts.dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive (got {})", opts.dt)));
    }
    let t0 = psi0.time;
    let t1 = s.end();
    if !(t1 > t0) {
        return Err(Error::InvalidSpan(format!("propagation from {t0} to {t1}")));
    }
    let steps = ((t1 - t0) / opts.dt).ceil().max(1.0) as usize;
    let dt = (t1 - t0) / steps as f64;
    let grid = psi0.grid;
    let xs = grid.points();
    let dx = grid.dx();
    let mut psi = psi0.psi.clone();
    let norm0 = psi0.norm_sqr();
    let mut stepper = Stepper::new(&grid, dt);
    let mut half = vec![C::default(); grid.n];
    let check_every = opts.check_every.max(1);
    for step in 0..steps {
        let t = t0 + step as f64 * dt;
        let tm = t + 0.5 * dt;
        for (h, &x) in half.iter_mut().zip(&xs) {
            *h = C::from_polar(1.0, -0.5 * dt * potential(s, x, tm));
        }
        for (p, h) in psi.iter_mut().zip(&half) {
            *p *= h;
        }
        stepper.kinetic_step(&mut psi);
        for (p, h) in psi.iter_mut().zip(&half) {
            *p *= h;
        }
        let t_next = if step + 1 == steps { t1 } else { t0 + (step + 1) as f64 * dt };
        if (step + 1) % check_every == 0 || step + 1 == steps {
            let e = edge_mass(&psi, dx);
            if e > opts.tail_tolerance {
                return Err(Error::GridTooSmall { edge_mass: e, tau: t_next });
            }
        }
        observer(step + 1, t_next, &psi);
    }
    let out = GridWavefunction {
        grid,
        psi,
        time: t1,
    };
    let drift = (out.norm_sqr() - norm0).abs();
    let allowed = opts.norm_tolerance * (steps as f64 / 1e4).max(1.0);
    if drift > allowed {
        return Err(Error::StepTooLarge { drift });
    }
    Ok(out)
}

pub fn propagate(psi0: &GridWavefunction, s: &Scenario, opts: &PropagationOptions) -> Result<GridWavefunction> {
    propagate_with(psi0, s, opts, |_, _, _| {})
}

/// Populations of the harmonic out-levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Populations {
    pub probabilities: Vec<f64>,
    pub completeness: f64,
    /// Completeness deficit above 0.01.
    pub truncation_warning: bool,
}

/// `|<phi_f(m)|psi>|^2` for `m <= m_max`.
pub fn transition_probs_exact(psi: &GridWavefunction, omega_out: f64, m_max: usize) -> Result<Populations> {
    let xs = psi.xs();
    let probabilities: Vec<f64> = (0..=m_max)
        .map(|m| OutState::new(m, omega_out).map(|o| psi.project(&o.eval_on_grid(&xs, psi.time)).norm_sqr()))
        .collect::<Result<_>>()?;
    let completeness = probabilities.iter().sum::<f64>();
    Ok(Populations {
        truncation_warning: (1.0 - completeness).abs() > 0.01,
        probabilities,
        completeness,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub n: usize,
    pub populations: Vec<f64>,
    /// Max population change relative to the previous (coarser) row.
    pub change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// `(dt, N)` certified for acceptance runs, when the refinement converged.
    pub certified: Option<(f64, usize)>,
    pub diagnostics: Vec<String>,
}

/// Refinement study over paired `(dt_list[i], n_list[i])` settings, ordered
/// coarse to fine. `initial(grid)` samples the initial state. Certifies the
/// coarsest setting whose populations agree with all finer ones within `target`
/// when the changes decrease monotonically.
pub fn convergence_report<F>(
    s: &Scenario,
    half_width: f64,
    dt_list: &[f64],
    n_list: &[usize],
    m_max: usize,
    target: f64,
    initial: F,
) -> Result<ConvergenceReport>
where
    F: Fn(&Grid) -> Result<Vec<C>> + Sync,
{
    if dt_list.len() < 2 || dt_list.len() != n_list.len() {
        return Err(Error::InvalidParameter(
            "convergence study needs >= 2 paired (dt, N) settings".into(),
        ));
    }
    use rayon::prelude::*;
    let pops: Vec<Vec<f64>> = dt_list
        .par_iter()
        .zip(n_list.par_iter())
        .map(|(&dt, &n)| {
            let grid = Grid::new(half_width, n)?;
            let psi0 = GridWavefunction::new(grid, initial(&grid)?, s.start())?;
            let out = propagate(&psi0, s, &PropagationOptions::with_dt(dt))?;
            Ok(transition_probs_exact(&out, s.omega_out(), m_max)?.probabilities)
        })
        .collect::<Result<_>>()?;
    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let rows: Vec<ConvergenceRow> = (0..pops.len())
        .map(|i| ConvergenceRow {
            dt: dt_list[i],
            n: n_list[i],
            populations: pops[i].clone(),
            change: (i > 0).then(|| max_diff(&pops[i], &pops[i - 1])),
        })
        .collect();
    let mut diagnostics = Vec::new();
    let changes: Vec<f64> = rows.iter().filter_map(|r| r.change).collect();
    let monotone = changes.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) || w[1] < target);
    if !monotone {
        diagnostics.push(format!("non-monotone convergence: changes {changes:?}"));
    }
    let last = pops.len() - 1;
    let certified = if monotone {
        (0..=last)
            .find(|&i| (i..=last).all(|j| max_diff(&pops[i], &pops[j]) <= target))
            .filter(|&i| i < last || changes.last().is_some_and(|&c| c <= target))
            .map(|i| (dt_list[i], n_list[i]))
    } else {
        None
    };
    if certified.is_none() && monotone {
        diagnostics.push(format!("finest change {:?} above target {target}", changes.last()));
    }
    Ok(ConvergenceReport {
        rows,
        certified,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{make_tanh_frequency, ScalarProfile};
    use crate::smatrix::s0_generating_table;

    fn ground(grid: &Grid, omega: f64, m: usize, t: f64) -> Vec<C> {
        OutState::new(m, omega).unwrap().eval_on_grid(&grid.points(), t)
    }

    #[test]
    fn stationary_state_stays_put() {
        let s = Scenario::harmonic(ScalarProfile::constant(1.0), [0.0, 10.0]);
        let g = Grid::new(10.0, 256).unwrap();
        let psi0 = GridWavefunction::new(g, ground(&g, 1.0, 0, 0.0), 0.0).unwrap();
        let out = propagate(&psi0, &s, &PropagationOptions::with_dt(0.01)).unwrap();
        let p = transition_probs_exact(&out, 1.0, 4).unwrap();
        assert!((p.probabilities[0] - 1.0).abs() < 1e-8);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        // exact phase e^{-i t/2}, up to the splitting's O(dt^2 t) phase error
        assert!(out.l2_distance(&ground(&g, 1.0, 0, 10.0)) < 1e-4);
    }

    #[test]
    fn excited_state_without_transitions() {
        let s = Scenario::harmonic(ScalarProfile::constant(1.3), [0.0, 5.0]);
        let g = Grid::new(10.0, 256).unwrap();
        let psi0 = GridWavefunction::new(g, ground(&g, 1.3, 2, 0.0), 0.0).unwrap();
        let out = propagate(&psi0, &s, &PropagationOptions::with_dt(0.01)).unwrap();
        let p = transition_probs_exact(&out, 1.3, 5).unwrap();
        for (m, v) in p.probabilities.iter().enumerate() {
            assert!((v - if m == 2 { 1.0 } else { 0.0 }).abs() < 1e-8);
        }
    }

    #[test]
    fn tanh_populations_match_generating_function() {
        let om = make_tanh_frequency(1.0, 2.0, 1.0).unwrap();
        let s = Scenario::harmonic(om, [-15.0, 15.0]);
        let g = Grid::new(12.0, 256).unwrap();
        let psi0 = GridWavefunction::new(g, ground(&g, 1.0, 0, -15.0), -15.0).unwrap();
        let out = propagate(&psi0, &s, &PropagationOptions::with_dt(0.002)).unwrap();
        let p = transition_probs_exact(&out, 2.0, 6).unwrap();
        let rho = crate::classical::tanh_profile_rho(1.0, 2.0, 1.0);
        let t = s0_generating_table(7, rho).unwrap();
        for m in 0..=6 {
            assert!((p.probabilities[m] - t[m][0] * t[m][0]).abs() < 1e-6, "m = {m}");
        }
    }

    #[test]
    fn second_order_in_dt() {
        let om = make_tanh_frequency(1.0, 2.0, 0.5).unwrap();
        let s = Scenario::harmonic(om, [-8.0, 8.0]);
        let g = Grid::new(10.0, 128).unwrap();
        let psi0 = GridWavefunction::new(g, ground(&g, 1.0, 0, -8.0), -8.0).unwrap();
        let run = |dt: f64| {
            let out = propagate(&psi0, &s, &PropagationOptions::with_dt(dt)).unwrap();
            transition_probs_exact(&out, 2.0, 4).unwrap().probabilities
        };
        let (a, b, c) = (run(0.04), run(0.02), run(0.01));
        let r = (a[2] - b[2]).abs() / (b[2] - c[2]).abs();
        assert!((3.0..=5.0).contains(&r), "ratio {r}");
    }

    #[test]
    fn global_phase_does_not_change_probabilities() {
        let om = make_tanh_frequency(1.0, 1.5, 1.0).unwrap();
        let s = Scenario::harmonic(om, [-6.0, 6.0]);
        let g = Grid::new(10.0, 128).unwrap();
        let a = ground(&g, 1.0, 0, -6.0);
        let ph = C::from_polar(1.0, 0.7);
        let b: Vec<C> = a.iter().map(|c| c * ph).collect();
        let pa = transition_probs_exact(&propagate(&GridWavefunction::new(g, a, -6.0).unwrap(), &s, &PropagationOptions::with_dt(0.01)).unwrap(), 1.5, 4).unwrap();
        let pb = transition_probs_exact(&propagate(&GridWavefunction::new(g, b, -6.0).unwrap(), &s, &PropagationOptions::with_dt(0.01)).unwrap(), 1.5, 4).unwrap();
        for (x, y) in pa.probabilities.iter().zip(&pb.probabilities) {
            assert!((x - y).abs() <= 1e-15 * x.max(1.0) * 10.0);
        }
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let s = Scenario::harmonic(ScalarProfile::constant(1.0), [0.0, 1.0]);
        let g = Grid::new(2.5, 64).unwrap();
        let psi0 = GridWavefunction::new(g, ground(&g, 1.0, 0, 0.0), 0.0).unwrap();
        assert!(matches!(propagate(&psi0, &s, &PropagationOptions::default()), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn constant_scenario_certifies_at_coarsest_setting() {
        let s = Scenario::harmonic(ScalarProfile::constant(1.0), [0.0, 2.0]);
        let r = convergence_report(&s, 10.0, &[0.02, 0.01], &[128, 256], 3, 1e-8, |g| Ok(ground(g, 1.0, 0, 0.0))).unwrap();
        assert_eq!(r.certified, Some((0.02, 128)));
    }
}
