//! Time-dependent scenario inputs: frequency, external force and the cubic /
//! quartic anharmonic coefficients, each with declared limits at both ends.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A smooth real function of dimensionless time with declared limits at
/// `tau -> -inf` (`value_minus`) and `tau -> +inf` (`value_plus`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarProfile {
    Constant {
        value: f64,
    },
    /// Frequency switch with `Omega^2` interpolated by `(1 + tanh)/2`.
    TanhFrequency {
        omega_in: f64,
        omega_out: f64,
        ramp_time: f64,
        #[serde(default)]
        center: f64,
    },
    /// Value interpolated linearly by `(1 + tanh((tau - center)/ramp_time))/2`.
    TanhSwitch {
        value_minus: f64,
        value_plus: f64,
        ramp_time: f64,
        #[serde(default)]
        center: f64,
    },
    /// Slow switch-on from zero to `value_plus`.
    AdiabaticSwitch {
        value_plus: f64,
        ramp_time: f64,
        #[serde(default)]
        center: f64,
    },
    GaussianPulse {
        amplitude: f64,
        #[serde(default)]
        center: f64,
        width: f64,
    },
    /// Monotone cubic (PCHIP) interpolation of samples; clamped outside.
    Tabulated {
        tau: Vec<f64>,
        values: Vec<f64>,
    },
}

fn switch(tau: f64, center: f64, ramp: f64) -> f64 {
    0.5 * (1.0 + ((tau - center) / ramp).tanh())
}

fn switch_derivative(tau: f64, center: f64, ramp: f64) -> f64 {
    let c = ((tau - center) / ramp).cosh();
    0.5 / (ramp * c * c)
}

impl ScalarProfile {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn zero() -> Self {
        Self::Constant { value: 0.0 }
    }

    pub fn gaussian_pulse(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite() && amplitude.is_finite() && center.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gaussian pulse needs finite amplitude/center and width > 0 (width = {width})"
            )));
        }
        Ok(Self::GaussianPulse {
            amplitude,
            center,
            width,
        })
    }

    pub fn tabulated(tau: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let p = Self::Tabulated { tau, values };
        p.validate()?;
        Ok(p)
    }

    pub fn value(&self, tau: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::TanhFrequency {
                omega_in,
                omega_out,
                ramp_time,
                center,
            } => {
                let s = switch(tau, *center, *ramp_time);
                (omega_in * omega_in + (omega_out * omega_out - omega_in * omega_in) * s).sqrt()
            }
            Self::TanhSwitch {
                value_minus,
                value_plus,
                ramp_time,
                center,
            } => value_minus + (value_plus - value_minus) * switch(tau, *center, *ramp_time),
            Self::AdiabaticSwitch {
                value_plus,
                ramp_time,
                center,
            } => value_plus * switch(tau, *center, *ramp_time),
            Self::GaussianPulse {
                amplitude,
                center,
                width,
            } => {
                let z = (tau - center) / width;
                amplitude * (-0.5 * z * z).exp()
            }
            Self::Tabulated { tau: ts, values } => pchip_eval(ts, values, tau).0,
        }
    }

    /// Analytic time derivative.
    pub fn derivative(&self, tau: f64) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::TanhFrequency {
                omega_in,
                omega_out,
                ramp_time,
                center,
            } => {
                let ds = switch_derivative(tau, *center, *ramp_time);
                (omega_out * omega_out - omega_in * omega_in) * ds / (2.0 * self.value(tau))
            }
            Self::TanhSwitch {
                value_minus,
                value_plus,
                ramp_time,
                center,
            } => (value_plus - value_minus) * switch_derivative(tau, *center, *ramp_time),
            Self::AdiabaticSwitch {
                value_plus,
                ramp_time,
                center,
            } => value_plus * switch_derivative(tau, *center, *ramp_time),
            Self::GaussianPulse {
                amplitude,
                center,
                width,
            } => {
                let z = (tau - center) / width;
                -amplitude * z / width * (-0.5 * z * z).exp()
            }
            Self::Tabulated { tau: ts, values } => pchip_eval(ts, values, tau).1,
        }
    }

    pub fn value_minus(&self) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::TanhFrequency { omega_in, .. } => *omega_in,
            Self::TanhSwitch { value_minus, .. } => *value_minus,
            Self::AdiabaticSwitch { .. } | Self::GaussianPulse { .. } => 0.0,
            Self::Tabulated { values, .. } => values[0],
        }
    }

    pub fn value_plus(&self) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::TanhFrequency { omega_out, .. } => *omega_out,
            Self::TanhSwitch { value_plus, .. } | Self::AdiabaticSwitch { value_plus, .. } => *value_plus,
            Self::GaussianPulse { .. } => 0.0,
            Self::Tabulated { values, .. } => *values.last().unwrap(),
        }
    }

    /// Ramp time of switch-type profiles (used for the adiabaticity ratio).
    pub fn ramp_time(&self) -> Option<f64> {
        match self {
            Self::TanhFrequency { ramp_time, .. }
            | Self::TanhSwitch { ramp_time, .. }
            | Self::AdiabaticSwitch { ramp_time, .. } => Some(*ramp_time),
            Self::GaussianPulse { width, .. } => Some(*width),
            _ => None,
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            Self::Constant { value } => *value == 0.0,
            Self::TanhSwitch {
                value_minus,
                value_plus,
                ..
            } => *value_minus == 0.0 && *value_plus == 0.0,
            Self::AdiabaticSwitch { value_plus, .. } => *value_plus == 0.0,
            Self::GaussianPulse { amplitude, .. } => *amplitude == 0.0,
            Self::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
            Self::TanhFrequency { .. } => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} must be finite")))
            }
        };
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} must be positive (got {v})")))
            }
        };
        match self {
            Self::Constant { value } => finite(*value, "value"),
            Self::TanhFrequency {
                omega_in,
                omega_out,
                ramp_time,
                center,
            } => {
                positive(*omega_in, "omega_in")?;
                positive(*omega_out, "omega_out")?;
                positive(*ramp_time, "ramp_time")?;
                finite(*center, "center")
            }
            Self::TanhSwitch {
                value_minus,
                value_plus,
                ramp_time,
                center,
            } => {
                finite(*value_minus, "value_minus")?;
                finite(*value_plus, "value_plus")?;
                positive(*ramp_time, "ramp_time")?;
                finite(*center, "center")
            }
            Self::AdiabaticSwitch {
                value_plus,
                ramp_time,
                center,
            } => {
                finite(*value_plus, "value_plus")?;
                positive(*ramp_time, "ramp_time")?;
                finite(*center, "center")
            }
            Self::GaussianPulse {
                amplitude,
                center,
                width,
            } => {
                finite(*amplitude, "amplitude")?;
                finite(*center, "center")?;
                positive(*width, "width")
            }
            Self::Tabulated { tau, values } => {
                if tau.len() < 2 || tau.len() != values.len() {
                    return Err(Error::InvalidParameter(
                        "tabulated profile needs >= 2 samples and equal-length tau/values".into(),
                    ));
                }
                if tau.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidParameter(
                        "tabulated tau must be strictly increasing".into(),
                    ));
                }
                tau.iter().chain(values).try_for_each(|v| finite(*v, "tabulated sample"))
            }
        }
    }
}

/// Frequency profile with `Omega^2(tau) = Omega_in^2 + (Omega_out^2 - Omega_in^2)(1 + tanh(tau/T))/2`.
pub fn make_tanh_frequency(omega_in: f64, omega_out: f64, ramp_time: f64) -> Result<ScalarProfile> {
    let p = ScalarProfile::TanhFrequency {
        omega_in,
        omega_out,
        ramp_time,
        center: 0.0,
    };
    p.validate()?;
    Ok(p)
}

/// Monotone switch from 0 to `value_plus`; `|d/dtau| <= |value_plus| / (2 ramp_time)`.
pub fn make_adiabatic_switch(value_plus: f64, ramp_time: f64) -> Result<ScalarProfile> {
    let p = ScalarProfile::AdiabaticSwitch {
        value_plus,
        ramp_time,
        center: 0.0,
    };
    p.validate()?;
    Ok(p)
}

fn pchip_slopes(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = t.len();
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (v[i + 1] - v[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let end_slope = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn pchip_eval(t: &[f64], v: &[f64], x: f64) -> (f64, f64) {
    let n = t.len();
    if x <= t[0] {
        return (v[0], 0.0);
    }
    if x >= t[n - 1] {
        return (v[n - 1], 0.0);
    }
    let d = pchip_slopes(t, v);
    let i = t.partition_point(|&s| s <= x) - 1;
    let h = t[i + 1] - t[i];
    let s = (x - t[i]) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    let val = h00 * v[i] + h10 * h * d[i] + h01 * v[i + 1] + h11 * h * d[i + 1];
    let dh00 = 6.0 * s * s - 6.0 * s;
    let dh10 = 3.0 * s * s - 4.0 * s + 1.0;
    let dh01 = -6.0 * s * s + 6.0 * s;
    let dh11 = 3.0 * s * s - 2.0 * s;
    let der = (dh00 * v[i] + dh01 * v[i + 1]) / h + dh10 * d[i] + dh11 * d[i + 1];
    (val, der)
}

/// The full time-dependent problem: profiles, coupling, span and initial level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub omega: ScalarProfile,
    #[serde(default = "ScalarProfile::zero")]
    pub force: ScalarProfile,
    #[serde(default = "ScalarProfile::zero")]
    pub alpha: ScalarProfile,
    #[serde(default = "ScalarProfile::zero")]
    pub beta: ScalarProfile,
    #[serde(default)]
    pub lambda: f64,
    pub tau_span: [f64; 2],
    #[serde(default)]
    pub n_in: usize,
}

impl Scenario {
    /// Harmonic scenario (no force, no anharmonicity).
    pub fn harmonic(omega: ScalarProfile, tau_span: [f64; 2]) -> Self {
        Self {
            omega,
            force: ScalarProfile::zero(),
            alpha: ScalarProfile::zero(),
            beta: ScalarProfile::zero(),
            lambda: 0.0,
            tau_span,
            n_in: 0,
        }
    }

    pub fn omega_in(&self) -> f64 {
        self.omega.value_minus()
    }

    pub fn omega_out(&self) -> f64 {
        self.omega.value_plus()
    }

    pub fn start(&self) -> f64 {
        self.tau_span[0]
    }

    pub fn end(&self) -> f64 {
        self.tau_span[1]
    }

    pub fn validate(&self) -> Result<()> {
        for p in [&self.omega, &self.force, &self.alpha, &self.beta] {
            p.validate()?;
        }
        if !(self.omega_in() > 0.0 && self.omega_out() > 0.0) {
            return Err(Error::InvalidParameter(
                "omega must have positive limits at both ends".into(),
            ));
        }
        if self.force.value_minus() != 0.0 || self.force.value_plus() != 0.0 {
            return Err(Error::InvalidParameter(
                "force must vanish at both ends".into(),
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0 (got {})",
                self.lambda
            )));
        }
        let [a, b] = self.tau_span;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidSpan(format!("tau_span [{a}, {b}] is not increasing")));
        }
        Ok(())
    }

    /// Adiabaticity ratio `ramp_time * Omega_in` of the anharmonic switch-on
    /// (recorded, not enforced).
    pub fn adiabaticity_ratio(&self) -> Option<f64> {
        let ramps: Vec<f64> = [&self.alpha, &self.beta]
            .iter()
            .filter(|p| !p.is_identically_zero())
            .filter_map(|p| p.ramp_time())
            .collect();
        ramps
            .into_iter()
            .reduce(f64::min)
            .map(|r| r * self.omega_in().min(self.omega_out()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileDeviation {
    pub name: &'static str,
    pub minus_deviation: f64,
    pub plus_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    pub eps: f64,
    pub profiles: Vec<ProfileDeviation>,
}

impl AsymptoticReport {
    pub fn pass(&self) -> bool {
        self.profiles.iter().all(|p| p.pass)
    }

    pub fn max_deviation(&self) -> f64 {
        self.profiles
            .iter()
            .map(|p| p.minus_deviation.max(p.plus_deviation))
            .fold(0.0, f64::max)
    }
}

/// Maximum deviation of every profile from its declared limit over the
/// leading and trailing windows of the span.
pub fn validate_asymptotics(s: &Scenario, eps: f64, tau_window: f64) -> Result<AsymptoticReport> {
    if !(tau_window > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tau_window must be positive (got {tau_window})"
        )));
    }
    let [start, end] = s.tau_span;
    if end - start < 2.0 * tau_window {
        return Err(Error::InvalidSpan(format!(
            "span [{start}, {end}] shorter than twice the window {tau_window}"
        )));
    }
    const SAMPLES: usize = 257;
    let max_dev = |p: &ScalarProfile, from: f64, limit: f64| {
        (0..SAMPLES)
            .map(|i| from + tau_window * i as f64 / (SAMPLES - 1) as f64)
            .map(|t| (p.value(t) - limit).abs())
            .fold(0.0, f64::max)
    };
    let profiles = [
        ("omega", &s.omega),
        ("force", &s.force),
        ("alpha", &s.alpha),
        ("beta", &s.beta),
    ]
    .into_iter()
    .map(|(name, p)| {
        let minus_deviation = max_dev(p, start, p.value_minus());
        let plus_deviation = max_dev(p, end - tau_window, p.value_plus());
        ProfileDeviation {
            name,
            minus_deviation,
            plus_deviation,
            pass: minus_deviation <= eps && plus_deviation <= eps,
        }
    })
    .collect();
    Ok(AsymptoticReport { eps, profiles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tanh_frequency_values() {
        let p = make_tanh_frequency(1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.value(-3.0), 1.0);
        assert_eq!(p.value(7.5), 1.0);
        let p = make_tanh_frequency(1.0, 2.0, 3.7).unwrap();
        assert!((p.value(0.0) - 2.5f64.sqrt()).abs() < 1e-15);
        let p = make_tanh_frequency(1.0, 2.0, 1.0).unwrap();
        assert!((p.value(20.0) - 2.0).abs() < 1e-12);
        assert!(make_tanh_frequency(0.0, 2.0, 1.0).is_err());
        assert!(make_tanh_frequency(1.0, -2.0, 1.0).is_err());
        assert!(make_tanh_frequency(1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn adiabatic_switch_values_and_slope() {
        let z = make_adiabatic_switch(0.0, 10.0).unwrap();
        assert!(z.is_identically_zero());
        assert_eq!(z.value(3.0), 0.0);
        let p = make_adiabatic_switch(0.5, 10.0).unwrap();
        assert!((p.value(1e3) - 0.5).abs() < 1e-12);
        // numeric differentiation on a dense grid
        let h = 1e-3;
        let max_slope = (-20000..20000)
            .map(|i| i as f64 * 0.01)
            .map(|t| ((p.value(t + h) - p.value(t - h)) / (2.0 * h)).abs())
            .fold(0.0, f64::max);
        assert!(max_slope <= 0.025 + 1e-9, "max slope {max_slope}");
        assert!(max_slope > 0.0249);
        assert!(make_adiabatic_switch(0.5, 0.0).is_err());
    }

    #[test]
    fn asymptotics_of_constant_scenario_pass_exactly() {
        let s = Scenario::harmonic(ScalarProfile::constant(1.0), [-10.0, 10.0]);
        let r = validate_asymptotics(&s, 1e-10, 2.0).unwrap();
        assert!(r.pass());
        assert_eq!(r.max_deviation(), 0.0);
    }

    #[test]
    fn short_tanh_tail_fails_tight_eps() {
        let ramp = 1.0;
        let s = Scenario::harmonic(make_tanh_frequency(1.0, 2.0, ramp).unwrap(), [-5.0 * ramp, 40.0]);
        let r = validate_asymptotics(&s, 1e-12, 1.0).unwrap();
        assert!(!r.pass());
        // worst point is the inner window edge at -4 ramp: Omega^2 - 1 = 3 (1 + tanh(-4))/2
        let expected = (1.0 + 3.0 * (0.5 * (1.0 + (-4.0f64).tanh()))).sqrt() - 1.0;
        let omega_dev = r.profiles[0].minus_deviation;
        assert!((omega_dev - expected).abs() < 1e-15, "{omega_dev} vs {expected}");
        assert!(expected > 1e-5);
    }

    #[test]
    fn gaussian_force_tail_passes() {
        let mut s = Scenario::harmonic(ScalarProfile::constant(1.0), [-30.0, 30.0]);
        s.force = ScalarProfile::gaussian_pulse(1.0, 0.0, 1.0).unwrap();
        let r = validate_asymptotics(&s, 1e-10, 5.0).unwrap();
        // largest tail value at |tau| = 25: exp(-312.5)
        assert!(r.pass());
        assert!(r.profiles[1].minus_deviation < 1e-100);
    }

    #[test]
    fn window_errors() {
        let s = Scenario::harmonic(ScalarProfile::constant(1.0), [-1.0, 1.0]);
        assert!(matches!(validate_asymptotics(&s, 1e-8, 1.5), Err(Error::InvalidSpan(_))));
        assert!(matches!(validate_asymptotics(&s, 1e-8, 0.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn tabulated_profile_interpolates_and_clamps() {
        let p = ScalarProfile::tabulated(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.5, 1.5, 2.0]).unwrap();
        assert_eq!(p.value(-1.0), 0.0);
        assert_eq!(p.value(5.0), 2.0);
        assert!((p.value(1.0) - 0.5).abs() < 1e-15);
        // monotone data stays monotone
        let mut prev = p.value(0.0);
        for i in 1..=300 {
            let v = p.value(i as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert!(ScalarProfile::tabulated(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn scenario_validation() {
        let mut s = Scenario::harmonic(ScalarProfile::constant(1.0), [-1.0, 1.0]);
        assert!(s.validate().is_ok());
        s.force = ScalarProfile::constant(0.1);
        assert!(s.validate().is_err());
        s.force = ScalarProfile::zero();
        s.tau_span = [1.0, -1.0];
        assert!(matches!(s.validate(), Err(Error::InvalidSpan(_))));
    }

    proptest! {
        #[test]
        fn switch_profiles_are_monotone_and_deterministic(
            lo in 0.1f64..3.0, hi in 0.1f64..3.0, ramp in 0.1f64..20.0, t in -50.0f64..50.0
        ) {
            let p = make_tanh_frequency(lo, hi, ramp).unwrap();
            let a = p.value(t);
            prop_assert_eq!(a.to_bits(), p.value(t).to_bits());
            let b = p.value(t + 0.1);
            if hi >= lo { prop_assert!(b >= a - 1e-15) } else { prop_assert!(b <= a + 1e-15) }
            let s = make_adiabatic_switch(hi - lo, ramp).unwrap();
            prop_assert!(s.derivative(t).abs() <= (hi - lo).abs() / (2.0 * ramp) + 1e-15);
        }
    }
}
