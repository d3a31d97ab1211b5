//! Hermite polynomials, Hermite-series algebra and associated Legendre functions.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Default largest Hermite degree accepted by [`hermite_phys`].
pub const DEFAULT_N_MAX: usize = 64;

/// Physicists' Hermite polynomial `H_n(y)` by the three-term recurrence
/// `H_{n+1} = 2y H_n - 2n H_{n-1}`.
pub fn hermite_phys(n: usize, y: f64) -> Result<f64> {
    hermite_phys_capped(n, y, DEFAULT_N_MAX)
}

pub fn hermite_phys_capped(n: usize, y: f64, n_max: usize) -> Result<f64> {
    if n > n_max {
        return Err(Error::Capacity(format!(
            "Hermite degree {n} exceeds n_max = {n_max}"
        )));
    }
    let mut prev = 1.0;
    if n == 0 {
        return Ok(prev);
    }
    let mut cur = 2.0 * y;
    for k in 1..n {
        let next = 2.0 * y * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Normalized Hermite functions `h_k(y) = (sqrt(pi) 2^k k!)^{-1/2} H_k(y) e^{-y^2/2}`
/// for `k = 0..=n`, written into `out`. Stable for large `k` and `|y|`.
pub fn hermite_functions(n: usize, y: f64, out: &mut [f64]) {
    debug_assert!(out.len() > n);
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * y * y).exp();
    out[0] = h0;
    if n == 0 {
        return;
    }
    out[1] = std::f64::consts::SQRT_2 * y * h0;
    for k in 1..n {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * y * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// `ln(n!)` by direct summation (exact enough for the small orders used here).
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `n! / (n-k)!` as a float.
pub fn falling_factorial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    ((n - k + 1)..=n).map(|j| j as f64).product()
}

/// Coefficients of a finite expansion `sum_k c_k H_k(y)` in physicists' Hermite
/// polynomials, indexed by degree.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSeries(pub Vec<Complex64>);

impl HermiteSeries {
    pub fn zeros(len: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); len])
    }

    /// The single polynomial `H_n`.
    pub fn basis(n: usize) -> Self {
        let mut s = Self::zeros(n + 1);
        s.0[n] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.0.get(k).copied().unwrap_or_default()
    }

    /// Multiplication by `y` using `y H_k = H_{k+1}/2 + k H_{k-1}`.
    pub fn times_y(&self) -> Self {
        let mut out = Self::zeros(self.0.len() + 1);
        for (k, &c) in self.0.iter().enumerate() {
            out.0[k + 1] += 0.5 * c;
            if k > 0 {
                out.0[k - 1] += k as f64 * c;
            }
        }
        out
    }

    pub fn times_y_pow(&self, p: usize) -> Self {
        (0..p).fold(self.clone(), |acc, _| acc.times_y())
    }

    /// Derivative using `H_k' = 2k H_{k-1}`.
    pub fn derivative(&self) -> Self {
        let mut out = Self::zeros(self.0.len().max(1));
        for (k, &c) in self.0.iter().enumerate().skip(1) {
            out.0[k - 1] += 2.0 * k as f64 * c;
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Self, scale: Complex64) {
        if other.0.len() > self.0.len() {
            self.0.resize(other.0.len(), Complex64::default());
        }
        for (a, &b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += scale * b;
        }
    }

    /// Product with a polynomial given by monomial coefficients `p[k] y^k`.
    pub fn times_poly(&self, p: &[Complex64]) -> Self {
        let mut out = Self::zeros(self.0.len() + p.len());
        let mut power = self.clone();
        for (k, &pk) in p.iter().enumerate() {
            if k > 0 {
                power = power.times_y();
            }
            out.add_scaled(&power, pk);
        }
        out
    }

    /// Long division by `H_n`: returns `(q, r)` with `self = q(y) H_n(y) + r(y)`,
    /// where `q` is given by monomial coefficients and `r` has degree `< n`.
    pub fn div_rem_hermite(&self, n: usize) -> (Vec<Complex64>, HermiteSeries) {
        let mut rem = self.clone();
        let top = rem.0.len().saturating_sub(1);
        let mut quotient = vec![Complex64::default(); top.saturating_sub(n) + 1];
        for t in (n..rem.0.len()).rev() {
            let c = rem.0[t];
            if c == Complex64::default() {
                continue;
            }
            // y^k H_n has leading term H_{n+k} / 2^k
            let k = t - n;
            let scale = c * 2f64.powi(k as i32);
            quotient[k] += scale;
            let sub = HermiteSeries::basis(n).times_y_pow(k);
            rem.add_scaled(&sub, -scale);
        }
        for c in rem.0.iter_mut().skip(n) {
            *c = Complex64::default();
        }
        rem.0.truncate(n.max(1));
        (quotient, rem)
    }
}

/// Ferrers associated Legendre function `P_l^m(x)` for `|x| <= 1`, `m <= l`,
/// including the Condon–Shortley phase.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> Result<f64> {
    if m > l {
        return Err(Error::Domain(format!("associated Legendre needs m <= l (m = {m}, l = {l})")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("associated Legendre argument {x} outside [-1, 1]")));
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    let mut odd = 1.0;
    for _ in 0..m {
        pmm *= -odd * s;
        odd += 2.0;
    }
    if l == m {
        return Ok(pmm);
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return Ok(pm1);
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = (x * (2 * ll - 1) as f64 * pm1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pm1;
        pm1 = pll;
    }
    Ok(pll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hermite_low_orders() {
        assert_eq!(hermite_phys(0, 0.7).unwrap(), 1.0);
        // 8y^3 - 12y at y = 1
        assert_eq!(hermite_phys(3, 1.0).unwrap(), -4.0);
        // 4y^2 - 2 at y = 0
        assert_eq!(hermite_phys(2, 0.0).unwrap(), -2.0);
        assert!(matches!(hermite_phys(65, 0.0), Err(Error::Capacity(_))));
    }

    #[test]
    fn hermite_functions_match_polynomials() {
        let mut h = [0.0; 8];
        for &y in &[-2.3, -0.4, 0.0, 1.1, 3.0] {
            hermite_functions(7, y, &mut h);
            for k in 0..=7 {
                let norm = (std::f64::consts::PI.sqrt() * 2f64.powi(k as i32) * (ln_factorial(k)).exp()).sqrt();
                let direct = hermite_phys(k, y).unwrap() * (-0.5 * y * y).exp() / norm;
                assert!((h[k] - direct).abs() < 1e-12 * (1.0 + direct.abs()), "k = {k}, y = {y}");
            }
        }
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let n = 12;
        let dy = 0.01;
        let mut gram = vec![vec![0.0; n + 1]; n + 1];
        let mut h = vec![0.0; n + 1];
        let mut y = -15.0;
        while y <= 15.0 {
            hermite_functions(n, y, &mut h);
            for i in 0..=n {
                for j in 0..=n {
                    gram[i][j] += h[i] * h[j] * dy;
                }
            }
            y += dy;
        }
        for i in 0..=n {
            for j in 0..=n {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ladder_reproduces_monomial_times_hermite() {
        // y^2 H_3 evaluated directly vs. via the series
        let s = HermiteSeries::basis(3).times_y_pow(2);
        for &y in &[-1.3, 0.2, 2.0] {
            let direct = y * y * hermite_phys(3, y).unwrap();
            let series: f64 = s.0.iter().enumerate().map(|(k, c)| c.re * hermite_phys(k, y).unwrap()).sum();
            assert!((direct - series).abs() < 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn division_by_hermite_leaves_low_degree_remainder() {
        let p = [1.0, -0.5, 2.0, 0.25].map(|v| Complex64::new(v, 0.3 * v));
        for n in 0..8 {
            let prod = HermiteSeries::basis(n).derivative().times_poly(&p);
            let (q, r) = prod.div_rem_hermite(n);
            for &y in &[-1.1, 0.4, 1.7] {
                let lhs: Complex64 = prod.0.iter().enumerate().map(|(k, c)| c * hermite_phys(k, y).unwrap()).sum();
                let qv: Complex64 = q.iter().enumerate().map(|(k, c)| c * y.powi(k as i32)).sum();
                let rv: Complex64 = r.0.iter().enumerate().map(|(k, c)| c * hermite_phys(k, y).unwrap()).sum();
                let rhs = qv * hermite_phys(n, y).unwrap() + rv;
                assert!((lhs - rhs).norm() < 1e-9 * (1.0 + lhs.norm()), "n = {n}");
            }
            assert!(r.0.len() <= n.max(1));
        }
    }

    #[test]
    fn legendre_known_values() {
        // P_2^1(0.5) = -3 x sqrt(1-x^2)
        let v = assoc_legendre(2, 1, 0.5).unwrap();
        assert!((v + 3.0 * 0.5 * 0.75f64.sqrt()).abs() < 1e-14);
        // P_2^2(x) = 3 (1 - x^2)
        assert!((assoc_legendre(2, 2, 0.3).unwrap() - 3.0 * 0.91).abs() < 1e-14);
        // P_3^0(x) = (5x^3 - 3x)/2
        let x = 0.7f64;
        assert!((assoc_legendre(3, 0, x).unwrap() - 0.5 * (5.0 * x.powi(3) - 3.0 * x)).abs() < 1e-14);
        assert!(assoc_legendre(1, 2, 0.1).is_err());
        assert!(assoc_legendre(2, 1, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn hermite_recurrence_matches_derivative_identity(n in 1usize..30, y in -4.0f64..4.0) {
            // H_n' = 2n H_{n-1}; check via central difference
            let h = 1e-5;
            let d = (hermite_phys(n, y + h).unwrap() - hermite_phys(n, y - h).unwrap()) / (2.0 * h);
            let expected = 2.0 * n as f64 * hermite_phys(n - 1, y).unwrap();
            prop_assert!((d - expected).abs() <= 1e-5 * (1.0 + expected.abs()));
        }
    }
}
