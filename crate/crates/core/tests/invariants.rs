use anharmonic::firstorder::chi_u_coeffs;
use anharmonic::smatrix::{
    s0_generating, s0_generating_table, transition_probability, w00_closed_form, w0_legendre, ExponentVariant, S0_FLOOR,
};
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = C> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| C::new(a, b))
}

fn poly() -> impl Strategy<Value = [C; 5]> {
    prop::array::uniform5(complex())
}

proptest! {
    #[test]
    fn generating_and_legendre_agree(rho in 0.0..0.9f64, m in 0usize..14, n in 0usize..14) {
        let g = s0_generating(m, n, rho).unwrap();
        let w = w0_legendre(m, n, rho).unwrap();
        prop_assert!((g * g - w).abs() <= 1e-10 * w.max(1e-300) + 1e-15, "{} vs {}", g * g, w);
    }

    #[test]
    fn odd_parity_vanishes_exactly(rho in 0.0..0.9f64, m in 0usize..14, n in 0usize..14) {
        prop_assume!((m + n) % 2 == 1);
        prop_assert_eq!(s0_generating(m, n, rho).unwrap(), 0.0);
        prop_assert_eq!(w0_legendre(m, n, rho).unwrap(), 0.0);
    }

    #[test]
    fn zero_order_probabilities_are_symmetric(rho in 0.0..0.9f64, m in 0usize..12, n in 0usize..12) {
        let (a, b) = (w0_legendre(m, n, rho).unwrap(), w0_legendre(n, m, rho).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(b).max(1e-300));
    }

    #[test]
    fn columns_are_normalized(rho in 0.0..0.5f64, n in 0usize..4) {
        // the tail beyond m = 200 is of order rho^100
        let t = s0_generating_table(201, rho).unwrap();
        let sum: f64 = (0..201).map(|m| t[m][n] * t[m][n]).sum();
        prop_assert!((sum - 1.0).abs() < 1e-10, "column {} sums to {}", n, sum);
    }

    #[test]
    fn closed_form_decreases_in_coupling(rho in 0.0..0.9f64, lt in 0.0..0.99f64, double in any::<bool>()) {
        let a = w00_closed_form(lt, rho, double).unwrap();
        let b = w00_closed_form(lt + 0.01, rho, double).unwrap();
        // exp(-lt v0+) underflows to exactly zero near rho = 0.9
        prop_assert!(b < a || (a < 1e-300 && b <= a), "{} then {}", a, b);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn closed_form_reduces_to_zero_order(rho in 0.0..0.9f64) {
        let w = w00_closed_form(0.0, rho, false).unwrap();
        prop_assert!((w - w0_legendre(0, 0, rho).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn probability_is_affine_without_exponent(
        s0 in complex(), s1 in complex(), s2 in complex(), lambda in 0.0..0.5f64,
    ) {
        prop_assume!(s0.norm() > 1e-3);
        let w = |l: f64| {
            transition_probability(&[vec![s0]], &[vec![s1]], &[vec![s2]], l, &[0.0], ExponentVariant::A, S0_FLOOR)
                .unwrap()
                .0[0][0]
        };
        let (w0, w1, w2) = (w(0.0), w(lambda), w(2.0 * lambda));
        prop_assert!((w2 - 2.0 * w1 + w0).abs() < 1e-12 * (1.0 + w2.abs()));
        prop_assert!((w0 - s0.norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn exponent_variants_differ_by_the_prefactor(s0 in complex(), s1 in complex(), lambda in 0.0..0.5f64, v0 in -2.0..2.0f64) {
        prop_assume!(s0.norm() > 1e-3);
        let w = |variant, v: f64| {
            transition_probability(&[vec![s0]], &[vec![s1]], &[vec![s1]], lambda, &[v], variant, S0_FLOOR).unwrap().0[0][0]
        };
        prop_assert!((w(ExponentVariant::A, v0) - w(ExponentVariant::B, 2.0 * v0)).abs() < 1e-12 * (1.0 + w(ExponentVariant::A, v0).abs()));
    }

    #[test]
    fn hermite_expansion_is_linear(v in poly(), v2 in poly(), a in complex(), n in 0usize..10) {
        let combo: [C; 5] = std::array::from_fn(|k| a * v[k] + v2[k]);
        let (chi, u) = chi_u_coeffs(&combo, n);
        let (chi_a, u_a) = chi_u_coeffs(&v, n);
        let (chi_b, u_b) = chi_u_coeffs(&v2, n);
        for p in 0..9 {
            prop_assert!((chi[p] - (a * chi_a[p] + chi_b[p])).norm() < 1e-9 * (1.0 + chi[p].norm()));
            prop_assert!((u[p] - (a * u_a[p] + u_b[p])).norm() < 1e-9 * (1.0 + u[p].norm()));
        }
    }

    #[test]
    fn hermite_expansion_ignores_constant_term(v in poly(), c in complex(), n in 0usize..10) {
        let mut shifted = v;
        shifted[0] += c;
        prop_assert_eq!(chi_u_coeffs(&v, n), chi_u_coeffs(&shifted, n));
    }

    #[test]
    fn hermite_expansion_respects_parity(v in poly(), n in 0usize..10) {
        // even polynomials only couple levels of equal parity
        let even = [v[0], C::default(), v[2], C::default(), v[4]];
        let (chi, _) = chi_u_coeffs(&even, n);
        for p in [-3i64, -1, 1, 3] {
            prop_assert_eq!(chi[(p + 4) as usize], C::default());
        }
    }
}
