use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use uamo_core::torus::{coin, cos_product, logcos_closed_form, logcos_integral, reduce, Frequency};
use uamo_core::TorusPoint;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

#[test]
fn silver_convergents_follow_pell_recurrence() {
    // [0; 2, 2, 2, …]: q_n = 2 q_{n−1} + q_{n−2} from q_{−1} = 0, q_0 = 1
    let (mut prev, mut cur) = (0i64, 1i64);
    let mut expected = Vec::new();
    for _ in 0..4 {
        let next = 2 * cur + prev;
        expected.push(next);
        prev = cur;
        cur = next;
    }
    assert_eq!(expected, [2, 5, 12, 29]);
    let got: Vec<i64> = Frequency::silver().convergents().iter().map(|c| c.q).filter(|&q| q > 1).take(4).collect();
    assert_eq!(got, expected);
}

#[test]
fn logcos_against_midpoint_rule() {
    // for ε ≠ 0 the integrand is smooth and periodic, so a plain midpoint
    // rule converges geometrically
    for eps in [0.05, 0.1, 0.3, -0.7] {
        let n = 20_000;
        let sum: f64 = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) / n as f64;
                num_complex::Complex64::new(TAU * x, TAU * eps).cos().norm().ln()
            })
            .sum();
        let oracle = sum / n as f64;
        let got = logcos_integral(eps).unwrap();
        assert!((got - oracle).abs() < 1e-9, "eps={eps}: {got} vs {oracle}");
    }
}

#[test]
fn logcos_paper_values() {
    assert!((logcos_integral(0.0).unwrap() + 2f64.ln()).abs() < 1e-6);
    assert!((logcos_integral(0.5).unwrap() - (PI - 2f64.ln())).abs() < 1e-6);
    assert!((logcos_integral(-0.5).unwrap() - logcos_integral(0.5).unwrap()).abs() < 1e-12);
}

/// `2^q ∏_{j<q} |cos 2π(θ + jp/q)|` in closed form: with `x = 2θ + ½` the
/// factors are `|2 sin π(x + 2jp/q)|`, and `2jp/q mod 1` runs over the
/// multiples of `1/q` (q odd) or twice over those of `2/q` (q even), so
/// `∏_{m<r} 2 sin π(x + m/r) = 2 sin(πrx)` gives the value.
fn rational_cos_product(q: i64, theta: f64) -> f64 {
    let x = 2.0 * theta + 0.5;
    if q % 2 == 1 {
        (2.0 * (PI * q as f64 * x).sin()).abs()
    } else {
        (2.0 * (PI * (q / 2) as f64 * x).sin()).powi(2)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reduce_lands_in_unit_interval(x in -1e6f64..1e6) {
        let t = reduce(x).unwrap().value();
        prop_assert!((0.0..1.0).contains(&t));
        let k = (x - t).round();
        prop_assert!((x - t - k).abs() < 1e-9);
        prop_assert_eq!(reduce(t).unwrap().value(), t);
    }

    #[test]
    fn coins_are_rotations(n in -1000i64..1000, theta in 0.0f64..1.0) {
        let c = coin(&Frequency::golden(), TorusPoint::new(theta).unwrap(), n);
        prop_assert!((c.determinant() - 1.0).abs() < 1e-14);
        prop_assert!(c.orthogonality_defect() < 1e-14);
    }

    #[test]
    fn rational_phases_are_periodic(p in 0i64..20, q in 1i64..20, n in -500i64..500, theta in 0.0f64..1.0) {
        prop_assume!(gcd(p, q) == 1 && p <= q);
        let b = Frequency::rational(p, q).unwrap();
        prop_assert_eq!(b.phase(n, theta), b.phase(n + q, theta));
    }

    #[test]
    fn irrational_phase_matches_direct_sum(n in -10_000i64..10_000, theta in 0.0f64..1.0) {
        let b = Frequency::golden();
        let direct = reduce(n as f64 * b.value() + theta).unwrap();
        let d = (b.phase(n, theta) - direct.value()).abs();
        prop_assert!(d.min(1.0 - d) < 1e-11);
    }

    #[test]
    fn cos_product_at_rationals(p in 1i64..40, q in 2i64..40, theta in 0.0f64..1.0) {
        prop_assume!(gcd(p, q) == 1 && p < q);
        let b = Frequency::rational(p, q).unwrap();
        let got = cos_product(&b, TorusPoint::new(theta).unwrap(), q as u64).unwrap();
        prop_assume!(!got.degenerate);
        let oracle = rational_cos_product(q, theta);
        prop_assert!((got.value - oracle).abs() < 1e-9 * oracle.max(1.0), "{} vs {}", got.value, oracle);
    }

    #[test]
    fn logcos_is_even_and_linear_above_zero(eps in 0.0f64..2.0) {
        let a = logcos_integral(eps).unwrap();
        prop_assert!((a - logcos_integral(-eps).unwrap()).abs() < 1e-12);
        prop_assert!((a - logcos_closed_form(eps)).abs() < 1e-6);
    }
}
