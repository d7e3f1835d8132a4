use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uamo_core::duality::{bloch_dual_point, dual_residual, duality_check, semi_conjugacy_check, transform};
use uamo_core::operators::WalkState;
use uamo_core::{Error, Frequency, TorusPoint};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn state_strategy() -> impl Strategy<Value = WalkState> {
    (-40i64..40, prop::collection::vec(prop::array::uniform4(-1.0f64..1.0), 1..48)).prop_map(|(first, raw)| WalkState {
        first_site: first,
        amps: raw.into_iter().map(|r| [c(r[0], r[1]), c(r[2], r[3])]).collect(),
    })
}

fn random_state(rng: &mut ChaCha8Rng, len: usize) -> WalkState {
    let mut g = || c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    WalkState { first_site: -(len as i64) / 2, amps: (0..len).map(|_| [g(), g()]).collect() }
}

#[test]
fn bloch_solution_satisfies_dual_equations() {
    // β = 0: the shifts are trivial, so the dual equations at x₀ reduce to a
    // 2×2 linear condition on w(x₀)
    for (theta, k) in [(0.1, 0.2), (0.35, 0.07), (0.8, 0.41)] {
        let (x, z, w) = bloch_dual_point(theta, k).unwrap();
        let (s, co) = (TAU * x).sin_cos();
        let a = Complex64::from_polar(1.0, TAU * theta);
        let r_up = z * w[0] - co * a * w[0] - s * a.conj() * w[1];
        let r_down = z * w[1] + s * a * w[0] - co * a.conj() * w[1];
        assert!(r_up.norm() < 1e-12 && r_down.norm() < 1e-12, "θ={theta} k={k}: {r_up} {r_down}");
    }
}

#[test]
fn generic_states_are_far_from_dual_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let beta = Frequency::golden();
    for _ in 0..10 {
        let psi = random_state(&mut rng, 32);
        let pair = transform(&psi, 64).unwrap();
        let z = Complex64::from_polar(1.0, TAU * rng.random::<f64>());
        let theta = TorusPoint::new(rng.random()).unwrap();
        let r = dual_residual(&pair, &beta, theta, z).unwrap();
        assert!(r.residual_up.max(r.residual_down) > 0.1, "{r:?}");
    }
}

#[test]
fn zero_field_is_rejected() {
    let psi = WalkState { first_site: 0, amps: vec![[c(0.0, 0.0); 2]; 4] };
    let pair = transform(&psi, 8).unwrap();
    let beta = Frequency::golden();
    assert!(matches!(dual_residual(&pair, &beta, TorusPoint::ZERO, c(1.0, 0.0)), Err(Error::ZeroField)));
    assert!(matches!(semi_conjugacy_check(&pair, &beta, TorusPoint::ZERO, c(1.0, 0.0)), Err(Error::ZeroField)));
}

#[test]
fn grid_must_cover_support() {
    let psi = WalkState { first_site: 0, amps: vec![[c(1.0, 0.0); 2]; 5] };
    assert!(transform(&psi, 8).is_err());
    assert!(transform(&psi, 12).is_err());
    assert!(transform(&psi, 16).is_ok());
}

#[test]
fn truncation_eigenvectors_respect_the_bound() {
    let r = duality_check(&Frequency::golden(), TorusPoint::new(0.2).unwrap(), 16).unwrap();
    assert_eq!(r.bound_violations, 0);
    assert!(r.worst_bound_ratio <= 1.0);
    assert!(duality_check(&Frequency::golden(), TorusPoint::ZERO, 7).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_scales_norm_by_sqrt_two(psi in state_strategy()) {
        prop_assume!(psi.norm() > 1e-6);
        let grid = (2 * psi.amps.len()).next_power_of_two();
        let pair = transform(&psi, grid).unwrap();
        prop_assert!((pair.norm() / psi.norm() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn transform_is_linear(a in state_strategy(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let s = c(re, im);
        let b = WalkState { first_site: a.first_site, amps: a.amps.iter().rev().cloned().collect() };
        let mix = WalkState {
            first_site: a.first_site,
            amps: a.amps.iter().zip(&b.amps).map(|(x, y)| [s * x[0] + y[0], s * x[1] + y[1]]).collect(),
        };
        let grid = (2 * a.amps.len()).next_power_of_two();
        let (ta, tb, tm) = (transform(&a, grid).unwrap(), transform(&b, grid).unwrap(), transform(&mix, grid).unwrap());
        for j in 0..grid {
            prop_assert!((tm.w_up[j] - (s * ta.w_up[j] + tb.w_up[j])).norm() < 1e-10);
            prop_assert!((tm.w_down[j] - (s * ta.w_down[j] + tb.w_down[j])).norm() < 1e-10);
        }
    }

    #[test]
    fn semi_conjugacy_defect_never_exceeds_bound(psi in state_strategy(), angle in 0.0f64..1.0, theta in 0.0f64..1.0) {
        prop_assume!(psi.norm() > 1e-6);
        let grid = (2 * psi.amps.len()).next_power_of_two();
        let pair = transform(&psi, grid).unwrap();
        let z = Complex64::from_polar(1.0, TAU * angle);
        let r = semi_conjugacy_check(&pair, &Frequency::silver(), TorusPoint::new(theta).unwrap(), z).unwrap();
        prop_assert!(r.max_defect <= r.algebraic_bound * (1.0 + 1e-9) + 1e-12, "{r:?}");
    }
}
