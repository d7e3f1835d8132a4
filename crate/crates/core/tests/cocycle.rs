use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;
use uamo_core::cocycle::{
    acceleration, dominated_splitting_check, iterate, lyapunov, lyapunov_profile, AccelerationConfig, CocycleKind,
    DsConfig, DsVerdict, LyapunovConfig, SpectralParameter,
};
use uamo_core::spectral::{rational_spectrum, ThetaSampling};
use uamo_core::Frequency;

/// Spectral radius of a 2×2 matrix with the given trace and determinant.
fn spectral_radius(tr: Complex64, det: Complex64) -> f64 {
    let disc = (tr * tr - 4.0 * det).sqrt();
    ((tr + disc) / 2.0).norm().max(((tr - disc) / 2.0).norm())
}

#[test]
fn constant_cocycle_exponent_is_log_spectral_radius() {
    // β = 0: the orbit is fixed, so (1/n)log‖A(θ)^n‖ → log ρ(A(θ)) and the
    // θ-average is an integral of a closed-form function
    let beta = Frequency::rational(0, 1).unwrap();
    let cfg = LyapunovConfig { samples: 4096, iterations: Some(4000), ..LyapunovConfig::default() };
    for (angle, eps) in [(0.1, 0.0), (0.37, 0.0), (0.2, 0.15)] {
        let p = SpectralParameter::on_circle(angle, eps).unwrap();
        let n = 200_000;
        let oracle: f64 = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) / n as f64;
                let w = Complex64::new(TAU * x, TAU * eps);
                // N = −2i·[[z⁻¹, −sin], [−sin, z]]
                let tr = Complex64::new(0.0, -2.0) * (p.z.inv() + p.z);
                let det = -4.0 * w.cos() * w.cos();
                spectral_radius(tr, det).ln()
            })
            .sum::<f64>()
            / n as f64;
        let got = lyapunov(CocycleKind::N, &beta, p, &cfg).unwrap();
        assert!((got.value - oracle).abs() < 0.02, "angle {angle} eps {eps}: {} vs {oracle}", got.value);
    }
}

#[test]
fn far_from_real_axis_acceleration_is_one() {
    let cfg = AccelerationConfig {
        lyapunov: LyapunovConfig { samples: 64, ..LyapunovConfig::default() },
        ..AccelerationConfig::default()
    };
    for angle in [0.05, 0.3, 0.71] {
        let acc = acceleration(&Frequency::golden(), SpectralParameter::on_circle(angle, 3.0).unwrap(), &cfg).unwrap();
        assert_eq!(acc.omega_rounded, 1, "{acc:?}");
        assert!(!acc.kink_detected);
    }
}

#[test]
fn profile_is_even() {
    let cfg = LyapunovConfig { samples: 64, ..LyapunovConfig::default() };
    let grid = [-0.4, -0.15, 0.15, 0.4];
    let prof = lyapunov_profile(&Frequency::golden(), Complex64::from_polar(1.0, 1.3), &grid, &cfg).unwrap();
    for i in 0..2 {
        let j = grid.len() - 1 - i;
        let tol = 2.0 * (prof.errors[i] + prof.errors[j]);
        assert!((prof.l_values[i] - prof.l_values[j]).abs() <= tol.max(1e-9), "{:?}", prof.l_values);
    }
}

#[test]
fn profile_rejects_unsorted_grid() {
    let cfg = LyapunovConfig::default();
    assert!(lyapunov_profile(&Frequency::golden(), Complex64::new(1.0, 0.0), &[0.2, 0.1], &cfg).is_err());
    assert!(lyapunov_profile(&Frequency::golden(), Complex64::new(1.0, 0.0), &[], &cfg).is_err());
}

#[test]
fn z_two_is_dominated() {
    let cfg = DsConfig::default();
    let p = SpectralParameter::new(Complex64::new(2.0, 0.0), 0.0).unwrap();
    for beta in [Frequency::golden(), Frequency::rational(3, 5).unwrap()] {
        let r = dominated_splitting_check(&beta, p, &cfg).unwrap();
        assert_eq!(r.verdict, DsVerdict::Ds, "{}: {:?}", beta.label(), r.witness);
    }
}

#[test]
fn spectrum_points_are_never_dominated() {
    let beta = Frequency::rational(5, 8).unwrap();
    let est = rational_spectrum(5, 8, &ThetaSampling::Period(64), 2).unwrap();
    let cfg = DsConfig::default();
    for &(s, e) in est.arcs.iter().take(8) {
        let a = 0.5 * (s + e);
        let r = dominated_splitting_check(&beta, SpectralParameter::on_circle(a, 0.0).unwrap(), &cfg).unwrap();
        assert_ne!(r.verdict, DsVerdict::Ds, "angle {a}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_determinant_is_cos_product(x in 0.0f64..1.0, eps in -0.3f64..0.3, angle in 0.0f64..1.0, n in 1usize..40) {
        let beta = Frequency::golden();
        let p = SpectralParameter::on_circle(angle, eps).unwrap();
        let prod = iterate(CocycleKind::N, &beta, p, x, n).unwrap().to_matrix();
        let [[a, b], [c, d]] = prod.0;
        // the determinant is a difference of two products of this size
        let scale = ((a * d).norm() + (b * c).norm()).max(1.0);
        let det = prod.det();
        let expected = (0..n).fold(Complex64::new(1.0, 0.0), |acc, j| {
            let c = Complex64::new(TAU * beta.phase(j as i64, x), TAU * eps).cos();
            acc * (-4.0 * c * c)
        });
        prop_assert!((det - expected).norm() <= 1e-12 * scale, "{det} vs {expected}");
    }

    #[test]
    fn cocycle_composes(x in 0.0f64..1.0, eps in -0.5f64..0.5, angle in 0.0f64..1.0, m in 1usize..30, n in 1usize..30) {
        let beta = Frequency::silver();
        let p = SpectralParameter::on_circle(angle, eps).unwrap();
        for kind in [CocycleKind::N, CocycleKind::M, CocycleKind::GzProduct] {
            let whole = iterate(kind, &beta, p, x, m + n).unwrap().to_matrix();
            let first = iterate(kind, &beta, p, x, m).unwrap().to_matrix();
            let second = iterate(kind, &beta, p, beta.phase(m as i64, x), n).unwrap().to_matrix();
            let rel = (whole - second * first).max_abs() / whole.max_abs();
            prop_assert!(rel < 1e-10, "{kind:?}: {rel:e}");
        }
    }
}
