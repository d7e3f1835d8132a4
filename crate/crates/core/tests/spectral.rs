use proptest::prelude::*;
use uamo_core::operators::floquet_block;
use uamo_core::spectral::{
    angle_of, arcs_hausdorff, diagonalize, distance_to_spectrum, gaps, intersect_arcs, measure_estimate,
    rational_spectrum, symmetry_defects, ThetaSampling,
};
use uamo_core::{Frequency, TorusPoint};

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

#[test]
fn period_one_spectrum_fills_the_circle() {
    for (p, q) in [(0, 1), (1, 1)] {
        let est = rational_spectrum(p, q, &ThetaSampling::Period(32), 2).unwrap();
        let m = measure_estimate(&est);
        assert!((m.value - 1.0).abs() <= m.uncertainty + 1e-9, "{p}/{q}: {m:?}");
    }
}

#[test]
fn refining_the_theta_grid_stays_within_resolution() {
    for (p, q) in [(1, 3), (3, 8)] {
        let coarse = rational_spectrum(p, q, &ThetaSampling::Period(16), 2).unwrap();
        let fine = rational_spectrum(p, q, &ThetaSampling::Period(32), 2).unwrap();
        let d = arcs_hausdorff(&coarse.arcs, &fine.arcs);
        assert!(d <= coarse.resolution + fine.resolution, "{p}/{q}: {d} vs {} + {}", coarse.resolution, fine.resolution);
    }
}

#[test]
fn measure_matches_brute_force_sweep() {
    // oracle: mark every angle bin hit by an eigenvalue on a dense θ × k grid
    let (p, q) = (3, 5);
    let beta = Frequency::rational(p, q).unwrap();
    let bins = 4000;
    let mut hit = vec![false; bins];
    for i in 0..120 {
        let theta = TorusPoint::new(i as f64 / (120.0 * q as f64)).unwrap();
        for j in 0..=120 {
            let k = j as f64 / 240.0;
            let e = diagonalize(&floquet_block(&beta, theta, k).unwrap(), false).unwrap();
            for z in e.values {
                hit[((angle_of(z) * bins as f64) as usize).min(bins - 1)] = true;
            }
        }
    }
    let oracle = hit.iter().filter(|&&h| h).count() as f64 / bins as f64;
    let m = measure_estimate(&rational_spectrum(p, q, &ThetaSampling::Period(64), 2).unwrap());
    assert!((m.value - oracle).abs() <= m.uncertainty + 0.01, "{m:?} vs {oracle}");
}

#[test]
fn longer_approximant_has_smaller_spectrum() {
    let a = measure_estimate(&rational_spectrum(3, 5, &ThetaSampling::Period(64), 2).unwrap());
    let b = measure_estimate(&rational_spectrum(13, 21, &ThetaSampling::Period(64), 2).unwrap());
    assert!(b.value + b.uncertainty < a.value - a.uncertainty, "{a:?} {b:?}");
}

#[test]
fn mirror_frequencies_share_a_spectrum() {
    for (p, q) in [(1, 4), (2, 7), (3, 10)] {
        let a = rational_spectrum(p, q, &ThetaSampling::Period(32), 2).unwrap();
        let b = rational_spectrum(q - p, q, &ThetaSampling::Period(32), 2).unwrap();
        let d = arcs_hausdorff(&a.arcs, &b.arcs);
        assert!(d <= a.resolution + b.resolution + 1e-12, "{p}/{q}: {d}");
    }
}

#[test]
fn gaps_and_arcs_partition_the_circle() {
    let est = rational_spectrum(5, 8, &ThetaSampling::Period(32), 2).unwrap();
    let arc_len: f64 = est.arcs.iter().map(|&(s, e)| e - s).sum();
    let gap_len: f64 = gaps(&est).iter().map(|&(_, l)| l).sum();
    assert!((arc_len + gap_len - 1.0).abs() < 1e-12);
    for (s, l) in gaps(&est) {
        assert!(distance_to_spectrum(&est, s + l / 2.0).unwrap() > 0.0);
    }
}

#[test]
fn intersect_arcs_small_cases() {
    let a = [(0.0, 0.2), (0.4, 0.6)];
    let b = [(0.1, 0.5), (0.55, 0.9)];
    assert_eq!(intersect_arcs(&a, &b), vec![(0.1, 0.2), (0.4, 0.5), (0.55, 0.6)]);
    assert!(intersect_arcs(&a, &[]).is_empty());
    assert!(intersect_arcs(&[(0.0, 0.1)], &[(0.1, 0.2)]).is_empty());
}

fn arc_set() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec(0.0f64..1.0, 0..12).prop_map(|mut cuts| {
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.chunks_exact(2).map(|c| (c[0], c[1])).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn intersection_matches_pointwise_membership(a in arc_set(), b in arc_set(), x in 0.0f64..1.0) {
        let inside = |set: &[(f64, f64)]| set.iter().any(|&(s, e)| s < x && x < e);
        let both = intersect_arcs(&a, &b);
        let on_edge = a.iter().chain(&b).any(|&(s, e)| (x - s).abs() < 1e-12 || (x - e).abs() < 1e-12);
        prop_assume!(!on_edge);
        prop_assert_eq!(inside(&both), inside(&a) && inside(&b));
    }

    #[test]
    fn distance_is_one_lipschitz(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let est = rational_spectrum(2, 5, &ThetaSampling::Period(16), 2).unwrap();
        let dx = distance_to_spectrum(&est, x).unwrap();
        let dy = distance_to_spectrum(&est, y).unwrap();
        prop_assert!(dx <= dy + circ_dist(x, y) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn spectra_are_symmetric(p in 1i64..12, q in 2i64..12) {
        prop_assume!(p < q && gcd(p, q) == 1);
        let est = rational_spectrum(p, q, &ThetaSampling::Period(16), 2).unwrap();
        let (conj, neg) = symmetry_defects(&est);
        prop_assert!(conj <= est.resolution + 1e-12 && neg <= est.resolution + 1e-12, "{} {} {}", conj, neg, est.resolution);
    }
}
