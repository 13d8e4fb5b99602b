mod common;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;
use qwalk::bloch::{self, Band};
use qwalk::coin::{g_plate_momentum, lc_plate, protocol_u, protocol_u_inverse, Axis, CoinSpinor, Mat2};
use qwalk::lattice::{distribution, evolve, localized_state, similarity, Distribution};
use qwalk::optics::{camera_position, camera_to_wavevector, OpticalConfig};

fn gapped_delta() -> impl Strategy<Value = f64> {
    // stay clear of the closings at pi/4, 3pi/4 and 0
    prop_oneof![0.05..0.7f64, 0.85..2.28f64, 2.42..3.09f64]
}

fn momentum() -> impl Strategy<Value = (f64, f64)> {
    (-PI..PI, -PI..PI)
}

fn spinor() -> impl Strategy<Value = CoinSpinor> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero", |v| v.0.abs() + v.1.abs() + v.2.abs() + v.3.abs() > 1e-3)
        .prop_map(|v| CoinSpinor::new(Complex64::new(v.0, v.1), Complex64::new(v.2, v.3)).normalized().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plates_are_unitary(delta in -10.0..10.0f64, alpha in -10.0..10.0f64, q in -PI..PI) {
        let lc = lc_plate(delta, alpha).unwrap().matrix;
        prop_assert!(lc.unitarity_error() < 1e-12);
        for axis in [Axis::X, Axis::Y] {
            let g = g_plate_momentum(axis, delta, alpha, q).unwrap().matrix;
            prop_assert!(g.unitarity_error() < 1e-12);
        }
    }

    #[test]
    fn step_and_inverse_cancel(delta in 0.01..6.27f64, q in momentum()) {
        let u = protocol_u(delta).unwrap().bloch_matrix(q);
        let v = protocol_u_inverse(delta).unwrap().bloch_matrix(q);
        prop_assert!(u.unitarity_error() < 1e-12);
        prop_assert!((v * u).phase_distance(&Mat2::IDENTITY) < 1e-10);
    }

    #[test]
    fn norm_is_conserved_over_twenty_steps(delta in 0.0..TAU, coin in spinor(), force in -1.0..1.0f64) {
        let s = localized_state((0, 0), coin).unwrap();
        let out = evolve(&s, &protocol_u(delta).unwrap(), 20, force).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn walker_stays_inside_light_cone(delta in 0.0..TAU, coin in spinor(), steps in 1u32..12) {
        let s = localized_state((0, 0), coin).unwrap();
        let out = evolve(&s, &protocol_u(delta).unwrap(), steps, 0.0).unwrap();
        let t = steps as i64;
        for (mx, my, a) in out.sites() {
            if mx.abs() > t || my.abs() > t {
                prop_assert!(a[0].norm() + a[1].norm() == 0.0);
            }
        }
    }

    #[test]
    fn inverse_protocol_restores_state(delta in 0.01..6.27f64, seed in 0u64..1000, steps in 1u32..8) {
        let s = common::random_state(seed, 1);
        let fwd = evolve(&s, &protocol_u(delta).unwrap(), steps, 0.0).unwrap();
        let back = evolve(&fwd, &protocol_u_inverse(delta).unwrap(), steps, 0.0).unwrap();
        prop_assert!(back.fidelity(&s) > 1.0 - 1e-10);
    }

    #[test]
    fn bands_are_opposite(delta in gapped_delta(), q in momentum()) {
        let b = bloch::bloch_hamiltonian(q, delta).unwrap();
        prop_assert!(b.epsilon >= 0.0 && b.epsilon <= PI);
        prop_assert!(b.reconstruct().max_abs_diff(&protocol_u(delta).unwrap().bloch_matrix(q)) < 1e-10);
        let vp = bloch::group_velocity(q, delta, Band::Upper).unwrap();
        let vm = bloch::group_velocity(q, delta, Band::Lower).unwrap();
        prop_assert!((vp.0 + vm.0).abs() < 1e-12 && (vp.1 + vm.1).abs() < 1e-12);
    }

    #[test]
    fn curvatures_of_the_two_bands_cancel(delta in gapped_delta(), q in momentum()) {
        let up = bloch::berry_curvature(q, delta, Band::Upper);
        let lo = bloch::berry_curvature(q, delta, Band::Lower);
        if let (Ok(up), Ok(lo)) = (up, lo) {
            prop_assert!((up + lo).abs() < 1e-6 * (1.0 + up.abs()));
        }
        let up = bloch::berry_curvature_eigenstate(q, delta, Band::Upper);
        let lo = bloch::berry_curvature_eigenstate(q, delta, Band::Lower);
        if let (Ok(up), Ok(lo)) = (up, lo) {
            prop_assert!((up + lo).abs() < 1e-4 * (1.0 + up.abs()));
        }
    }

    #[test]
    fn eigenspinors_diagonalize_the_step(delta in gapped_delta(), q in momentum()) {
        let b = bloch::bloch_hamiltonian(q, delta).unwrap();
        let u = protocol_u(delta).unwrap().bloch_matrix(q);
        for (band, phase) in [(Band::Upper, -b.epsilon), (Band::Lower, b.epsilon)] {
            let phi = b.eigenspinor(band);
            let out = u.apply(phi.as_array());
            let want = Complex64::from_polar(1.0, phase);
            prop_assert!((out[0] - want * phi.l).norm() + (out[1] - want * phi.r).norm() < 1e-10);
        }
        prop_assert!(b.phi_plus.inner(&b.phi_minus).norm() < 1e-10);
    }

    #[test]
    fn similarity_is_bounded_and_symmetric(seed_a in 0u64..500, seed_b in 0u64..500) {
        let a = distribution(&common::random_state(seed_a, 2));
        let b = distribution(&common::random_state(seed_b, 3));
        let sab = similarity(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&sab));
        prop_assert!((sab - similarity(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distribution_csv_round_trips(seed in 0u64..500) {
        let d = distribution(&common::random_state(seed, 2));
        let back = Distribution::from_csv(&d.to_csv(None).unwrap()).unwrap();
        for (mx, my, p) in d.iter() {
            prop_assert!((back.get(mx, my) - p).abs() <= 1e-15 * (1.0 + p));
        }
    }

    #[test]
    fn camera_mapping_inverts(kx in -1e5..1e5f64, ky in -1e5..1e5f64) {
        let c = OpticalConfig::default();
        let back = camera_to_wavevector(camera_position((kx, ky), &c), &c);
        prop_assert!((back.0 - kx).abs() < 1e-9 * (1.0 + kx.abs()));
        prop_assert!((back.1 - ky).abs() < 1e-9 * (1.0 + ky.abs()));
    }
}

#[test]
fn chern_number_is_stable_under_refinement() {
    for delta in [PI / 8.0, PI / 2.0, 7.0 * PI / 8.0] {
        let values: Vec<i64> = [24, 48, 96]
            .iter()
            .map(|&n| bloch::chern_number(delta, Band::Lower, n).unwrap().value)
            .collect();
        assert!(values.windows(2).all(|w| w[0] == w[1]), "{delta}: {values:?}");
        let up = bloch::chern_number(delta, Band::Upper, 48).unwrap().value;
        assert_eq!(up, -values[0]);
    }
}

#[test]
fn curvature_integrates_to_chern_number() {
    let v = bloch::curvature_integral(PI / 2.0, Band::Lower, 64).unwrap();
    assert!((v - 1.0).abs() < 1e-3, "{v}");
    let v = bloch::curvature_integral(7.0 * PI / 8.0, Band::Lower, 64).unwrap();
    assert!(v.abs() < 1e-3, "{v}");
}
