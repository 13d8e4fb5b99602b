use std::f64::consts::{FRAC_PI_2, PI};

use qwalk::bloch;
use qwalk::edge::*;

#[test]
fn edge_counts_match_chern_number_on_small_strip() {
    for (delta, w) in [(PI / 8.0, (0, 0)), (FRAC_PI_2, (1, 0)), (7.0 * PI / 8.0, (1, 1))] {
        let r = bulk_edge_check(delta, 20, 201, Boundary::Reflecting).unwrap();
        assert_eq!((r.invariants.w0, r.invariants.wpi), w, "delta={delta}");
        // the two edges carry opposite chirality
        assert_eq!(r.invariants.left, (-r.invariants.right.0, -r.invariants.right.1));
        assert!(r.holds);
    }
}

#[test]
fn boundary_completion_does_not_change_counts() {
    let a = edge_invariants(&strip_spectrum(FRAC_PI_2, 20, 201, Boundary::Reflecting).unwrap(), LAMBDA_EDGE).unwrap();
    let b = edge_invariants(&strip_spectrum(FRAC_PI_2, 20, 201, Boundary::Truncated).unwrap(), LAMBDA_EDGE).unwrap();
    assert_eq!(a, b);
}

#[test]
fn strip_spectrum_is_mirror_symmetric() {
    let s = strip_spectrum(7.0 * PI / 8.0, 12, 24, Boundary::Reflecting).unwrap();
    assert!(s.mirror_asymmetry() < 1e-9);
    assert_eq!(s.columns[0].epsilon.len(), 2 * 25);
    assert_eq!(s.to_table().rows.len(), 24 * 50);
}

#[test]
fn bulk_states_lie_inside_bulk_bands() {
    // delocalized strip states must sit inside the bulk quasi-energy range of
    // their q_y, up to the finite-size resolution in q_x
    let delta = 1.2;
    let s = strip_spectrum(delta, 30, 16, Boundary::Reflecting).unwrap();
    for c in &s.columns {
        let eps: Vec<f64> = (0..400)
            .map(|i| bloch::quasi_energy((-PI + 2.0 * PI * i as f64 / 400.0, c.q_y), delta).unwrap())
            .collect();
        let lo = eps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for k in 0..c.epsilon.len() {
            if c.lambda[k] > -0.2 {
                let e = c.epsilon[k].abs();
                assert!(e > lo - 0.05 && e < hi + 0.05, "q_y={} eps={e} not in [{lo}, {hi}]", c.q_y);
            }
        }
    }
}

#[test]
fn near_critical_retardation_is_rejected() {
    let s = strip_spectrum(PI / 4.0, 10, 16, Boundary::Reflecting).unwrap();
    assert!(matches!(edge_invariants(&s, LAMBDA_EDGE), Err(qwalk::error::Error::NearCritical { .. })));
    assert!(strip_spectrum(FRAC_PI_2, 10, 3, Boundary::Reflecting).is_err());
}
