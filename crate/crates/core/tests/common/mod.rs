//! Independent momentum-space reference evolution.
//!
//! A state of finite support evolved for `t` steps never reaches the edge of
//! a torus of side `L > 2 (reach + t) + 1`, so periodic evolution there is
//! exact. On the torus each Fourier component evolves by its own 2x2 Bloch
//! matrix, here applied through its eigen-decomposition.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use qwalk::coin::{Mat2, StepProtocol};
use qwalk::lattice::WalkerState;

type Grid = Vec<[Complex64; 2]>;

fn dft_axis(data: &mut Grid, l: usize, axis: usize, sign: f64) {
    let tw: Vec<Complex64> = (0..l * l).map(|k| Complex64::from_polar(1.0, sign * TAU * (k % l) as f64 / l as f64)).collect();
    let mut out = vec![[Complex64::new(0.0, 0.0); 2]; l * l];
    for a in 0..l {
        for k in 0..l {
            let mut acc = [Complex64::new(0.0, 0.0); 2];
            for m in 0..l {
                let idx = if axis == 0 { m * l + a } else { a * l + m };
                let w = tw[(k * m) % l];
                acc[0] += data[idx][0] * w;
                acc[1] += data[idx][1] * w;
            }
            let o = if axis == 0 { k * l + a } else { a * l + k };
            out[o] = acc;
        }
    }
    *data = out;
}

/// `U^n` of a 2x2 unitary via its eigenvalues (Sylvester form).
fn matrix_power(u: &Mat2, n: u32) -> Mat2 {
    let tr = u.trace();
    let disc = (tr * tr - 4.0 * u.det()).sqrt();
    let l1 = 0.5 * (tr + disc);
    let l2 = 0.5 * (tr - disc);
    let id = Mat2::IDENTITY;
    if (l1 - l2).norm() < 1e-9 {
        let mut p = id;
        for _ in 0..n {
            p = p * *u;
        }
        return p;
    }
    // U^n = (l1^n (U - l2) - l2^n (U - l1)) / (l1 - l2)
    let a = u.sub(&id.scale(l2)).scale(l1.powu(n));
    let b = u.sub(&id.scale(l1)).scale(l2.powu(n));
    a.sub(&b).scale(1.0 / (l1 - l2))
}

/// Evolves `state` for `steps` steps of `protocol` in momentum space. Step
/// `tau` (1-based) uses `U(q_x + tau F, q_y)`.
pub fn momentum_evolve(state: &WalkerState, protocol: &StepProtocol, steps: u32, force_x: f64) -> WalkerState {
    let (hx, hy) = state.half_widths();
    let reach = hx.max(hy) + steps as usize + 2;
    let l = 2 * reach + 1;
    let mut g: Grid = vec![[Complex64::new(0.0, 0.0); 2]; l * l];
    for (mx, my, a) in state.sites() {
        let ix = (mx.rem_euclid(l as i64)) as usize;
        let iy = (my.rem_euclid(l as i64)) as usize;
        g[ix * l + iy] = a;
    }
    dft_axis(&mut g, l, 0, -1.0);
    dft_axis(&mut g, l, 1, -1.0);
    for kx in 0..l {
        for ky in 0..l {
            let q = (TAU * kx as f64 / l as f64, TAU * ky as f64 / l as f64);
            let v = &mut g[kx * l + ky];
            if force_x == 0.0 {
                let u = matrix_power(&protocol.bloch_matrix(q), steps);
                *v = u.apply(*v);
            } else {
                for tau in 1..=steps {
                    let u = protocol.bloch_matrix((q.0 + tau as f64 * force_x, q.1));
                    *v = u.apply(*v);
                }
            }
        }
    }
    dft_axis(&mut g, l, 0, 1.0);
    dft_axis(&mut g, l, 1, 1.0);
    let norm = (l * l) as f64;
    WalkerState::from_fn(reach, reach, |mx, my| {
        let ix = (mx.rem_euclid(l as i64)) as usize;
        let iy = (my.rem_euclid(l as i64)) as usize;
        let a = g[ix * l + iy];
        [a[0] / norm, a[1] / norm]
    })
}

/// Random normalized state supported on `[-reach, reach]^2`.
pub fn random_state(seed: u64, reach: usize) -> WalkerState {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<[Complex64; 2]> = (0..(2 * reach + 1).pow(2))
        .map(|_| {
            [
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            ]
        })
        .collect();
    let n = 2 * reach as i64 + 1;
    let mut s = WalkerState::from_fn(reach, reach, |mx, my| {
        vals[((mx + reach as i64) * n + my + reach as i64) as usize]
    });
    s.normalize().unwrap();
    s
}

/// Momentum-space probability `|psi(q)|^2` on an `n x n` grid over
/// `[-pi, pi)^2`, by direct summation.
pub fn momentum_density(state: &WalkerState, n: usize) -> Vec<((f64, f64), f64)> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let q = (-PI + TAU * i as f64 / n as f64, -PI + TAU * j as f64 / n as f64);
            let mut acc = [Complex64::new(0.0, 0.0); 2];
            for (mx, my, a) in state.sites() {
                let ph = Complex64::from_polar(1.0, -(q.0 * mx as f64 + q.1 * my as f64));
                acc[0] += a[0] * ph;
                acc[1] += a[1] * ph;
            }
            out.push((q, acc[0].norm_sqr() + acc[1].norm_sqr()));
        }
    }
    out
}
