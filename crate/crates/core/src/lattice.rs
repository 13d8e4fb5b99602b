//! Exact position-space evolution of a walker on the 2D integer lattice.
//!
//! Amplitudes live on a dense window `[-M_x, M_x] x [-M_y, M_y] x {L, R}`
//! stored row-major in `(m_x, m_y)` with the coin index innermost. A grating
//! along `x` couples the pair `(L at m, R at m+1)`:
//!
//! ```text
//! L'(m)   = cos(d/2) L(m) + i sin(d/2) e^{-2i a0} R(m+1)
//! R'(m+1) = i sin(d/2) e^{2i a0} L(m) + cos(d/2) R(m+1)
//! ```
//!
//! so each application is a set of independent 2x2 rotations and can be
//! done in place. Before every grating the window grows by one ring along
//! the grating axis whenever either of its two outer rings holds a nonzero
//! amplitude, so no amplitude is ever truncated.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coin::{Axis, CoinSpinor, Mat2, PlateDescriptor, PlateKind, StepProtocol};
use crate::error::{Error, Result};
use crate::export::{Metadata, Table};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Walker wavefunction on a finite lattice window.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkerState {
    half_x: usize,
    half_y: usize,
    amps: Vec<Complex64>,
    auto_grow: bool,
}

impl WalkerState {
    /// All-zero state on the window `[-half_x, half_x] x [-half_y, half_y]`.
    pub fn zeros(half_x: usize, half_y: usize) -> Self {
        let n = (2 * half_x + 1) * (2 * half_y + 1) * 2;
        WalkerState { half_x, half_y, amps: vec![ZERO; n], auto_grow: true }
    }

    /// Fills a window from `f(m_x, m_y) -> [L, R]` without normalizing.
    pub fn from_fn<F>(half_x: usize, half_y: usize, f: F) -> Self
    where
        F: Fn(i64, i64) -> [Complex64; 2],
    {
        let mut s = Self::zeros(half_x, half_y);
        for mx in -(half_x as i64)..=half_x as i64 {
            for my in -(half_y as i64)..=half_y as i64 {
                let i = s.index(mx, my);
                let [l, r] = f(mx, my);
                s.amps[i] = l;
                s.amps[i + 1] = r;
            }
        }
        s
    }

    /// Disables (or re-enables) window growth; a grating that would push
    /// amplitude onto the outermost ring then fails with `WindowOverflow`.
    pub fn with_auto_grow(mut self, on: bool) -> Self {
        self.auto_grow = on;
        self
    }

    pub fn half_widths(&self) -> (usize, usize) {
        (self.half_x, self.half_y)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    fn ny(&self) -> usize {
        2 * self.half_y + 1
    }

    fn nx(&self) -> usize {
        2 * self.half_x + 1
    }

    #[inline]
    fn index(&self, mx: i64, my: i64) -> usize {
        let ix = (mx + self.half_x as i64) as usize;
        let iy = (my + self.half_y as i64) as usize;
        (ix * self.ny() + iy) * 2
    }

    fn contains(&self, mx: i64, my: i64) -> bool {
        mx.unsigned_abs() as usize <= self.half_x && my.unsigned_abs() as usize <= self.half_y
    }

    /// `[L, R]` amplitudes at a site, zero outside the window.
    pub fn amplitude(&self, mx: i64, my: i64) -> [Complex64; 2] {
        if !self.contains(mx, my) {
            return [ZERO; 2];
        }
        let i = self.index(mx, my);
        [self.amps[i], self.amps[i + 1]]
    }

    pub fn set_amplitude(&mut self, mx: i64, my: i64, v: [Complex64; 2]) -> Result<()> {
        if !self.contains(mx, my) {
            return Err(Error::InvalidArgument(format!("site ({mx}, {my}) outside window")));
        }
        let i = self.index(mx, my);
        self.amps[i] = v[0];
        self.amps[i + 1] = v[1];
        Ok(())
    }

    /// Iterates `(m_x, m_y, [L, R])` in row-major ascending order.
    pub fn sites(&self) -> impl Iterator<Item = (i64, i64, [Complex64; 2])> + '_ {
        let (hx, hy, ny) = (self.half_x as i64, self.half_y as i64, self.ny());
        self.amps.chunks_exact(2).enumerate().map(move |(k, c)| {
            let ix = (k / ny) as i64;
            let iy = (k % ny) as i64;
            (ix - hx, iy - hy, [c[0], c[1]])
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidArgument("cannot normalize a zero state".into()));
        }
        for z in &mut self.amps {
            *z /= n;
        }
        Ok(())
    }

    /// `<self|other>` with both windows zero-padded to their union.
    pub fn inner(&self, other: &WalkerState) -> Complex64 {
        let mut acc = ZERO;
        for (mx, my, a) in self.sites() {
            let b = other.amplitude(mx, my);
            acc += a[0].conj() * b[0] + a[1].conj() * b[1];
        }
        acc
    }

    /// `|<self|other>|` for normalized states; 1 means equal up to phase.
    pub fn fidelity(&self, other: &WalkerState) -> f64 {
        self.inner(other).norm()
    }

    /// Largest `|psi|` on the outermost ring of the window.
    pub fn outer_ring_max(&self) -> f64 {
        let (hx, hy) = (self.half_x as i64, self.half_y as i64);
        self.sites()
            .filter(|(mx, my, _)| mx.abs() == hx || my.abs() == hy)
            .flat_map(|(_, _, c)| c)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest window still holding every nonzero amplitude.
    pub fn support_bounds(&self) -> Option<(i64, i64, i64, i64)> {
        let mut b: Option<(i64, i64, i64, i64)> = None;
        for (mx, my, c) in self.sites() {
            if c[0] != ZERO || c[1] != ZERO {
                b = Some(match b {
                    None => (mx, mx, my, my),
                    Some((a, bb, cc, d)) => (a.min(mx), bb.max(mx), cc.min(my), d.max(my)),
                });
            }
        }
        b
    }

    fn ring_nonzero(&self, axis: Axis, depth: usize) -> bool {
        let h = match axis {
            Axis::X => self.half_x,
            Axis::Y => self.half_y,
        };
        if depth > h {
            return false;
        }
        let edge = (h - depth) as i64;
        self.sites().any(|(mx, my, c)| {
            let m = match axis {
                Axis::X => mx,
                Axis::Y => my,
            };
            m.abs() == edge && (c[0] != ZERO || c[1] != ZERO)
        })
    }

    /// Re-embeds into a window at least `(half_x, half_y)` wide.
    pub fn grown_to(&self, half_x: usize, half_y: usize) -> WalkerState {
        let hx = half_x.max(self.half_x);
        let hy = half_y.max(self.half_y);
        if hx == self.half_x && hy == self.half_y {
            return self.clone();
        }
        let mut out = WalkerState::zeros(hx, hy);
        out.auto_grow = self.auto_grow;
        let row = 2 * self.ny();
        for ix in 0..self.nx() {
            let mx = ix as i64 - self.half_x as i64;
            let dst = out.index(mx, -(self.half_y as i64));
            out.amps[dst..dst + row].copy_from_slice(&self.amps[ix * row..(ix + 1) * row]);
        }
        out
    }

    fn prepare_shift(&mut self, axis: Axis) -> Result<()> {
        while self.ring_nonzero(axis, 0) || self.ring_nonzero(axis, 1) {
            if !self.auto_grow {
                return Err(Error::WindowOverflow { axis: if axis == Axis::X { "x" } else { "y" } });
            }
            *self = match axis {
                Axis::X => self.grown_to(self.half_x + 1, self.half_y),
                Axis::Y => self.grown_to(self.half_x, self.half_y + 1),
            };
        }
        Ok(())
    }

    fn apply_coin_in_place(&mut self, m: &Mat2) {
        for c in self.amps.chunks_exact_mut(2) {
            let [l, r] = m.apply([c[0], c[1]]);
            c[0] = l;
            c[1] = r;
        }
    }

    fn apply_grating_in_place(&mut self, axis: Axis, delta: f64, alpha0: f64) -> Result<()> {
        self.prepare_shift(axis)?;
        let c = (0.5 * delta).cos();
        let s = (0.5 * delta).sin();
        let k_lr = Complex64::new(0.0, s) * Complex64::from_polar(1.0, -2.0 * alpha0);
        let k_rl = Complex64::new(0.0, s) * Complex64::from_polar(1.0, 2.0 * alpha0);
        // stride between neighbours along the axis, in amplitude units
        let (stride, nx, ny) = match axis {
            Axis::X => (2 * self.ny(), self.nx(), self.ny()),
            Axis::Y => (2, self.nx(), self.ny()),
        };
        let amps = &mut self.amps;
        let mut rotate = |base: usize| {
            let l = amps[base];
            let r = amps[base + stride + 1];
            amps[base] = c * l + k_lr * r;
            amps[base + stride + 1] = k_rl * l + c * r;
        };
        match axis {
            Axis::X => {
                for ix in 0..nx - 1 {
                    for iy in 0..ny {
                        rotate((ix * ny + iy) * 2);
                    }
                }
            }
            Axis::Y => {
                for ix in 0..nx {
                    for iy in 0..ny - 1 {
                        rotate((ix * ny + iy) * 2);
                    }
                }
            }
        }
        // unpaired components on the window edge; both are zero after growth
        for (ix, iy) in self.edge_sites(axis) {
            let base = (ix * ny + iy) * 2;
            let (lo, hi) = match axis {
                Axis::X => (ix == 0, ix == nx - 1),
                Axis::Y => (iy == 0, iy == ny - 1),
            };
            if lo {
                self.amps[base + 1] *= c;
            }
            if hi {
                self.amps[base] *= c;
            }
        }
        Ok(())
    }

    fn edge_sites(&self, axis: Axis) -> Vec<(usize, usize)> {
        let (nx, ny) = (self.nx(), self.ny());
        match axis {
            Axis::X => (0..ny).flat_map(|iy| [(0, iy), (nx - 1, iy)]).collect(),
            Axis::Y => (0..nx).flat_map(|ix| [(ix, 0), (ix, ny - 1)]).collect(),
        }
    }

    /// Applies one plate in place.
    pub fn apply_plate_mut(&mut self, plate: &PlateDescriptor, lambda: f64) -> Result<()> {
        let alpha = plate.effective_alpha0(lambda);
        match plate.kind {
            PlateKind::Uniform => {
                let m = plate.bloch_matrix((0.0, 0.0), lambda);
                self.apply_coin_in_place(&m);
                Ok(())
            }
            PlateKind::Grating(axis) => {
                if plate.delta == 0.0 {
                    return Ok(());
                }
                self.apply_grating_in_place(axis, plate.delta, alpha)
            }
        }
    }

    /// Applies every plate of `protocol` in order.
    pub fn apply_step_mut(&mut self, protocol: &StepProtocol) -> Result<()> {
        for p in &protocol.plates {
            self.apply_plate_mut(p, protocol.lambda)?;
        }
        Ok(())
    }
}

/// Single-site state `|m, coin>`.
pub fn localized_state(m: (i64, i64), coin: CoinSpinor) -> Result<WalkerState> {
    let n = coin.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("coin must be normalized, |coin| = {n}")));
    }
    let mut s = WalkerState::zeros(m.0.unsigned_abs() as usize, m.1.unsigned_abs() as usize);
    s.set_amplitude(m.0, m.1, coin.as_array())?;
    Ok(s)
}

/// Pure version of [`WalkerState::apply_plate_mut`].
pub fn apply_plate(state: &WalkerState, plate: &PlateDescriptor, lambda: f64) -> Result<WalkerState> {
    let mut out = state.clone();
    out.apply_plate_mut(plate, lambda)?;
    Ok(out)
}

/// `t` steps of `protocol`; with `force_x != 0` the x-gratings of the step
/// that produces state `tau` (1-based) carry `alpha0 - tau F_x / 2`.
pub fn evolve(state: &WalkerState, protocol: &StepProtocol, steps: u32, force_x: f64) -> Result<WalkerState> {
    let mut out = state.clone();
    for tau in 1..=steps {
        out.apply_step_mut(&protocol.with_force(tau, force_x))?;
    }
    Ok(out)
}

/// Like [`evolve`] but calls `observe(t, state)` for `t = 0..=steps`.
pub fn evolve_observed<F>(
    state: &WalkerState,
    protocol: &StepProtocol,
    steps: u32,
    force_x: f64,
    mut observe: F,
) -> Result<WalkerState>
where
    F: FnMut(u32, &WalkerState),
{
    let mut out = state.clone();
    observe(0, &out);
    for tau in 1..=steps {
        out.apply_step_mut(&protocol.with_force(tau, force_x))?;
        observe(tau, &out);
    }
    Ok(out)
}

/// Evolves with an arbitrary per-step protocol `schedule(tau)`, `tau = 1..=steps`.
pub fn evolve_schedule<F>(state: &WalkerState, steps: u32, mut schedule: F) -> Result<WalkerState>
where
    F: FnMut(u32) -> StepProtocol,
{
    let mut out = state.clone();
    for tau in 1..=steps {
        out.apply_step_mut(&schedule(tau))?;
    }
    Ok(out)
}

/// Site probabilities on a rectangular window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub half_x: usize,
    pub half_y: usize,
    /// Row-major in `(m_x, m_y)`, both ascending.
    pub probabilities: Vec<f64>,
    pub total: f64,
}

impl Distribution {
    pub fn zeros(half_x: usize, half_y: usize) -> Self {
        Distribution { half_x, half_y, probabilities: vec![0.0; (2 * half_x + 1) * (2 * half_y + 1)], total: 0.0 }
    }

    /// Builds a distribution from `(m_x, m_y, p)` triples; repeated sites add.
    pub fn from_points(points: &[(i64, i64, f64)]) -> Result<Self> {
        let hx = points.iter().map(|p| p.0.unsigned_abs()).max().unwrap_or(0) as usize;
        let hy = points.iter().map(|p| p.1.unsigned_abs()).max().unwrap_or(0) as usize;
        let mut d = Distribution::zeros(hx, hy);
        for &(mx, my, p) in points {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidArgument(format!("probability at ({mx}, {my}) is {p}")));
            }
            let i = d.index(mx, my);
            d.probabilities[i] += p;
        }
        d.total = d.probabilities.iter().sum();
        Ok(d)
    }

    fn ny(&self) -> usize {
        2 * self.half_y + 1
    }

    fn index(&self, mx: i64, my: i64) -> usize {
        (mx + self.half_x as i64) as usize * self.ny() + (my + self.half_y as i64) as usize
    }

    pub fn get(&self, mx: i64, my: i64) -> f64 {
        if mx.unsigned_abs() as usize > self.half_x || my.unsigned_abs() as usize > self.half_y {
            return 0.0;
        }
        self.probabilities[self.index(mx, my)]
    }

    /// `(m_x, m_y, p)` in row-major ascending order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let (hx, hy, ny) = (self.half_x as i64, self.half_y as i64, self.ny());
        self.probabilities
            .iter()
            .enumerate()
            .map(move |(k, &p)| ((k / ny) as i64 - hx, (k % ny) as i64 - hy, p))
    }

    pub fn normalized(&self) -> Result<Distribution> {
        if !(self.total > 0.0) {
            return Err(Error::InvalidArgument("distribution holds no probability".into()));
        }
        let mut d = self.clone();
        for p in &mut d.probabilities {
            *p /= self.total;
        }
        d.total = d.probabilities.iter().sum();
        Ok(d)
    }

    pub fn center_of_mass(&self) -> (f64, f64) {
        let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
        for (mx, my, p) in self.iter() {
            sx += mx as f64 * p;
            sy += my as f64 * p;
            s += p;
        }
        if s == 0.0 {
            return (0.0, 0.0);
        }
        (sx / s, sy / s)
    }

    /// `sum p(m) f(m)` over the window.
    pub fn expectation<F: Fn(i64, i64) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(mx, my, p)| p * f(mx, my)).sum()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["m_x", "m_y", "p"]);
        for (mx, my, p) in self.iter() {
            t.push_row([mx.to_string(), my.to_string(), p.to_string()]);
        }
        t
    }

    pub fn to_csv(&self, meta: Option<&Metadata>) -> Result<String> {
        self.to_table().to_csv(meta)
    }

    /// Reads a `m_x,m_y,p` table (comment lines allowed).
    pub fn from_csv(text: &str) -> Result<Distribution> {
        let t = Table::from_csv(text)?;
        let (cx, cy, cp) = (t.column("m_x")?, t.column("m_y")?, t.column("p")?);
        let parse_err = |s: &str| Error::InvalidArgument(format!("bad number {s:?}"));
        let mut pts = Vec::with_capacity(t.rows.len());
        for r in &t.rows {
            let mx = r[cx].parse::<i64>().map_err(|_| parse_err(&r[cx]))?;
            let my = r[cy].parse::<i64>().map_err(|_| parse_err(&r[cy]))?;
            let p = r[cp].parse::<f64>().map_err(|_| parse_err(&r[cp]))?;
            pts.push((mx, my, p));
        }
        Distribution::from_points(&pts)
    }
}

/// `p(m) = sum_coin |psi(m, coin)|^2`.
pub fn distribution(state: &WalkerState) -> Distribution {
    let probabilities: Vec<f64> = state.amps.chunks_exact(2).map(|c| c[0].norm_sqr() + c[1].norm_sqr()).collect();
    let total = probabilities.iter().sum();
    Distribution { half_x: state.half_x, half_y: state.half_y, probabilities, total }
}

/// `p(m) = |<analyzer|psi(m)>|^2`; not renormalized.
pub fn projected_distribution(state: &WalkerState, analyzer: &CoinSpinor) -> Distribution {
    let probabilities: Vec<f64> = state
        .amps
        .chunks_exact(2)
        .map(|c| (analyzer.l.conj() * c[0] + analyzer.r.conj() * c[1]).norm_sqr())
        .collect();
    let total = probabilities.iter().sum();
    Distribution { half_x: state.half_x, half_y: state.half_y, probabilities, total }
}

/// `S = (sum sqrt(P_e P_s))^2 / (sum P_e * sum P_s)`, windows zero-padded.
pub fn similarity(pe: &Distribution, ps: &Distribution) -> Result<f64> {
    let se: f64 = pe.probabilities.iter().sum();
    let ss: f64 = ps.probabilities.iter().sum();
    if se <= 0.0 || ss <= 0.0 {
        return Err(Error::InvalidArgument("similarity needs two distributions with nonzero mass".into()));
    }
    let overlap: f64 = pe.iter().map(|(mx, my, p)| (p * ps.get(mx, my)).sqrt()).sum();
    Ok((overlap * overlap / (se * ss)).min(1.0))
}

/// Probability-weighted mean position of a state.
pub fn center_of_mass(state: &WalkerState) -> (f64, f64) {
    distribution(state).center_of_mass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin::{protocol_u, protocol_u_inverse, DEFAULT_PERIOD};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn grating(axis: Axis, delta: f64) -> PlateDescriptor {
        PlateDescriptor::grating(axis, delta)
    }

    #[test]
    fn localized_states() {
        let s = localized_state((2, -1), CoinSpinor::R).unwrap();
        let d = distribution(&s);
        assert_eq!(d.get(2, -1), 1.0);
        assert_eq!(d.total, 1.0);
        assert!(localized_state((0, 0), CoinSpinor::new(1.0.into(), 1.0.into())).is_err());
    }

    #[test]
    fn full_conversion_moves_l_to_r_at_plus_one() {
        let a0 = 0.37;
        let s = localized_state((0, 0), CoinSpinor::L).unwrap();
        let out = apply_plate(&s, &grating(Axis::X, PI).with_alpha0(a0), DEFAULT_PERIOD).unwrap();
        let amp = out.amplitude(1, 0);
        let expected = Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, 2.0 * a0);
        assert!((amp[1] - expected).norm() < 1e-15);
        assert!(amp[0].norm() < 1e-15);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn half_conversion_splits_h_three_ways() {
        let s = localized_state((0, 0), CoinSpinor::h()).unwrap();
        let d = distribution(&apply_plate(&s, &grating(Axis::X, FRAC_PI_2), DEFAULT_PERIOD).unwrap());
        assert!((d.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((d.get(1, 0) - 0.25).abs() < 1e-15);
        assert!((d.get(-1, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_retardation_grating_is_identity() {
        let s = localized_state((0, 1), CoinSpinor::a()).unwrap();
        let out = apply_plate(&s, &grating(Axis::Y, 0.0), DEFAULT_PERIOD).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn zero_steps_returns_input() {
        let s = localized_state((0, 0), CoinSpinor::h()).unwrap();
        assert_eq!(evolve(&s, &protocol_u(FRAC_PI_2).unwrap(), 0, 0.0).unwrap(), s);
    }

    #[test]
    fn window_keeps_outer_ring_empty_and_respects_light_cone() {
        let u = protocol_u(FRAC_PI_2).unwrap();
        let mut s = localized_state((0, 0), CoinSpinor::h()).unwrap();
        for t in 1..=20 {
            s = evolve(&s, &u, 1, 0.0).unwrap();
            assert!(s.outer_ring_max() == 0.0);
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            let (x0, x1, y0, y1) = s.support_bounds().unwrap();
            assert!(x0 >= -t && x1 <= t && y0 >= -t && y1 <= t);
        }
    }

    #[test]
    fn overflow_reported_when_growth_disabled() {
        let s = localized_state((0, 0), CoinSpinor::h()).unwrap().with_auto_grow(false);
        let err = evolve(&s, &protocol_u(FRAC_PI_2).unwrap(), 1, 0.0).unwrap_err();
        assert!(matches!(err, Error::WindowOverflow { axis: "x" }));
        let roomy = s.grown_to(4, 4);
        assert!(evolve(&roomy, &protocol_u(FRAC_PI_2).unwrap(), 1, 0.0).is_ok());
    }

    #[test]
    fn inverse_protocol_restores_state() {
        let s = localized_state((1, -2), CoinSpinor::a()).unwrap();
        let fwd = evolve(&s, &protocol_u(1.1).unwrap(), 4, 0.0).unwrap();
        let back = evolve(&fwd, &protocol_u_inverse(1.1).unwrap(), 4, 0.0).unwrap();
        assert!(back.fidelity(&s) > 1.0 - 1e-12);
    }

    #[test]
    fn force_equals_plate_shift() {
        let u = protocol_u(FRAC_PI_2).unwrap();
        let s = localized_state((0, 0), CoinSpinor::h()).unwrap();
        let f = PI / 10.0;
        let a = evolve(&s, &u, 3, f).unwrap();
        let b = evolve_schedule(&s, 3, |tau| {
            let mut p = u.clone();
            p.plates[1].shift = crate::coin::force_plate_shift(tau, f, u.lambda);
            p
        })
        .unwrap();
        assert!(a.fidelity(&b) > 1.0 - 1e-12);
        assert!((a.inner(&b) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn similarity_examples() {
        let a = Distribution::from_points(&[(0, 0, 0.5), (1, 0, 0.5)]).unwrap();
        let b = Distribution::from_points(&[(3, 3, 1.0)]).unwrap();
        assert!((similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(similarity(&a, &b).unwrap(), 0.0);
        assert!(similarity(&Distribution::zeros(1, 1), &a).is_err());
    }

    #[test]
    fn center_of_mass_examples() {
        let d = Distribution::from_points(&[(1, 0, 0.5), (-1, 0, 0.5)]).unwrap();
        assert_eq!(d.center_of_mass(), (0.0, 0.0));
        let s = localized_state((0, 0), CoinSpinor::L).unwrap();
        assert_eq!(center_of_mass(&s), (0.0, 0.0));
    }

    #[test]
    fn analyzer_projection_splits_probability() {
        let s = evolve(&localized_state((0, 0), CoinSpinor::h()).unwrap(), &protocol_u(0.9).unwrap(), 3, 0.0).unwrap();
        let l = projected_distribution(&s, &CoinSpinor::L);
        let r = projected_distribution(&s, &CoinSpinor::R);
        assert!((l.total + r.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_is_row_major() {
        let d = Distribution::from_points(&[(-1, 1, 0.25), (1, -1, 0.75)]).unwrap();
        let text = d.to_csv(None).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "m_x,m_y,p");
        assert_eq!(lines[1], "-1,-1,0");
        assert_eq!(lines[3], "-1,1,0.25");
        assert_eq!(Distribution::from_csv(&text).unwrap(), d);
    }
}
