//! Floquet bands of `U(q) = T_y(q_y) T_x(q_x) W`.
//!
//! `U(q) = cos(eps) - i sin(eps) n(q).sigma` with `eps in [0, pi]`. The upper
//! band `+` is the `+1` eigenvector of `n.sigma`, so `U phi_+ = e^{-i eps} phi_+`;
//! the lower band `-` has eigenphase `e^{+i eps}`.
//!
//! Two curvature conventions are exposed:
//! * [`berry_curvature`] is `+-1/2 n.(d_x n x d_y n)` for band `+-`, and
//!   [`chern_number`] integrates it (lower band `+1` inside the topological
//!   window).
//! * [`berry_curvature_eigenstate`] is the curl of `A = i<phi|grad phi>`. It
//!   is the opposite sign and is the one that drives the wavepacket dynamics.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coin::{protocol_u, CoinSpinor, Mat2, StepProtocol};
use crate::error::{ensure_finite, Error, Result};
use crate::export::Table;
use crate::par;

/// Finite-difference step for velocities and curvature.
pub const FD_STEP: f64 = 1e-5;
/// `sin(eps)` below this marks a gap-closing point.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Upper,
    Lower,
}

impl Band {
    /// `+1` for the upper band, `-1` for the lower.
    pub fn sign(self) -> f64 {
        match self {
            Band::Upper => 1.0,
            Band::Lower => -1.0,
        }
    }

    pub fn opposite(self) -> Band {
        match self {
            Band::Upper => Band::Lower,
            Band::Lower => Band::Upper,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Band::Upper => "+",
            Band::Lower => "-",
        }
    }

    pub fn parse(s: &str) -> Result<Band> {
        match s.trim().to_ascii_lowercase().as_str() {
            "+" | "upper" | "plus" => Ok(Band::Upper),
            "-" | "lower" | "minus" => Ok(Band::Lower),
            other => Err(Error::InvalidArgument(format!("unknown band {other:?}"))),
        }
    }
}

/// Closed-form `cos(eps)`.
pub fn cos_quasi_energy(q: (f64, f64), delta: f64) -> f64 {
    let a = (0.5 * delta).cos();
    let b = (0.5 * delta).sin();
    (a * a - a * b * (q.0.cos() + q.1.cos()) - b * b * (q.0 - q.1).cos()) * FRAC_1_SQRT_2
}

/// `Re tr U(q) / 2` from the explicit plate product.
pub fn half_trace(q: (f64, f64), delta: f64) -> Result<f64> {
    Ok(0.5 * protocol_u(delta)?.bloch_matrix(q).trace().re)
}

/// Principal quasi-energy `eps in [0, pi]`; bands are `+-eps`.
pub fn quasi_energy(q: (f64, f64), delta: f64) -> Result<f64> {
    ensure_finite("q_x", q.0)?;
    ensure_finite("q_y", q.1)?;
    ensure_finite("delta", delta)?;
    let c = cos_quasi_energy(q, delta);
    if c.abs() > 1.0 + 1e-9 {
        return Err(Error::NumericalDomain(format!("cos eps = {c} at q = ({}, {})", q.0, q.1)));
    }
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// Eigenphases `-arg(lambda)` of an arbitrary 2x2 unitary, ascending.
pub fn eigenphases(m: &Mat2) -> [f64; 2] {
    let tr = m.trace();
    let disc = (tr * tr - 4.0 * m.det()).sqrt();
    let l1 = 0.5 * (tr + disc);
    let l2 = 0.5 * (tr - disc);
    let (a, b) = (-l1.arg(), -l2.arg());
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Band data at one quasi-momentum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochSample {
    pub q: (f64, f64),
    pub delta: f64,
    pub epsilon: f64,
    pub n: [f64; 3],
    pub phi_plus: CoinSpinor,
    pub phi_minus: CoinSpinor,
    /// Curvature of the lower band in the [`berry_curvature`] convention.
    pub omega_minus: f64,
}

impl BlochSample {
    pub fn eigenspinor(&self, band: Band) -> CoinSpinor {
        match band {
            Band::Upper => self.phi_plus,
            Band::Lower => self.phi_minus,
        }
    }

    /// `cos(eps) - i sin(eps) n.sigma`.
    pub fn reconstruct(&self) -> Mat2 {
        unit_from_axis(self.epsilon, self.n)
    }
}

fn unit_from_axis(eps: f64, n: [f64; 3]) -> Mat2 {
    let (c, s) = (eps.cos(), eps.sin());
    let mi = Complex64::new(0.0, -s);
    Mat2::new(
        Complex64::new(c, 0.0) + mi * n[2],
        mi * Complex64::new(n[0], -n[1]),
        mi * Complex64::new(n[0], n[1]),
        Complex64::new(c, 0.0) - mi * n[2],
    )
}

/// Unit axis of `U = cos(eps) - i sin(eps) n.sigma`, or `None` when `sin eps`
/// is below the degeneracy tolerance.
pub fn axis_of(u: &Mat2) -> Option<(f64, [f64; 3])> {
    let c = (0.5 * u.trace().re).clamp(-1.0, 1.0);
    let eps = c.acos();
    let s = eps.sin();
    if s < DEGENERACY_TOL {
        return None;
    }
    // n.sigma = i (U - cos eps) / sin eps
    let m = u.sub(&Mat2::IDENTITY.scale(c.into())).scale(Complex64::new(0.0, 1.0 / s));
    let m = &m.0;
    let nx = 0.5 * (m[0][1] + m[1][0]).re;
    let ny = 0.5 * (m[1][0] - m[0][1]).im;
    let nz = 0.5 * (m[0][0] - m[1][1]).re;
    let norm = (nx * nx + ny * ny + nz * nz).sqrt();
    Some((eps, [nx / norm, ny / norm, nz / norm]))
}

/// `(+1, -1)` eigenvectors of `n.sigma` in a fixed local gauge.
pub fn eigenspinors(n: [f64; 3]) -> (CoinSpinor, CoinSpinor) {
    let [nx, ny, nz] = n;
    let up = if nz >= 0.0 {
        CoinSpinor::new(Complex64::new(1.0 + nz, 0.0), Complex64::new(nx, ny))
    } else {
        CoinSpinor::new(Complex64::new(nx, -ny), Complex64::new(1.0 - nz, 0.0))
    };
    let down = if nz >= 0.0 {
        CoinSpinor::new(Complex64::new(nx, -ny), Complex64::new(-(1.0 + nz), 0.0))
    } else {
        CoinSpinor::new(Complex64::new(-(1.0 - nz), 0.0), Complex64::new(nx, ny))
    };
    let nu = up.norm();
    let nd = down.norm();
    (CoinSpinor::new(up.l / nu, up.r / nu), CoinSpinor::new(down.l / nd, down.r / nd))
}

/// Band eigenvector of an arbitrary step matrix; `None` at a degeneracy.
pub fn band_state_of(u: &Mat2, band: Band) -> Option<CoinSpinor> {
    let (_, n) = axis_of(u)?;
    let (p, m) = eigenspinors(n);
    Some(match band {
        Band::Upper => p,
        Band::Lower => m,
    })
}

fn unit_axis(q: (f64, f64), delta: f64, u: &StepProtocol) -> Result<(f64, [f64; 3])> {
    axis_of(&u.bloch_matrix(q)).ok_or_else(|| Error::DegeneratePoint {
        qx: q.0,
        qy: q.1,
        sin_eps: quasi_energy(q, delta).map(f64::sin).unwrap_or(0.0),
    })
}

/// `eps`, `n` and both eigenspinors at `q`.
pub fn bloch_hamiltonian(q: (f64, f64), delta: f64) -> Result<BlochSample> {
    let eps = quasi_energy(q, delta)?;
    if eps.sin() < DEGENERACY_TOL {
        return Err(Error::DegeneratePoint { qx: q.0, qy: q.1, sin_eps: eps.sin() });
    }
    let u = protocol_u(delta)?;
    let (_, n) = unit_axis(q, delta, &u)?;
    let (phi_plus, phi_minus) = eigenspinors(n);
    let omega_minus = curvature_from_axis(q, delta, &u, n)? * Band::Lower.sign();
    Ok(BlochSample { q, delta, epsilon: eps, n, phi_plus, phi_minus, omega_minus })
}

fn ensure_gapped(q: (f64, f64), delta: f64) -> Result<f64> {
    let eps = quasi_energy(q, delta)?;
    if eps.sin() < DEGENERACY_TOL {
        return Err(Error::DegeneratePoint { qx: q.0, qy: q.1, sin_eps: eps.sin() });
    }
    Ok(eps)
}

/// `v^(+-) = +-grad eps`, central differences.
pub fn group_velocity(q: (f64, f64), delta: f64, band: Band) -> Result<(f64, f64)> {
    ensure_gapped(q, delta)?;
    let h = FD_STEP;
    let e = |qx, qy| quasi_energy((qx, qy), delta);
    let vx = (e(q.0 + h, q.1)? - e(q.0 - h, q.1)?) / (2.0 * h);
    let vy = (e(q.0, q.1 + h)? - e(q.0, q.1 - h)?) / (2.0 * h);
    let s = band.sign();
    Ok((s * vx, s * vy))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

// 1/2 n.(d_x n x d_y n)
fn curvature_from_axis(q: (f64, f64), delta: f64, u: &StepProtocol, n: [f64; 3]) -> Result<f64> {
    let h = FD_STEP;
    let axis = |qx, qy| unit_axis((qx, qy), delta, u).map(|(_, n)| n);
    let (xp, xm) = (axis(q.0 + h, q.1)?, axis(q.0 - h, q.1)?);
    let (yp, ym) = (axis(q.0, q.1 + h)?, axis(q.0, q.1 - h)?);
    let dx = [0, 1, 2].map(|i| (xp[i] - xm[i]) / (2.0 * h));
    let dy = [0, 1, 2].map(|i| (yp[i] - ym[i]) / (2.0 * h));
    Ok(0.5 * dot(n, cross(dx, dy)))
}

/// `Omega^(+-) = +-1/2 n.(d_x n x d_y n)`.
pub fn berry_curvature(q: (f64, f64), delta: f64, band: Band) -> Result<f64> {
    ensure_gapped(q, delta)?;
    let u = protocol_u(delta)?;
    let (_, n) = unit_axis(q, delta, &u)?;
    Ok(band.sign() * curvature_from_axis(q, delta, &u, n)?)
}

/// Link-product phase around the square `[q, q + h]^2` for `band`.
fn plaquette_phase(u: &StepProtocol, q: (f64, f64), h: (f64, f64), band: Band) -> Option<f64> {
    let st = |qx, qy| band_state_of(&u.bloch_matrix((qx, qy)), band);
    let a = st(q.0, q.1)?;
    let b = st(q.0 + h.0, q.1)?;
    let c = st(q.0 + h.0, q.1 + h.1)?;
    let d = st(q.0, q.1 + h.1)?;
    Some((a.inner(&b) * b.inner(&c) * c.inner(&d) * d.inner(&a)).arg())
}

/// Curvature of `A = i<phi|grad phi>` from a small centred plaquette.
/// Equals `-berry_curvature` for the same band.
pub fn berry_curvature_eigenstate(q: (f64, f64), delta: f64, band: Band) -> Result<f64> {
    berry_curvature_eigenstate_of(&protocol_u(delta)?, q, band)
}

/// As [`berry_curvature_eigenstate`] for any step protocol.
pub fn berry_curvature_eigenstate_of(u: &StepProtocol, q: (f64, f64), band: Band) -> Result<f64> {
    let h = 1e-4;
    plaquette_phase(u, (q.0 - 0.5 * h, q.1 - 0.5 * h), (h, h), band)
        .map(|ph| -ph / (h * h))
        .ok_or(Error::DegeneratePoint { qx: q.0, qy: q.1, sin_eps: 0.0 })
}

/// Uniform periodic samples `-pi + 2 pi i / n`, `i = 0..n`.
pub fn bz_axis(n: usize) -> Vec<f64> {
    (0..n).map(|i| -PI + TAU * i as f64 / n as f64).collect()
}

fn min_gap_on(qs: &[f64], delta: f64) -> Result<f64> {
    let mut g = f64::INFINITY;
    for &qx in qs {
        for &qy in qs {
            let e = quasi_energy((qx, qy), delta)?;
            g = g.min(2.0 * e.min(PI - e));
        }
    }
    Ok(g)
}

/// Integer Chern number plus diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernResult {
    pub value: i64,
    /// Un-rounded plaquette sum `/ 2 pi`.
    pub raw: f64,
    /// Smallest direct gap on the grid.
    pub min_gap: f64,
}

/// Plaquette Chern number of `band` on an `n x n` grid.
pub fn chern_number(delta: f64, band: Band, grid_n: usize) -> Result<ChernResult> {
    if grid_n < 2 {
        return Err(Error::InvalidArgument("Chern grid needs n >= 2".into()));
    }
    let qs = bz_axis(grid_n);
    let min_gap = min_gap_on(&qs, delta)?;
    if min_gap < 1e-6 {
        return Err(Error::NearCritical { delta, gap: min_gap });
    }
    let u = protocol_u(delta)?;
    let h = TAU / grid_n as f64;
    let rows: Vec<Option<f64>> = par::map(&qs, |&qx| {
        qs.iter().map(|&qy| plaquette_phase(&u, (qx, qy), (h, h), band)).sum::<Option<f64>>()
    });
    let total: f64 = rows
        .into_iter()
        .sum::<Option<f64>>()
        .ok_or(Error::NearCritical { delta, gap: min_gap })?;
    let raw = total / TAU;
    Ok(ChernResult { value: raw.round() as i64, raw, min_gap })
}

/// `(1/2 pi) sum Omega dq^2` over an `n x n` periodic grid (trapezoidal).
pub fn curvature_integral(delta: f64, band: Band, grid_n: usize) -> Result<f64> {
    let qs = bz_axis(grid_n);
    let rows = par::try_map(&qs, |&qx| {
        qs.iter().map(|&qy| berry_curvature((qx, qy), delta, band)).sum::<Result<f64>>()
    })?;
    let h = TAU / grid_n as f64;
    Ok(rows.iter().sum::<f64>() * h * h / TAU)
}

/// Minimum direct gaps around `eps = 0` and `eps = pi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandGaps {
    pub gap_0: f64,
    pub gap_pi: f64,
    pub q_min: (f64, f64),
    pub q_max: (f64, f64),
}

fn refine_extremum(delta: f64, start: (f64, f64), spacing: f64, sign: f64) -> Result<((f64, f64), f64)> {
    // sign = +1 minimizes eps, -1 maximizes it
    let mut best = start;
    let mut best_v = sign * quasi_energy(start, delta)?;
    let mut h = spacing;
    for _ in 0..6 {
        let c = best;
        for i in -10..=10 {
            for j in -10..=10 {
                let q = (c.0 + i as f64 * h / 10.0, c.1 + j as f64 * h / 10.0);
                let v = sign * quasi_energy(q, delta)?;
                if v < best_v {
                    best_v = v;
                    best = q;
                }
            }
        }
        h /= 10.0;
    }
    Ok((best, sign * best_v))
}

/// `gap_0 = 2 min eps`, `gap_pi = 2 (pi - max eps)` on a grid with local refinement.
pub fn band_gaps(delta: f64, grid_n: usize) -> Result<BandGaps> {
    if grid_n < 3 {
        return Err(Error::InvalidArgument("gap grid needs n >= 3".into()));
    }
    let step = TAU / (grid_n - 1) as f64;
    let qs: Vec<f64> = (0..grid_n).map(|i| -PI + step * i as f64).collect();
    let rows = par::try_map(&qs, |&qx| {
        let mut lo = (f64::INFINITY, (0.0, 0.0));
        let mut hi = (f64::NEG_INFINITY, (0.0, 0.0));
        for &qy in &qs {
            let e = quasi_energy((qx, qy), delta)?;
            if e < lo.0 {
                lo = (e, (qx, qy));
            }
            if e > hi.0 {
                hi = (e, (qx, qy));
            }
        }
        Ok::<_, Error>((lo, hi))
    })?;
    let lo = rows.iter().map(|r| r.0).fold((f64::INFINITY, (0.0, 0.0)), |a, b| if b.0 < a.0 { b } else { a });
    let hi = rows.iter().map(|r| r.1).fold((f64::NEG_INFINITY, (0.0, 0.0)), |a, b| if b.0 > a.0 { b } else { a });
    let (q_min, e_min) = refine_extremum(delta, lo.1, step, 1.0)?;
    let (q_max, e_max) = refine_extremum(delta, hi.1, step, -1.0)?;
    Ok(BandGaps { gap_0: 2.0 * e_min, gap_pi: 2.0 * (PI - e_max), q_min, q_max })
}

/// One row of the retardation sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub delta: f64,
    /// `None` when the grid is too close to a gap closing.
    pub chern_minus: Option<i64>,
    pub gap_0: f64,
    pub gap_pi: f64,
}

/// Lower-band Chern number and both gaps at every `delta`.
pub fn phase_diagram(deltas: &[f64], chern_grid: usize, gap_grid: usize) -> Result<Vec<PhaseRow>> {
    par::try_map(deltas, |&delta| {
        let gaps = band_gaps(delta, gap_grid)?;
        let chern_minus = match chern_number(delta, Band::Lower, chern_grid) {
            Ok(c) => Some(c.value),
            Err(Error::NearCritical { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(PhaseRow { delta, chern_minus, gap_0: gaps.gap_0, gap_pi: gaps.gap_pi })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapKind {
    Zero,
    Pi,
}

/// A gap closing bracketed in `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub gap: GapKind,
    pub lower: f64,
    pub upper: f64,
    pub gap_at_center: f64,
}

impl Transition {
    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

fn gap_value(delta: f64, kind: GapKind, grid: usize) -> Result<f64> {
    let g = band_gaps(delta, grid)?;
    Ok(match kind {
        GapKind::Zero => g.gap_0,
        GapKind::Pi => g.gap_pi,
    })
}

/// Brackets every gap closing in `[from, to]` to width `<= tol`.
///
/// Local minima of each gap on `count` samples are narrowed by golden-section
/// search; only minima whose refined gap is below `close_tol` are reported.
pub fn find_transitions(from: f64, to: f64, count: usize, tol: f64, close_tol: f64) -> Result<Vec<Transition>> {
    if count < 3 || !(to > from) {
        return Err(Error::InvalidArgument("transition scan needs count >= 3 and to > from".into()));
    }
    let grid = 61;
    let deltas: Vec<f64> = (0..count).map(|i| from + (to - from) * i as f64 / (count - 1) as f64).collect();
    let mut out = Vec::new();
    for kind in [GapKind::Zero, GapKind::Pi] {
        let gaps = par::try_map(&deltas, |&d| gap_value(d, kind, grid))?;
        for i in 1..count - 1 {
            if !(gaps[i] <= gaps[i - 1] && gaps[i] < gaps[i + 1]) {
                continue;
            }
            let (mut a, mut b) = (deltas[i - 1], deltas[i + 1]);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - r * (b - a);
            let mut d = a + r * (b - a);
            let mut fc = gap_value(c, kind, grid)?;
            let mut fd = gap_value(d, kind, grid)?;
            while b - a > tol {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - r * (b - a);
                    fc = gap_value(c, kind, grid)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + r * (b - a);
                    fd = gap_value(d, kind, grid)?;
                }
            }
            let g = gap_value(0.5 * (a + b), kind, 101)?;
            if g < close_tol {
                out.push(Transition { gap: kind, lower: a, upper: b, gap_at_center: g });
            }
        }
    }
    out.sort_by(|x, y| x.lower.total_cmp(&y.lower));
    Ok(out)
}

/// One point of a Brillouin-zone export.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BzPoint {
    pub q: (f64, f64),
    pub epsilon: f64,
    /// `None` at a gap-closing point.
    pub sample: Option<BlochSample>,
}

/// `n x n` samples covering `[-pi, pi)^2`, row-major in `(q_x, q_y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BzGrid {
    pub n: usize,
    pub delta: f64,
    pub points: Vec<BzPoint>,
}

pub fn bz_grid(delta: f64, n: usize) -> Result<BzGrid> {
    let qs = bz_axis(n);
    let rows = par::try_map(&qs, |&qx| {
        qs.iter()
            .map(|&qy| {
                let q = (qx, qy);
                let epsilon = quasi_energy(q, delta)?;
                let sample = match bloch_hamiltonian(q, delta) {
                    Ok(s) => Some(s),
                    Err(Error::DegeneratePoint { .. }) => None,
                    Err(e) => return Err(e),
                };
                Ok(BzPoint { q, epsilon, sample })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(BzGrid { n, delta, points: rows.into_iter().flatten().collect() })
}

impl BzGrid {
    /// `q_x,q_y,epsilon,n_x,n_y,n_z,omega_minus`; NaN where gapless.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["q_x", "q_y", "epsilon", "n_x", "n_y", "n_z", "omega_minus"]);
        for p in &self.points {
            let (n, w) = match &p.sample {
                Some(s) => (s.n, s.omega_minus),
                None => ([f64::NAN; 3], f64::NAN),
            };
            t.push_row([p.q.0, p.q.1, p.epsilon, n[0], n[1], n[2], w]);
        }
        t
    }
}

/// `delta,chern_minus,gap0,gappi`; empty Chern cell for near-critical rows.
pub fn phase_table(rows: &[PhaseRow]) -> Table {
    let mut t = Table::new(&["delta", "chern_minus", "gap0", "gappi"]);
    for r in rows {
        t.push_row([
            r.delta.to_string(),
            r.chern_minus.map(|c| c.to_string()).unwrap_or_default(),
            r.gap_0.to_string(),
            r.gap_pi.to_string(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

    #[test]
    fn quasi_energy_examples() {
        let e = quasi_energy((0.0, 0.0), FRAC_PI_2).unwrap();
        assert!((e - 0.75 * PI).abs() < 1e-12);
        for q in [(0.3, -1.0), (2.0, 2.5)] {
            assert!((quasi_energy(q, 0.0).unwrap() - FRAC_PI_4).abs() < 1e-12);
        }
        assert!((quasi_energy((PI, PI), FRAC_PI_2).unwrap() - FRAC_PI_4).abs() < 1e-12);
        assert!(quasi_energy((f64::NAN, 0.0), 1.0).is_err());
    }

    #[test]
    fn closed_form_matches_trace() {
        for delta in [FRAC_PI_8, 1.0, FRAC_PI_2, 2.9] {
            for q in [(0.1, 0.2), (-2.0, 3.0), (PI, -PI), (0.0, 1.7)] {
                assert!((cos_quasi_energy(q, delta) - half_trace(q, delta).unwrap()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hamiltonian_reconstructs_step() {
        for delta in [0.4, FRAC_PI_2, 2.5] {
            let u = protocol_u(delta).unwrap();
            for q in [(0.3, 1.1), (-2.2, 0.5), (1.0, -3.0)] {
                let s = bloch_hamiltonian(q, delta).unwrap();
                let n2: f64 = s.n.iter().map(|x| x * x).sum();
                assert!((n2 - 1.0).abs() < 1e-12);
                assert!(s.reconstruct().max_abs_diff(&u.bloch_matrix(q)) < 1e-10);
                assert!(s.phi_plus.inner(&s.phi_minus).norm() < 1e-12);
                let m = u.bloch_matrix(q);
                let up = m.apply(s.phi_plus.as_array());
                let want = Complex64::from_polar(1.0, -s.epsilon);
                assert!((up[0] - want * s.phi_plus.l).norm() < 1e-10);
                assert!((up[1] - want * s.phi_plus.r).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn origin_has_equal_y_and_z_axis_components_up_to_rotation() {
        // the printed (n_y, n_z) equal (-n_z, n_y) of the extracted axis
        let s = bloch_hamiltonian((0.0, 0.0), FRAC_PI_2).unwrap();
        assert!((s.n[1] + s.n[2]).abs() < 1e-12);
    }

    #[test]
    fn degenerate_point_reported() {
        let err = bloch_hamiltonian((PI, PI), FRAC_PI_4).unwrap_err();
        assert!(matches!(err, Error::DegeneratePoint { .. }));
        assert!(group_velocity((0.0, 0.0), 0.75 * PI, Band::Upper).is_err());
    }

    #[test]
    fn group_velocity_example() {
        let (vx, vy) = group_velocity((FRAC_PI_2, PI), FRAC_PI_2, Band::Upper).unwrap();
        assert!(vx.abs() < 1e-4);
        assert!((vy + 0.5).abs() < 1e-4);
        let (wx, wy) = group_velocity((FRAC_PI_2, PI), FRAC_PI_2, Band::Lower).unwrap();
        assert_eq!((wx, wy), (-vx, -vy));
    }

    #[test]
    fn curvature_conventions_are_opposite() {
        for q in [(0.4, -1.3), (2.0, 0.7)] {
            let a = berry_curvature(q, FRAC_PI_2, Band::Lower).unwrap();
            let b = berry_curvature_eigenstate(q, FRAC_PI_2, Band::Lower).unwrap();
            assert!((a + b).abs() < 1e-3 * a.abs().max(1e-2), "{a} vs {b}");
            let c = berry_curvature(q, FRAC_PI_2, Band::Upper).unwrap();
            assert_eq!(a, -c);
        }
    }

    #[test]
    fn chern_examples() {
        assert_eq!(chern_number(FRAC_PI_2, Band::Lower, 24).unwrap().value, 1);
        assert_eq!(chern_number(FRAC_PI_2, Band::Upper, 24).unwrap().value, -1);
        assert_eq!(chern_number(7.0 * FRAC_PI_8, Band::Lower, 24).unwrap().value, 0);
        assert_eq!(chern_number(FRAC_PI_8, Band::Lower, 24).unwrap().value, 0);
    }

    #[test]
    fn near_critical_refused() {
        // the closing point (pi, pi) lies on every even grid
        assert!(matches!(chern_number(FRAC_PI_4, Band::Lower, 24), Err(Error::NearCritical { .. })));
    }

    #[test]
    fn gap_examples() {
        assert!(band_gaps(FRAC_PI_4, 101).unwrap().gap_0 < 1e-3);
        assert!(band_gaps(0.75 * PI, 101).unwrap().gap_pi < 1e-3);
        let g = band_gaps(FRAC_PI_2, 101).unwrap().gap_0;
        assert!(g > 0.3 && g < 3.0);
    }

    #[test]
    fn eigenphases_are_symmetric() {
        let u = protocol_u(1.3).unwrap();
        let [a, b] = eigenphases(&u.bloch_matrix((0.2, -0.9)));
        assert!((a + b).abs() < 1e-12);
        assert!((b - quasi_energy((0.2, -0.9), 1.3).unwrap()).abs() < 1e-12);
    }
}
