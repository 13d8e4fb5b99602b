//! Cylinder spectra: open along x with sites `-N..=N`, periodic along y.
//!
//! Basis index is `(m + N) * 2 + coin`. The x-grating couples `(L_m, R_{m+1})`
//! pairs; the two components whose partner would leave the strip (`L_N`
//! and `R_{-N}`) either pass through unchanged (`Reflecting`, unitary) or
//! keep only their `cos(d/2)` amplitude (`Truncated`, sub-unitary).
//!
//! Edge modes are counted by following branches between neighbouring `q_y`
//! samples through eigenvector overlaps and recording signed crossings of the
//! gap centre. Crossings of this model sit exactly at `q_y in {0, +-pi}`, so
//! the `q_y` grid is offset by a quarter step to never sample them.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{band_gaps, chern_number, Band};
use crate::coin::w_plate;
use crate::error::{ensure_finite, Error, Result};
use crate::export::Table;
use crate::par;

/// Localization floor for perfectly edge-pinned states.
pub const LAMBDA_FLOOR: f64 = -12.0;
/// Default `lambda` below which a state counts as an edge state.
pub const LAMBDA_EDGE: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Reflecting,
    Truncated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
}

/// Gap centre: `eps = 0` or `eps = pi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapCenter {
    Zero,
    Pi,
}

impl GapCenter {
    fn value(self) -> f64 {
        match self {
            GapCenter::Zero => 0.0,
            GapCenter::Pi => PI,
        }
    }
}

fn idx(m: i64, c: usize, n: usize) -> usize {
    (m + n as i64) as usize * 2 + c
}

/// One-step operator on a strip of `2N + 1` sites at `q_y`.
pub fn strip_operator(delta: f64, q_y: f64, n: usize, boundary: Boundary) -> Result<DMatrix<Complex64>> {
    ensure_finite("delta", delta)?;
    ensure_finite("q_y", q_y)?;
    if n < 8 {
        return Err(Error::InvalidArgument(format!("strip half-width must be >= 8, got {n}")));
    }
    let dim = 2 * (2 * n + 1);
    let (c, s) = ((0.5 * delta).cos(), (0.5 * delta).sin());
    let is = Complex64::new(0.0, s);
    let ni = n as i64;

    let w = w_plate().matrix.0;
    let mut wf = DMatrix::<Complex64>::zeros(dim, dim);
    let mut ty = DMatrix::<Complex64>::zeros(dim, dim);
    let up = is * Complex64::from_polar(1.0, q_y);
    let dn = is * Complex64::from_polar(1.0, -q_y);
    for m in -ni..=ni {
        let (l, r) = (idx(m, 0, n), idx(m, 1, n));
        wf[(l, l)] = w[0][0];
        wf[(l, r)] = w[0][1];
        wf[(r, l)] = w[1][0];
        wf[(r, r)] = w[1][1];
        ty[(l, l)] = c.into();
        ty[(l, r)] = up;
        ty[(r, l)] = dn;
        ty[(r, r)] = c.into();
    }
    let mut tx = DMatrix::<Complex64>::zeros(dim, dim);
    for m in -ni..ni {
        let (a, b) = (idx(m, 0, n), idx(m + 1, 1, n));
        tx[(a, a)] = c.into();
        tx[(a, b)] = is;
        tx[(b, a)] = is;
        tx[(b, b)] = c.into();
    }
    let e = match boundary {
        Boundary::Reflecting => 1.0,
        Boundary::Truncated => c,
    };
    tx[(idx(ni, 0, n), idx(ni, 0, n))] = e.into();
    tx[(idx(-ni, 1, n), idx(-ni, 1, n))] = e.into();
    Ok(ty * tx * wf)
}

/// `log10(1 - <|x|>/N)`, floored at [`LAMBDA_FLOOR`].
pub fn localization(mean_abs_x: f64, n: usize) -> f64 {
    let arg = 1.0 - mean_abs_x / n as f64;
    if arg <= 0.0 {
        LAMBDA_FLOOR
    } else {
        arg.log10().max(LAMBDA_FLOOR)
    }
}

/// Eigen-data at one `q_y`.
#[derive(Clone, Debug, PartialEq)]
pub struct StripColumn {
    pub q_y: f64,
    /// `-arg(eigenvalue)` in `(-pi, pi]`.
    pub epsilon: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Signed `<x>`; negative on the left edge.
    pub mean_x: Vec<f64>,
    /// Normalized eigenvectors of states with `lambda < keep_below`.
    pub vectors: Vec<Option<DVector<Complex64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StripSpectrum {
    pub delta: f64,
    pub half_width: usize,
    pub boundary: Boundary,
    pub columns: Vec<StripColumn>,
}

/// Quarter-offset periodic grid `-pi + 2 pi (j + 1/4) / count`.
pub fn q_y_grid(count: usize) -> Vec<f64> {
    (0..count).map(|j| -PI + TAU * (j as f64 + 0.25) / count as f64).collect()
}

/// Eigenpairs of a unitary from the Hermitian pencil `Re U + g Im U`, which
/// shares its eigenvectors; `None` if two eigenvalues collide under the map.
fn unitary_eigen(u: &DMatrix<Complex64>) -> Option<(Vec<Complex64>, DMatrix<Complex64>)> {
    let g = 0.577_215_664_9;
    let ud = u.adjoint();
    let re = (u + &ud) * Complex64::new(0.5, 0.0);
    let im = (u - &ud) * Complex64::new(0.0, -0.5);
    let h = re + im * Complex64::new(g, 0.0);
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors;
    let uv = u * &v;
    let dim = u.nrows();
    let mut vals = Vec::with_capacity(dim);
    for k in 0..dim {
        let lam = v.column(k).dotc(&uv.column(k));
        let res = (uv.column(k) - v.column(k) * lam).norm();
        if res > 1e-9 {
            return None;
        }
        vals.push(lam / lam.norm());
    }
    Some((vals, v))
}

fn eigen_decompose(u: DMatrix<Complex64>, normal: bool) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    if normal {
        if let Some(pair) = unitary_eigen(&u) {
            return Ok(pair);
        }
    }
    let dim = u.nrows();
    let schur = Schur::try_new(u, 1e-15, 100_000).ok_or_else(|| Error::Eigensolver("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let vals: Vec<Complex64> = (0..dim).map(|i| t[(i, i)]).collect();
    if normal {
        return Ok((vals, q));
    }
    // back-substitution on the triangular factor
    let mut y = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..dim {
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in j + 1..=k {
                acc += t[(j, l)] * y[(l, k)];
            }
            let mut den = t[(j, j)] - vals[k];
            if den.norm() < 1e-14 {
                den = Complex64::new(1e-14, 0.0);
            }
            y[(j, k)] = -acc / den;
        }
    }
    let mut v = q * y;
    for k in 0..dim {
        let nrm = v.column(k).norm();
        v.column_mut(k).unscale_mut(nrm);
    }
    Ok((vals, v))
}

/// Rotates near-degenerate eigenvector clusters so `x` is diagonal inside each.
fn separate_clusters(vals: &[Complex64], v: &mut DMatrix<Complex64>, xs: &[f64]) {
    let dim = vals.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| (-vals[a].arg()).total_cmp(&(-vals[b].arg())));
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && (vals[order[end]] - vals[order[end - 1]]).norm() < 1e-8 {
            end += 1;
        }
        if end - start > 1 {
            let members = &order[start..end];
            let k = members.len();
            let mut xm = DMatrix::<Complex64>::zeros(k, k);
            for (a, &ia) in members.iter().enumerate() {
                for (b, &ib) in members.iter().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for r in 0..dim {
                        acc += v[(r, ia)].conj() * xs[r] * v[(r, ib)];
                    }
                    xm[(a, b)] = acc;
                }
            }
            let eig = SymmetricEigen::new(xm);
            let old: Vec<DVector<Complex64>> = members.iter().map(|&i| v.column(i).into_owned()).collect();
            for (a, &ia) in members.iter().enumerate() {
                let mut col = DVector::<Complex64>::zeros(dim);
                for (b, ob) in old.iter().enumerate() {
                    col += ob * eig.eigenvectors[(b, a)];
                }
                v.set_column(ia, &col);
            }
        }
        start = end;
    }
}

/// Diagonalizes the strip at one `q_y`.
pub fn strip_column(delta: f64, q_y: f64, n: usize, boundary: Boundary, keep_below: f64) -> Result<StripColumn> {
    let u = strip_operator(delta, q_y, n, boundary)?;
    let dim = u.nrows();
    let (vals, mut v) = eigen_decompose(u, boundary == Boundary::Reflecting)?;
    let xs: Vec<f64> = (0..dim).map(|r| (r / 2) as f64 - n as f64).collect();
    separate_clusters(&vals, &mut v, &xs);
    let mut epsilon = Vec::with_capacity(dim);
    let mut lambda = Vec::with_capacity(dim);
    let mut mean_x = Vec::with_capacity(dim);
    let mut vectors = Vec::with_capacity(dim);
    for (k, val) in vals.iter().enumerate() {
        let col = v.column(k);
        let w: f64 = col.iter().map(|z| z.norm_sqr()).sum();
        let (mut ax, mut sx) = (0.0, 0.0);
        for (r, z) in col.iter().enumerate() {
            let p = z.norm_sqr() / w;
            ax += xs[r].abs() * p;
            sx += xs[r] * p;
        }
        let lam = localization(ax, n);
        epsilon.push(-val.arg());
        lambda.push(lam);
        mean_x.push(sx);
        vectors.push((lam < keep_below).then(|| col.into_owned() / Complex64::from(w.sqrt())));
    }
    Ok(StripColumn { q_y, epsilon, lambda, mean_x, vectors })
}

/// Strip spectrum on the quarter-offset `q_y` grid.
pub fn strip_spectrum(delta: f64, n: usize, q_count: usize, boundary: Boundary) -> Result<StripSpectrum> {
    if q_count < 4 {
        return Err(Error::InvalidArgument("need at least 4 q_y samples".into()));
    }
    let qs = q_y_grid(q_count);
    let keep = LAMBDA_EDGE + 0.7;
    let columns = par::try_map(&qs, |&q| strip_column(delta, q, n, boundary, keep))?;
    Ok(StripSpectrum { delta, half_width: n, boundary, columns })
}

impl StripSpectrum {
    /// `q_y,epsilon,lambda`, one row per eigenstate.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["q_y", "epsilon", "lambda"]);
        for c in &self.columns {
            for k in 0..c.epsilon.len() {
                t.push_row([c.q_y, c.epsilon[k], c.lambda[k]]);
            }
        }
        t
    }

    /// Largest distance between the spectrum and its mirror `eps -> -eps`.
    pub fn mirror_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.columns {
            for &e in &c.epsilon {
                let best = c
                    .epsilon
                    .iter()
                    .map(|&f| {
                        let d = (e + f).rem_euclid(TAU);
                        d.min(TAU - d)
                    })
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(best);
            }
        }
        worst
    }
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(TAU) - PI
}

/// Net signed crossings of the gap centre by branches on one edge.
///
/// `window` bounds `|eps - centre|` for both ends of a counted crossing; use
/// half the bulk gap. Returns `RefineResolution` when a branch inside the
/// window cannot be followed to the next `q_y` sample.
pub fn count_edge_modes(
    spectrum: &StripSpectrum,
    gap: GapCenter,
    edge: Edge,
    lambda_edge: f64,
    window: f64,
) -> Result<i64> {
    let cols = &spectrum.columns;
    let centre = gap.value();
    let mut total = 0i64;
    for j in 0..cols.len() {
        let (a, b) = (&cols[j], &cols[(j + 1) % cols.len()]);
        for i in 0..a.epsilon.len() {
            let on_edge = match edge {
                Edge::Left => a.mean_x[i] < 0.0,
                Edge::Right => a.mean_x[i] > 0.0,
            };
            if !on_edge || a.lambda[i] >= lambda_edge {
                continue;
            }
            let ea = wrap(a.epsilon[i] - centre);
            if ea.abs() >= window {
                continue;
            }
            let Some(va) = &a.vectors[i] else { continue };
            let mut best = (0.0, usize::MAX);
            for (k, vb) in b.vectors.iter().enumerate() {
                if let Some(vb) = vb {
                    let ov = va.dotc(vb).norm();
                    if ov > best.0 {
                        best = (ov, k);
                    }
                }
            }
            if best.0 < 0.5 {
                return Err(Error::RefineResolution { q_y: a.q_y });
            }
            let eb = wrap(b.epsilon[best.1] - centre);
            if eb.abs() < window && ea * eb < 0.0 {
                total += if eb > ea { 1 } else { -1 };
            }
        }
    }
    Ok(total)
}

/// Edge-mode counts of both gaps and both edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeInvariants {
    pub w0: i64,
    pub wpi: i64,
    /// Signed `(0-gap, pi-gap)` chirality on the left edge.
    pub left: (i64, i64),
    pub right: (i64, i64),
}

impl EdgeInvariants {
    /// `W_0 - W_pi` from the right-edge signed counts.
    pub fn nu(&self) -> i64 {
        self.right.0 - self.right.1
    }
}

/// Counts edge modes of a spectrum; both bulk gaps must exceed `1e-3`.
pub fn edge_invariants(spectrum: &StripSpectrum, lambda_edge: f64) -> Result<EdgeInvariants> {
    let gaps = band_gaps(spectrum.delta, 101)?;
    let g = gaps.gap_0.min(gaps.gap_pi);
    if g <= 1e-3 {
        return Err(Error::NearCritical { delta: spectrum.delta, gap: g });
    }
    let count = |gc: GapCenter, e: Edge| {
        let w = match gc {
            GapCenter::Zero => 0.5 * gaps.gap_0,
            GapCenter::Pi => 0.5 * gaps.gap_pi,
        };
        count_edge_modes(spectrum, gc, e, lambda_edge, w)
    };
    let left = (count(GapCenter::Zero, Edge::Left)?, count(GapCenter::Pi, Edge::Left)?);
    let right = (count(GapCenter::Zero, Edge::Right)?, count(GapCenter::Pi, Edge::Right)?);
    Ok(EdgeInvariants { w0: right.0.abs(), wpi: right.1.abs(), left, right })
}

/// Chern number against edge counts at one retardation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkEdgeReport {
    pub delta: f64,
    pub chern_minus: i64,
    pub invariants: EdgeInvariants,
    pub holds: bool,
}

pub fn bulk_edge_check(delta: f64, n: usize, q_count: usize, boundary: Boundary) -> Result<BulkEdgeReport> {
    let chern_minus = chern_number(delta, Band::Lower, 24)?.value;
    let spec = strip_spectrum(delta, n, q_count, boundary)?;
    let invariants = edge_invariants(&spec, LAMBDA_EDGE)?;
    Ok(BulkEdgeReport { delta, chern_minus, invariants, holds: invariants.nu() == chern_minus })
}
