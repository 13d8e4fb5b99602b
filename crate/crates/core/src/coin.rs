//! Coin-space operators realised by liquid-crystal plates.
//!
//! Coin basis is circular polarization, `|L> = (1, 0)`, `|R> = (0, 1)`.
//! A plate with retardation `delta` and optic-axis angle `alpha` acts as
//!
//! ```text
//! [[cos(d/2),                  i sin(d/2) e^{-2i alpha}],
//!  [i sin(d/2) e^{2i alpha},   cos(d/2)               ]]
//! ```
//!
//! A g-plate has `alpha = pi x / Lambda + alpha0`; in quasi-momentum space
//! (`q = -2 pi x / Lambda`) its off-diagonal phases become `e^{+-i q}`.
//! Global phases are never normalised away; compare operators with
//! [`Mat2::phase_distance`].

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A 2×2 complex matrix acting on the coin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn sub(&self, other: &Mat2) -> Self {
        let (a, b) = (&self.0, &other.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[inline]
    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    /// Max-entry deviation of `U^dagger U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.dagger() * *self;
        p.sub(&Mat2::IDENTITY).0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `min_phi || self - e^{i phi} other ||_F`.
    pub fn phase_distance(&self, other: &Mat2) -> f64 {
        // optimal phase is arg tr(B^dagger A); evaluate the residual directly
        let overlap = (other.dagger() * *self).trace();
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
        self.sub(&other.scale(phase)).frobenius()
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        self.sub(other).0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// Polarization (coin) state in the circular basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinSpinor {
    pub l: Complex64,
    pub r: Complex64,
}

impl CoinSpinor {
    pub const L: CoinSpinor = CoinSpinor { l: ONE, r: ZERO };
    pub const R: CoinSpinor = CoinSpinor { l: ZERO, r: ONE };

    pub fn new(l: Complex64, r: Complex64) -> Self {
        CoinSpinor { l, r }
    }

    /// Horizontal linear polarization, `(|L> + |R>)/sqrt 2`.
    pub fn h() -> Self {
        CoinSpinor::new(ONE * FRAC_1_SQRT_2, ONE * FRAC_1_SQRT_2)
    }

    /// Vertical linear polarization, `(|L> - |R>)/sqrt 2`.
    pub fn v() -> Self {
        CoinSpinor::new(ONE * FRAC_1_SQRT_2, -ONE * FRAC_1_SQRT_2)
    }

    /// Anti-diagonal polarization, `(|L> - i|R>)/sqrt 2`.
    pub fn a() -> Self {
        CoinSpinor::new(ONE * FRAC_1_SQRT_2, -I * FRAC_1_SQRT_2)
    }

    /// Diagonal polarization, `(|L> + i|R>)/sqrt 2`.
    pub fn d() -> Self {
        CoinSpinor::new(ONE * FRAC_1_SQRT_2, I * FRAC_1_SQRT_2)
    }

    /// Parses one of `L`, `R`, `H`, `V`, `A`, `D` (case-insensitive).
    pub fn from_label(label: &str) -> Result<Self> {
        match label.trim().to_ascii_uppercase().as_str() {
            "L" => Ok(Self::L),
            "R" => Ok(Self::R),
            "H" => Ok(Self::h()),
            "V" => Ok(Self::v()),
            "A" => Ok(Self::a()),
            "D" => Ok(Self::d()),
            other => Err(Error::InvalidArgument(format!("unknown polarization label {other:?}"))),
        }
    }

    pub fn as_array(&self) -> [Complex64; 2] {
        [self.l, self.r]
    }

    pub fn norm(&self) -> f64 {
        (self.l.norm_sqr() + self.r.norm_sqr()).sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidArgument("coin spinor has zero or non-finite norm".into()));
        }
        Ok(CoinSpinor::new(self.l / n, self.r / n))
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &CoinSpinor) -> Complex64 {
        self.l.conj() * other.l + self.r.conj() * other.r
    }
}

/// A coin-space unitary with a descriptive tag.
#[derive(Clone, Debug, PartialEq)]
pub struct CoinOperator {
    pub matrix: Mat2,
    pub label: String,
}

impl CoinOperator {
    pub fn new(matrix: Mat2, label: impl Into<String>) -> Self {
        CoinOperator { matrix, label: label.into() }
    }

    pub fn apply(&self, s: &CoinSpinor) -> CoinSpinor {
        let [l, r] = self.matrix.apply(s.as_array());
        CoinSpinor::new(l, r)
    }

    /// Operator product `self * rhs` (rhs acts first).
    pub fn then_after(&self, rhs: &CoinOperator) -> CoinOperator {
        CoinOperator::new(self.matrix * rhs.matrix, format!("{}·{}", self.label, rhs.label))
    }
}

fn plate_matrix(delta: f64, off_upper: Complex64) -> Mat2 {
    let c = (0.5 * delta).cos();
    let s = (0.5 * delta).sin();
    Mat2::new(c.into(), I * s * off_upper, I * s * off_upper.conj(), c.into())
}

/// Uniform liquid-crystal plate with retardation `delta` and optic axis `alpha`.
pub fn lc_plate(delta: f64, alpha: f64) -> Result<CoinOperator> {
    ensure_finite("delta", delta)?;
    ensure_finite("alpha", alpha)?;
    Ok(CoinOperator::new(
        plate_matrix(delta, Complex64::from_polar(1.0, -2.0 * alpha)),
        format!("L({delta:.4}, {alpha:.4})"),
    ))
}

/// Quarter-wave coin rotation `W = L(pi/2, 0) = (1/sqrt 2)[[1, i], [i, 1]]`.
pub fn w_plate() -> CoinOperator {
    CoinOperator::new(plate_matrix(0.5 * PI, ONE), "W")
}

/// Bloch matrix of a g-plate at the quasi-momentum `q` conjugate to `axis`.
pub fn g_plate_momentum(axis: Axis, delta: f64, alpha0: f64, q: f64) -> Result<CoinOperator> {
    ensure_finite("delta", delta)?;
    ensure_finite("alpha0", alpha0)?;
    ensure_finite("q", q)?;
    Ok(CoinOperator::new(
        g_plate_matrix(delta, alpha0, q),
        format!("T_{axis}({delta:.4}, {alpha0:.4}; q={q:.4})"),
    ))
}

#[inline]
fn g_plate_matrix(delta: f64, alpha0: f64, q: f64) -> Mat2 {
    plate_matrix(delta, Complex64::from_polar(1.0, q - 2.0 * alpha0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlateKind {
    Uniform,
    Grating(Axis),
}

/// One plate of a step: its pattern, retardation and alignment.
///
/// `shift` is the lateral displacement of a grating along its own axis, in
/// the same length unit as the protocol's period. Shifting a grating by
/// `dx` is equivalent to `alpha0 -> alpha0 - pi dx / Lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateDescriptor {
    pub kind: PlateKind,
    pub delta: f64,
    pub alpha0: f64,
    pub shift: f64,
}

impl PlateDescriptor {
    pub fn uniform(delta: f64, alpha: f64) -> Self {
        PlateDescriptor { kind: PlateKind::Uniform, delta: delta.rem_euclid(TAU), alpha0: alpha, shift: 0.0 }
    }

    pub fn grating(axis: Axis, delta: f64) -> Self {
        PlateDescriptor { kind: PlateKind::Grating(axis), delta: delta.rem_euclid(TAU), alpha0: 0.0, shift: 0.0 }
    }

    pub fn with_alpha0(mut self, alpha0: f64) -> Self {
        self.alpha0 = alpha0;
        self
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn axis(&self) -> Option<Axis> {
        match self.kind {
            PlateKind::Grating(a) => Some(a),
            PlateKind::Uniform => None,
        }
    }

    /// Optic-axis offset seen by a beam centred on the origin.
    pub fn effective_alpha0(&self, lambda: f64) -> f64 {
        match self.kind {
            PlateKind::Uniform => self.alpha0,
            PlateKind::Grating(_) => self.alpha0 - PI * self.shift / lambda,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure_finite("delta", self.delta)?;
        ensure_finite("alpha0", self.alpha0)?;
        ensure_finite("shift", self.shift)
    }

    /// Coin matrix of this plate at quasi-momentum `q`.
    pub fn bloch_matrix(&self, q: (f64, f64), lambda: f64) -> Mat2 {
        let alpha = self.effective_alpha0(lambda);
        match self.kind {
            PlateKind::Uniform => plate_matrix(self.delta, Complex64::from_polar(1.0, -2.0 * alpha)),
            PlateKind::Grating(Axis::X) => g_plate_matrix(self.delta, alpha, q.0),
            PlateKind::Grating(Axis::Y) => g_plate_matrix(self.delta, alpha, q.1),
        }
    }
}

/// Grating period used when none is given (5 mm, in metres).
pub const DEFAULT_PERIOD: f64 = 5.0e-3;

/// Plates of one walk step in physical (application) order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepProtocol {
    pub plates: Vec<PlateDescriptor>,
    pub lambda: f64,
}

impl StepProtocol {
    pub fn new(plates: Vec<PlateDescriptor>, lambda: f64) -> Result<Self> {
        if plates.is_empty() {
            return Err(Error::InvalidArgument("protocol needs at least one plate".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("grating period must be > 0, got {lambda}")));
        }
        for p in &plates {
            p.validate()?;
        }
        Ok(StepProtocol { plates, lambda })
    }

    /// Single-step Bloch matrix `P_n ... P_2 P_1` at `q`.
    pub fn bloch_matrix(&self, q: (f64, f64)) -> Mat2 {
        self.plates
            .iter()
            .fold(Mat2::IDENTITY, |acc, p| p.bloch_matrix(q, self.lambda) * acc)
    }

    /// Copy of the protocol in which every x-grating carries the constant
    /// force phase of step `t`, `alpha0 -> alpha0 - t F_x / 2`.
    pub fn with_force(&self, t: u32, force_x: f64) -> StepProtocol {
        let mut out = self.clone();
        if force_x != 0.0 {
            for p in &mut out.plates {
                if p.kind == PlateKind::Grating(Axis::X) {
                    p.alpha0 -= t as f64 * force_x * 0.5;
                }
            }
        }
        out
    }

    /// Retardations in application order.
    pub fn retardations(&self) -> Vec<f64> {
        self.plates.iter().map(|p| p.delta).collect()
    }
}

/// `U = T_y T_x W`: quarter-wave plate, then x- and y-gratings at `delta`.
pub fn protocol_u(delta: f64) -> Result<StepProtocol> {
    ensure_finite("delta", delta)?;
    StepProtocol::new(
        vec![
            PlateDescriptor::uniform(0.5 * PI, 0.0),
            PlateDescriptor::grating(Axis::X, delta),
            PlateDescriptor::grating(Axis::Y, delta),
        ],
        DEFAULT_PERIOD,
    )
}

/// Physical realisation of `U^-1` using only retardations in `[0, 2pi)`:
/// `L(3pi/2, 0) T_x(2pi - delta) T_y(2pi - delta)`, T_y first.
///
/// The product equals `-U^-1`, i.e. the inverse up to a global phase of pi.
pub fn protocol_u_inverse(delta: f64) -> Result<StepProtocol> {
    ensure_finite("delta", delta)?;
    let d = delta.rem_euclid(TAU);
    if d == 0.0 {
        return Err(Error::InvalidArgument("inverse protocol needs delta in (0, 2pi)".into()));
    }
    StepProtocol::new(
        vec![
            PlateDescriptor::grating(Axis::Y, TAU - d),
            PlateDescriptor::grating(Axis::X, TAU - d),
            PlateDescriptor::uniform(1.5 * PI, 0.0),
        ],
        DEFAULT_PERIOD,
    )
}

/// Bloch matrix of step `t` under a constant force along x:
/// `U(q_x + F_x t, q_y)`, realised by the x-grating phase `alpha0 - t F_x / 2`.
pub fn step_matrix(protocol: &StepProtocol, q: (f64, f64), t: u32, force_x: f64) -> CoinOperator {
    CoinOperator::new(
        protocol.with_force(t, force_x).bloch_matrix(q),
        format!("U_t={t}(q=({:.4},{:.4}))", q.0, q.1),
    )
}

/// Lateral shift of the x-grating at step `t` that realises force `F_x`.
pub fn force_plate_shift(t: u32, force_x: f64, lambda: f64) -> f64 {
    t as f64 * force_x * lambda / TAU
}
