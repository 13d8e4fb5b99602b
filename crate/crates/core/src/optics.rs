//! Photonic encoding and read-out.
//!
//! Lattice site `m` is the transverse wavevector `k = 2 pi m / Lambda`. A lens
//! of focal length `f` maps `k` to the camera position `f lambda k / 2 pi`, so
//! sites sit on a grid of pitch `f lambda / Lambda` and each is a Gaussian
//! spot of 1/e^2 intensity radius `f lambda / (pi w0)`.
//!
//! The non-ideality model follows a 1D walk `T_x W` through plates spaced by
//! `d`. Between plates a mode of order `s` gains phase `-2 pi lambda d s^2 /
//! Lambda^2` and walks off by `d lambda s / Lambda`; a grating then sees the
//! beam at offset `x` as `alpha0 + pi x / Lambda`. Walk-off offsets are integer
//! multiples of `d lambda / Lambda`, so amplitudes are grouped exactly by
//! `(site, offset)` and recombined with the overlap visibility of displaced
//! Gaussians.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coin::{lc_plate, w_plate, CoinSpinor, Mat2};
use crate::error::{ensure_finite, Error, Result};
use crate::lattice::{distribution, localized_state, similarity, Distribution, WalkerState};
use crate::par;

/// Physical parameters of the setup, SI units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpticalConfig {
    pub wavelength: f64,
    pub waist: f64,
    pub period: f64,
    pub focal_length: f64,
    pub plate_spacing: f64,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        OpticalConfig { wavelength: 632.8e-9, waist: 5e-3, period: 5e-3, focal_length: 0.5, plate_spacing: 0.02 }
    }
}

impl OpticalConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("wavelength", self.wavelength),
            ("waist", self.waist),
            ("period", self.period),
            ("focal_length", self.focal_length),
            ("plate_spacing", self.plate_spacing),
        ] {
            ensure_finite(name, v)?;
            // plate spacing may be zero (ideal stack)
            if v < 0.0 || (v == 0.0 && name != "plate_spacing") {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `z0 = pi w0^2 / lambda`.
    pub fn rayleigh_range(&self) -> f64 {
        PI * self.waist * self.waist / self.wavelength
    }

    /// True unless the Rayleigh range is under ten times `length`.
    pub fn collimated_over(&self, length: f64) -> bool {
        self.rayleigh_range() >= 10.0 * length
    }

    /// `Delta k = 2 pi / Lambda`.
    pub fn site_wavevector(&self) -> f64 {
        TAU / self.period
    }

    /// Camera distance between neighbouring sites, `f lambda / Lambda`.
    pub fn site_pitch(&self) -> f64 {
        self.focal_length * self.wavelength / self.period
    }

    /// Envelope width (in sites) of a packet prepared by a beam of waist `w_g`.
    pub fn packet_sigma_for_waist(&self, w_g: f64) -> f64 {
        self.period / (PI * w_g)
    }
}

/// `R = f lambda k / 2 pi` per component.
pub fn camera_position(k_perp: (f64, f64), config: &OpticalConfig) -> (f64, f64) {
    let s = config.focal_length * config.wavelength / TAU;
    (s * k_perp.0, s * k_perp.1)
}

/// Inverse of [`camera_position`].
pub fn camera_to_wavevector(pos: (f64, f64), config: &OpticalConfig) -> (f64, f64) {
    let s = TAU / (config.focal_length * config.wavelength);
    (s * pos.0, s * pos.1)
}

/// 1/e^2 intensity radius of one site's focal spot, `f lambda / (pi w0)`.
pub fn spot_radius(config: &OpticalConfig) -> f64 {
    config.focal_length * config.wavelength / (PI * config.waist)
}

/// Paraxial Gaussian mode carrying lattice index `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMode {
    pub m: (i64, i64),
    pub k_perp: (f64, f64),
}

impl GaussianMode {
    pub fn new(m: (i64, i64), config: &OpticalConfig) -> Self {
        let dk = config.site_wavevector();
        GaussianMode { m, k_perp: (dk * m.0 as f64, dk * m.1 as f64) }
    }

    /// `w(z) = w0 sqrt(1 + (z/z0)^2)`.
    pub fn radius(z: f64, config: &OpticalConfig) -> f64 {
        let z0 = config.rayleigh_range();
        config.waist * (1.0 + (z / z0).powi(2)).sqrt()
    }

    /// `R(z) = z (1 + (z0/z)^2)`; infinite at the waist.
    pub fn curvature(z: f64, config: &OpticalConfig) -> f64 {
        if z == 0.0 {
            return f64::INFINITY;
        }
        let z0 = config.rayleigh_range();
        z * (1.0 + (z0 / z).powi(2))
    }

    /// Gouy phase `atan(z / z0)`.
    pub fn gouy(z: f64, config: &OpticalConfig) -> f64 {
        (z / config.rayleigh_range()).atan()
    }

    pub fn camera_position(&self, config: &OpticalConfig) -> (f64, f64) {
        camera_position(self.k_perp, config)
    }
}

/// Three readings of "overlap between adjacent modes".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// `int A_0 A_1` of unit-power focal spots one pitch apart (adopted).
    pub amplitude: f64,
    /// Square of the amplitude overlap.
    pub power: f64,
    /// Power of one spot falling in the neighbour's integration box.
    pub box_leakage: f64,
}

impl OverlapReport {
    pub const ADOPTED: &'static str = "amplitude";

    pub fn adopted(&self) -> f64 {
        self.amplitude
    }
}

pub fn adjacent_mode_overlap(config: &OpticalConfig) -> OverlapReport {
    // pitch / spot radius = pi w0 / Lambda
    let ratio = config.site_pitch() / spot_radius(config);
    let amplitude = (-0.5 * ratio * ratio).exp();
    // intensity profile along x has standard deviation w/2; box spans [p/2, 3p/2]
    let a = ratio * FRAC_1_SQRT_2;
    let box_leakage = 0.5 * (libm::erfc(a) - libm::erfc(3.0 * a));
    OverlapReport { amplitude, power: amplitude * amplitude, box_leakage }
}

/// Real-valued raster, row-major (`row = y`), pixel centres at
/// `origin + (col, row) * pitch`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraImage {
    pub width: usize,
    pub height: usize,
    pub pitch: f64,
    pub origin: (f64, f64),
    pub data: Vec<f64>,
}

impl CameraImage {
    pub fn zeros(raster: &RasterSpec) -> Self {
        let origin = raster.origin();
        CameraImage {
            width: raster.width,
            height: raster.height,
            pitch: raster.pitch,
            origin,
            data: vec![0.0; raster.width * raster.height],
        }
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (self.origin.0 + col as f64 * self.pitch, self.origin.1 + row as f64 * self.pitch)
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Binary 16-bit PGM (`P5`, maxval 65535, big-endian), scaled to the maximum.
    pub fn to_pgm16(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        let scale = if self.max() > 0.0 { 65535.0 / self.max() } else { 0.0 };
        out.reserve(self.data.len() * 2);
        for &v in &self.data {
            let q = (v * scale).round().clamp(0.0, 65535.0) as u16;
            out.extend_from_slice(&q.to_be_bytes());
        }
        out
    }

    pub fn write_pgm16(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_pgm16())?;
        Ok(())
    }

    /// 16-bit samples scaled to the maximum, row-major.
    pub fn to_u16(&self) -> Vec<u16> {
        let scale = if self.max() > 0.0 { 65535.0 / self.max() } else { 0.0 };
        self.data.iter().map(|&v| (v * scale).round().clamp(0.0, 65535.0) as u16).collect()
    }
}

/// Raster geometry, centred on the optical axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterSpec {
    pub width: usize,
    pub height: usize,
    pub pitch: f64,
}

impl Default for RasterSpec {
    fn default() -> Self {
        RasterSpec { width: 1024, height: 1024, pitch: 5e-6 }
    }
}

impl RasterSpec {
    pub fn origin(&self) -> (f64, f64) {
        (-0.5 * (self.width as f64 - 1.0) * self.pitch, -0.5 * (self.height as f64 - 1.0) * self.pitch)
    }
}

/// Where each lattice site lands on the camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeLayout {
    pub pitch: f64,
    /// In-plane rotation of the lattice (grating tilt), radians.
    pub tilt: f64,
    pub offset: (f64, f64),
}

impl LatticeLayout {
    pub fn from_config(config: &OpticalConfig) -> Self {
        LatticeLayout { pitch: config.site_pitch(), tilt: 0.0, offset: (0.0, 0.0) }
    }

    pub fn with_tilt(mut self, tilt: f64) -> Self {
        self.tilt = tilt;
        self
    }

    pub fn position(&self, m: (i64, i64)) -> (f64, f64) {
        let (x, y) = (self.pitch * m.0 as f64, self.pitch * m.1 as f64);
        let (s, c) = self.tilt.sin_cos();
        (self.offset.0 + c * x - s * y, self.offset.1 + s * x + c * y)
    }
}

/// A rendered frame and the share of power that missed the raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    pub image: CameraImage,
    pub clipped_fraction: f64,
}

impl Rendered {
    /// Set when more than 0.1% of the power fell outside the raster.
    pub fn clipping_warning(&self) -> bool {
        self.clipped_fraction > 1e-3
    }
}

// power of a unit 1D Gaussian (1/e^2 radius w) in each pixel of a strip
fn pixel_profile(center: f64, w: f64, origin: f64, pitch: f64, n: usize) -> (usize, Vec<f64>) {
    let reach = 6.0 * w;
    let lo = (((center - reach - origin) / pitch).floor().max(0.0)) as usize;
    let hi_f = ((center + reach - origin) / pitch).ceil();
    if hi_f < 0.0 || lo >= n {
        return (0, Vec::new());
    }
    let hi = (hi_f as usize).min(n - 1);
    let k = std::f64::consts::SQRT_2 / w;
    let prof = (lo..=hi)
        .map(|i| {
            let x = origin + i as f64 * pitch - center;
            0.5 * (libm::erf(k * (x + 0.5 * pitch)) - libm::erf(k * (x - 0.5 * pitch)))
        })
        .collect();
    (lo, prof)
}

/// Incoherent sum of unit-power spots weighted by `p(m)`; pixel values are
/// integrated powers.
pub fn render_distribution(
    dist: &Distribution,
    config: &OpticalConfig,
    raster: &RasterSpec,
    layout: &LatticeLayout,
) -> Result<Rendered> {
    config.validate()?;
    let w = spot_radius(config);
    let mut image = CameraImage::zeros(raster);
    let origin = image.origin;
    struct Spot {
        p: f64,
        x0: usize,
        px: Vec<f64>,
        y0: usize,
        py: Vec<f64>,
    }
    let spots: Vec<Spot> = dist
        .iter()
        .filter(|t| t.2 > 0.0)
        .map(|(mx, my, p)| {
            let (x, y) = layout.position((mx, my));
            let (x0, px) = pixel_profile(x, w, origin.0, raster.pitch, raster.width);
            let (y0, py) = pixel_profile(y, w, origin.1, raster.pitch, raster.height);
            Spot { p, x0, px, y0, py }
        })
        .collect();
    let width = raster.width;
    let rows = par::map_range(raster.height, |row| {
        let mut line = vec![0.0; width];
        for s in &spots {
            if row < s.y0 || row >= s.y0 + s.py.len() {
                continue;
            }
            let wy = s.p * s.py[row - s.y0];
            for (i, v) in s.px.iter().enumerate() {
                line[s.x0 + i] += wy * v;
            }
        }
        line
    });
    image.data = rows.into_iter().flatten().collect();
    let total: f64 = dist.iter().map(|t| t.2).sum();
    let clipped_fraction = if total > 0.0 { (1.0 - image.total() / total).max(0.0) } else { 0.0 };
    Ok(Rendered { image, clipped_fraction })
}

/// Coherent image `sum_coin |sum_m psi(m, coin) a_m(X, Y)|^2` with unit-power
/// spot amplitudes sampled at pixel centres.
pub fn render_state(
    state: &WalkerState,
    config: &OpticalConfig,
    raster: &RasterSpec,
    layout: &LatticeLayout,
) -> Result<Rendered> {
    config.validate()?;
    let w = spot_radius(config);
    let amp_norm = (2.0 / PI).sqrt() / w * raster.pitch;
    let mut image = CameraImage::zeros(raster);
    let origin = image.origin;
    let sites: Vec<((f64, f64), [Complex64; 2])> = state
        .sites()
        .filter(|s| s.2[0] != Complex64::new(0.0, 0.0) || s.2[1] != Complex64::new(0.0, 0.0))
        .map(|(mx, my, a)| (layout.position((mx, my)), a))
        .collect();
    let reach = 6.0 * w;
    let width = raster.width;
    let rows = par::map_range(raster.height, |row| {
        let y = origin.1 + row as f64 * raster.pitch;
        let near: Vec<&((f64, f64), [Complex64; 2])> = sites.iter().filter(|s| (s.0 .1 - y).abs() < reach).collect();
        (0..width)
            .map(|col| {
                let x = origin.0 + col as f64 * raster.pitch;
                let mut acc = [Complex64::new(0.0, 0.0); 2];
                for ((sx, sy), a) in near.iter().map(|s| (&s.0, &s.1)) {
                    let (dx, dy) = (x - sx, y - sy);
                    if dx.abs() > reach {
                        continue;
                    }
                    let g = amp_norm * (-(dx * dx + dy * dy) / (w * w)).exp();
                    acc[0] += a[0] * g;
                    acc[1] += a[1] * g;
                }
                acc[0].norm_sqr() + acc[1].norm_sqr()
            })
            .collect::<Vec<f64>>()
    });
    image.data = rows.into_iter().flatten().collect();
    let total = state.norm_sqr();
    let clipped_fraction = if total > 0.0 { (1.0 - image.total() / total).max(0.0) } else { 0.0 };
    Ok(Rendered { image, clipped_fraction })
}

/// Camera coordinates of every site and the integration-box half-width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteGrid {
    pub origin: (f64, f64),
    /// Fitted camera displacement of one step along x and along y.
    pub axis_x: (f64, f64),
    pub axis_y: (f64, f64),
    pub half_x: usize,
    pub half_y: usize,
    pub box_half_width: f64,
    /// `(m_x, m_y, X, Y)`, row-major ascending.
    pub sites: Vec<(i64, i64, f64, f64)>,
}

impl SiteGrid {
    pub fn new(origin: (f64, f64), axis_x: (f64, f64), axis_y: (f64, f64), half_x: usize, half_y: usize) -> Self {
        let len = |a: (f64, f64)| a.0.hypot(a.1);
        // axis-aligned boxes stay disjoint while 2h is below the smaller
        // axis-aligned separation of neighbours
        let sep = [axis_x.0.abs(), axis_x.1.abs(), axis_y.0.abs(), axis_y.1.abs()];
        let along = sep[0].max(sep[1]).min(sep[2].max(sep[3]));
        let box_half_width = 0.5 * along.min(len(axis_x)).min(len(axis_y));
        let mut sites = Vec::new();
        for mx in -(half_x as i64)..=half_x as i64 {
            for my in -(half_y as i64)..=half_y as i64 {
                let (fx, fy) = (mx as f64, my as f64);
                sites.push((
                    mx,
                    my,
                    origin.0 + fx * axis_x.0 + fy * axis_y.0,
                    origin.1 + fx * axis_x.1 + fy * axis_y.1,
                ));
            }
        }
        SiteGrid { origin, axis_x, axis_y, half_x, half_y, box_half_width, sites }
    }

    /// Grid with the same fitted geometry over a different site range.
    pub fn resized(&self, half_x: usize, half_y: usize) -> Self {
        SiteGrid::new(self.origin, self.axis_x, self.axis_y, half_x, half_y)
    }

    pub fn position(&self, m: (i64, i64)) -> (f64, f64) {
        let (fx, fy) = (m.0 as f64, m.1 as f64);
        (
            self.origin.0 + fx * self.axis_x.0 + fy * self.axis_y.0,
            self.origin.1 + fx * self.axis_x.1 + fy * self.axis_y.1,
        )
    }
}

/// Sub-pixel peak position from a log-parabola through three samples.
fn log_parabola(lm: f64, l0: f64, lp: f64) -> Result<f64> {
    if !(lm > 0.0 && l0 > 0.0 && lp > 0.0) {
        return Err(Error::FitDivergence("non-positive samples around the peak".into()));
    }
    let (a, b, c) = (lm.ln(), l0.ln(), lp.ln());
    let den = a - 2.0 * b + c;
    if !(den < 0.0) {
        return Err(Error::FitDivergence("peak is not a local maximum".into()));
    }
    let off = 0.5 * (a - c) / den;
    if off.abs() > 1.0 {
        return Err(Error::FitDivergence(format!("sub-pixel offset {off} out of range")));
    }
    Ok(off)
}

/// Fits the centres of the `count` brightest spots, returned in descending
/// brightness. Pixels within `exclusion` of an accepted spot are skipped.
pub fn fit_spots(image: &CameraImage, count: usize, exclusion: f64) -> Result<Vec<(f64, f64)>> {
    let mut found: Vec<(f64, f64)> = Vec::new();
    for _ in 0..count {
        let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
        for row in 1..image.height - 1 {
            for col in 1..image.width - 1 {
                let v = image.at(col, row);
                if v <= best.0 {
                    continue;
                }
                let c = image.pixel_center(col, row);
                if found.iter().any(|f| (f.0 - c.0).hypot(f.1 - c.1) < exclusion) {
                    continue;
                }
                best = (v, col, row);
            }
        }
        let (v, col, row) = best;
        if !(v > 0.0) {
            return Err(Error::FitDivergence("not enough spots in the frame".into()));
        }
        let dx = log_parabola(image.at(col - 1, row), v, image.at(col + 1, row))?;
        let dy = log_parabola(image.at(col, row - 1), v, image.at(col, row + 1))?;
        let c = image.pixel_center(col, row);
        found.push((c.0 + dx * image.pitch, c.1 + dy * image.pitch));
    }
    Ok(found)
}

/// One calibration frame: `t` steps of a half-wave plate then a full
/// conversion grating on `|H>`, which leaves two spots at `+-t` along `axis`.
pub fn calibration_state(axis: crate::coin::Axis, t: u32) -> Result<WalkerState> {
    use crate::coin::{PlateDescriptor, StepProtocol, DEFAULT_PERIOD};
    let p = StepProtocol::new(
        vec![PlateDescriptor::uniform(PI, 0.0), PlateDescriptor::grating(axis, PI)],
        DEFAULT_PERIOD,
    )?;
    crate::lattice::evolve(&localized_state((0, 0), CoinSpinor::h())?, &p, t, 0.0)
}

/// Recovers the site grid from synthetic calibration frames `t = 0..=max_order`
/// rendered through `layout`, then spans `[-half_x, half_x] x [-half_y, half_y]`.
pub fn calibrate_sites(
    config: &OpticalConfig,
    raster: &RasterSpec,
    layout: &LatticeLayout,
    max_order: u32,
    half: (usize, usize),
) -> Result<SiteGrid> {
    use crate::coin::Axis;
    if max_order == 0 {
        return Err(Error::InvalidArgument("calibration needs max_order >= 1".into()));
    }
    let exclusion = 0.5 * config.site_pitch();
    let frame = |axis, t| -> Result<CameraImage> {
        let d = distribution(&calibration_state(axis, t)?);
        Ok(render_distribution(&d, config, raster, layout)?.image)
    };
    let origin = fit_spots(&frame(Axis::X, 0)?, 1, exclusion)?[0];
    let mut axes = [(0.0, 0.0); 2];
    for (k, axis) in [Axis::X, Axis::Y].into_iter().enumerate() {
        let (mut sx, mut sy, mut st2) = (0.0, 0.0, 0.0);
        for t in 1..=max_order {
            let spots = fit_spots(&frame(axis, t)?, 2, exclusion)?;
            // the +t spot lies on the positive side of the nominal axis
            let nominal = match axis {
                Axis::X => (layout.tilt.cos(), layout.tilt.sin()),
                Axis::Y => (-layout.tilt.sin(), layout.tilt.cos()),
            };
            let proj = |p: (f64, f64)| (p.0 - origin.0) * nominal.0 + (p.1 - origin.1) * nominal.1;
            let (plus, minus) = if proj(spots[0]) >= proj(spots[1]) { (spots[0], spots[1]) } else { (spots[1], spots[0]) };
            let tf = t as f64;
            sx += tf * (plus.0 - minus.0);
            sy += tf * (plus.1 - minus.1);
            st2 += 2.0 * tf * tf;
        }
        axes[k] = (sx / st2, sy / st2);
    }
    Ok(SiteGrid::new(origin, axes[0], axes[1], half.0, half.1))
}

/// Raw power inside each site's box, not normalized.
pub fn integrate_boxes(image: &CameraImage, grid: &SiteGrid) -> Result<Distribution> {
    let h = grid.box_half_width;
    let pts: Vec<(i64, i64, f64)> = grid
        .sites
        .iter()
        .map(|&(mx, my, x, y)| {
            let c0 = (((x - h - image.origin.0) / image.pitch).floor().max(0.0)) as usize;
            let c1 = ((((x + h - image.origin.0) / image.pitch).ceil()).max(0.0) as usize).min(image.width.saturating_sub(1));
            let r0 = (((y - h - image.origin.1) / image.pitch).floor().max(0.0)) as usize;
            let r1 = ((((y + h - image.origin.1) / image.pitch).ceil()).max(0.0) as usize).min(image.height.saturating_sub(1));
            let mut acc = 0.0;
            for row in r0..=r1 {
                for col in c0..=c1 {
                    let (px, py) = image.pixel_center(col, row);
                    if (px - x).abs() < h && (py - y).abs() < h {
                        acc += image.at(col, row);
                    }
                }
            }
            (mx, my, acc)
        })
        .collect();
    Distribution::from_points(&pts)
}

/// Integrates each site's box and normalizes to unit total.
pub fn extract_distribution(image: &CameraImage, grid: &SiteGrid) -> Result<Distribution> {
    let d = integrate_boxes(image, grid)?;
    if !(d.total > 0.0) {
        return Err(Error::EmptyImage);
    }
    let mut out = d.normalized()?;
    // keep the grid's window even where it read zero
    if out.half_x < grid.half_x || out.half_y < grid.half_y {
        let mut wide = Distribution::zeros(grid.half_x.max(out.half_x), grid.half_y.max(out.half_y));
        let pts: Vec<(i64, i64, f64)> = out.iter().collect();
        for (mx, my, p) in pts {
            let ny = 2 * wide.half_y + 1;
            let i = (mx + wide.half_x as i64) as usize * ny + (my + wide.half_y as i64) as usize;
            wide.probabilities[i] = p;
        }
        wide.total = out.total;
        out = wide;
    }
    Ok(out)
}

/// Maximum step count of the non-ideality model.
pub const MAX_NONIDEAL_STEPS: usize = 14;

/// Interference visibility of two identical Gaussian beams displaced by `dx`.
pub fn overlap_visibility(dx: f64, waist: f64) -> f64 {
    (-dx * dx / (2.0 * waist * waist)).exp()
}

/// Ideal and perturbed 1D distributions of the `T_x W` walk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonIdealReport {
    pub steps: usize,
    pub ideal: Distribution,
    pub perturbed: Distribution,
    pub similarity: f64,
}

type Branches = BTreeMap<(i64, i64), [Complex64; 2]>;

fn propagate(state: Branches, phase_per_s2: f64) -> Branches {
    // between plates: mode s walks off by s units and gains -phase s^2
    state
        .into_iter()
        .map(|((m, k), a)| {
            let ph = Complex64::from_polar(1.0, -phase_per_s2 * (m * m) as f64);
            ((m, k + m), [a[0] * ph, a[1] * ph])
        })
        .collect()
}

fn add(map: &mut Branches, key: (i64, i64), v: [Complex64; 2]) {
    let e = map.entry(key).or_insert([Complex64::new(0.0, 0.0); 2]);
    e[0] += v[0];
    e[1] += v[1];
}

fn grating_step(state: &Branches, delta: f64, unit: f64, period: f64) -> Branches {
    let (c, s) = ((0.5 * delta).cos(), (0.5 * delta).sin());
    let mut out = Branches::new();
    for (&(m, k), a) in state {
        // a beam displaced by x sees alpha0 + pi x / Lambda
        let alpha = PI * k as f64 * unit / period;
        let to_r = Complex64::new(0.0, s) * Complex64::from_polar(1.0, 2.0 * alpha);
        let to_l = Complex64::new(0.0, s) * Complex64::from_polar(1.0, -2.0 * alpha);
        add(&mut out, (m, k), [a[0] * c, a[1] * c]);
        add(&mut out, (m + 1, k), [Complex64::new(0.0, 0.0), to_r * a[0]]);
        add(&mut out, (m - 1, k), [to_l * a[1], Complex64::new(0.0, 0.0)]);
    }
    out
}

fn walk_1d(delta: f64, steps: usize, config: &OpticalConfig, coin: &CoinSpinor) -> Result<Distribution> {
    let w: Mat2 = w_plate().matrix;
    let unit = config.plate_spacing * config.wavelength / config.period;
    let phase = TAU * config.wavelength * config.plate_spacing / (config.period * config.period);
    let mut state = Branches::new();
    state.insert((0, 0), coin.as_array());
    for step in 0..steps {
        state = state.into_iter().map(|(key, a)| (key, w.apply(a))).collect();
        state = propagate(state, phase);
        state = grating_step(&state, delta, unit, config.period);
        if step + 1 < steps {
            state = propagate(state, phase);
        }
    }
    // recombine offsets of the same (site, coin) with partial visibility
    let mut by_site: BTreeMap<i64, Vec<(i64, [Complex64; 2])>> = BTreeMap::new();
    for ((m, k), a) in state {
        by_site.entry(m).or_default().push((k, a));
    }
    let pts: Vec<(i64, i64, f64)> = by_site
        .into_iter()
        .map(|(m, list)| {
            let mut p = 0.0;
            for (ka, a) in &list {
                for (kb, b) in &list {
                    let v = overlap_visibility((ka - kb) as f64 * unit, config.waist);
                    p += v * (a[0] * b[0].conj() + a[1] * b[1].conj()).re;
                }
            }
            (m, 0, p.max(0.0))
        })
        .collect();
    Distribution::from_points(&pts)
}

/// Path-sum model of free propagation between plates for the 1D walk
/// `T_x(delta) W` from `|0, coin>`.
pub fn simulate_nonidealities_1d(
    delta: f64,
    steps: usize,
    config: &OpticalConfig,
    coin: &CoinSpinor,
) -> Result<NonIdealReport> {
    if steps > MAX_NONIDEAL_STEPS {
        return Err(Error::CombinatorialLimit { steps, max: MAX_NONIDEAL_STEPS });
    }
    config.validate()?;
    lc_plate(delta, 0.0)?;
    let coin = coin.normalized()?;
    let ideal = walk_1d(delta, steps, &OpticalConfig { plate_spacing: 0.0, ..*config }, &coin)?;
    let perturbed = walk_1d(delta, steps, config, &coin)?;
    let similarity = similarity(&ideal, &perturbed)?;
    Ok(NonIdealReport { steps, ideal, perturbed, similarity })
}
