//! Wavepackets, forced evolution and the band-averaged anomalous drift.
//!
//! A packet centred on `q0` is `N sum_m e^{i q0.m} e^{-|m|^2/sigma^2} phi(q0)`.
//! A constant force `F_x` shifts the x-grating phase of step `tau` by
//! `-tau F_x / 2`, which translates the quasi-momentum by `F_x` per step.
//! Averaging the centre-of-mass drift over a uniform grid of packets cancels
//! the group velocity and leaves `F_x nu / 2 pi` per step.
//!
//! The inverse protocol's plate stack equals `-U^-1`, so its packets are
//! prepared in the opposite band's eigenvector of `U`: same dispersion,
//! opposite curvature.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::bloch::{band_gaps, berry_curvature_eigenstate, bloch_hamiltonian, group_velocity, Band};
use crate::coin::{protocol_u, protocol_u_inverse, CoinSpinor, PlateKind, StepProtocol};
use crate::error::{ensure_finite, Error, Result};
use crate::export::Table;
use crate::lattice::{center_of_mass, evolve_observed, evolve_schedule, WalkerState};
use crate::par;

/// A band-resolved Gaussian wavepacket.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec {
    pub q0: (f64, f64),
    pub band: Band,
    pub sigma_g: f64,
    pub delta: f64,
}

impl WavepacketSpec {
    pub fn new(q0: (f64, f64), band: Band, sigma_g: f64, delta: f64) -> Result<Self> {
        ensure_finite("q0_x", q0.0)?;
        ensure_finite("q0_y", q0.1)?;
        ensure_finite("delta", delta)?;
        if !(sigma_g >= 2.0 && sigma_g.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma_g must be >= 2, got {sigma_g}")));
        }
        Ok(WavepacketSpec { q0, band, sigma_g, delta })
    }
}

/// Which plate stack drives the walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Direct,
    Inverse,
}

impl ProtocolKind {
    pub fn protocol(self, delta: f64) -> Result<StepProtocol> {
        match self {
            ProtocolKind::Direct => protocol_u(delta),
            ProtocolKind::Inverse => protocol_u_inverse(delta),
        }
    }

    /// Eigenvector of `U(q0)` used to load `band` under this protocol.
    pub fn coin_band(self, band: Band) -> Band {
        match self {
            ProtocolKind::Direct => band,
            ProtocolKind::Inverse => band.opposite(),
        }
    }
}

/// Packet loaded for the given protocol, on a window of half-width `ceil(4 sigma)`.
pub fn make_wavepacket_for(spec: &WavepacketSpec, kind: ProtocolKind) -> Result<WalkerState> {
    let sample = bloch_hamiltonian(spec.q0, spec.delta)?;
    let coin = sample.eigenspinor(kind.coin_band(spec.band));
    let half = (4.0 * spec.sigma_g).ceil() as usize;
    let s2 = spec.sigma_g * spec.sigma_g;
    let mut st = WalkerState::from_fn(half, half, |mx, my| {
        let (x, y) = (mx as f64, my as f64);
        let env = (-(x * x + y * y) / s2).exp();
        let ph = Complex64::from_polar(env, spec.q0.0 * x + spec.q0.1 * y);
        [ph * coin.l, ph * coin.r]
    });
    st.normalize()?;
    Ok(st)
}

/// Packet for the direct protocol.
pub fn make_wavepacket(spec: &WavepacketSpec) -> Result<WalkerState> {
    make_wavepacket_for(spec, ProtocolKind::Direct)
}

/// Constant force along x with its adiabaticity figure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceConfig {
    pub f_x: f64,
    /// `F_x / gap_0` at the protocol's retardation.
    pub adiabaticity_ratio: f64,
    /// Set when `F_x >= 0.5 gap_0`.
    pub warning: bool,
}

impl ForceConfig {
    pub fn new(f_x: f64, delta: f64) -> Result<Self> {
        ensure_finite("F_x", f_x)?;
        let gap = band_gaps(delta, 101)?.gap_0;
        let ratio = if gap > 0.0 { f_x.abs() / gap } else { f64::INFINITY };
        Ok(ForceConfig { f_x, adiabaticity_ratio: ratio, warning: f_x.abs() >= 0.5 * gap })
    }

    pub fn zero() -> Self {
        ForceConfig { f_x: 0.0, adiabaticity_ratio: 0.0, warning: false }
    }
}

/// Least-squares line `y = slope t + intercept` and the through-origin slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub origin_slope: f64,
    pub origin_slope_err: f64,
}

/// Fits `ys[t]` against `t = 0, 1, ...`.
pub fn fit_line(ys: &[f64]) -> Result<LinearFit> {
    let n = ys.len();
    if n < 2 {
        return Err(Error::InvalidArgument("a line fit needs at least two points".into()));
    }
    let ts: Vec<f64> = (0..n).map(|t| t as f64).collect();
    let nf = n as f64;
    let tm = ts.iter().sum::<f64>() / nf;
    let ym = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let rss: f64 = ts.iter().zip(ys).map(|(t, y)| (y - intercept - slope * t).powi(2)).sum();
    let slope_err = if n > 2 { (rss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    let stt: f64 = ts.iter().map(|t| t * t).sum();
    let origin_slope = ts.iter().zip(ys).map(|(t, y)| t * y).sum::<f64>() / stt;
    let rss0: f64 = ts.iter().zip(ys).map(|(t, y)| (y - origin_slope * t).powi(2)).sum();
    let origin_slope_err = (rss0 / (nf - 1.0) / stt).sqrt();
    Ok(LinearFit { slope, intercept, slope_err, origin_slope, origin_slope_err })
}

/// Centre-of-mass displacement per step and fitted velocities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `(<m_x>_t - <m_x>_0, <m_y>_t - <m_y>_0)` for `t = 0..=T`.
    pub displacement: Vec<(f64, f64)>,
    pub fit_x: LinearFit,
    pub fit_y: LinearFit,
    pub force: ForceConfig,
}

impl Trajectory {
    fn from_displacement(displacement: Vec<(f64, f64)>, force: ForceConfig) -> Result<Self> {
        let xs: Vec<f64> = displacement.iter().map(|d| d.0).collect();
        let ys: Vec<f64> = displacement.iter().map(|d| d.1).collect();
        Ok(Trajectory { fit_x: fit_line(&xs)?, fit_y: fit_line(&ys)?, displacement, force })
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.fit_x.slope, self.fit_y.slope)
    }

    /// `t,dx,dy`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["t", "dx", "dy"]);
        for (i, d) in self.displacement.iter().enumerate() {
            t.push_row([i.to_string(), d.0.to_string(), d.1.to_string()]);
        }
        t
    }
}

fn displacements(state: &WalkerState, protocol: &StepProtocol, steps: u32, force_x: f64) -> Result<Vec<(f64, f64)>> {
    let mut coms = Vec::with_capacity(steps as usize + 1);
    evolve_observed(state, protocol, steps, force_x, |_, s| coms.push(center_of_mass(s)))?;
    let c0 = coms[0];
    Ok(coms.into_iter().map(|c| (c.0 - c0.0, c.1 - c0.1)).collect())
}

/// Evolves a packet under `kind` with force and records its centre of mass.
pub fn forced_trajectory_with(
    spec: &WavepacketSpec,
    force: ForceConfig,
    steps: u32,
    kind: ProtocolKind,
) -> Result<Trajectory> {
    let state = make_wavepacket_for(spec, kind)?;
    let d = displacements(&state, &kind.protocol(spec.delta)?, steps, force.f_x)?;
    Trajectory::from_displacement(d, force)
}

pub fn forced_trajectory(spec: &WavepacketSpec, force: ForceConfig, steps: u32) -> Result<Trajectory> {
    forced_trajectory_with(spec, force, steps, ProtocolKind::Direct)
}

/// Fitted force-free drift velocity of a packet.
pub fn measure_group_velocity(spec: &WavepacketSpec, steps: u32) -> Result<Trajectory> {
    if steps < 2 {
        return Err(Error::InvalidArgument("velocity fit needs at least 2 steps".into()));
    }
    forced_trajectory(spec, ForceConfig::zero(), steps)
}

/// Semiclassical displacement after `steps`: the step producing state `tau`
/// contributes `v(q0 + tau F) + F Omega(q0 + tau F) y_hat` with the
/// eigenstate-form curvature.
pub fn semiclassical_displacement(spec: &WavepacketSpec, force_x: f64, steps: u32) -> Result<(f64, f64)> {
    let (mut dx, mut dy) = (0.0, 0.0);
    for tau in 1..=steps {
        let q = (spec.q0.0 + tau as f64 * force_x, spec.q0.1);
        let (vx, vy) = group_velocity(q, spec.delta, spec.band)?;
        dx += vx;
        dy += vy + force_x * berry_curvature_eigenstate(q, spec.delta, spec.band)?;
    }
    Ok((dx, dy))
}

/// Grid `-pi + 2 pi i / N`, `i = 1..=N`.
pub fn packet_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| -PI + TAU * i as f64 / n as f64).collect()
}

/// Parameters of a band-averaged run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageConfig {
    pub delta: f64,
    pub band: Band,
    pub force_x: f64,
    pub grid: usize,
    pub steps: u32,
    pub sigma_g: f64,
    pub combine_inverse: bool,
}

impl AverageConfig {
    pub fn new(delta: f64, band: Band, force_x: f64) -> Self {
        AverageConfig { delta, band, force_x, grid: 11, steps: 5, sigma_g: 10.0, combine_inverse: true }
    }
}

/// Per-packet displacement records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub q0: (f64, f64),
    pub direct: Vec<(f64, f64)>,
    pub inverse: Option<Vec<(f64, f64)>>,
}

/// Band-averaged drift and the fitted Chern number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandAverage {
    pub config: AverageConfig,
    pub direct: Vec<(f64, f64)>,
    pub inverse: Option<Vec<(f64, f64)>>,
    /// `(direct - inverse) / 2` if combined, else `direct`.
    pub combined: Vec<(f64, f64)>,
    pub fit_x: LinearFit,
    pub fit_y: LinearFit,
    /// `2 pi / F_x` times the affine y-slope; `None` at zero force.
    pub nu_fit: Option<f64>,
    pub nu_err: Option<f64>,
    /// Same from the through-origin fit.
    pub nu_fit_origin: Option<f64>,
    pub packets: Vec<PacketRecord>,
}

impl BandAverage {
    /// `t,dx,dy` of the combined average.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["t", "dx", "dy"]);
        for (i, d) in self.combined.iter().enumerate() {
            t.push_row([i.to_string(), d.0.to_string(), d.1.to_string()]);
        }
        t
    }
}

fn mean_of(tracks: &[&Vec<(f64, f64)>], len: usize) -> Vec<(f64, f64)> {
    let n = tracks.len() as f64;
    (0..len)
        .map(|t| {
            let (sx, sy) = tracks.iter().fold((0.0, 0.0), |a, tr| (a.0 + tr[t].0, a.1 + tr[t].1));
            (sx / n, sy / n)
        })
        .collect()
}

/// Averages packet drifts over an `N x N` grid of centres.
pub fn band_averaged_displacement(cfg: &AverageConfig) -> Result<BandAverage> {
    if cfg.grid == 0 {
        return Err(Error::InvalidArgument("packet grid must be non-empty".into()));
    }
    ensure_finite("F_x", cfg.force_x)?;
    let axis = packet_grid(cfg.grid);
    let centres: Vec<(f64, f64)> = axis.iter().flat_map(|&x| axis.iter().map(move |&y| (x, y))).collect();
    let direct_p = protocol_u(cfg.delta)?;
    let inverse_p = protocol_u_inverse(cfg.delta)?;
    let packets = par::try_map(&centres, |&q0| {
        let spec = WavepacketSpec::new(q0, cfg.band, cfg.sigma_g, cfg.delta)?;
        let st = make_wavepacket_for(&spec, ProtocolKind::Direct)?;
        let direct = displacements(&st, &direct_p, cfg.steps, cfg.force_x)?;
        let inverse = if cfg.combine_inverse {
            let st = make_wavepacket_for(&spec, ProtocolKind::Inverse)?;
            Some(displacements(&st, &inverse_p, cfg.steps, cfg.force_x)?)
        } else {
            None
        };
        Ok::<_, Error>(PacketRecord { q0, direct, inverse })
    })?;
    let len = cfg.steps as usize + 1;
    let direct = mean_of(&packets.iter().map(|p| &p.direct).collect::<Vec<_>>(), len);
    let inverse = if cfg.combine_inverse {
        Some(mean_of(&packets.iter().filter_map(|p| p.inverse.as_ref()).collect::<Vec<_>>(), len))
    } else {
        None
    };
    let combined: Vec<(f64, f64)> = match &inverse {
        Some(inv) => direct.iter().zip(inv).map(|(a, b)| (0.5 * (a.0 - b.0), 0.5 * (a.1 - b.1))).collect(),
        None => direct.clone(),
    };
    let fit_x = fit_line(&combined.iter().map(|d| d.0).collect::<Vec<_>>())?;
    let fit_y = fit_line(&combined.iter().map(|d| d.1).collect::<Vec<_>>())?;
    let scale = (cfg.force_x != 0.0).then(|| TAU / cfg.force_x);
    Ok(BandAverage {
        config: *cfg,
        direct,
        inverse,
        combined,
        fit_x,
        fit_y,
        nu_fit: scale.map(|s| s * fit_y.slope),
        nu_err: scale.map(|s| s.abs() * fit_y.slope_err),
        nu_fit_origin: scale.map(|s| s * fit_y.origin_slope),
        packets,
    })
}

/// Measured and analytic group velocity at one packet centre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocitySample {
    pub q0: (f64, f64),
    pub measured: (f64, f64),
    pub analytic: (f64, f64),
}

/// Force-free velocity fits over the `N x N` packet grid.
pub fn velocity_map(delta: f64, band: Band, grid: usize, steps: u32, sigma_g: f64) -> Result<Vec<VelocitySample>> {
    let axis = packet_grid(grid);
    let centres: Vec<(f64, f64)> = axis.iter().flat_map(|&x| axis.iter().map(move |&y| (x, y))).collect();
    par::try_map(&centres, |&q0| {
        let spec = WavepacketSpec::new(q0, band, sigma_g, delta)?;
        let tr = measure_group_velocity(&spec, steps)?;
        Ok(VelocitySample { q0, measured: tr.velocity(), analytic: group_velocity(q0, delta, band)? })
    })
}

/// Centre-of-mass statistics over random plate displacements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub n_samples: usize,
    pub sigma_shift: f64,
    pub seed: u64,
    /// Per step, mean displacement over samples.
    pub mean: Vec<(f64, f64)>,
    /// Per step, sample standard deviation.
    pub std: Vec<(f64, f64)>,
}

/// Evolves `input` `n_samples` times with every grating of every step shifted
/// along its own axis by an independent `N(0, (sigma_shift Lambda)^2)` draw.
///
/// Sample `k` draws from a ChaCha8 stream `k` under `seed`, so results do not
/// depend on scheduling.
pub fn misalignment_monte_carlo(
    input: &WalkerState,
    protocol: &StepProtocol,
    steps: u32,
    force_x: f64,
    sigma_shift: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloSummary> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least 2 samples".into()));
    }
    if !(sigma_shift >= 0.0 && sigma_shift.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma_shift must be >= 0, got {sigma_shift}")));
    }
    let normal = Normal::new(0.0, sigma_shift * protocol.lambda)
        .map_err(|e| Error::InvalidArgument(format!("shift distribution: {e}")))?;
    let c0 = center_of_mass(input);
    let runs = par::try_map(&(0..n_samples).collect::<Vec<_>>(), |&k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut track = Vec::with_capacity(steps as usize + 1);
        track.push((0.0, 0.0));
        let mut state = input.clone();
        for tau in 1..=steps {
            let mut p = protocol.with_force(tau, force_x);
            for plate in &mut p.plates {
                if matches!(plate.kind, PlateKind::Grating(_)) {
                    plate.shift += normal.sample(&mut rng);
                }
            }
            state = evolve_schedule(&state, 1, |_| p.clone())?;
            let c = center_of_mass(&state);
            track.push((c.0 - c0.0, c.1 - c0.1));
        }
        Ok::<_, Error>(track)
    })?;
    let len = steps as usize + 1;
    let n = n_samples as f64;
    let mut mean = vec![(0.0, 0.0); len];
    let mut std = vec![(0.0, 0.0); len];
    for t in 0..len {
        let (mx, my) = runs.iter().fold((0.0, 0.0), |a, r| (a.0 + r[t].0 / n, a.1 + r[t].1 / n));
        let (vx, vy) = runs
            .iter()
            .fold((0.0, 0.0), |a, r| (a.0 + (r[t].0 - mx).powi(2), a.1 + (r[t].1 - my).powi(2)));
        mean[t] = (mx, my);
        std[t] = ((vx / (n - 1.0)).sqrt(), (vy / (n - 1.0)).sqrt());
    }
    Ok(MonteCarloSummary { n_samples, sigma_shift, seed, mean, std })
}

/// Normalized single-site input with the given coin.
pub fn localized_input(coin: CoinSpinor) -> Result<WalkerState> {
    crate::lattice::localized_state((0, 0), coin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn spec_validation() {
        assert!(WavepacketSpec::new((0.0, 0.0), Band::Upper, 1.5, 1.0).is_err());
        assert!(WavepacketSpec::new((f64::NAN, 0.0), Band::Upper, 3.0, 1.0).is_err());
    }

    #[test]
    fn packet_is_normalized_with_expected_window() {
        let spec = WavepacketSpec::new((0.3, -1.0), Band::Lower, 2.5, FRAC_PI_2).unwrap();
        let p = make_wavepacket(&spec).unwrap();
        assert!((p.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(p.half_widths(), (10, 10));
    }

    #[test]
    fn fit_line_recovers_exact_lines() {
        let f = fit_line(&[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_err < 1e-12);
        let g = fit_line(&[0.0, 0.5, 1.0]).unwrap();
        assert!((g.origin_slope - 0.5).abs() < 1e-14);
        assert!(fit_line(&[1.0]).is_err());
    }

    #[test]
    fn group_velocity_of_reference_packet() {
        let spec = WavepacketSpec::new((FRAC_PI_2, PI), Band::Upper, 10.0, FRAC_PI_2).unwrap();
        let (vx, vy) = measure_group_velocity(&spec, 5).unwrap().velocity();
        assert!(vx.abs() < 0.02, "{vx}");
        assert!((vy + 0.5).abs() < 0.02, "{vy}");
    }

    #[test]
    fn zero_sigma_monte_carlo_has_no_spread() {
        let input = localized_input(CoinSpinor::h()).unwrap();
        let mc = misalignment_monte_carlo(&input, &protocol_u(FRAC_PI_2).unwrap(), 3, 0.0, 0.0, 4, 7).unwrap();
        assert!(mc.std.iter().all(|s| s.0 == 0.0 && s.1 == 0.0));
    }

    #[test]
    fn force_warning_threshold() {
        let f = ForceConfig::new(PI / 20.0, FRAC_PI_2).unwrap();
        assert!(!f.warning);
        let g = band_gaps(FRAC_PI_2, 101).unwrap().gap_0;
        assert!(ForceConfig::new(0.6 * g, FRAC_PI_2).unwrap().warning);
    }
}
