//! One function per verb: validate, compute, write.

use std::path::Path;

use qwalk::bloch::{self, Band};
use qwalk::coin::{protocol_u, CoinSpinor};
use qwalk::edge::{self, Boundary};
use qwalk::error::Error as CoreError;
use qwalk::export::Table;
use qwalk::lattice::{self, distribution, localized_state, Distribution};
use qwalk::optics::{self, LatticeLayout, OpticalConfig, RasterSpec};
use qwalk::transport::{self, AverageConfig, ForceConfig};
use serde::Serialize;
use serde_json::json;

use crate::config::*;
use crate::error::CliError;
use crate::output::Output;

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

fn coin(label: &str) -> Result<CoinSpinor, CliError> {
    CoinSpinor::from_label(label).map_err(|e| bad(e.to_string()))
}

fn band(label: &str) -> Result<Band, CliError> {
    Band::parse(label).map_err(|e| bad(e.to_string()))
}

fn boundary(label: &str) -> Result<Boundary, CliError> {
    match label.to_ascii_lowercase().as_str() {
        "reflecting" => Ok(Boundary::Reflecting),
        "truncated" => Ok(Boundary::Truncated),
        other => Err(bad(format!("unknown boundary {other:?} (reflecting or truncated)"))),
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} must be positive, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(bad(format!("{name} must be >= {min}, got {v}")))
    }
}

/// Everything a command needs besides its parameters.
pub struct Context {
    pub png: bool,
}

fn write_image(out: &mut Output, stem: &str, image: &optics::CameraImage, png: bool) -> Result<(), CliError> {
    out.pgm(&format!("{stem}.pgm"), image)?;
    if png {
        #[cfg(feature = "png")]
        out.png(&format!("{stem}.png"), image)?;
    }
    Ok(())
}

pub fn validate_evolve(p: &Evolve) -> Result<(), CliError> {
    coin(&p.input)?;
    Ok(())
}

pub fn evolve(p: &Evolve, ctx: &Context, out: &mut Output) -> Result<(), CliError> {
    let input = localized_state((0, 0), coin(&p.input)?)?;
    let protocol = protocol_u(p.delta.0)?;
    let cfg = OpticalConfig::default();
    let raster = RasterSpec::default();
    let layout = LatticeLayout::from_config(&cfg);
    let width = (p.steps as usize).to_string().len();
    let mut com = Table::new(&["t", "com_x", "com_y"]);
    let mut frames = Vec::new();
    lattice::evolve_observed(&input, &protocol, p.steps, p.force.0, |t, s| {
        let d = distribution(s);
        let c = d.center_of_mass();
        com.push_row([t.to_string(), c.0.to_string(), c.1.to_string()]);
        frames.push((t, d));
    })?;
    for (t, d) in &frames {
        out.table(&format!("dist_t{t:0width$}.csv"), &d.to_table())?;
        if p.render {
            let r = optics::render_distribution(d, &cfg, &raster, &layout)?;
            if r.clipping_warning() {
                warn(&format!("t={t}: {:.2}% of the power fell outside the raster", 100.0 * r.clipped_fraction));
            }
            write_image(out, &format!("frame_t{t:0width$}"), &r.image, ctx.png)?;
        }
    }
    out.table("center_of_mass.csv", &com)
}

pub fn validate_bands(p: &Bands) -> Result<(), CliError> {
    at_least("grid", p.grid, 2)
}

pub fn bands(p: &Bands, out: &mut Output) -> Result<(), CliError> {
    let grid = bloch::bz_grid(p.delta.0, p.grid)?;
    out.table("bands.csv", &grid.to_table())?;
    let gaps = bloch::band_gaps(p.delta.0, 101)?;
    out.json("gaps.json", &gaps)
}

pub fn validate_chern(p: &Chern) -> Result<(), CliError> {
    at_least("grid", p.grid, 2)
}

pub fn chern(p: &Chern, out: &mut Output) -> Result<(), CliError> {
    let lower = bloch::chern_number(p.delta.0, Band::Lower, p.grid)?;
    let upper = bloch::chern_number(p.delta.0, Band::Upper, p.grid)?;
    let summary = json!({
        "delta": p.delta.0,
        "grid": p.grid,
        "chern_minus": lower.value,
        "chern_plus": upper.value,
        "raw_minus": lower.raw,
        "min_gap": lower.min_gap,
    });
    println!("{}", json!({ "chern_minus": lower.value, "chern_plus": upper.value }));
    out.json("chern.json", &summary)
}

pub fn validate_phase_diagram(p: &PhaseDiagram) -> Result<(), CliError> {
    at_least("count", p.count, 3)?;
    at_least("chern_grid", p.chern_grid, 2)?;
    at_least("gap_grid", p.gap_grid, 3)?;
    if !(p.to.0 > p.from.0) {
        return Err(bad("phase diagram needs to > from"));
    }
    Ok(())
}

pub fn phase_diagram(p: &PhaseDiagram, out: &mut Output) -> Result<(), CliError> {
    let n = p.count;
    let deltas: Vec<f64> = (0..n).map(|i| p.from.0 + (p.to.0 - p.from.0) * i as f64 / (n - 1) as f64).collect();
    let rows = bloch::phase_diagram(&deltas, p.chern_grid, p.gap_grid)?;
    for r in rows.iter().filter(|r| r.chern_minus.is_none()) {
        warn(&format!("delta={:.6} is too close to a gap closing for a Chern number", r.delta));
    }
    out.table("phase_diagram.csv", &bloch::phase_table(&rows))?;
    let transitions = bloch::find_transitions(p.from.0, p.to.0, n, 1e-4, 1e-3)?;
    out.json("transitions.json", &transitions)
}

pub fn validate_transport(p: &Transport) -> Result<(), CliError> {
    band(&p.band)?;
    at_least("grid", p.grid, 1)?;
    at_least("steps", p.steps as usize, 1)?;
    if p.sigma_g < 2.0 {
        return Err(bad(format!("sigma_g must be >= 2, got {}", p.sigma_g)));
    }
    Ok(())
}

fn track_table(track: &[(f64, f64)]) -> Table {
    let mut t = Table::new(&["t", "dx", "dy"]);
    for (i, d) in track.iter().enumerate() {
        t.push_row([i.to_string(), d.0.to_string(), d.1.to_string()]);
    }
    t
}

pub fn transport(p: &Transport, out: &mut Output) -> Result<(), CliError> {
    let force = ForceConfig::new(p.force.0, p.delta.0)?;
    if force.warning {
        warn(&format!("F_x / gap_0 = {:.3}: adiabatic transport is at risk", force.adiabaticity_ratio));
    }
    let cfg = AverageConfig {
        delta: p.delta.0,
        band: band(&p.band)?,
        force_x: p.force.0,
        grid: p.grid,
        steps: p.steps,
        sigma_g: p.sigma_g,
        combine_inverse: p.combine_inverse,
    };
    let avg = transport::band_averaged_displacement(&cfg)?;
    out.table("transport.csv", &avg.to_table())?;
    out.table("direct.csv", &track_table(&avg.direct))?;
    if let Some(inv) = &avg.inverse {
        out.table("inverse.csv", &track_table(inv))?;
    }
    let mut packets = Table::new(&["q_x", "q_y", "protocol", "t", "dx", "dy"]);
    for pk in &avg.packets {
        let tracks = std::iter::once(("direct", &pk.direct)).chain(pk.inverse.iter().map(|t| ("inverse", t)));
        for (name, track) in tracks {
            for (t, d) in track.iter().enumerate() {
                packets.push_row([pk.q0.0.to_string(), pk.q0.1.to_string(), name.into(), t.to_string(), d.0.to_string(), d.1.to_string()]);
            }
        }
    }
    out.table("packets.csv", &packets)?;
    #[derive(Serialize)]
    struct Summary {
        delta: f64,
        #[serde(rename = "F_x")]
        f_x: f64,
        nu_fit: Option<f64>,
        nu_err: Option<f64>,
        nu_fit_origin: Option<f64>,
        slope_x: f64,
        slope_y: f64,
        adiabaticity_ratio: f64,
        adiabaticity_warning: bool,
    }
    let s = Summary {
        delta: p.delta.0,
        f_x: p.force.0,
        nu_fit: avg.nu_fit,
        nu_err: avg.nu_err,
        nu_fit_origin: avg.nu_fit_origin,
        slope_x: avg.fit_x.slope,
        slope_y: avg.fit_y.slope,
        adiabaticity_ratio: force.adiabaticity_ratio,
        adiabaticity_warning: force.warning,
    };
    out.json("summary.json", &s)
}

pub fn validate_velocity_map(p: &VelocityMap) -> Result<(), CliError> {
    band(&p.band)?;
    at_least("grid", p.grid, 1)?;
    at_least("steps", p.steps as usize, 2)?;
    if p.sigma_g < 2.0 {
        return Err(bad(format!("sigma_g must be >= 2, got {}", p.sigma_g)));
    }
    Ok(())
}

pub fn velocity_map(p: &VelocityMap, out: &mut Output) -> Result<(), CliError> {
    let samples = transport::velocity_map(p.delta.0, band(&p.band)?, p.grid, p.steps, p.sigma_g)?;
    let mut t = Table::new(&["q_x", "q_y", "v_x", "v_y", "v_x_analytic", "v_y_analytic"]);
    let mut worst: f64 = 0.0;
    for s in &samples {
        worst = worst.max((s.measured.0 - s.analytic.0).abs()).max((s.measured.1 - s.analytic.1).abs());
        t.push_row([s.q0.0, s.q0.1, s.measured.0, s.measured.1, s.analytic.0, s.analytic.1]);
    }
    out.table("velocity_map.csv", &t)?;
    out.json("summary.json", &json!({ "delta": p.delta.0, "max_abs_error": worst }))
}

pub fn validate_edge(p: &Edge) -> Result<(), CliError> {
    boundary(&p.boundary)?;
    at_least("width", p.width, 8)?;
    at_least("q_count", p.q_count, 4)
}

pub fn edge(p: &Edge, out: &mut Output) -> Result<(), CliError> {
    let spectrum = edge::strip_spectrum(p.delta.0, p.width, p.q_count, boundary(&p.boundary)?)?;
    out.table("edge_spectrum.csv", &spectrum.to_table())?;
    let invariants = match edge::edge_invariants(&spectrum, edge::LAMBDA_EDGE) {
        Ok(i) => Some(i),
        Err(e @ (CoreError::NearCritical { .. } | CoreError::RefineResolution { .. })) => {
            warn(&format!("edge modes not counted: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let chern = match bloch::chern_number(p.delta.0, Band::Lower, 24) {
        Ok(c) => Some(c.value),
        Err(CoreError::NearCritical { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    out.json(
        "edge_summary.json",
        &json!({
            "delta": p.delta.0,
            "half_width": p.width,
            "chern_minus": chern,
            "invariants": invariants,
            "w0_minus_wpi": invariants.map(|i| i.nu()),
            "mirror_asymmetry": spectrum.mirror_asymmetry(),
        }),
    )
}

fn optical(wavelength: f64, waist: f64, period: f64, focal_length: f64, spacing: f64) -> Result<OpticalConfig, CliError> {
    positive("wavelength", wavelength)?;
    positive("waist", waist)?;
    positive("period", period)?;
    positive("focal_length", focal_length)?;
    if !(spacing >= 0.0 && spacing.is_finite()) {
        return Err(bad(format!("spacing must be >= 0, got {spacing}")));
    }
    Ok(OpticalConfig { wavelength, waist, period, focal_length, plate_spacing: spacing })
}

pub fn validate_optics(p: &Optics) -> Result<(), CliError> {
    optical(p.wavelength, p.waist, p.period, p.focal_length, 0.0)?;
    positive("pixel_pitch", p.pixel_pitch)?;
    at_least("raster_width", p.raster_width, 8)?;
    at_least("raster_height", p.raster_height, 8)?;
    at_least("calibration_order", p.calibration_order as usize, 1)
}

pub fn optics(p: &Optics, ctx: &Context, out: &mut Output) -> Result<(), CliError> {
    let cfg = optical(p.wavelength, p.waist, p.period, p.focal_length, 0.0)?;
    let raster = RasterSpec { width: p.raster_width, height: p.raster_height, pitch: p.pixel_pitch };
    let layout = LatticeLayout::from_config(&cfg).with_tilt(p.tilt.0);
    let truth: Distribution = if p.from.is_empty() {
        let input = localized_state((0, 0), CoinSpinor::h())?;
        distribution(&lattice::evolve(&input, &protocol_u(std::f64::consts::FRAC_PI_2)?, 5, 0.0)?)
    } else {
        let path = Path::new(&p.from);
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Distribution::from_csv(&text)?
    };
    let rendered = optics::render_distribution(&truth, &cfg, &raster, &layout)?;
    if rendered.clipping_warning() {
        warn(&format!("{:.2}% of the power fell outside the raster", 100.0 * rendered.clipped_fraction));
    }
    write_image(out, "image", &rendered.image, ctx.png)?;
    let half = (truth.half_x.max(1), truth.half_y.max(1));
    let grid = optics::calibrate_sites(&cfg, &raster, &layout, p.calibration_order, half)?;
    out.json("site_grid.json", &grid)?;
    let read = optics::extract_distribution(&rendered.image, &grid)?;
    out.table("extracted.csv", &read.to_table())?;
    let overlap = optics::adjacent_mode_overlap(&cfg);
    out.json(
        "report.json",
        &json!({
            "similarity": lattice::similarity(&truth, &read)?,
            "spot_radius_m": optics::spot_radius(&cfg),
            "site_pitch_m": cfg.site_pitch(),
            "adjacent_overlap": overlap,
            "adopted_overlap_convention": optics::OverlapReport::ADOPTED,
            "clipped_fraction": rendered.clipped_fraction,
        }),
    )
}

pub fn validate_deviations(p: &Deviations) -> Result<(), CliError> {
    optical(p.wavelength, p.waist, p.period, 0.5, p.spacing)?;
    coin(&p.input)?;
    Ok(())
}

pub fn deviations(p: &Deviations, out: &mut Output) -> Result<(), CliError> {
    let cfg = optical(p.wavelength, p.waist, p.period, 0.5, p.spacing)?;
    let r = optics::simulate_nonidealities_1d(p.delta.0, p.steps, &cfg, &coin(&p.input)?)?;
    let lo = -(r.ideal.half_x.max(r.perturbed.half_x) as i64);
    let mut t = Table::new(&["m", "ideal", "perturbed"]);
    for m in lo..=-lo {
        t.push_row([m as f64, r.ideal.get(m, 0), r.perturbed.get(m, 0)]);
    }
    out.table("deviations.csv", &t)?;
    out.json("report.json", &json!({ "steps": r.steps, "spacing_m": p.spacing, "similarity": r.similarity }))
}

pub fn validate_monte_carlo(p: &MonteCarlo) -> Result<(), CliError> {
    coin(&p.input)?;
    at_least("samples", p.samples, 2)?;
    if !(p.sigma_shift >= 0.0 && p.sigma_shift.is_finite()) {
        return Err(bad(format!("sigma_shift must be >= 0, got {}", p.sigma_shift)));
    }
    Ok(())
}

pub fn monte_carlo(p: &MonteCarlo, out: &mut Output) -> Result<(), CliError> {
    let input = localized_state((0, 0), coin(&p.input)?)?;
    let s = transport::misalignment_monte_carlo(&input, &protocol_u(p.delta.0)?, p.steps, p.force.0, p.sigma_shift, p.samples, p.seed)?;
    let mut t = Table::new(&["t", "mean_x", "mean_y", "std_x", "std_y"]);
    for (i, (m, sd)) in s.mean.iter().zip(&s.std).enumerate() {
        t.push_row([i as f64, m.0, m.1, sd.0, sd.1]);
    }
    out.table("monte_carlo.csv", &t)
}
