//! Config file sections and their command-line twins.
//!
//! Every section is one struct of optional fields used both as clap flags
//! and as a JSON object; resolution takes flags first, then the file, then
//! the built-in default.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::angle::Angle;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

macro_rules! section {
    (
        $(#[$m:meta])*
        $args:ident => $resolved:ident {
            $( $(#[$fm:meta])* $field:ident : $ty:ty = $default:expr ),* $(,)?
        }
    ) => {
        $(#[$m])*
        #[derive(clap::Args, Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
        #[serde(deny_unknown_fields)]
        pub struct $args {
            $(
                $(#[$fm])*
                #[arg(long)]
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        #[derive(Debug, Clone, Serialize, PartialEq)]
        pub struct $resolved {
            $( pub $field: $ty, )*
        }

        impl $args {
            pub fn resolve(&self, file: Option<&$args>) -> $resolved {
                $resolved {
                    $(
                        $field: self
                            .$field
                            .clone()
                            .or_else(|| file.and_then(|f| f.$field.clone()))
                            .unwrap_or_else(|| $default),
                    )*
                }
            }
        }
    };
}

section!(
    /// Walk from a localized input, one distribution per step.
    EvolveArgs => Evolve {
        /// Plate retardation (radians or e.g. pi/2).
        delta: Angle = Angle(FRAC_PI_2),
        steps: u32 = 5,
        /// Input polarization: H, V, D, A, L or R.
        input: String = "H".into(),
        /// Constant force along x (radians of q_x per step).
        force: Angle = Angle(0.0),
        /// Also write a camera frame per step.
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        render: bool = false,
    }
);

section!(
    /// Quasi-energy, axis and curvature over the Brillouin zone.
    BandsArgs => Bands {
        delta: Angle = Angle(FRAC_PI_2),
        /// Points per BZ axis.
        grid: usize = 101,
    }
);

section!(
    /// Plaquette Chern numbers of both bands.
    ChernArgs => Chern {
        delta: Angle = Angle(FRAC_PI_2),
        grid: usize = 48,
    }
);

section!(
    /// Chern number and gaps across a retardation sweep.
    PhaseDiagramArgs => PhaseDiagram {
        from: Angle = Angle(0.05),
        to: Angle = Angle(3.1),
        count: usize = 62,
        chern_grid: usize = 24,
        gap_grid: usize = 61,
    }
);

section!(
    /// Band-averaged drift under a constant force and the fitted Chern number.
    TransportArgs => Transport {
        delta: Angle = Angle(FRAC_PI_2),
        force: Angle = Angle(PI / 20.0),
        /// upper or lower.
        band: String = "lower".into(),
        grid: usize = 11,
        steps: u32 = 5,
        sigma_g: f64 = 10.0,
        /// Subtract the inverse-protocol run (halved difference).
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        combine_inverse: bool = true,
    }
);

section!(
    /// Force-free packet velocities against the band gradient.
    VelocityMapArgs => VelocityMap {
        delta: Angle = Angle(FRAC_PI_2),
        band: String = "upper".into(),
        grid: usize = 11,
        steps: u32 = 5,
        sigma_g: f64 = 10.0,
    }
);

section!(
    /// Strip spectrum and edge-mode counts.
    EdgeArgs => Edge {
        delta: Angle = Angle(7.0 * PI / 8.0),
        /// Half-width N of the strip (2N + 1 sites).
        width: usize = 30,
        q_count: usize = 201,
        /// reflecting or truncated.
        boundary: String = "reflecting".into(),
    }
);

section!(
    /// Render, calibrate and read back a distribution.
    OpticsArgs => Optics {
        /// Distribution CSV (`m_x,m_y,p`); empty means the five-step H walk.
        from: String = String::new(),
        wavelength: f64 = 632.8e-9,
        waist: f64 = 5e-3,
        period: f64 = 5e-3,
        focal_length: f64 = 0.5,
        /// Lattice tilt on the camera (radians).
        tilt: Angle = Angle(0.0),
        calibration_order: u32 = 3,
        raster_width: usize = 1024,
        raster_height: usize = 1024,
        pixel_pitch: f64 = 5e-6,
    }
);

section!(
    /// Free-propagation deviations of the 1D walk.
    DeviationsArgs => Deviations {
        delta: Angle = Angle(FRAC_PI_2),
        steps: usize = 10,
        input: String = "R".into(),
        /// Distance between consecutive plates (m).
        spacing: f64 = 0.02,
        wavelength: f64 = 632.8e-9,
        waist: f64 = 5e-3,
        period: f64 = 5e-3,
    }
);

section!(
    /// Centre-of-mass statistics under random grating displacements.
    MonteCarloArgs => MonteCarlo {
        delta: Angle = Angle(FRAC_PI_2),
        steps: u32 = 5,
        input: String = "H".into(),
        force: Angle = Angle(0.0),
        /// Displacement std as a fraction of the grating period.
        sigma_shift: f64 = 0.02,
        samples: usize = 100,
        seed: u64 = 1,
    }
);

/// Top-level config file.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub evolve: Option<EvolveArgs>,
    #[serde(default)]
    pub bands: Option<BandsArgs>,
    #[serde(default)]
    pub chern: Option<ChernArgs>,
    #[serde(default)]
    pub phase_diagram: Option<PhaseDiagramArgs>,
    #[serde(default)]
    pub transport: Option<TransportArgs>,
    #[serde(default)]
    pub velocity_map: Option<VelocityMapArgs>,
    #[serde(default)]
    pub edge: Option<EdgeArgs>,
    #[serde(default)]
    pub optics: Option<OpticsArgs>,
    #[serde(default)]
    pub deviations: Option<DeviationsArgs>,
    #[serde(default)]
    pub monte_carlo: Option<MonteCarloArgs>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ConfigFile = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let file = EvolveArgs { steps: Some(3), input: Some("V".into()), ..Default::default() };
        let flags = EvolveArgs { steps: Some(7), ..Default::default() };
        let r = flags.resolve(Some(&file));
        assert_eq!((r.steps, r.input.as_str(), r.delta), (7, "V", Angle(FRAC_PI_2)));
    }

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        assert!(ConfigFile::from_json(r#"{"schema_version": 1, "evolve": {"stepz": 3}}"#).is_err());
        assert!(ConfigFile::from_json(r#"{"schema_version": 1, "extra": 1}"#).is_err());
        assert!(ConfigFile::from_json(r#"{"schema_version": 2}"#).is_err());
        assert!(ConfigFile::from_json(r#"{"evolve": {}}"#).is_err());
        let ok = ConfigFile::from_json(r#"{"schema_version": 1, "evolve": {"delta": "pi/2", "steps": 2}}"#).unwrap();
        assert_eq!(ok.evolve.unwrap().steps, Some(2));
    }
}
