//! Simulation and analysis of a two-dimensional topological discrete-time
//! quantum walk whose lattice sites live in the transverse wavevector of a
//! light beam and whose coin is the polarization.
//!
//! The crate is organised bottom-up:
//!
//! * [`coin`]: liquid-crystal plate operators, g-plates and step protocols.
//! * [`lattice`]: exact position-space evolution of walker states.
//! * [`bloch`]: Floquet bands, Berry curvature, Chern numbers, gaps.
//! * [`transport`]: wavepackets, forced evolution, anomalous displacement.
//! * [`edge`]: cylinder spectra and edge-mode invariants.
//! * [`optics`]: focal-plane camera model, calibration and read-out, and
//!   the free-propagation non-ideality model.
//!
//! Operator products are always written right-to-left: the first plate the
//! light crosses is the rightmost factor.
//!
//! With the default `parallel` feature, grid sweeps run on rayon; without it
//! every map runs sequentially. Results are identical either way.

// NaN must fail range guards, so `!(x > 0.0)` is written on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bloch;
pub mod coin;
pub mod edge;
pub mod error;
pub mod export;
pub mod lattice;
pub mod optics;
pub mod par;
pub mod transport;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Convenience re-exports of the most used types.
pub mod prelude {
    pub use crate::bloch::{Band, BlochSample};
    pub use crate::coin::{Axis, CoinOperator, CoinSpinor, PlateDescriptor, StepProtocol};
    pub use crate::lattice::{Distribution, WalkerState};
    pub use crate::transport::{ForceConfig, ProtocolKind, WavepacketSpec};
    pub use crate::{Complex64, Error, Result};
}
