//! Simulation of two-mode entangled coherent states: heralded preparation,
//! lossy transmission, entanglement purification and nondemolition readout,
//! with every closed form cross-checked against truncated Fock-space numerics.
//!
//! Modules, bottom up:
//!
//! * [`fock`]: multimode kets and density matrices, beam splitters, cross-Kerr gates.
//! * [`preparation`]: conditional preparation circuits and their closed forms.
//! * [`channel`]: the loss line and the two-parameter family it preserves.
//! * [`qubit`]: Bell mixtures, entanglement of formation, the purification walk.
//! * [`device`]: the Fock-level purification hardware and feedback loop.
//! * [`detection`]: parity coincidences, fringe contrast and back-action.

pub mod channel;
pub mod detection;
pub mod device;
pub mod error;
pub mod fock;
pub mod preparation;
pub mod qubit;

pub use num_complex::Complex64 as C64;

pub use channel::{ChannelSpec, Fit, ParamState};
pub use detection::{ComplementarityReport, InterferencePattern};
pub use device::{DeviceOutcome, Discrimination, Level};
pub use error::{Error, Result};
pub use fock::{default_cutoff, DensityMatrix, ModeSpec, PureState, Tolerances, PHOTON_MODE_CUTOFF};
pub use preparation::{Heralds, PrepResult};
pub use qubit::{Bell, BellMixture, PurityWalk, Spin, StepStats};

/// Toolkit version, echoed into experiment outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
