//! dephasim-core: simulation of correlated dephasing noise and pulsed
//! control on small qubit registers.
//!
//! The crate is organised bottom-up:
//!
//! * [`noise`] — correlated Ornstein–Uhlenbeck dephasing shifts and their
//!   correlation function / spectrum,
//! * [`pulses`] — Gaussian pulse trains, accumulated phases and phase
//!   modulation spectra,
//! * [`functional`] — the dephasing overlap integrals driving all analytic
//!   fidelity estimates,
//! * [`basis`] / [`evolution`] — register states, dressed bases, noisy
//!   propagation, ensemble averaging and the second-order analytic density,
//! * [`metrics`] — fidelity and gate-error reporting,
//! * [`scenarios`] — packaged experiment sweeps producing CSV tables,
//! * [`config`] — the text config format consumed by the CLI.

pub mod basis;
pub mod config;
pub mod error;
pub mod evolution;
pub mod functional;
pub mod linalg;
pub mod metrics;
pub mod noise;
pub mod pulses;
pub mod quad;
pub mod rng;
pub mod scenarios;

pub use error::{Result, SimError};
pub use linalg::{C64, CMatrix, CVector};
