//! Numerical simulator and analysis toolkit for a superconducting atomic
//! frequency comb: N two-level emitters strongly coupled to one cavity mode.
//!
//! The crate covers the full pipeline of the underlying experiment at desk
//! scale: Tavis–Cummings operator construction ([`hilbert`]), driven Lindblad
//! time evolution ([`dynamics`]), semiclassical transmission spectra
//! ([`spectra`]), the fit/extraction procedures ([`analysis`]), and the
//! flux-crosstalk calibration algebra ([`calibration`]). Batch orchestration
//! with JSON configs and CSV output lives in [`config`]/[`runner`] behind the
//! `comb-qed` binary.
//!
//! Unit conventions: all stored frequencies and rates are non-angular MHz
//! (the value of ω/2π); time is in ns; generators are built in rad/ns.

pub mod analysis;
pub mod calibration;
pub mod config;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod runner;
pub mod spectra;

mod rk;
mod sparse;

pub use error::{CombError, Result};
