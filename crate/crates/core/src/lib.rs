//! Heralded single-photon antibunching: a discrete-event simulator of the
//! source, optics and detectors, and a streaming coincidence analysis of the
//! resulting time tags.
//!
//! The simulator writes PTAG files ([`timetag`]); the analysis consumes any
//! sorted tag stream ([`coincidence`], [`table`]). [`experiment`] ties both to
//! a text configuration and the two reference presets.

pub mod coincidence;
pub mod detection;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod optics;
pub mod seed;
pub mod source;
pub mod spacetime;
pub mod table;
pub mod timetag;

pub use error::{Error, Result};
