//! Appliance activation detection and operation-mode classification on
//! per-appliance power traces.
//!
//! The pipeline: simulate labeled daily traces ([`simulator`]), find turn-on
//! times by normalized absolute-difference cross-correlation against a
//! reference pattern ([`detection`]), pick each activation's operation mode by
//! DTW distance to per-mode patterns ([`classification`]), then score the
//! results and produce tariff advice ([`evaluation`]).

pub mod classification;
pub mod detection;
pub mod error;
pub mod evaluation;
pub mod series;
pub mod simulator;

pub use error::{Error, Result};
pub use series::{PowerSeries, ReferencePattern, Sup, DAY_SECONDS};
