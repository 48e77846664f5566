//! Command-line pipeline: synthetic motions, structural demands, fragility
//! fits and bootstrap bands, with CSV/SVG output and a run manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
