//! Simulation and analysis of twin photon beams from spontaneous parametric
//! down-conversion recorded frame-by-frame on an intensified CCD.
//!
//! The crate is organised along the data flow of an experiment:
//!
//! * [`source`] draws photon pairs on the cone layer for each pump pulse,
//! * [`detector`] thins them by the detection efficiency, maps them onto the
//!   camera, adds dark counts and, optionally, renders and re-segments raster
//!   frames,
//! * [`stats`] builds the joint signal-idler photocount distribution and runs
//!   the classicality test,
//! * [`spatial`] accumulates signal-vs-idler position histograms and fits the
//!   width of the correlation area,
//! * [`io`] holds every on-disk format and [`pipeline`] / [`commands`] tie
//!   the pieces together for the `twinbeam` binary.

pub mod commands;
pub mod detector;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod rng;
pub mod source;
pub mod spatial;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
