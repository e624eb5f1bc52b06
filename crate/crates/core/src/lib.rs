//! Electron wave-function shaping for selective excitation and entanglement
//! of confined optical and vibrational modes.
//!
//! The crate computes boundary-element plasmon eigenmodes and vibrational
//! mode functions of a nanostructure, assembles the inelastic transfer matrix
//! linking incident and scattered transverse momentum components, inverts it
//! for a target final state, and verifies the outcome through momentum-
//! resolved energy-loss maps and mode-fraction metrics.

pub mod bem;
pub mod cli;
pub mod config;
pub mod eels;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod mesh;
pub mod modes;
pub mod report;
pub mod shaper;
pub mod special;
pub mod units;
pub mod vibrational;

pub use error::{Error, Result};
