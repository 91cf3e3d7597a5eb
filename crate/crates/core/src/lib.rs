//! Simulation and parameter-extraction toolkit for quantum-well photonic-crystal
//! nanocavity lasers.
//!
//! The crate models a three-level laser (pump level, lasing level, cavity photons)
//! with Purcell-enhanced spontaneous emission into the cavity mode, quenched
//! emission into the photonic-crystal leaky modes, and nonradiative loss at the
//! etched hole surfaces. On top of the model it provides:
//!
//! * time-domain integration under CW or pulsed excitation ([`dynamics`]),
//! * steady-state solutions, lasing curves and threshold analysis ([`steadystate`]),
//! * a carrier-diffusion model of surface recombination ([`surface`]),
//! * nonlinear least-squares fitting of time traces and closed-form lifetime
//!   extraction ([`fitting`]).
//!
//! All quantities are SI internally; unit helpers for the conventional lab units
//! (ps, nm, µW, cm⁻³, cm/s) live in [`units`]. Everything is plain data and pure
//! functions, safe to share across threads for parameter sweeps.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default `std`
//! feature to build without the standard library.

#![cfg_attr(not(feature = "std"), no_std)]
// Published tableau and reference constants keep their full printed digits,
// and negated comparisons like `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::excessive_precision)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod math;

pub mod dynamics;
pub mod fitting;
pub mod model;
pub mod ode;
pub mod presets;
pub mod roots;
pub mod steadystate;
pub mod surface;
pub mod units;

pub use model::{GainModel, LaserParams, LaserState, PumpDrive};
