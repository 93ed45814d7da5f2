//! Effective beam width of directional antenna patterns.
//!
//! The crate is organised bottom-up:
//!
//! * [`patterns`] builds normalized azimuthal power patterns (omni, sector and
//!   linear phased arrays) and measures threshold null/beam widths.
//! * [`ebw`] estimates effective beam widths `Pr(G*(φ) > X)` and joint
//!   interference probabilities `Pr(YZ > X)` by Monte Carlo, with a quadrature
//!   cross-check.
//! * [`scaling`] sweeps the array degree `N` and fits `W_B = b1 / N^γ`.
//! * [`netsim`] simulates slotted ALOHA on the unit torus under pairwise and
//!   multiple-interference (Rayleigh) reception models.
//! * [`analytic`] holds the closed-form throughput expressions and parameter
//!   rules used as oracles for the simulator.
//! * [`cli`] wires everything into the `ebw` command line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod ebw;
pub mod error;
pub mod netsim;
pub mod output;
pub mod patterns;
pub mod rng;
pub mod scaling;

pub use error::{Error, Result};
