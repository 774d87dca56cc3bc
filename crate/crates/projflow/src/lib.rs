//! Structure-preserving simulation and equilibrium analysis for the growth
//! dynamics `dy/dt = y * P(a - y)` on a weighted finite partition, where `P`
//! removes the component along a fixed positive direction `n`.
//!
//! The flow has three structural properties the numerics are built around:
//!
//! - positivity: states that start positive stay positive, which the
//!   integrator preserves exactly by stepping the log-state;
//! - a conserved quantity `Gamma(y) = sum_i mu_i n_i ln y_i`, preserved per
//!   step up to roundoff because every stage derivative is orthogonal to `n`;
//! - two Lyapunov functionals (a relative-entropy `V_a` and a squared
//!   distance-to-equilibrium `V_b`) that decrease along trajectories and are
//!   linked by `dV_a/dt = -V_b`.
//!
//! Equilibria form the ray `a + xi * n` over the offsets `xi` that keep the
//! state positive, and the offset reached from `y0` is predicted by solving
//! `Phi(alpha) = Gamma(y0)` with a safeguarded Newton iteration
//! ([`equilibrium::solve_alpha`]).
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default `std`
//! feature and enable `libm` to build without the standard library. File
//! formats and the command-line driver live in the companion `projflow-cli`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("building without `std` requires the `libm` feature");

extern crate alloc;

mod error;
mod math;

pub mod diagnostics;
pub mod dynamics;
pub mod equilibrium;
pub mod measure;
pub mod projection;
pub mod scenarios;

pub use error::{Error, Result};
