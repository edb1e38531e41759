//! Linear-quadratic regulation of large networks of coupled linear agents,
//! solved through invariant subspace decompositions of graphon coupling
//! operators.
//!
//! Agents indexed by `α ∈ [0,1]` evolve as
//!
//! ```text
//! ẋ = [L_a𝕀 + D_a𝐀]x + [L_b𝕀 + D_b𝐁]u
//! ```
//!
//! with cost `∫ ⟨x, ℚx⟩ + ⟨u, u⟩ dt + ⟨x_T, ℚ_T x_T⟩`. When the couplings
//! `𝐀, 𝐁, 𝐐, 𝐐_T` share a `d`-dimensional invariant subspace the problem
//! splits into an `nd × nd` Riccati equation for the projected state and an
//! `n × n` one for the remainder, independent of the number of agents.
//!
//! * [`graphon`]: coupling operators (step and trigonometric-dictionary
//!   graphons, stochastic block models) and grid functions.
//! * [`subspace`]: bases, projections, invariance and low-rank certificates.
//! * [`riccati`]: projected problem assembly and backward RK4 Riccati solves.
//! * [`control`]: exact, approximate and harmonic-oscillator feedback laws.
//! * [`sim`]: closed-loop simulation, costs and the centralized reference.
//! * [`cli`]: the configuration-driven experiment runner.

// NaN-rejecting checks are written as `!(x <= tol)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod control;
pub mod error;
pub mod graphon;
pub mod io;
pub mod linalg;
pub mod riccati;
pub mod sim;
pub mod subspace;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphons.md")]
    mod graphons {}
    #[doc = include_str!("../../../book/src/subspaces.md")]
    mod subspaces {}
    #[doc = include_str!("../../../book/src/riccati.md")]
    mod riccati {}
    #[doc = include_str!("../../../book/src/control.md")]
    mod control {}
    #[doc = include_str!("../../../book/src/oscillators.md")]
    mod oscillators {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
