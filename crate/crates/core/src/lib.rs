//! Sequential-measurement thermometry on Heisenberg spin chains.
//!
//! The crate is layered bottom-up:
//!
//! * [`numerics`]: dense complex linear algebra, density matrices, fidelity, entropy.
//! * [`spin`]: the ferromagnetic Heisenberg chain, Gibbs states, thermal QFI.
//! * [`dynamics`]: inter-measurement channels (unitary, Lindblad, reset) behind
//!   the [`dynamics::Dynamics`] trait and a by-name registry.
//! * [`protocol`]: single-site projective measurements, exact trajectory trees,
//!   Monte-Carlo trajectory sampling.
//! * [`fisher`]: static and sequential classical Fisher information.
//! * [`bayes`]: gridded posterior temperature estimation from trajectory counts.
//!
//! Units: `k_B = ħ = 1`, energies and temperatures in units of the exchange
//! coupling `J`, times in units of `1/J`. Entropies use the natural log.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod dynamics;
pub mod error;
pub mod fisher;
pub mod numerics;
pub mod protocol;
pub mod rng;
pub mod spin;

pub use error::{Error, Result};
