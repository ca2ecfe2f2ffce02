//! Lattice ring signatures over R_q = Z_q[X]/(X^n + 1) with q = 3^k.
//!
//! The crate is layered bottom-up: [`ring`] arithmetic, [`sampling`],
//! gadget [`trapdoor`]s, key-homomorphic circuit evaluation ([`keyhom`]),
//! the signature scheme itself ([`scheme`], configured by [`params`]) and a
//! statistical-distance [`attack`] harness.

pub mod attack;
pub mod error;
pub mod ring;
pub mod scheme;
pub mod sampling;
pub mod keyhom;
pub mod params;
pub mod perturb;
pub mod trapdoor;

pub use error::{Error, Result};
