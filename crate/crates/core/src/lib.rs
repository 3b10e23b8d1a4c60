//! Primal-dual subgradient methods (dual averaging) for uniformly convex
//! Lipschitz minimization over simple sets.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: norms and prox-functions of the unit ball.
//! - [`proxmap`]: prox-mappings and support functions on `Q ∩ B_R(z)`.
//! - [`problems`]: test objectives, oracles, noise models, hard instances.
//! - [`da`]: the single-stage dual averaging engine and its certificates.
//! - [`multistage`]: restart and adaptive schemes built on top of it.
//! - [`primal_dual`]: dual-witness aggregation and duality-gap certificates.

pub mod da;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod multistage;
pub mod primal_dual;
pub mod problems;
pub mod proxmap;
pub mod roots;

pub use error::{Error, Result};
