//! Heisenberg-picture time evolution of matrix product operators.
//!
//! Operators are purified into matrix product states on the doubled local
//! space and evolved under the commutator superoperator `−[H, ·]` with the
//! one-site time-dependent variational principle. The augmented scheme
//! evolves `|O⟩ + γ|H⟩` instead of `|O⟩` and subtracts `γ|H⟩` afterwards,
//! which keeps `tr[H·O(t)]` far better conserved at the same bond dimension.
//!
//! A dense exact-diagonalization oracle ([`exact`]) and a reproducible
//! benchmark harness ([`bench`]) accompany the integrator.

pub mod bench;
pub mod error;
pub mod exact;
pub mod io;
pub mod linalg;
pub mod mpo;
pub mod mps;
pub mod tdvp;

pub use error::{Error, Result};
