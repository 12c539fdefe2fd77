//! # hameo
//!
//! A numerical laboratory for area-preserving dynamics on two surfaces —
//! the flat disc and the round sphere. The crate builds Hamiltonian
//! functions, integrates their flows, composes and inverts the resulting
//! paths of area-preserving maps, and measures the quantities that make
//! this geometry quantitative:
//!
//! * **Hofer-type norms** of Hamiltonians (`∫ osc` and `sup osc`) and the
//!   induced path length and group pseudo-distances;
//! * **Calabi-type invariants** of compactly supported disc maps, with
//!   closed-form values for radial twists;
//! * **displacement energy** upper bounds from explicit witness families,
//!   with the capacity lower bound they must respect;
//! * **limit diagnostics** for sequences of twist maps, including the
//!   rescaled dyadic family whose Calabi invariants grow without bound
//!   while the maps converge uniformly.
//!
//! Everything numerical states its tolerance and the reason for it next to
//! the constant. Randomized tests draw from seeded generators only.

pub mod algebra;
pub mod calabi;
pub mod config;
pub mod error;
pub mod expr;
pub mod families;
pub mod flow;
pub mod geometry;
pub mod hamiltonian;
pub mod hofer;
pub mod limits;
pub mod quad;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{sample_grid, Grid, Surface, SurfacePoint, Vec3};
pub use hamiltonian::{Hamiltonian, HoferNorm, Normalization, Support, TimeWeight};
