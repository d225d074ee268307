//! Both sides of homological mirror symmetry for the elliptic curve.
//!
//! The holomorphic side ([`derived`]) works with normal-form sheaves on
//! `E_q = C*/q^Z` and composes their sections through theta-function
//! identities; the symplectic side ([`fukaya`]) works with lines carrying flat
//! connections on the square torus and composes intersection points by
//! summing over triangles. [`mirror`] implements the functor between them and
//! the residuals that check it respects composition.

pub mod cli;
pub mod derived;
pub mod error;
pub mod fukaya;
pub mod linalg;
pub mod mirror;
pub mod schema;
pub mod shift;
pub mod sweep;
pub mod theta;

pub use error::{MirrorError, Result};
pub use linalg::{HomTensor, LocalSystemData, Matrix};
pub use shift::Shift;
pub use theta::{ModularParam, ThetaChar, TruncationSpec, C64};
