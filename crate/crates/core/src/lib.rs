//! Coalgebra-symmetric N-body systems on the solvable group `G_z`.
//!
//! The crate covers the one-copy bracket family `sl_q^κ(2)` ([`algebra`]),
//! N-fold chains and their cluster variables ([`chain`]), the Gaudin-type and
//! Ruijsenaars-type Hamiltonians ([`systems`]), explicit cluster solutions
//! ([`closedform`]), Runge-Kutta propagation with invariant monitoring
//! ([`integrate`]) and the 3×3 matrix realization of the coproduct
//! ([`grouprep`]).
//!
//! Coordinates are always ordered `(S3, S+, S-)`.

pub mod algebra;
pub mod chain;
pub mod closedform;
mod error;
pub mod grouprep;
pub mod integrate;
pub mod sampling;
pub mod systems;

pub use algebra::{DeformParams, SiteState};
pub use chain::{ChainState, ClusterVars, Deltas};
pub use error::{Error, Result};
pub use integrate::{IntegratorConfig, Method, Trajectory};
pub use systems::{SystemKind, SystemTag};
