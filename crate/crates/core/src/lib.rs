//! Hyperbolic-time detection and first-hyperbolic-time statistics for
//! non-uniformly expanding circle maps.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`]: the circle model, the [`MapSystem`] contract and the two
//!   concrete maps (an intermittent circle map with a neutral fixed point and
//!   a uniformly expanding doubling map).
//! * [`orbits`]: orbit traces carrying per-step observables, ensembles and
//!   Birkhoff averages.
//! * [`hyptimes`]: (σ, δ)-hyperbolic time detection, first hyperbolic times,
//!   frequencies and set statistics.
//! * [`measures`]: Ulam discretisations of the transfer operator and empirical
//!   pushforward densities.
//! * [`analysis`]: quadrature of singular integrals, the neutral-point
//!   recurrence sequence, tail diagnostics and local expansion checks.

pub mod analysis;
pub mod dynamics;
mod error;
pub mod hyptimes;
pub mod io;
pub mod measures;
pub mod numeric;
pub mod orbits;

pub use dynamics::{CirclePoint, DoublingBaselineMap, IntermittentCircleMap, MapKind, MapSystem};
pub use error::{Error, Result};
pub use hyptimes::{FirstTime, HypTimesResult, HyperbolicParams};
pub use orbits::{EnsembleSpec, OrbitTrace};
