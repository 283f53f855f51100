//! Global matrix-symbol pseudo-differential calculus on compact Lie groups.
//!
//! Two backends are provided, [`group::Su2`] and [`group::Torus`]. Everything
//! works on truncated duals: a session fixes a band limit, quadrature grids
//! are exact for band-limited data, and asymptotic expansions are finite
//! partial sums whose remainders are measured rather than assumed.

pub mod calculus;
pub mod error;
pub mod fit;
pub mod fourier;
pub mod funcalc;
pub mod garding;
pub mod group;
pub mod io;
pub mod linalg;
pub mod resolvent;
pub mod symbol;

pub use error::{Error, Result};
pub use fourier::{GroupFunction, MatrixSequence};
pub use group::{CompactGroup, Dual, DualIndex, DualLabel, QuadratureGrid, Su2, Su2Point, Torus};
pub use linalg::{CMat, C64};
pub use symbol::{Symbol, Workspace, XBand};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
