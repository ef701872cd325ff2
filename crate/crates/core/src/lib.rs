//! Static cooperation groups on planar Poisson point processes.
//!
//! Base stations are modelled as atoms of a homogeneous Poisson point process.
//! Atoms are partitioned into *singles* and *pairs* by the mutual
//! nearest-neighbour rule: two atoms cooperate exactly when each is the
//! nearest neighbour of the other. The crate provides
//!
//! - samplers for the parent process and independently thinned references
//!   ([`pattern`]),
//! - grid-accelerated mutual-nearest-neighbour classification ([`grouping`]),
//! - Monte Carlo estimators for class fractions, Voronoi surface shares and
//!   the G/F/J spatial statistics ([`stats`]),
//! - closed forms and semi-analytic numerics for pair probabilities,
//!   nearest-neighbour laws, expected interference and interference Laplace
//!   transforms ([`analytic`]),
//! - interference-field sampling under several cooperation schemes
//!   ([`interference`]).
//!
//! All randomness flows through [`seeding::SeedSpec`]; identical seeds yield
//! bit-identical results regardless of thread count.

pub mod analytic;
pub mod error;
pub mod geometry;
mod grid;
pub mod grouping;
pub mod interference;
pub mod pattern;
pub mod quadrature;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{gamma_constant, lens_union_area, BoundaryPolicy, Point, Window};
pub use grouping::{GroupingResult, NearestNeighbourMap, SubprocessKind};
pub use interference::CooperationScheme;
pub use pattern::PointPattern;
pub use seeding::SeedSpec;

/// Library version string, embedded in output file headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
