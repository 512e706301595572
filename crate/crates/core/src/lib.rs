//! Elliptic curves from Heron triangles.
//!
//! Builds the curves `y^2 = (x + ab)(x + bc)(x + ac)` attached to a
//! one-parameter family of rational triangles, certifies their torsion,
//! bounds their Mordell-Weil rank by a complete 2-descent and scores them
//! with a prime-counting sieve.
//!
//! ```
//! use heron_core::{heron::FamilyCurve, numtheory::parse_rational};
//!
//! let curve = FamilyCurve::new(&parse_rational("6").unwrap()).unwrap();
//! assert_eq!(curve.integral.a2.to_string(), "192512");
//! ```

pub mod curve;
pub mod descent;
pub mod error;
pub mod heron;
pub mod numtheory;
pub mod sieve;
pub mod torsion;

pub use curve::{CubicModel, FpCurveSummary, IntegralModel, RationalPoint};
pub use descent::{rank_bounds, Effort, RankBounds, RankStatus, SquareClassPair};
pub use torsion::{TorsionGroup, TorsionStructure};

pub use error::{Error, Result};
pub use heron::{FamilyCurve, HeronTriple};
pub use sieve::{rank_distribution, scan, ScanRecord, SieveScore};
pub use numtheory::{Factorization, FactorBudget, Integer, Rational};


