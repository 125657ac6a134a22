//! Exact Rosenthal-type inequalities for third moments of sums of
//! independent random variables.
//!
//! For independent `X_1, ..., X_n` with `E X_i <= 0`, `sum E X_i^2 <= 1` and
//! `sum E (X_i)_+^3 <= beta`, and any `f` whose first three derivatives are
//! nondecreasing, the sum `S` satisfies
//!
//! ```text
//! E f(S) <= E f(Z) + f'''(inf-) / 3! * beta,      Z ~ N(0, 1)
//! ```
//!
//! and the right-hand side is the supremum over all admissible laws. The
//! crate evaluates this bound and its specializations ([`bounds`]), the
//! finite-truncation Gaussian/Poisson mixture bound it is derived from
//! ([`mixture`]), and checks everything against exact and Monte Carlo
//! expectations over finite-support distributions ([`verification`]).

pub mod acceptance;
pub mod bounds;
pub mod cli;
mod error;
mod extended;
pub mod function_class;
pub mod mixture;
pub mod normal;
pub mod optimize;
pub mod quadrature;
pub mod verification;

pub use bounds::{BoundResult, Constraints, InequalityId};
pub use error::{Error, Result};
pub use extended::ExtendedReal;
pub use function_class::{ExpTerm, F3Function, HingeTerm};
pub use mixture::MixtureParams;
pub use normal::GaussianAffine;
pub use verification::{AtomicVariable, ConstraintReport, DistributionSpec};

/// Version string echoed in structured CLI output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
