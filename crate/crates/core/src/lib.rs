//! Exact and multiprecision tools for modular Schwarzian equations.
//!
//! The crate builds q-expansions of classical modular forms, solves the
//! algebraic systems whose roots place the double poles of weight-2 forms,
//! and verifies that the resulting forms satisfy the Schwarzian equation
//! `{h, τ} = 2π²r²E4` and the second-order equation `y'' + π²r²E4·y = 0`.

pub mod catalog;
pub mod constructions;
pub mod error;
pub mod eval;
pub mod poly;
pub mod report;
pub mod scalar;
pub mod series;
pub mod solver;

pub use catalog::{compile, FormAtom, FormExpr};
pub use error::{Error, Result};
pub use eval::{EvalConfig, HalfPlanePoint};
pub use poly::{Polynomial, RationalFunction};
pub use report::VerificationReport;
pub use scalar::{BigComplex, Scalar};
pub use series::Series;
pub use solver::{AlgebraicSystem, SolutionSet};

pub use rug::{Float, Rational};
