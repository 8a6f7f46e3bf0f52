//! Numerical machinery for the weighted exterior problem
//!
//!   -div(|x|^theta grad u) = |x|^ell u^p   in R^N outside the closed unit
//!   ball, with u = 0 on the boundary sphere.
//!
//! The crate classifies the existence regime over the full parameter range,
//! constructs the unique radial solution in the supercritical regime by
//! shooting on the inverted (punctured-ball) problem, produces numerical
//! nonexistence witnesses below the critical exponent, evaluates the integral
//! existence criterion for general nonlinearities, and solves the radial
//! eigenvalue problems that decide the linear cases.
//!
//! All PDE computation is radial; profiles, reports and verdicts serialize
//! to JSON and CSV for downstream tooling. See the `exlem` binary for the
//! command-line front end.

pub mod criterion;
pub mod error;
pub mod ode;
pub mod params;
pub mod quad;
pub mod report;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use params::{
    characteristic_roots, classify, derive, singular_constant, CharacteristicRoots,
    Classification, DerivedParams, ProblemParams, Reason, Regime,
};
