//! Discretization and eigenvalue machinery for double-phase variational
//! problems with variable exponents.
//!
//! The library discretizes
//!
//! ```text
//! -div(phi(x,|Du|)Du) - div(psi(x,|Du|)Du) + w(x) theta(x,|u|) u
//!     = lambda (|u|^{r-2} u + |u|^{s-2} u),    u = 0 on the boundary,
//! ```
//!
//! on intervals and rectangles with piecewise-linear zero-trace elements. It
//! computes the two Rayleigh-quotient thresholds `lambda_star` (above which
//! eigenpairs exist and are found by descent) and `lambda_lower` (below which
//! nonexistence is certified through the discrete weak-form identity), and
//! minimizes `lambda_star` over finite weight families.
//!
//! Variable-exponent function-space machinery (the modular, the Luxemburg
//! norm, conjugate and critical exponents) is implemented from first
//! principles in [`modular`] and [`exponent`]; operator kernels and their
//! hypothesis checks live in [`kernels`]; the assembled energies and weak
//! forms in [`energy`]; solvers in [`solver`] and [`weights`]. The `duophase`
//! binary in this crate drives everything from plain-text configs.

pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod exponent;
pub mod expr;
pub mod kernels;
pub mod mesh;
pub mod modular;
pub mod report;
pub mod solver;
pub mod weights;

pub use energy::{EnergyBreakdown, ProblemSpec};
pub use error::{Error, Result};
pub use exponent::{
    conjugate, critical_exponent, validate_ordering, validate_subcritical, CriticalExponent,
    Domain, ExponentField, Point, PowerPair,
};
pub use kernels::{
    simon_estimate_check, validate_balance, validate_ellipticity, validate_growth, GrowthReport,
    Kernel, SampleGrid,
};
pub use mesh::{GridFunction, Mesh, QuadratureRule};
pub use modular::{holder_pairing, luxemburg_norm, modular, sobolev_norm};
pub use report::{Check, ValidationReport};
pub use solver::{
    certify_nonexistence, minimize_r1, minimize_r2, r1, r2, solve_at, solve_at_warm,
    CertificateReport, EigenResult, QuotientConfig, SolveStatus, ThresholdResult,
};
pub use weights::{lambda_star_of, optimize, OptimizeOutcome, WeightFamily};
