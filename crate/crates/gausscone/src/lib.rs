//! Discrete Gauss image problem for C-pseudo-cones.
//!
//! Given a pointed full-dimensional simplicial cone C and two balanced atomic
//! measures — lambda on the dual spherical patch Omega_{C°} and mu on Omega_C —
//! this crate computes a C-pseudo-cone K whose Gauss image measure lambda(K,·)
//! reproduces mu, by minimizing a convex piecewise-linear functional over
//! log-radii, and cross-checks every closed form against independent oracles.
//!
//! The main pieces:
//!
//! - [`cone`]: simplicial cones, exact duals, spherical patch membership.
//! - [`pseudocone`]: Wulff shapes (H-rep) and convexifications (V-rep),
//!   support/radial evaluation, the copolar involution.
//! - [`gauss`]: the reverse radial Gauss map, pushforward measures, ties.
//! - [`solver`]: the variational solver, verification, and certification.
//! - [`oracle`]: brute-force and finite-difference cross-checks.
//! - [`io`]: instance files, deterministic generation, result emission.

pub mod cone;
pub mod error;
pub mod gauss;
pub mod io;
pub mod lp;
pub mod oracle;
pub mod pseudocone;
pub mod solver;

pub use cone::{Cone, Direction, build_simplicial_cone};
pub use error::{Error, Result};
pub use gauss::{
    AtomicSphericalMeasure, MeasureDomain, PushforwardReport, integrate, integrate_pushforward,
    pushforward, reverse_radial_gauss,
};
pub use pseudocone::{HRepPseudoCone, PseudoCone, VRepPseudoCone, convexification, wulff_shape};
pub use solver::{
    CertifyOutcome, GaussImageProblem, SolveResult, SolverConfig, StepRule, certify,
    phi_subgradient, phi_value, solve, verify,
};
