//! Exact linear optimization over polymatroids with per-element side
//! constraints.
//!
//! The central routine is the grouping algorithm in [`grouping`], which
//! partitions the ground set into a chain of groups, each with one lead
//! element absorbing the slack while the remaining members sit at their
//! side bounds. The chain doubles as a dual certificate. On top of it,
//! [`sfm`] minimizes arbitrary submodular functions and [`schedule`]
//! turns optimal points into randomized priority rules.
//!
//! All arithmetic is exact over arbitrary-precision rationals.

#![allow(clippy::result_large_err)]

pub mod grouping;
pub mod lpcore;
pub mod oracle;
pub mod polymatroid;
pub mod rational;
pub mod schedule;
pub mod setfn;
pub mod sfm;

pub use grouping::{
    check_certificate, solve_max_side, solve_min_side, CertificateReport, DualCertificate, Group,
    GroupStructure, GroupingError, PrimalSolution, Solution, SolveOptions, Stats, Subgroup,
};
pub use lpcore::{LinearProgram, LpOutcome, Relation, Sense};
pub use rational::Rational;
pub use setfn::{
    GroundSet, OracleKind, PolymatroidInstance, SetFunction, SetFunctionOracle, Subset,
};

pub use sfm::{SfmInstance, SfmReduction, SfmResult};
