//! Certified piecewise-linear arrangements of two implicit plane curves.
//!
//! Given two non-singular analytic curves `f = 0` and `g = 0` and a rectangular
//! region of interest, this crate computes a planar straight-line graph that is
//! isotopic to the arrangement of the two curves inside the region and within a
//! prescribed Hausdorff distance of it. Every topological claim in the output is
//! backed by an interval-arithmetic certificate: curve pieces by sign conditions
//! on box boundaries, intersection points by a preconditioned Miranda test on a
//! doubled box, and local orderings by definite-sign arguments on box edges.
//!
//! The pipeline is a staged quadtree subdivision of the region: boxes are
//! refined until each is either excluded or crossed by at most one curve in a
//! controlled way, candidate intersection regions are certified and isolated,
//! the neighborhood of every intersection is rebuilt into a standardized,
//! conforming local subdivision, and the final complex is walked to place
//! vertices and connect them into labeled polylines.

pub mod config;
pub mod error;
pub mod numeric;
pub mod funcmodel;
pub mod subdiv;
pub mod predicates;
pub mod isolate;
pub mod arrange;
pub mod output;

pub use config::RunConfig;
pub use error::{Error, Result};
