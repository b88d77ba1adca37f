//! Exact and outward-rounded arithmetic: dyadic scalars, two interval tiers,
//! and exact box geometry.

pub mod boxes;
pub mod dyadic;
pub mod dyinterval;
pub mod interval;

pub use boxes::{Box2, Point2, Side};
pub use dyadic::{Dyadic, Round};
pub use dyinterval::DyInterval;
pub use interval::Interval;
