//! Input curves as expression trees: parsing, symbolic differentiation, and
//! interval evaluation on both arithmetic tiers.

pub mod eval;
pub mod expr;
pub mod system;

pub use expr::{Expr, Var};
pub use system::{CurveSystem, Which};
