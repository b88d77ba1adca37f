//! The pair of input curves with precomputed partial derivatives.

use crate::error::{Error, Result};
use crate::numeric::{Box2, Interval};

use super::expr::{Expr, Var};
use super::eval;

/// Which of the two input functions a predicate is asking about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    F,
    G,
}

impl Which {
    pub fn label(self) -> &'static str {
        match self {
            Which::F => "f",
            Which::G => "g",
        }
    }
}

/// Both curve functions plus the four first-order partials, differentiated
/// symbolically once at construction.
#[derive(Debug, Clone)]
pub struct CurveSystem {
    pub f: Expr,
    pub g: Expr,
    pub fx: Expr,
    pub fy: Expr,
    pub gx: Expr,
    pub gy: Expr,
}

impl CurveSystem {
    pub fn new(f: Expr, g: Expr) -> CurveSystem {
        let fx = f.diff(Var::X);
        let fy = f.diff(Var::Y);
        let gx = g.diff(Var::X);
        let gy = g.diff(Var::Y);
        CurveSystem { f, g, fx, fy, gx, gy }
    }

    pub fn func(&self, which: Which) -> &Expr {
        match which {
            Which::F => &self.f,
            Which::G => &self.g,
        }
    }

    pub fn grad(&self, which: Which) -> (&Expr, &Expr) {
        match which {
            Which::F => (&self.fx, &self.fy),
            Which::G => (&self.gx, &self.gy),
        }
    }

    /// Reject inputs whose denominators could vanish anywhere near the region
    /// of interest. Every denominator subexpression is box-evaluated over the
    /// region; if zero cannot be excluded, the box is subdivided a few levels.
    /// Only a denominator that stays unresolved on some piece is an error —
    /// the main algorithm would otherwise stall on it with no way to certify
    /// anything.
    pub fn check_denominators(&self, region: &Box2) -> Result<()> {
        for e in [&self.f, &self.g, &self.fx, &self.fy, &self.gx, &self.gy] {
            for d in e.denominators() {
                if !denominator_excludes_zero(d, region, 8) {
                    return Err(Error::Denominator(format!(
                        "denominator `{d}` cannot be bounded away from zero over the region"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn denominator_excludes_zero(d: &Expr, b: &Box2, depth: u32) -> bool {
    if let Some(iv) = eval::eval_box(d, b) {
        if !iv.contains_zero() {
            return true;
        }
    }
    if let Some(iv) = eval::eval_box_prec(d, b, 128) {
        if !iv.contains_zero() {
            return true;
        }
    }
    if depth == 0 {
        return false;
    }
    b.split().iter().all(|q| denominator_excludes_zero(d, q, depth - 1))
}

/// Interval enclosure of the Jacobian determinant `fx*gy - fy*gx` over a box,
/// on the fast tier.
pub fn jacobian_det_box(sys: &CurveSystem, b: &Box2) -> Option<Interval> {
    let fx = eval::eval_box(&sys.fx, b)?;
    let fy = eval::eval_box(&sys.fy, b)?;
    let gx = eval::eval_box(&sys.gx, b)?;
    let gy = eval::eval_box(&sys.gy, b)?;
    Some(fx.mul(&gy).sub(&fy.mul(&gx)))
}
