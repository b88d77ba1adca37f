//! Box predicates: exclusion tests, box classification, the Jacobian
//! condition, and the preconditioned Miranda root-existence test.
//!
//! Every predicate here is one-sided: `true` (or `Some`) is a certificate
//! backed by interval arithmetic, `false` (or `None`) only means "could not
//! certify at this precision" and callers respond by subdividing or
//! escalating. All certifying comparisons against products of interval
//! magnitudes and box widths are done in exact rational arithmetic, so no
//! rounding fuzz enters a decision.
//!
//! The plain Miranda sign test cannot detect roots whose Jacobian is far from
//! diagonal (the classic failure: the pair `x + y`, `x - y` on any box around
//! the origin). The root test therefore preconditions the pair by an
//! approximate inverse Jacobian at the box center before testing; the
//! preconditioner only needs to be exactly nonsingular for soundness, which is
//! checked in rational arithmetic.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::funcmodel::expr::{add, mul};
use crate::funcmodel::{
    eval::{certified_sign, eval_box, eval_box_prec, eval_in, eval_point, DyCtx},
    CurveSystem, Expr, Which,
};
use crate::numeric::{Box2, DyInterval, Dyadic, Interval, Point2, Side};

/// Result of classifying a box against the two curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoxClass {
    /// Neither curve could be excluded or gradient-certified; subdivide.
    Unresolved,
    /// Both curves certifiably avoid the box.
    Excluded,
    /// Only `f` may pass through; `g` is excluded and `grad f` is nonzero.
    FCandidate,
    /// Only `g` may pass through.
    GCandidate,
    /// Both curves may pass through and both gradients are nonzero.
    FGCandidate,
}

impl BoxClass {
    pub fn may_contain(self, which: Which) -> bool {
        matches!(
            (self, which),
            (BoxClass::FCandidate, Which::F)
                | (BoxClass::GCandidate, Which::G)
                | (BoxClass::FGCandidate, _)
        )
    }
}

/// Zero-exclusion on the function value: certifies the curve misses the box.
pub fn c0(sys: &CurveSystem, which: Which, b: &Box2, esc: Option<u64>) -> bool {
    expr_excludes_zero(sys.func(which), b, esc)
}

/// Zero-exclusion on the gradient, via the sum of loose squares of the two
/// partial-derivative enclosures. The loose square (plain self-multiplication)
/// can dip negative when a partial changes sign over the box; the predicate is
/// correspondingly weaker than a tight-square version but converges the same
/// way under subdivision, and the rest of the pipeline is calibrated against
/// exactly this semantics.
pub fn c1(sys: &CurveSystem, which: Which, b: &Box2, esc: Option<u64>) -> bool {
    let (hx, hy) = sys.grad(which);
    if let (Some(a), Some(bb)) = (eval_box(hx, b), eval_box(hy, b)) {
        if !a.square().add(&bb.square()).contains_zero() {
            return true;
        }
    }
    if let Some(prec) = esc {
        if let (Some(a), Some(bb)) = (eval_box_prec(hx, b, prec), eval_box_prec(hy, b, prec)) {
            if !a.square(prec).add(&bb.square(prec), prec).contains_zero() {
                return true;
            }
        }
    }
    false
}

/// Full classification of a box. `Unresolved` demands subdivision; everything
/// else is a certificate.
pub fn classify(sys: &CurveSystem, b: &Box2, esc: Option<u64>) -> BoxClass {
    let c0f = c0(sys, Which::F, b, esc);
    let c0g = c0(sys, Which::G, b, esc);
    if c0f && c0g {
        return BoxClass::Excluded;
    }
    let f_ok = c0f || c1(sys, Which::F, b, esc);
    let g_ok = c0g || c1(sys, Which::G, b, esc);
    if !f_ok || !g_ok {
        return BoxClass::Unresolved;
    }
    match (c0f, c0g) {
        (false, true) => BoxClass::FCandidate,
        (true, false) => BoxClass::GCandidate,
        (false, false) => BoxClass::FGCandidate,
        (true, true) => unreachable!(),
    }
}

/// Jacobian condition: the determinant `fx*gy - fy*gx` certifiably avoids
/// zero over the box, so the two curves cannot be tangent anywhere in it.
pub fn jc(sys: &CurveSystem, b: &Box2, esc: Option<u64>) -> bool {
    if let Some(det) = crate::funcmodel::system::jacobian_det_box(sys, b) {
        if !det.contains_zero() {
            return true;
        }
    }
    if let Some(prec) = esc {
        let parts: Option<[DyInterval; 4]> = (|| {
            Some([
                eval_box_prec(&sys.fx, b, prec)?,
                eval_box_prec(&sys.fy, b, prec)?,
                eval_box_prec(&sys.gx, b, prec)?,
                eval_box_prec(&sys.gy, b, prec)?,
            ])
        })();
        if let Some([fx, fy, gx, gy]) = parts {
            let det = fx.mul(&gy, prec).sub(&fy.mul(&gx, prec), prec);
            if !det.contains_zero() {
                return true;
            }
        }
    }
    false
}

fn expr_excludes_zero(e: &Expr, b: &Box2, esc: Option<u64>) -> bool {
    if let Some(iv) = eval_box(e, b) {
        if !iv.contains_zero() {
            return true;
        }
    }
    if let Some(prec) = esc {
        if let Some(iv) = eval_box_prec(e, b, prec) {
            if !iv.contains_zero() {
                return true;
            }
        }
    }
    false
}

/// Certificate produced by a successful preconditioned root test.
///
/// Records the preconditioner rows and the certified sign of each transformed
/// component on its "plus" face, which is everything later stages need to
/// order curve crossings along edges of the tested box.
#[derive(Debug, Clone)]
pub struct MkCertificate {
    /// The box the test passed on; the common root is in its interior.
    pub domain: Box2,
    /// Preconditioner: row 0 gives `h1 = y[0][0] f + y[0][1] g`, row 1 gives
    /// `h2 = y[1][0] f + y[1][1] g`. Exactly nonsingular.
    pub y: [[BigRational; 2]; 2],
    /// `sign_plus[0]`: definite sign of `h1` on the east face (west face is
    /// opposite). `sign_plus[1]`: sign of `h2` on the north face.
    pub sign_plus: [i32; 2],
}

impl MkCertificate {
    /// The linear combination `alpha*f + beta*g` that has a definite sign on
    /// the given side of the tested box, and that sign.
    ///
    /// Vertical sides carry the first transformed component, horizontal sides
    /// the second; each is definite on the *entire* face by the mean-value
    /// bound that the test certified.
    pub fn edge_combo(&self, side: Side) -> (&BigRational, &BigRational, i32) {
        match side {
            Side::East => (&self.y[0][0], &self.y[0][1], self.sign_plus[0]),
            Side::West => (&self.y[0][0], &self.y[0][1], -self.sign_plus[0]),
            Side::North => (&self.y[1][0], &self.y[1][1], self.sign_plus[1]),
            Side::South => (&self.y[1][0], &self.y[1][1], -self.sign_plus[1]),
        }
    }
}

/// Preconditioned root-existence test on a box.
///
/// Transforms `(f, g)` by an approximate inverse Jacobian at the box center
/// and applies the effective Miranda sign conditions to the transformed pair.
/// `Some` certifies that `f = g = 0` has a solution in the open interior;
/// `None` certifies nothing.
pub fn mk_test(sys: &CurveSystem, b: &Box2, esc: Option<u64>) -> Option<MkCertificate> {
    let y = preconditioner(sys, b)?;
    let signs = miranda_with(sys, &y, b, esc)?;
    Some(MkCertificate { domain: b.clone(), y, sign_plus: signs })
}

/// Approximate inverse Jacobian at the center, as exact rationals.
///
/// Soundness of the root test needs only exact nonsingularity of the returned
/// matrix; closeness to the true inverse is what makes the subsequent sign
/// conditions actually pass, so a residual check falls back to an exact
/// rational inversion of the evaluated Jacobian when double-precision
/// inversion was too lossy.
fn preconditioner(sys: &CurveSystem, b: &Box2) -> Option<[[BigRational; 2]; 2]> {
    let m = b.center();
    let j = [
        [mid_at(&sys.fx, &m)?, mid_at(&sys.fy, &m)?],
        [mid_at(&sys.gx, &m)?, mid_at(&sys.gy, &m)?],
    ];
    let jr = [
        [rat(j[0][0])?, rat(j[0][1])?],
        [rat(j[1][0])?, rat(j[1][1])?],
    ];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det.is_finite() && det != 0.0 {
        let yf = [
            [j[1][1] / det, -j[0][1] / det],
            [-j[1][0] / det, j[0][0] / det],
        ];
        if let (Some(a), Some(bb), Some(c), Some(d)) =
            (rat(yf[0][0]), rat(yf[0][1]), rat(yf[1][0]), rat(yf[1][1]))
        {
            let y = [[a, bb], [c, d]];
            let dy = &y[0][0] * &y[1][1] - &y[0][1] * &y[1][0];
            if !dy.is_zero() && residual_small(&y, &jr) {
                return Some(y);
            }
        }
    }
    // Exact inverse of the rational center Jacobian; residual is zero by
    // construction and nonsingularity is the existence of the inverse.
    rational_inverse(&jr)
}

/// Midpoint of the interval value of `e` at a point, as a finite double.
fn mid_at(e: &Expr, p: &Point2) -> Option<f64> {
    let iv = eval_point(e, p)?;
    let m = 0.5 * (iv.lo + iv.hi);
    m.is_finite().then_some(m)
}

fn rat(v: f64) -> Option<BigRational> {
    BigRational::from_float(v)
}

fn rational_inverse(j: &[[BigRational; 2]; 2]) -> Option<[[BigRational; 2]; 2]> {
    let det = &j[0][0] * &j[1][1] - &j[0][1] * &j[1][0];
    if det.is_zero() {
        return None;
    }
    Some([
        [&j[1][1] / &det, -&j[0][1] / &det],
        [-&j[1][0] / &det, &j[0][0] / &det],
    ])
}

/// Is every entry of `y * j - I` smaller than 1e-8 in absolute value?
fn residual_small(y: &[[BigRational; 2]; 2], j: &[[BigRational; 2]; 2]) -> bool {
    let tol = BigRational::new(1.into(), 100_000_000.into());
    for r in 0..2 {
        for c in 0..2 {
            let mut v = &y[r][0] * &j[0][c] + &y[r][1] * &j[1][c];
            if r == c {
                v -= BigRational::from_integer(1.into());
            }
            if v.abs() >= tol {
                return false;
            }
        }
    }
    true
}

/// One linear combination of the curve pair with its partial derivatives,
/// assembled without re-differentiation.
struct Combo {
    h: Expr,
    hx: Expr,
    hy: Expr,
}

fn combo(alpha: &BigRational, beta: &BigRational, sys: &CurveSystem) -> Combo {
    let lin = |u: &Expr, v: &Expr| {
        add(
            mul(Expr::Const(alpha.clone()), u.clone()),
            mul(Expr::Const(beta.clone()), v.clone()),
        )
    };
    Combo {
        h: lin(&sys.f, &sys.g),
        hx: lin(&sys.fx, &sys.gx),
        hy: lin(&sys.fy, &sys.gy),
    }
}

/// Effective Miranda sign conditions for the preconditioned pair on `b`.
///
/// Component 1 must have certified opposite signs at the centers of the two
/// vertical faces, and on each of those faces its center value must dominate
/// `mag` of its cross partial times the box height, making the sign definite
/// on the whole face (mean-value bound). Component 2 is the same with the
/// roles of the axes swapped. Returns the signs on the east and north faces.
fn miranda_with(
    sys: &CurveSystem,
    y: &[[BigRational; 2]; 2],
    b: &Box2,
    esc: Option<u64>,
) -> Option<[i32; 2]> {
    let h1 = combo(&y[0][0], &y[0][1], sys);
    let h2 = combo(&y[1][0], &y[1][1], sys);
    let s1 = miranda_component(&h1, b, Side::West, Side::East, esc)?;
    let s2 = miranda_component(&h2, b, Side::South, Side::North, esc)?;
    Some([s1, s2])
}

fn miranda_component(
    h: &Combo,
    b: &Box2,
    minus: Side,
    plus: Side,
    esc: Option<u64>,
) -> Option<i32> {
    let sign_prec = esc.unwrap_or(64);
    let face_plus = b.face(plus);
    let face_minus = b.face(minus);
    let sp = certified_sign(&h.h, &face_plus.center(), sign_prec)?;
    let sm = certified_sign(&h.h, &face_minus.center(), sign_prec)?;
    if sp * sm != -1 {
        return None;
    }
    // The cross partial on a vertical face is d/dy (the face varies in y).
    let (partial, w_other) = if plus.is_vertical() {
        (&h.hy, b.width_y())
    } else {
        (&h.hx, b.width_x())
    };
    if !face_dominates(&h.h, partial, &face_plus, &w_other, esc) {
        return None;
    }
    if !face_dominates(&h.h, partial, &face_minus, &w_other, esc) {
        return None;
    }
    Some(sp)
}

/// `|h(cen(face))| > mag(partial over face) * w` certified at some tier; the
/// final comparison is exact rational arithmetic on verified bounds.
fn face_dominates(h: &Expr, partial: &Expr, face: &Box2, w: &Dyadic, esc: Option<u64>) -> bool {
    let c = face.center();
    let wr = w.to_rational();
    if let (Some(hv), Some(dv)) = (eval_point(h, &c), eval_box(partial, face)) {
        if let Some(lb) = interval_abs_lower(&hv) {
            let m = dv.mag();
            if let (Some(lb_r), Some(m_r)) = (rat(lb), rat(m)) {
                if lb_r > m_r * wr.clone() {
                    return true;
                }
            }
        }
    }
    if let Some(prec) = esc {
        let ctx = DyCtx { prec };
        let x = DyInterval::point(c.x.clone());
        let yv = DyInterval::point(c.y.clone());
        let hv = eval_in(&ctx, h, &x, &yv);
        let dv = eval_box_prec(partial, face, prec);
        if let (Some(hv), Some(dv)) = (hv, dv) {
            let lb = if hv.lo.signum() > 0 {
                Some(hv.lo.clone())
            } else if hv.hi.signum() < 0 {
                Some(-hv.hi.clone())
            } else {
                None
            };
            if let Some(lb) = lb {
                if lb.to_rational() > dv.mag().to_rational() * wr {
                    return true;
                }
            }
        }
    }
    false
}

/// Lower bound for `|v|` over the interval, `None` if it straddles zero.
fn interval_abs_lower(iv: &Interval) -> Option<f64> {
    if iv.lo > 0.0 {
        Some(iv.lo)
    } else if iv.hi < 0.0 {
        Some(-iv.hi)
    } else {
        None
    }
}
