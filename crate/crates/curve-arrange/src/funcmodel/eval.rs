//! Interval evaluation of expression trees over boxes and points.
//!
//! One generic walker drives both arithmetic tiers: fast outward-rounded `f64`
//! intervals for the bulk of predicate work, and dyadic intervals at a chosen
//! precision when the fast tier is inconclusive. Integer powers expand by
//! square-and-multiply over the loose square, matching the predicate
//! semantics. A third, exact-rational path decides signs of transcendental-free
//! expressions at dyadic points outright.
//!
//! `None` from an evaluation means "inconclusive" (a denominator interval
//! straddles zero), never "undefined is fine": callers treat it as a failed
//! exclusion test and subdivide.

use num_rational::BigRational;
use num_traits::Zero;

use crate::numeric::{Box2, DyInterval, Interval, Point2};

use super::expr::Expr;

/// Arithmetic context: one instantiation per interval tier.
pub trait EvalCtx {
    type V: Clone;
    fn constant(&self, q: &BigRational) -> Self::V;
    fn add(&self, a: &Self::V, b: &Self::V) -> Self::V;
    fn sub(&self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&self, a: &Self::V, b: &Self::V) -> Self::V;
    fn div(&self, a: &Self::V, b: &Self::V) -> Option<Self::V>;
    fn neg(&self, a: &Self::V) -> Self::V;
    fn pow(&self, a: &Self::V, n: u32) -> Self::V;
    fn sin(&self, a: &Self::V) -> Self::V;
    fn cos(&self, a: &Self::V) -> Self::V;
    fn exp(&self, a: &Self::V) -> Self::V;
}

pub struct F64Ctx;

impl EvalCtx for F64Ctx {
    type V = Interval;
    fn constant(&self, q: &BigRational) -> Interval {
        Interval::from_rational(q)
    }
    fn add(&self, a: &Interval, b: &Interval) -> Interval {
        a.add(b)
    }
    fn sub(&self, a: &Interval, b: &Interval) -> Interval {
        a.sub(b)
    }
    fn mul(&self, a: &Interval, b: &Interval) -> Interval {
        a.mul(b)
    }
    fn div(&self, a: &Interval, b: &Interval) -> Option<Interval> {
        a.div(b)
    }
    fn neg(&self, a: &Interval) -> Interval {
        a.neg()
    }
    fn pow(&self, a: &Interval, n: u32) -> Interval {
        a.pow(n)
    }
    fn sin(&self, a: &Interval) -> Interval {
        a.sin()
    }
    fn cos(&self, a: &Interval) -> Interval {
        a.cos()
    }
    fn exp(&self, a: &Interval) -> Interval {
        a.exp()
    }
}

pub struct DyCtx {
    pub prec: u64,
}

impl EvalCtx for DyCtx {
    type V = DyInterval;
    fn constant(&self, q: &BigRational) -> DyInterval {
        DyInterval::from_rational(q, self.prec)
    }
    fn add(&self, a: &DyInterval, b: &DyInterval) -> DyInterval {
        a.add(b, self.prec)
    }
    fn sub(&self, a: &DyInterval, b: &DyInterval) -> DyInterval {
        a.sub(b, self.prec)
    }
    fn mul(&self, a: &DyInterval, b: &DyInterval) -> DyInterval {
        a.mul(b, self.prec)
    }
    fn div(&self, a: &DyInterval, b: &DyInterval) -> Option<DyInterval> {
        a.div(b, self.prec)
    }
    fn neg(&self, a: &DyInterval) -> DyInterval {
        a.neg()
    }
    fn pow(&self, a: &DyInterval, n: u32) -> DyInterval {
        a.pow(n, self.prec)
    }
    fn sin(&self, a: &DyInterval) -> DyInterval {
        a.sin(self.prec)
    }
    fn cos(&self, a: &DyInterval) -> DyInterval {
        a.cos(self.prec)
    }
    fn exp(&self, a: &DyInterval) -> DyInterval {
        a.exp(self.prec)
    }
}

/// Natural interval extension of `e` with variables bound to `x`, `y`.
pub fn eval_in<C: EvalCtx>(ctx: &C, e: &Expr, x: &C::V, y: &C::V) -> Option<C::V> {
    Some(match e {
        Expr::X => x.clone(),
        Expr::Y => y.clone(),
        Expr::Const(q) => ctx.constant(q),
        Expr::Add(a, b) => ctx.add(&eval_in(ctx, a, x, y)?, &eval_in(ctx, b, x, y)?),
        Expr::Sub(a, b) => ctx.sub(&eval_in(ctx, a, x, y)?, &eval_in(ctx, b, x, y)?),
        Expr::Mul(a, b) => ctx.mul(&eval_in(ctx, a, x, y)?, &eval_in(ctx, b, x, y)?),
        Expr::Div(a, b) => ctx.div(&eval_in(ctx, a, x, y)?, &eval_in(ctx, b, x, y)?)?,
        Expr::Neg(a) => ctx.neg(&eval_in(ctx, a, x, y)?),
        Expr::Pow(a, n) => ctx.pow(&eval_in(ctx, a, x, y)?, *n),
        Expr::Sin(a) => ctx.sin(&eval_in(ctx, a, x, y)?),
        Expr::Cos(a) => ctx.cos(&eval_in(ctx, a, x, y)?),
        Expr::Exp(a) => ctx.exp(&eval_in(ctx, a, x, y)?),
    })
}

/// Box evaluation on the `f64` tier (degenerate boxes are fine: faces and
/// points are boxes with zero width).
pub fn eval_box(e: &Expr, b: &Box2) -> Option<Interval> {
    let x = Interval::from_dyadic_pair(&b.x0, &b.x1);
    let y = Interval::from_dyadic_pair(&b.y0, &b.y1);
    eval_in(&F64Ctx, e, &x, &y)
}

/// Box evaluation on the dyadic tier at `prec` bits.
pub fn eval_box_prec(e: &Expr, b: &Box2, prec: u64) -> Option<DyInterval> {
    let x = DyInterval::new(b.x0.clone(), b.x1.clone());
    let y = DyInterval::new(b.y0.clone(), b.y1.clone());
    eval_in(&DyCtx { prec }, e, &x, &y)
}

/// Point evaluation on the `f64` tier; the result contains the exact value.
pub fn eval_point(e: &Expr, p: &Point2) -> Option<Interval> {
    let x = Interval::from_dyadic(&p.x);
    let y = Interval::from_dyadic(&p.y);
    eval_in(&F64Ctx, e, &x, &y)
}

/// Exact rational evaluation at a dyadic point. `None` if the expression
/// contains a transcendental function or hits a zero denominator.
pub fn eval_exact_rational(e: &Expr, x: &BigRational, y: &BigRational) -> Option<BigRational> {
    Some(match e {
        Expr::X => x.clone(),
        Expr::Y => y.clone(),
        Expr::Const(q) => q.clone(),
        Expr::Add(a, b) => eval_exact_rational(a, x, y)? + eval_exact_rational(b, x, y)?,
        Expr::Sub(a, b) => eval_exact_rational(a, x, y)? - eval_exact_rational(b, x, y)?,
        Expr::Mul(a, b) => eval_exact_rational(a, x, y)? * eval_exact_rational(b, x, y)?,
        Expr::Div(a, b) => {
            let d = eval_exact_rational(b, x, y)?;
            if d.is_zero() {
                return None;
            }
            eval_exact_rational(a, x, y)? / d
        }
        Expr::Neg(a) => -eval_exact_rational(a, x, y)?,
        Expr::Pow(a, n) => {
            let base = eval_exact_rational(a, x, y)?;
            let mut acc = BigRational::from_integer(1.into());
            for _ in 0..*n {
                acc *= base.clone();
            }
            acc
        }
        Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) => return None,
    })
}

/// Certified nonzero sign of `e` at a dyadic point, or `None` when no sign
/// can be certified (the value is exactly zero, a denominator vanishes, or a
/// transcendental value stays unresolved at `max_prec` bits). Unlike
/// [`eval_sign`] this never guesses.
pub fn certified_sign(e: &Expr, p: &Point2, max_prec: u64) -> Option<i32> {
    if let Some(iv) = eval_point(e, p) {
        if !iv.contains_zero() {
            return Some(if iv.lo > 0.0 { 1 } else { -1 });
        }
    }
    if !e.has_transcendental() {
        let v = eval_exact_rational(e, &p.x.to_rational(), &p.y.to_rational())?;
        return match v.numer().sign() {
            num_bigint::Sign::Minus => Some(-1),
            num_bigint::Sign::Plus => Some(1),
            num_bigint::Sign::NoSign => None,
        };
    }
    let mut prec = 64u64;
    loop {
        let x = DyInterval::point(p.x.clone());
        let y = DyInterval::point(p.y.clone());
        if let Some(iv) = eval_in(&DyCtx { prec }, e, &x, &y) {
            if !iv.contains_zero() {
                return Some(if iv.lo.signum() > 0 { 1 } else { -1 });
            }
        }
        if prec >= max_prec {
            return None;
        }
        prec = (prec * 2).min(max_prec);
    }
}

/// Certified sign of `e` at a dyadic point, with the zero-maps-to-plus
/// convention: the returned value is always +1 or -1, and it is the sign of
/// `e(p) + eta` for every sufficiently small `eta > 0`.
///
/// Escalation ladder: f64 interval, exact rational (transcendental-free
/// expressions decide here, including exact zeros), then dyadic intervals up
/// to `max_prec` bits. A transcendental value still straddling zero at full
/// precision is reported as +1; `perturbed` is set so the caller can surface
/// the event.
pub fn eval_sign(e: &Expr, p: &Point2, max_prec: u64, perturbed: &mut bool) -> i32 {
    if let Some(iv) = eval_point(e, p) {
        if !iv.contains_zero() {
            return if iv.lo > 0.0 { 1 } else { -1 };
        }
    }
    if !e.has_transcendental() {
        let x = p.x.to_rational();
        let y = p.y.to_rational();
        if let Some(v) = eval_exact_rational(e, &x, &y) {
            return match v.numer().sign() {
                num_bigint::Sign::Minus => -1,
                _ => 1, // exact zero takes the +1 convention
            };
        }
        // A genuinely zero denominator at a corner: treat as perturbed.
        *perturbed = true;
        return 1;
    }
    let mut prec = 64u64;
    loop {
        let x = DyInterval::point(p.x.clone());
        let y = DyInterval::point(p.y.clone());
        if let Some(iv) = eval_in(&DyCtx { prec }, e, &x, &y) {
            if !iv.contains_zero() {
                return if iv.lo.signum() > 0 { 1 } else { -1 };
            }
        }
        if prec >= max_prec {
            *perturbed = true;
            return 1;
        }
        prec = (prec * 2).min(max_prec);
    }
}
