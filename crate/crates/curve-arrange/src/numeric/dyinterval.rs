//! Dyadic-endpoint intervals for precision escalation.
//!
//! Ring operations are exact (dyadics are closed under `+ - *`) and then
//! rounded outward to a working precision so mantissas stay bounded; division
//! and the transcendental functions round outward by construction. The
//! squaring operation keeps the loose self-multiplication semantics of the
//! `f64` tier — predicates must behave identically on both tiers, only wider
//! or narrower.
//!
//! Transcendental enclosures are Taylor sums with a rigorous Lagrange
//! remainder, evaluated at interval endpoints; interval arguments additionally
//! pay a Lipschitz width term (|sin'|,|cos'| <= 1; exp is monotone so endpoint
//! images suffice). This is sound and converges as boxes shrink, which is all
//! the downstream box-function contract needs.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use super::dyadic::{Dyadic, Round};
use super::interval::Interval;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyInterval {
    pub lo: Dyadic,
    pub hi: Dyadic,
}

impl DyInterval {
    pub fn new(lo: Dyadic, hi: Dyadic) -> Self {
        debug_assert!(lo <= hi);
        DyInterval { lo, hi }
    }

    pub fn point(v: Dyadic) -> Self {
        DyInterval { lo: v.clone(), hi: v }
    }

    pub fn from_rational(q: &BigRational, prec: u64) -> Self {
        let n = Dyadic::new(q.numer().clone(), 0);
        let d = Dyadic::new(q.denom().clone(), 0);
        DyInterval {
            lo: n.div_round(&d, prec, Round::Down),
            hi: n.div_round(&d, prec, Round::Up),
        }
    }

    pub fn contains_zero(&self) -> bool {
        self.lo.signum() <= 0 && self.hi.signum() >= 0
    }

    pub fn width(&self) -> Dyadic {
        &self.hi - &self.lo
    }

    /// Largest absolute value over the interval.
    pub fn mag(&self) -> Dyadic {
        let a = self.lo.abs();
        let b = self.hi.abs();
        if a >= b {
            a
        } else {
            b
        }
    }

    fn round_out(self, prec: u64) -> Self {
        DyInterval {
            lo: self.lo.round_prec(prec, Round::Down),
            hi: self.hi.round_prec(prec, Round::Up),
        }
    }

    pub fn neg(&self) -> Self {
        DyInterval { lo: -self.hi.clone(), hi: -self.lo.clone() }
    }

    pub fn add(&self, rhs: &Self, prec: u64) -> Self {
        DyInterval { lo: &self.lo + &rhs.lo, hi: &self.hi + &rhs.hi }.round_out(prec)
    }

    pub fn sub(&self, rhs: &Self, prec: u64) -> Self {
        self.add(&rhs.neg(), prec)
    }

    pub fn mul(&self, rhs: &Self, prec: u64) -> Self {
        let c = [
            &self.lo * &rhs.lo,
            &self.lo * &rhs.hi,
            &self.hi * &rhs.lo,
            &self.hi * &rhs.hi,
        ];
        let mut lo = c[0].clone();
        let mut hi = c[0].clone();
        for v in &c[1..] {
            if *v < lo {
                lo = v.clone();
            }
            if *v > hi {
                hi = v.clone();
            }
        }
        DyInterval { lo, hi }.round_out(prec)
    }

    /// Loose square: self-multiplication, `[-1,2]^2 = [-2,4]`.
    pub fn square(&self, prec: u64) -> Self {
        self.mul(self, prec)
    }

    pub fn pow(&self, n: u32, prec: u64) -> Self {
        match n {
            0 => DyInterval::point(Dyadic::one()),
            1 => self.clone(),
            _ => {
                let half = self.pow(n / 2, prec);
                let sq = half.square(prec);
                if n % 2 == 0 {
                    sq
                } else {
                    sq.mul(self, prec)
                }
            }
        }
    }

    pub fn div(&self, rhs: &Self, prec: u64) -> Option<Self> {
        if rhs.contains_zero() {
            return None;
        }
        let lo = [
            self.lo.div_round(&rhs.lo, prec, Round::Down),
            self.lo.div_round(&rhs.hi, prec, Round::Down),
            self.hi.div_round(&rhs.lo, prec, Round::Down),
            self.hi.div_round(&rhs.hi, prec, Round::Down),
        ];
        let hi = [
            self.lo.div_round(&rhs.lo, prec, Round::Up),
            self.lo.div_round(&rhs.hi, prec, Round::Up),
            self.hi.div_round(&rhs.lo, prec, Round::Up),
            self.hi.div_round(&rhs.hi, prec, Round::Up),
        ];
        Some(DyInterval {
            lo: lo.into_iter().min().unwrap(),
            hi: hi.into_iter().max().unwrap(),
        })
    }

    pub fn exp(&self, prec: u64) -> Self {
        let lo = exp_point(&self.lo, prec).lo;
        let hi = exp_point(&self.hi, prec).hi;
        DyInterval { lo, hi }
    }

    pub fn sin(&self, prec: u64) -> Self {
        self.lipschitz_unit(prec, sin_point)
    }

    pub fn cos(&self, prec: u64) -> Self {
        self.lipschitz_unit(prec, cos_point)
    }

    /// Endpoint images hulled and widened by the interval width (functions with
    /// Lipschitz constant 1 and range within [-1, 1]).
    fn lipschitz_unit(&self, prec: u64, f: fn(&Dyadic, u64) -> DyInterval) -> Self {
        let a = f(&self.lo, prec);
        let b = f(&self.hi, prec);
        let w = self.width();
        let mut lo = if a.lo <= b.lo { a.lo } else { b.lo };
        let mut hi = if a.hi >= b.hi { a.hi } else { b.hi };
        lo = lo - w.clone();
        hi = hi + w;
        let one = Dyadic::one();
        let neg_one = -Dyadic::one();
        if lo < neg_one {
            lo = neg_one;
        }
        if hi > one {
            hi = one;
        }
        DyInterval { lo, hi }
    }

    /// Round both endpoints to the nearest enclosing `f64` interval.
    pub fn to_f64_interval(&self) -> Interval {
        Interval::from_dyadic_pair(&self.lo, &self.hi)
    }
}

/// Enclosure of `exp(x)` at a dyadic point.
///
/// Halve the argument (exactly) until `|r| <= 1/2`, Taylor-sum with remainder
/// `|R_N| <= 2 |r|^{N+1} / (N+1)!`, then square back up.
pub fn exp_point(x: &Dyadic, prec: u64) -> DyInterval {
    let wp = prec + 32;
    let half = Dyadic::new(BigInt::one(), -1);
    let mut k = 0u32;
    let mut r = x.clone();
    while r.abs() > half {
        r = r.halve();
        k += 1;
        assert!(k < 64, "exp argument out of range");
    }
    // Taylor terms as exact dyadic-interval accumulation.
    let mut sum = DyInterval::point(Dyadic::one());
    let mut term = DyInterval::point(Dyadic::one());
    let r_iv = DyInterval::point(r);
    let tiny = Dyadic::new(BigInt::one(), -(wp as i64));
    let mut n = 0u32;
    loop {
        n += 1;
        term = term.mul(&r_iv, wp);
        let den = DyInterval::point(Dyadic::from_i64(n as i64));
        term = term.div(&den, wp).expect("factorial quotient");
        sum = sum.add(&term, wp);
        if term.mag() < tiny || n > 200 {
            break;
        }
    }
    // Remainder bound: |r|^{n+1}/(n+1)! * 2, with |r| <= 1/2 so just use
    // 2 * |term| * |r| as a safe overestimate of the tail.
    let rem = {
        let t = term.mag();
        let b = t.mul_pow2(1); // 2 * |last term| >= tail for |r| <= 1/2
        DyInterval { lo: -b.clone(), hi: b }
    };
    let mut e = sum.add(&rem, wp);
    // exp > 0 always; clamp in case the remainder dipped below.
    if e.lo.signum() <= 0 {
        e.lo = Dyadic::new(BigInt::one(), -(wp as i64 * 2));
    }
    for _ in 0..k {
        e = e.mul(&e, wp); // positive interval: self-multiplication is tight
    }
    e.round_out(prec)
}

/// Enclosure of `sin(x)` at a dyadic point via the alternating Taylor series
/// with Lagrange remainder `|x|^{n+1}/(n+1)!`.
pub fn sin_point(x: &Dyadic, prec: u64) -> DyInterval {
    taylor_trig(x, prec, true)
}

/// Enclosure of `cos(x)` at a dyadic point.
pub fn cos_point(x: &Dyadic, prec: u64) -> DyInterval {
    taylor_trig(x, prec, false)
}

fn taylor_trig(x: &Dyadic, prec: u64, is_sin: bool) -> DyInterval {
    let wp = prec + 32;
    let x_iv = DyInterval::point(x.clone());
    let x2 = x_iv.mul(&x_iv, wp);
    // sin: x - x^3/3! + x^5/5! - ...       term_0 = x,  degree 1
    // cos: 1 - x^2/2! + x^4/4! - ...       term_0 = 1,  degree 0
    let mut term = if is_sin { x_iv.clone() } else { DyInterval::point(Dyadic::one()) };
    let mut sum = term.clone();
    let mut degree: u64 = if is_sin { 1 } else { 0 };
    let tiny = Dyadic::new(BigInt::one(), -(wp as i64));
    // Track |x|^d / d! alongside to know when the Lagrange bound is small.
    loop {
        let d1 = Dyadic::from_i64((degree + 1) as i64);
        let d2 = Dyadic::from_i64((degree + 2) as i64);
        let den = DyInterval::point(&d1 * &d2);
        term = term.mul(&x2, wp).div(&den, wp).unwrap().neg();
        sum = sum.add(&term, wp);
        degree += 2;
        if term.mag() < tiny {
            break;
        }
        assert!(degree < 10_000, "trig series failed to converge");
    }
    // Lagrange remainder at the cut: bounded by the magnitude of the next
    // term-shaped quantity; the loop exits with |term| < 2^-wp and the true
    // remainder is at most |x|^{degree+1}/(degree+1)! <= |term| * |x|, padded.
    let pad = {
        let b = term.mag() * (x.abs() + Dyadic::one());
        let b = b + Dyadic::new(BigInt::one(), -(wp as i64));
        DyInterval { lo: -b.clone(), hi: b }
    };
    let mut out = sum.add(&pad, wp).round_out(prec);
    let one = Dyadic::one();
    if out.hi > one {
        out.hi = one.clone();
    }
    if out.lo < -one.clone() {
        out.lo = -one;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: f64) -> Dyadic {
        Dyadic::from_f64(v).unwrap()
    }

    fn di(lo: f64, hi: f64) -> DyInterval {
        DyInterval::new(d(lo), d(hi))
    }

    #[test]
    fn ring_ops_exact_below_precision() {
        let a = di(-1.0, 2.0);
        let b = di(0.25, 0.5);
        let s = a.add(&b, 128);
        assert_eq!(s, di(-0.75, 2.5));
        let p = a.mul(&b, 128);
        assert_eq!(p, di(-0.5, 1.0));
    }

    #[test]
    fn loose_square_matches_f64_tier() {
        let a = di(-1.0, 2.0);
        assert_eq!(a.square(128), di(-2.0, 4.0));
    }

    #[test]
    fn division_brackets() {
        let q = di(1.0, 1.0).div(&di(3.0, 3.0), 96).unwrap();
        assert!(q.lo < q.hi);
        let third = BigRational::new(BigInt::one(), BigInt::from(3));
        assert!(q.lo.to_rational() < third && third < q.hi.to_rational());
        assert!(di(1.0, 1.0).div(&di(-1.0, 1.0), 96).is_none());
    }

    #[test]
    fn exp_point_matches_f64() {
        for v in [0.0, 1.0, -1.0, 0.5, -3.25, 4.0] {
            let e = exp_point(&d(v), 96);
            let truth = v.exp();
            assert!(e.lo.to_f64(Round::Down) <= truth, "exp({v}) lo");
            assert!(e.hi.to_f64(Round::Up) >= truth, "exp({v}) hi");
            let w = e.width().to_f64(Round::Up);
            assert!(w <= truth * 1e-20, "exp({v}) width {w}");
        }
    }

    #[test]
    fn trig_points_match_f64() {
        for v in [0.0, 0.5, -1.5, 3.0, -7.0, 20.0] {
            let s = sin_point(&d(v), 96);
            let c = cos_point(&d(v), 96);
            assert!(s.lo.to_f64(Round::Down) <= v.sin() && v.sin() <= s.hi.to_f64(Round::Up));
            assert!(c.lo.to_f64(Round::Down) <= v.cos() && v.cos() <= c.hi.to_f64(Round::Up));
            assert!(s.width().to_f64(Round::Up) < 1e-25);
        }
    }

    #[test]
    fn interval_trig_pays_width_only() {
        let s = di(0.1, 0.2).sin(96);
        assert!(s.lo.to_f64(Round::Down) <= 0.1f64.sin());
        assert!(s.hi.to_f64(Round::Up) >= 0.2f64.sin());
        // Enclosure width is endpoint spread + 2 * interval width at most.
        assert!(s.width().to_f64(Round::Up) < 0.31);
        // Clamped to [-1, 1].
        let wide = di(-50.0, 50.0).sin(64);
        assert_eq!(wide, di(-1.0, 1.0));
    }

    #[test]
    fn rational_constants_enclosed() {
        let q = BigRational::new(BigInt::from(1), BigInt::from(20)); // 0.05
        let e = DyInterval::from_rational(&q, 128);
        assert!(e.lo.to_rational() <= q && q <= e.hi.to_rational());
        assert!(e.lo < e.hi); // 0.05 is not dyadic
    }
}
