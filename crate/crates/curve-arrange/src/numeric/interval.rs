//! Double-precision intervals with outward rounding.
//!
//! Endpoint operations are performed in `f64`; whenever a result is inexact the
//! corresponding endpoint is nudged one ulp outward, so every interval returned
//! here contains the exact real result. Exact operations (dyadic endpoint
//! arithmetic that happens to fit in a double) are detected with an fma residue
//! check and left unwidened — box geometry is dyadic, so predicate inputs stay
//! exact far more often than generic interval libraries would manage.
//!
//! Squaring is *not* the tight `{x^2 : x in I}`: it is `{x*y : x, y in I}`,
//! i.e. plain self-multiplication, so `[-1,2]^2 = [-2,4]`. The exclusion
//! predicates downstream are specified against this semantics and their
//! certified-failure behavior depends on it; do not "fix" it.

use super::dyadic::{Dyadic, Round};
use num_rational::BigRational;
use num_traits::ToPrimitive;

/// A closed interval `[lo, hi]` of doubles, possibly marked exact.
///
/// `exact` means the endpoints are exactly the endpoints of the real-number
/// result of the operation tree that produced the interval (no rounding has
/// occurred anywhere along the way).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub exact: bool,
}

/// Sum `a + b` with a flag telling whether the double addition was exact.
fn add_checked(a: f64, b: f64) -> (f64, bool) {
    let s = a + b;
    let exact = s.is_finite() && (s - a == b && s - b == a);
    (s, exact)
}

/// Product `a * b` with an fma-based exactness flag.
fn mul_checked(a: f64, b: f64) -> (f64, bool) {
    let p = a * b;
    let exact = p.is_finite() && a.mul_add(b, -p) == 0.0;
    (p, exact)
}

fn down(x: f64, exact: bool) -> f64 {
    if exact {
        x
    } else {
        x.next_down()
    }
}

fn up(x: f64, exact: bool) -> f64 {
    if exact {
        x
    } else {
        x.next_up()
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(!lo.is_nan() && !hi.is_nan() && lo <= hi);
        Interval { lo, hi, exact: true }
    }

    fn inexact(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, exact: false }
    }

    pub fn point(v: f64) -> Self {
        Interval::new(v, v)
    }

    /// Exact enclosure of a dyadic value (point interval when it fits).
    pub fn from_dyadic(d: &Dyadic) -> Self {
        let lo = d.to_f64(Round::Down);
        let hi = d.to_f64(Round::Up);
        Interval { lo, hi, exact: lo == hi }
    }

    pub fn from_dyadic_pair(lo: &Dyadic, hi: &Dyadic) -> Self {
        let l = lo.to_f64(Round::Down);
        let h = hi.to_f64(Round::Up);
        Interval { lo: l, hi: h, exact: l == lo.to_f64(Round::Up) && h == hi.to_f64(Round::Down) }
    }

    /// Enclosure of an arbitrary rational constant.
    pub fn from_rational(q: &BigRational) -> Self {
        let approx = q.to_f64().unwrap_or(0.0);
        if let Ok(back) = BigRational::from_float(approx).ok_or(()) {
            if &back == q {
                return Interval::point(approx);
            }
        }
        Interval::inexact(approx.next_down(), approx.next_up())
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && 0.0 <= self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// Magnitude: `max |x|` over the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Mignitude: `min |x|` over the interval (zero if it straddles zero).
    pub fn mig(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
            exact: self.exact && other.exact,
        }
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo, exact: self.exact }
    }

    pub fn add(&self, rhs: &Interval) -> Interval {
        let (lo, elo) = add_checked(self.lo, rhs.lo);
        let (hi, ehi) = add_checked(self.hi, rhs.hi);
        let exact = self.exact && rhs.exact && elo && ehi;
        Interval {
            lo: down(lo, self.exact && rhs.exact && elo),
            hi: up(hi, self.exact && rhs.exact && ehi),
            exact,
        }
    }

    pub fn sub(&self, rhs: &Interval) -> Interval {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &Interval) -> Interval {
        let pairs = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut lo_exact = false;
        let mut hi_exact = false;
        for (a, b) in pairs {
            let (p, e) = mul_checked(a, b);
            if p < lo || (p == lo && e) {
                lo = p;
                lo_exact = e;
            }
            if p > hi || (p == hi && e) {
                hi = p;
                hi_exact = e;
            }
        }
        let in_exact = self.exact && rhs.exact;
        Interval {
            lo: down(lo, in_exact && lo_exact),
            hi: up(hi, in_exact && hi_exact),
            exact: in_exact && lo_exact && hi_exact,
        }
    }

    /// Self-multiplication square: `{x*y : x,y in self}`, not `{x^2}`.
    /// `[-1,2]` squares to `[-2,4]`.
    pub fn square(&self) -> Interval {
        self.mul(self)
    }

    /// Integer power by square-and-multiply over the loose square.
    pub fn pow(&self, n: u32) -> Interval {
        match n {
            0 => Interval::point(1.0),
            1 => *self,
            _ => {
                let half = self.pow(n / 2);
                let sq = half.square();
                if n % 2 == 0 {
                    sq
                } else {
                    sq.mul(self)
                }
            }
        }
    }

    /// Division; `None` when the denominator straddles zero.
    pub fn div(&self, rhs: &Interval) -> Option<Interval> {
        if rhs.contains_zero() {
            return None;
        }
        let pairs = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (n, d) in pairs {
            let q = n / d;
            lo = lo.min(q);
            hi = hi.max(q);
        }
        // Quotients are rarely exact; always widen.
        Some(Interval::inexact(lo.next_down(), hi.next_up()))
    }

    pub fn exp(&self) -> Interval {
        let lo = self.lo.exp().next_down().next_down().max(0.0);
        let hi = self.hi.exp().next_up().next_up();
        Interval::inexact(lo, hi)
    }

    pub fn sin(&self) -> Interval {
        trig_range(self, 0.0)
    }

    pub fn cos(&self) -> Interval {
        // cos x = sin(x + pi/2): shift the critical-point phase instead of the
        // argument so no argument rounding is introduced.
        trig_range(self, std::f64::consts::FRAC_PI_2)
    }
}

/// Range enclosure for `sin(x + phase)` over an interval, `phase` in {0, pi/2}.
fn trig_range(x: &Interval, phase: f64) -> Interval {
    let two_pi = 2.0 * std::f64::consts::PI;
    if x.width() >= two_pi {
        return Interval::inexact(-1.0, 1.0);
    }
    let f = |v: f64| if phase == 0.0 { v.sin() } else { v.cos() };
    let mut lo = f(x.lo).min(f(x.hi));
    let mut hi = f(x.lo).max(f(x.hi));
    // Conservative test for a critical point `c = pi/2 - phase + k*pi` with the
    // right parity inside [lo, hi]. Slack absorbs both the pi rounding and the
    // division; a false positive only loosens the result.
    let slack = 1e-9 * (1.0 + x.lo.abs().max(x.hi.abs()));
    let has_crit = |target: f64| -> bool {
        // Does x contain a point equal to target (mod 2*pi)?
        let k_lo = ((x.lo - target) / two_pi - slack).ceil();
        let k_hi = ((x.hi - target) / two_pi + slack).floor();
        k_lo <= k_hi
    };
    let max_at = std::f64::consts::FRAC_PI_2 - phase;
    let min_at = -std::f64::consts::FRAC_PI_2 - phase;
    if has_crit(max_at) {
        hi = 1.0;
    }
    if has_crit(min_at) {
        lo = -1.0;
    }
    let lo = (lo.next_down().next_down()).max(-1.0);
    let hi = (hi.next_up().next_up()).min(1.0);
    Interval::inexact(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi)
    }

    #[test]
    fn exact_dyadic_ops_stay_exact() {
        let a = iv(-1.0, 2.0);
        let b = iv(0.5, 0.5);
        let s = a.add(&b);
        assert_eq!((s.lo, s.hi, s.exact), (-0.5, 2.5, true));
        let p = a.mul(&b);
        assert_eq!((p.lo, p.hi, p.exact), (-0.5, 1.0, true));
    }

    #[test]
    fn square_is_self_multiplication() {
        let a = iv(-1.0, 2.0);
        let sq = a.square();
        assert_eq!((sq.lo, sq.hi), (-2.0, 4.0));
        assert!(sq.exact);
        // Positive intervals square tightly.
        let b = iv(2.0, 3.0);
        let sq = b.square();
        assert_eq!((sq.lo, sq.hi), (4.0, 9.0));
    }

    #[test]
    fn pow_expands_via_loose_square() {
        let a = iv(-1.0, 2.0);
        let p3 = a.pow(3); // sq(a) * a = [-2,4] * [-1,2] = [-4,8]
        assert_eq!((p3.lo, p3.hi), (-4.0, 8.0));
        let p4 = a.pow(4); // sq([-2,4]) = [-8,16]
        assert_eq!((p4.lo, p4.hi), (-8.0, 16.0));
        let p0 = a.pow(0);
        assert_eq!((p0.lo, p0.hi), (1.0, 1.0));
    }

    #[test]
    fn inexact_ops_round_outward() {
        let a = iv(0.1, 0.1);
        let b = iv(0.2, 0.2);
        let s = a.add(&b);
        assert!(s.lo < 0.1 + 0.2 && 0.1 + 0.2 < s.hi);
        assert!(!s.exact);
        // Containment of the true rational 0.3.
        let three_tenths = BigRational::new(3.into(), 10.into());
        let lo = BigRational::from_float(s.lo).unwrap();
        let hi = BigRational::from_float(s.hi).unwrap();
        assert!(lo < three_tenths && three_tenths < hi);
    }

    #[test]
    fn division_requires_nonzero_denominator() {
        let n = iv(1.0, 2.0);
        assert!(n.div(&iv(-1.0, 1.0)).is_none());
        let q = n.div(&iv(2.0, 4.0)).unwrap();
        assert!(q.lo < 0.25 && q.lo > 0.2499);
        assert!(q.hi > 1.0 && q.hi < 1.0001);
    }

    #[test]
    fn mag_and_mig() {
        assert_eq!(iv(-3.0, 2.0).mag(), 3.0);
        assert_eq!(iv(-3.0, 2.0).mig(), 0.0);
        assert_eq!(iv(1.0, 2.0).mig(), 1.0);
        assert_eq!(iv(-5.0, -4.0).mig(), 4.0);
    }

    #[test]
    fn exp_encloses() {
        let e = iv(0.0, 1.0).exp();
        assert!(e.lo <= 1.0 && e.lo > 0.999999);
        assert!(e.hi >= std::f64::consts::E && e.hi < 2.7182819);
        let tiny = iv(-800.0, -700.0).exp();
        assert!(tiny.lo >= 0.0 && tiny.hi > 0.0);
    }

    #[test]
    fn sin_handles_critical_points() {
        let s = iv(1.0, 2.0).sin(); // contains pi/2: max = 1
        assert_eq!(s.hi, 1.0);
        assert!(s.lo <= 1.0f64.sin().min(2.0f64.sin()));
        let s = iv(0.1, 0.2).sin(); // monotone stretch
        assert!(s.hi < 0.21 && s.lo > 0.09);
        let s = iv(-10.0, 10.0).sin();
        assert_eq!((s.lo, s.hi), (-1.0, 1.0));
        let c = iv(3.0, 3.3).cos(); // contains pi: min = -1
        assert_eq!(c.lo, -1.0);
    }

    #[test]
    fn dyadic_point_conversion() {
        let d = Dyadic::parse_decimal("0.5").unwrap();
        let i = Interval::from_dyadic(&d);
        assert_eq!((i.lo, i.hi, i.exact), (0.5, 0.5, true));
    }
}
