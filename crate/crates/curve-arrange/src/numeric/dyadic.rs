//! Exact dyadic numbers: `mantissa * 2^exponent` with arbitrary-precision
//! mantissa.
//!
//! Every coordinate the subdivision ever produces is dyadic (region corners are
//! parsed exactly, and splitting only ever halves), so box geometry is exact and
//! comparisons are never approximate. Canonical form keeps the mantissa odd (or
//! zero, with exponent zero) so that equality, hashing and ordering agree.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Rounding direction for conversions that may lose bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Round {
    /// Toward negative infinity.
    Down,
    /// Toward positive infinity.
    Up,
}

/// An exact dyadic rational `mantissa * 2^exponent`.
///
/// Invariants: the mantissa is odd or zero, and zero is represented with
/// exponent zero. All constructors normalize.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mantissa: BigInt,
    exponent: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic { mantissa: BigInt::zero(), exponent: 0 }
    }

    pub fn one() -> Self {
        Dyadic { mantissa: BigInt::one(), exponent: 0 }
    }

    pub fn new(mantissa: BigInt, exponent: i64) -> Self {
        let mut d = Dyadic { mantissa, exponent };
        d.normalize();
        d
    }

    fn normalize(&mut self) {
        if self.mantissa.is_zero() {
            self.exponent = 0;
            return;
        }
        let tz = self.mantissa.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.mantissa >>= tz;
            self.exponent += tz as i64;
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn signum(&self) -> i32 {
        match self.mantissa.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn from_i64(v: i64) -> Self {
        Dyadic::new(BigInt::from(v), 0)
    }

    /// Exact conversion from a finite `f64` (every finite double is dyadic).
    pub fn from_f64(v: f64) -> Option<Self> {
        if !v.is_finite() {
            return None;
        }
        if v == 0.0 {
            return Some(Dyadic::zero());
        }
        let bits = v.to_bits();
        let neg = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if biased == 0 {
            // Subnormal.
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        let mut m = BigInt::from(m);
        if neg {
            m = -m;
        }
        Some(Dyadic::new(m, e))
    }

    /// Directed conversion to `f64`. The result is `<=` the exact value for
    /// `Round::Down` and `>=` it for `Round::Up`.
    pub fn to_f64(&self, dir: Round) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let neg = self.signum() < 0;
        let mag = self.mantissa.magnitude().clone();
        let bits = mag.bits();
        let (mut q, mut e, inexact) = if bits > 53 {
            let shift = bits - 53;
            let r = &mag & ((BigUint::one() << shift) - BigUint::one());
            ((&mag >> shift).to_u64().unwrap(), self.exponent + shift as i64, !r.is_zero())
        } else {
            (mag.to_u64().unwrap(), self.exponent, false)
        };
        // Truncation rounds the magnitude toward zero; bump when the requested
        // direction points away from zero.
        let away = match (dir, neg) {
            (Round::Up, false) | (Round::Down, true) => true,
            _ => false,
        };
        if inexact && away {
            q += 1;
            if q == 1u64 << 53 {
                q >>= 1;
                e += 1;
            }
        }
        // Below the 2^-1074 grid anchor: build the value directly from bits
        // (the pattern k encodes exactly k * 2^-1074 while k < 2^53).
        if e < -1074 {
            let rs = (-(e + 1074)) as u32;
            if rs >= 64 {
                return saturate_underflow(neg, dir);
            }
            let mut k = q >> rs;
            let extra_inexact = q & ((1u64 << rs) - 1) != 0;
            debug_assert!(k < 1u64 << 53);
            if (inexact || extra_inexact) && away {
                k += 1;
            }
            let x = f64::from_bits(k);
            return if neg { -x } else { x };
        }
        let mut x = q as f64; // exact: q < 2^53
        // Scale by 2^e in exact power-of-two steps, saturating soundly. The
        // subnormal case was handled above so scaling never rounds.
        while e > 0 {
            let step = e.min(512);
            x *= f64_exp2(step);
            e -= step;
            if x.is_infinite() {
                return saturate_overflow(neg, dir);
            }
        }
        while e < 0 {
            let step = (-e).min(512);
            x /= f64_exp2(step);
            e += step;
        }
        if neg { -x } else { x }
    }

    /// Nearest `f64` (either directed image works as a seed for float math).
    pub fn to_f64_nearest(&self) -> f64 {
        self.to_f64(Round::Down)
    }

    pub fn to_rational(&self) -> BigRational {
        let m = BigRational::from_integer(self.mantissa.clone());
        if self.exponent >= 0 {
            m * BigRational::from_integer(BigInt::one() << self.exponent as u64)
        } else {
            m / BigRational::from_integer(BigInt::one() << (-self.exponent) as u64)
        }
    }

    /// Multiply by `2^k` (exact).
    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return Dyadic::zero();
        }
        Dyadic { mantissa: self.mantissa.clone(), exponent: self.exponent + k }
    }

    pub fn halve(&self) -> Self {
        self.mul_pow2(-1)
    }

    pub fn double(&self) -> Self {
        self.mul_pow2(1)
    }

    /// Exact midpoint of two dyadics.
    pub fn midpoint(a: &Dyadic, b: &Dyadic) -> Self {
        (a.clone() + b.clone()).halve()
    }

    /// Keep at most `bits` significant bits, rounding in `dir`.
    pub fn round_prec(&self, bits: u64, dir: Round) -> Self {
        let len = self.mantissa.magnitude().bits();
        if len <= bits {
            return self.clone();
        }
        let shift = len - bits;
        let neg = self.signum() < 0;
        let mag = self.mantissa.magnitude();
        let q = mag >> shift;
        let r = mag & ((BigUint::one() << shift) - BigUint::one());
        let away = match (dir, neg) {
            (Round::Up, false) | (Round::Down, true) => true,
            _ => false,
        };
        let q = if !r.is_zero() && away { q + BigUint::one() } else { q };
        let mut m = BigInt::from(q);
        if neg {
            m = -m;
        }
        Dyadic::new(m, self.exponent + shift as i64)
    }

    /// `self / d` rounded in `dir` to `bits` significant bits. `d` must be
    /// nonzero. Exact when the quotient happens to be dyadic within `bits`.
    pub fn div_round(&self, d: &Dyadic, bits: u64, dir: Round) -> Self {
        assert!(!d.is_zero(), "dyadic division by zero");
        if self.is_zero() {
            return Dyadic::zero();
        }
        let neg = self.signum() * d.signum() < 0;
        let n_mag = self.mantissa.magnitude();
        let d_mag = d.mantissa.magnitude();
        // Scale the numerator so the integer quotient carries `bits + 1` bits.
        let scale = (d_mag.bits() + bits + 2).saturating_sub(n_mag.bits());
        let n_scaled = n_mag << scale;
        let q = &n_scaled / d_mag;
        let r = &n_scaled % d_mag;
        let away = match (dir, neg) {
            (Round::Up, false) | (Round::Down, true) => true,
            _ => false,
        };
        let q = if !r.is_zero() && away { q + BigUint::one() } else { q };
        let mut m = BigInt::from(q);
        if neg {
            m = -m;
        }
        let out = Dyadic::new(m, self.exponent - d.exponent - scale as i64);
        out.round_prec(bits, dir)
    }

    /// Absolute value.
    pub fn abs(&self) -> Self {
        Dyadic { mantissa: self.mantissa.abs(), exponent: self.exponent }
    }

    /// Parse a plain decimal literal (`-?digits(.digits)?`). Returns `None` if
    /// the value is not exactly dyadic (e.g. `0.1`).
    pub fn parse_decimal(s: &str) -> Option<Self> {
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        if body.is_empty() {
            return None;
        }
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return None;
        }
        let digits = format!("{int_part}{frac_part}");
        let n: BigInt = digits.parse().ok()?;
        let k = frac_part.len() as u32;
        // n / 10^k is dyadic iff 5^k divides n.
        let five_k = BigInt::from(5u32).pow(k);
        let (q, r) = (&n / &five_k, &n % &five_k);
        if !r.is_zero() {
            return None;
        }
        let m = if neg { -q } else { q };
        Some(Dyadic::new(m, -(k as i64)))
    }

    /// Exact decimal rendering (every dyadic has a finite decimal expansion).
    pub fn to_decimal_string(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let neg = self.signum() < 0;
        let mag = self.mantissa.magnitude().clone();
        let sign = if neg { "-" } else { "" };
        if self.exponent >= 0 {
            let v = mag << self.exponent as u64;
            return format!("{sign}{v}");
        }
        let k = (-self.exponent) as u32;
        // m * 2^-k = m * 5^k * 10^-k.
        let digits = (BigInt::from(mag) * BigInt::from(5u32).pow(k)).to_string();
        let digits = if digits.len() <= k as usize {
            format!("{}{}", "0".repeat(k as usize - digits.len() + 1), digits)
        } else {
            digits
        };
        let point = digits.len() - k as usize;
        let (int_part, frac_part) = digits.split_at(point);
        let frac_part = frac_part.trim_end_matches('0');
        if frac_part.is_empty() {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{frac_part}")
        }
    }
}

fn f64_exp2(k: i64) -> f64 {
    debug_assert!((0..=512).contains(&k));
    2f64.powi(k as i32)
}

fn saturate_overflow(neg: bool, dir: Round) -> f64 {
    match (neg, dir) {
        (false, Round::Up) => f64::INFINITY,
        (false, Round::Down) => f64::MAX,
        (true, Round::Down) => f64::NEG_INFINITY,
        (true, Round::Up) => f64::MIN,
    }
}

fn saturate_underflow(neg: bool, dir: Round) -> f64 {
    // True magnitude is below the normal range; bound it away from the wrong
    // side of zero.
    match (neg, dir) {
        (false, Round::Up) => f64::MIN_POSITIVE,
        (false, Round::Down) => 0.0,
        (true, Round::Down) => -f64::MIN_POSITIVE,
        (true, Round::Up) => 0.0,
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let sa = self.signum();
        let sb = other.signum();
        if sa != sb {
            return sa.cmp(&sb);
        }
        if sa == 0 {
            return Ordering::Equal;
        }
        // Same nonzero sign: compare |a| vs |b| cheaply by magnitude bits
        // before falling back to an exact subtraction.
        let ba = self.mantissa.magnitude().bits() as i64 + self.exponent;
        let bb = other.mantissa.magnitude().bits() as i64 + other.exponent;
        if ba != bb {
            let mag = ba.cmp(&bb);
            return if sa > 0 { mag } else { mag.reverse() };
        }
        (self.clone() - other.clone()).signum().cmp(&0)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let e = self.exponent.min(rhs.exponent);
        let a = self.mantissa << (self.exponent - e) as u64;
        let b = rhs.mantissa << (rhs.exponent - e) as u64;
        Dyadic::new(a + b, e)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        self + (-rhs)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        Dyadic::new(self.mantissa * rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { mantissa: -self.mantissa, exponent: self.exponent }
    }
}

impl<'a> Add for &'a Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &'a Dyadic) -> Dyadic {
        self.clone() + rhs.clone()
    }
}

impl<'a> Sub for &'a Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &'a Dyadic) -> Dyadic {
        self.clone() - rhs.clone()
    }
}

impl<'a> Mul for &'a Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &'a Dyadic) -> Dyadic {
        self.clone() * rhs.clone()
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: f64) -> Dyadic {
        Dyadic::from_f64(v).unwrap()
    }

    #[test]
    fn canonical_form() {
        let x = Dyadic::new(BigInt::from(12), 0); // 12 = 3 * 2^2
        assert_eq!(x.mantissa(), &BigInt::from(3));
        assert_eq!(x.exponent(), 2);
        let z = Dyadic::new(BigInt::zero(), 77);
        assert!(z.is_zero());
        assert_eq!(z.exponent(), 0);
    }

    #[test]
    fn arithmetic_is_exact() {
        let a = d(0.5);
        let b = d(0.25);
        assert_eq!(a.clone() + b.clone(), d(0.75));
        assert_eq!(a.clone() - b.clone(), b.clone());
        assert_eq!(a.clone() * b.clone(), d(0.125));
        assert_eq!(-a.clone(), d(-0.5));
        assert_eq!(a.halve(), b);
        assert_eq!(b.double(), a);
    }

    #[test]
    fn ordering() {
        let mut v = vec![d(1.5), d(-2.0), d(0.0), d(0.03125), d(-0.03125)];
        v.sort();
        let got: Vec<f64> = v.iter().map(|x| x.to_f64_nearest()).collect();
        assert_eq!(got, vec![-2.0, -0.03125, 0.0, 0.03125, 1.5]);
    }

    #[test]
    fn f64_round_trip_exact() {
        for v in [0.0, 1.0, -1.0, 0.1, -3.75, 1e300, 5e-324, f64::MIN_POSITIVE] {
            let x = Dyadic::from_f64(v).unwrap();
            assert_eq!(x.to_f64(Round::Down), v);
            assert_eq!(x.to_f64(Round::Up), v);
        }
        assert!(Dyadic::from_f64(f64::INFINITY).is_none());
        assert!(Dyadic::from_f64(f64::NAN).is_none());
    }

    #[test]
    fn directed_f64_conversion_brackets() {
        // A 200-bit value that cannot be represented exactly.
        let x = Dyadic::new(BigInt::from(3), 0) * Dyadic::new((BigInt::one() << 200) + 1, -200);
        let lo = x.to_f64(Round::Down);
        let hi = x.to_f64(Round::Up);
        assert!(lo < hi);
        assert_eq!(lo.next_up(), hi);
        let r = x.to_rational();
        assert!(BigRational::from_float(lo).unwrap() <= r);
        assert!(BigRational::from_float(hi).unwrap() >= r);
    }

    #[test]
    fn decimal_strings() {
        assert_eq!(d(0.5).to_decimal_string(), "0.5");
        assert_eq!(d(-2.0).to_decimal_string(), "-2");
        assert_eq!(d(0.0625).to_decimal_string(), "0.0625");
        assert_eq!(d(-0.046875).to_decimal_string(), "-0.046875");
        assert_eq!(Dyadic::zero().to_decimal_string(), "0");
        assert_eq!(d(1048576.0).to_decimal_string(), "1048576");
    }

    #[test]
    fn parse_decimal_accepts_dyadic_only() {
        assert_eq!(Dyadic::parse_decimal("0.5"), Some(d(0.5)));
        assert_eq!(Dyadic::parse_decimal("-2"), Some(d(-2.0)));
        assert_eq!(Dyadic::parse_decimal("3.1875"), Some(d(3.1875)));
        assert_eq!(Dyadic::parse_decimal("0.1"), None);
        assert_eq!(Dyadic::parse_decimal("0.05"), None);
        assert_eq!(Dyadic::parse_decimal("x"), None);
    }

    #[test]
    fn parse_and_print_round_trip() {
        for s in ["0.5", "-2", "3.1875", "0.0009765625", "-123456789.25"] {
            let x = Dyadic::parse_decimal(s).unwrap();
            assert_eq!(x.to_decimal_string(), s.trim_start_matches('+'));
        }
    }

    #[test]
    fn round_prec_directed() {
        // 2^60 + 1 needs 61 bits; at 32 bits the directed images must bracket.
        let x = Dyadic::new((BigInt::one() << 60) + 1, 0);
        let lo = x.round_prec(32, Round::Down);
        let hi = x.round_prec(32, Round::Up);
        assert!(lo < x && x < hi);
        let y = d(0.75);
        assert_eq!(y.round_prec(32, Round::Down), y);
    }

    #[test]
    fn div_round_brackets_quotient() {
        let a = Dyadic::from_i64(1);
        let b = Dyadic::from_i64(3);
        let lo = a.div_round(&b, 64, Round::Down);
        let hi = a.div_round(&b, 64, Round::Up);
        let third = BigRational::new(BigInt::one(), BigInt::from(3));
        assert!(lo.to_rational() < third && third < hi.to_rational());
        // Error at 64 bits is tiny.
        let err = (hi - lo).to_f64(Round::Up);
        assert!(err > 0.0 && err < 1e-18);
        // Exact quotients stay exact in both directions.
        let c = d(6.0).div_round(&d(1.5), 64, Round::Down);
        assert_eq!(c, d(4.0));
        assert_eq!(d(6.0).div_round(&d(1.5), 64, Round::Up), d(4.0));
    }

    #[test]
    fn midpoint_is_exact() {
        let m = Dyadic::midpoint(&d(-1.0), &d(2.0));
        assert_eq!(m, d(0.5));
    }
}
