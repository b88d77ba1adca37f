//! Run configuration: everything the command line supplies, validated before
//! any subdivision work starts.
//!
//! Region coordinates must be exact dyadic decimals (0.25 is fine, 0.1 is
//! not) because every box corner in the subdivision is derived from them by
//! halving. The tolerance has no such restriction: it is an arbitrary
//! positive decimal, kept as an exact rational, or the word `inf`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::arrange::Options;
use crate::error::{Error, Result};
use crate::numeric::{Box2, Dyadic};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutFormat {
    Json,
    Svg,
    Roots,
}

impl OutFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutFormat::Json => "json",
            OutFormat::Svg => "svg",
            OutFormat::Roots => "roots",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub f_text: String,
    pub g_text: String,
    pub roi: Box2,
    /// `None` means unbounded: refine only as far as topology requires.
    pub eps: Option<BigRational>,
    pub max_depth: u32,
    pub out: Vec<OutFormat>,
    pub out_prefix: String,
    pub include_boxes: bool,
    pub escalate_depth: u32,
    pub escalate_bits: u64,
}

impl RunConfig {
    /// Assemble and validate a configuration from raw flag values.
    /// `precision` overrides the default escalation bit count (the CLI wires
    /// the `CURVE_ARRANGE_PRECISION` environment variable through here).
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        f_text: &str,
        g_text: &str,
        roi: &str,
        eps: &str,
        max_depth: u32,
        out: &str,
        out_prefix: &str,
        include_boxes: bool,
        precision: Option<u64>,
    ) -> Result<RunConfig> {
        let defaults = Options::default();
        Ok(RunConfig {
            f_text: f_text.to_string(),
            g_text: g_text.to_string(),
            roi: parse_roi(roi)?,
            eps: parse_eps(eps)?,
            max_depth,
            out: parse_out(out)?,
            out_prefix: out_prefix.to_string(),
            include_boxes,
            escalate_depth: defaults.escalate_depth,
            escalate_bits: precision.unwrap_or(defaults.escalate_bits),
        })
    }

    pub fn options(&self) -> Options {
        Options {
            eps: self.eps.clone(),
            max_depth: self.max_depth,
            escalate_depth: self.escalate_depth,
            escalate_bits: self.escalate_bits,
        }
    }
}

/// Parse `x0,y0,x1,y1` into a validated region rectangle.
pub fn parse_roi(text: &str) -> Result<Box2> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(Error::Region(format!(
            "expected 4 comma-separated coordinates, found {}",
            parts.len()
        )));
    }
    let mut coords = Vec::with_capacity(4);
    for p in &parts {
        let d = Dyadic::parse_decimal(p).ok_or_else(|| {
            Error::Region(format!(
                "coordinate {p:?} is not an exact dyadic decimal (denominator \
                 must be a power of two)"
            ))
        })?;
        coords.push(d);
    }
    if coords[0] >= coords[2] || coords[1] >= coords[3] {
        return Err(Error::Region("region is empty or reversed".into()));
    }
    let b = Box2::new(
        coords[0].clone(),
        coords[1].clone(),
        coords[2].clone(),
        coords[3].clone(),
    );
    let (wx, wy) = (b.width_x(), b.width_y());
    if wx > wy.double() || wy > wx.double() {
        return Err(Error::Region(
            "aspect ratio exceeds 2: subdivide the region or pad the short side".into(),
        ));
    }
    Ok(b)
}

/// Parse the tolerance: a positive decimal (kept exact as a rational), or
/// `inf` for no width bound.
pub fn parse_eps(text: &str) -> Result<Option<BigRational>> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("inf") {
        return Ok(None);
    }
    let q = decimal_to_rational(t)
        .ok_or_else(|| Error::Region(format!("tolerance {t:?} is not a decimal number")))?;
    if q <= BigRational::zero() {
        return Err(Error::Region("tolerance must be positive".into()));
    }
    Ok(Some(q))
}

fn decimal_to_rational(t: &str) -> Option<BigRational> {
    let (sign, digits) = match t.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let mut num: BigInt = if int_part.is_empty() {
        BigInt::zero()
    } else {
        int_part.parse().ok()?
    };
    let mut den = BigInt::one();
    for c in frac_part.chars() {
        num = num * 10 + (c as u8 - b'0');
        den *= 10;
    }
    Some(BigRational::new(num * sign, den))
}

pub fn parse_out(text: &str) -> Result<Vec<OutFormat>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let fmt = match part {
            "json" => OutFormat::Json,
            "svg" => OutFormat::Svg,
            "roots" => OutFormat::Roots,
            other => {
                return Err(Error::Region(format!(
                    "unknown output format {other:?} (expected json, svg, roots)"
                )))
            }
        };
        if !out.contains(&fmt) {
            out.push(fmt);
        }
    }
    if out.is_empty() {
        return Err(Error::Region("no output format selected".into()));
    }
    Ok(out)
}
