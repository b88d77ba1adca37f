//! Error taxonomy for the whole pipeline.
//!
//! Configuration problems (bad expressions, bad region) are reported before any
//! subdivision work starts. The two run-level failures — a subdivision that hits
//! the depth cap without resolving, and an intersection that cannot be separated
//! from the region boundary — carry the offending box so callers can produce a
//! machine-readable diagnostic.

use std::fmt;

/// Rectangle reported inside failure diagnostics, in exact decimal form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadBox {
    pub x0: String,
    pub y0: String,
    pub x1: String,
    pub y1: String,
}

impl fmt::Display for BadBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] x [{}, {}]", self.x0, self.x1, self.y0, self.y1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Expression text failed to parse; offset is a byte position into the input.
    Parse { offset: usize, message: String },
    /// The region of interest is malformed (empty, reversed, aspect ratio > 2,
    /// or coordinates not exactly representable).
    Region(String),
    /// An expression uses division and the denominator could not be certified
    /// sign-definite on the region.
    Denominator(String),
    /// Subdivision reached the depth cap with an unresolved box. The curves may
    /// be singular or tangent inside the reported box.
    ResolutionLimit { max_depth: u32, rect: BadBox },
    /// An intersection of the two curves could not be separated from the region
    /// boundary; the preconditions require all intersections strictly interior.
    BoundaryRoot { max_depth: u32, rect: BadBox },
    /// A structural invariant failed. Always a bug, never an input problem.
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { offset, message } => {
                write!(f, "parse error at byte {offset}: {message}")
            }
            Error::Region(msg) => write!(f, "invalid region: {msg}"),
            Error::Denominator(msg) => write!(f, "division not admissible: {msg}"),
            Error::ResolutionLimit { max_depth, rect } => write!(
                f,
                "resolution limit: box {rect} unresolved at depth {max_depth}"
            ),
            Error::BoundaryRoot { max_depth, rect } => write!(
                f,
                "boundary root: intersection near {rect} cannot be separated from \
                 the region boundary (depth cap {max_depth})"
            ),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Machine-readable JSON diagnostic, used on stderr by the CLI for the two
    /// run-level failures.
    pub fn diagnostic_json(&self) -> String {
        fn rect_json(r: &BadBox) -> String {
            format!(
                "[\"{}\",\"{}\",\"{}\",\"{}\"]",
                r.x0, r.y0, r.x1, r.y1
            )
        }
        match self {
            Error::ResolutionLimit { max_depth, rect } => format!(
                "{{\"error\":\"ResolutionLimit\",\"max_depth\":{},\"box\":{}}}",
                max_depth,
                rect_json(rect)
            ),
            Error::BoundaryRoot { max_depth, rect } => format!(
                "{{\"error\":\"BoundaryRoot\",\"max_depth\":{},\"box\":{}}}",
                max_depth,
                rect_json(rect)
            ),
            other => format!("{{\"error\":\"{}\"}}", kind_name(other)),
        }
    }
}

fn kind_name(e: &Error) -> &'static str {
    match e {
        Error::Parse { .. } => "Parse",
        Error::Region(_) => "Region",
        Error::Denominator(_) => "Denominator",
        Error::ResolutionLimit { .. } => "ResolutionLimit",
        Error::BoundaryRoot { .. } => "BoundaryRoot",
        Error::Internal(_) => "Internal",
    }
}
