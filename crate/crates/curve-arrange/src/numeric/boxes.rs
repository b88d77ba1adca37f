//! Exact axis-aligned box geometry over dyadic coordinates.
//!
//! All subdivision geometry is derived from the region of interest by halving
//! and by scaling about box centers with dyadic factors, so every corner,
//! center and width in the pipeline is an exact dyadic number; geometric
//! predicates here (containment, adjacency, alignment) are decided exactly.

use std::fmt;

use super::dyadic::Dyadic;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point2 {
    // Field order gives the (y, x) lexicographic order used for all
    // deterministic tie-breaking.
    pub y: Dyadic,
    pub x: Dyadic,
}

impl Point2 {
    pub fn new(x: Dyadic, y: Dyadic) -> Self {
        Point2 { y, x }
    }
}

/// Alignment status of a box relative to the subdivision tree of the region.
///
/// This is structural metadata, not recoverable from coordinates alone: any
/// dyadic-cornered box is a union of sufficiently small aligned boxes, so the
/// distinguishing fact is how the box was produced. Tree subdivision preserves
/// `Aligned`; concentric scaling of an aligned box by the pipeline factors
/// (1/2, 2, 3, 4, 6, 8) yields `HalfAligned` (corners stay on the generator's
/// half-width grid, see [`Box2::on_half_grid_of`]); everything else is `Free`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    Aligned,
    HalfAligned,
    Free,
}

impl Alignment {
    /// Alignment after concentric scaling by a pipeline factor.
    pub fn after_scale(self) -> Alignment {
        match self {
            Alignment::Aligned => Alignment::HalfAligned,
            _ => Alignment::Free,
        }
    }
}

/// Sides of a box. The numeric values index neighbor-pointer arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    West = 0,
    East = 1,
    South = 2,
    North = 3,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    pub fn opposite(self) -> Side {
        match self {
            Side::West => Side::East,
            Side::East => Side::West,
            Side::South => Side::North,
            Side::North => Side::South,
        }
    }

    pub fn is_vertical(self) -> bool {
        matches!(self, Side::West | Side::East)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`, possibly degenerate
/// (faces of boxes are represented as boxes with one zero width).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Box2 {
    pub x0: Dyadic,
    pub y0: Dyadic,
    pub x1: Dyadic,
    pub y1: Dyadic,
}

impl Box2 {
    pub fn new(x0: Dyadic, y0: Dyadic, x1: Dyadic, y1: Dyadic) -> Self {
        debug_assert!(x0 <= x1 && y0 <= y1);
        Box2 { x0, y0, x1, y1 }
    }

    pub fn width_x(&self) -> Dyadic {
        &self.x1 - &self.x0
    }

    pub fn width_y(&self) -> Dyadic {
        &self.y1 - &self.y0
    }

    /// Larger of the two side widths.
    pub fn max_width(&self) -> Dyadic {
        let wx = self.width_x();
        let wy = self.width_y();
        if wx >= wy {
            wx
        } else {
            wy
        }
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            Dyadic::midpoint(&self.x0, &self.x1),
            Dyadic::midpoint(&self.y0, &self.y1),
        )
    }

    /// Lower-left corner as the deterministic ordering key (y first).
    pub fn order_key(&self) -> (Dyadic, Dyadic) {
        (self.y0.clone(), self.x0.clone())
    }

    /// Quadrant subdivision in SW, SE, NW, NE order.
    pub fn split(&self) -> [Box2; 4] {
        let c = self.center();
        [
            Box2::new(self.x0.clone(), self.y0.clone(), c.x.clone(), c.y.clone()),
            Box2::new(c.x.clone(), self.y0.clone(), self.x1.clone(), c.y.clone()),
            Box2::new(self.x0.clone(), c.y.clone(), c.x.clone(), self.y1.clone()),
            Box2::new(c.x.clone(), c.y.clone(), self.x1.clone(), self.y1.clone()),
        ]
    }

    /// Concentric scaling `cen(B) + factor * (B - cen(B))` with a dyadic factor.
    pub fn scale(&self, factor: &Dyadic) -> Box2 {
        let c = self.center();
        let hx = self.width_x().halve() * factor.clone();
        let hy = self.width_y().halve() * factor.clone();
        Box2::new(&c.x - &hx, &c.y - &hy, &c.x + &hx, &c.y + &hy)
    }

    pub fn times2(&self) -> Box2 {
        self.scale(&Dyadic::from_i64(2))
    }

    pub fn times6(&self) -> Box2 {
        self.scale(&Dyadic::from_i64(6))
    }

    pub fn times8(&self) -> Box2 {
        self.scale(&Dyadic::from_i64(8))
    }

    pub fn contains_box(&self, other: &Box2) -> bool {
        self.x0 <= other.x0 && other.x1 <= self.x1 && self.y0 <= other.y0 && other.y1 <= self.y1
    }

    pub fn contains_point(&self, p: &Point2) -> bool {
        self.x0 <= p.x && p.x <= self.x1 && self.y0 <= p.y && p.y <= self.y1
    }

    pub fn contains_point_interior(&self, p: &Point2) -> bool {
        self.x0 < p.x && p.x < self.x1 && self.y0 < p.y && p.y < self.y1
    }

    /// Open-interior overlap test.
    pub fn interiors_intersect(&self, other: &Box2) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    /// Closed-set overlap test (shared corners and edges count).
    pub fn closed_intersects(&self, other: &Box2) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    /// True when the boxes share a segment of positive length (edge adjacency;
    /// corner contact does not count).
    pub fn is_adjacent(&self, other: &Box2) -> bool {
        let x_touch = self.x1 == other.x0 || other.x1 == self.x0;
        let y_touch = self.y1 == other.y0 || other.y1 == self.y0;
        let x_overlap = self.x0.clone().max(other.x0.clone()) < self.x1.clone().min(other.x1.clone());
        let y_overlap = self.y0.clone().max(other.y0.clone()) < self.y1.clone().min(other.y1.clone());
        (x_touch && y_overlap) || (y_touch && x_overlap)
    }

    /// The coordinate of a side (x for W/E, y for S/N).
    pub fn side_coord(&self, side: Side) -> &Dyadic {
        match side {
            Side::West => &self.x0,
            Side::East => &self.x1,
            Side::South => &self.y0,
            Side::North => &self.y1,
        }
    }

    /// A side as a degenerate box (used for face evaluations).
    pub fn face(&self, side: Side) -> Box2 {
        match side {
            Side::West => Box2::new(self.x0.clone(), self.y0.clone(), self.x0.clone(), self.y1.clone()),
            Side::East => Box2::new(self.x1.clone(), self.y0.clone(), self.x1.clone(), self.y1.clone()),
            Side::South => Box2::new(self.x0.clone(), self.y0.clone(), self.x1.clone(), self.y0.clone()),
            Side::North => Box2::new(self.x0.clone(), self.y1.clone(), self.x1.clone(), self.y1.clone()),
        }
    }

    /// Corners in SW, SE, NW, NE order.
    pub fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(self.x0.clone(), self.y0.clone()),
            Point2::new(self.x1.clone(), self.y0.clone()),
            Point2::new(self.x0.clone(), self.y1.clone()),
            Point2::new(self.x1.clone(), self.y1.clone()),
        ]
    }

    /// Is `self` one of the boxes reachable from `root` by recursive quadrant
    /// subdivision? (Exact grid test: widths are `w(root)/2^d` and offsets are
    /// whole multiples of the width.)
    pub fn is_aligned(&self, root: &Box2) -> bool {
        let (wx, wy) = (self.width_x(), self.width_y());
        if wx.is_zero() || wy.is_zero() {
            return false;
        }
        // Widths must be root widths / 2^d for a common d >= 0.
        let d = match depth_of(&root.width_x(), &wx) {
            Some(d) => d,
            None => return false,
        };
        if depth_of(&root.width_y(), &wy) != Some(d) {
            return false;
        }
        is_multiple(&(&self.x0 - &root.x0), &wx) && is_multiple(&(&self.y0 - &root.y0), &wy)
    }

    /// Do the corners of `self` lie on the half-width grid of an aligned
    /// generator box? This is the exact content of "half-aligned" for every
    /// derived box the pipeline uses (2B, 6B, 8B and the ring boxes are all
    /// generated from an aligned `B` and sit on the grid of spacing `w(B)/2`
    /// anchored at `B`'s corner), and it is what makes blacked-out regions
    /// splittable to termination.
    pub fn on_half_grid_of(&self, generator: &Box2) -> bool {
        let gx = generator.width_x().halve();
        let gy = generator.width_y().halve();
        if gx.is_zero() || gy.is_zero() {
            return false;
        }
        is_multiple(&(&self.x0 - &generator.x0), &gx)
            && is_multiple(&(&self.x1 - &generator.x0), &gx)
            && is_multiple(&(&self.y0 - &generator.y0), &gy)
            && is_multiple(&(&self.y1 - &generator.y0), &gy)
    }

    pub fn to_bad_box(&self) -> crate::error::BadBox {
        crate::error::BadBox {
            x0: self.x0.to_decimal_string(),
            y0: self.y0.to_decimal_string(),
            x1: self.x1.to_decimal_string(),
            y1: self.y1.to_decimal_string(),
        }
    }
}

/// If `whole = part * 2^d` for an integer `d >= 0`, return `d`.
fn depth_of(whole: &Dyadic, part: &Dyadic) -> Option<i64> {
    if part.is_zero() || whole.is_zero() {
        return None;
    }
    if whole.mantissa() != part.mantissa() {
        return None;
    }
    let d = whole.exponent() - part.exponent();
    if d >= 0 {
        Some(d)
    } else {
        None
    }
}

/// Is `v` an integer multiple of nonzero dyadic `step`?
fn is_multiple(v: &Dyadic, step: &Dyadic) -> bool {
    if v.is_zero() {
        return true;
    }
    // v / step = (mv / ms) * 2^(ev - es): integer iff ms divides mv * 2^k.
    use num_integer::Integer;
    use num_traits::Zero;
    let shift = v.exponent() - step.exponent();
    let mut num = v.mantissa().clone();
    if shift > 0 {
        num <<= shift as u64;
    }
    let den = if shift < 0 {
        step.mantissa().clone() << (-shift) as u64
    } else {
        step.mantissa().clone()
    };
    num.mod_floor(&den).is_zero()
}

impl fmt::Display for Box2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}] x [{}, {}]",
            self.x0.to_decimal_string(),
            self.x1.to_decimal_string(),
            self.y0.to_decimal_string(),
            self.y1.to_decimal_string()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: f64) -> Dyadic {
        Dyadic::from_f64(v).unwrap()
    }

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> Box2 {
        Box2::new(d(x0), d(y0), d(x1), d(y1))
    }

    #[test]
    fn split_order_and_exactness() {
        let b = bx(-2.0, -2.0, 2.0, 2.0);
        let kids = b.split();
        assert_eq!(kids[0], bx(-2.0, -2.0, 0.0, 0.0)); // SW
        assert_eq!(kids[1], bx(0.0, -2.0, 2.0, 0.0)); // SE
        assert_eq!(kids[2], bx(-2.0, 0.0, 0.0, 2.0)); // NW
        assert_eq!(kids[3], bx(0.0, 0.0, 2.0, 2.0)); // NE
    }

    #[test]
    fn scaling_is_concentric_and_exact() {
        let b = bx(0.0, 0.0, 1.0, 1.0);
        assert_eq!(b.times2(), bx(-0.5, -0.5, 1.5, 1.5));
        assert_eq!(b.times6(), bx(-2.5, -2.5, 3.5, 3.5));
        assert_eq!(b.times8(), bx(-3.5, -3.5, 4.5, 4.5));
        // Nesting B in 2B in 6B in 8B.
        assert!(b.times2().contains_box(&b));
        assert!(b.times6().contains_box(&b.times2()));
        assert!(b.times8().contains_box(&b.times6()));
    }

    #[test]
    fn alignment_under_subdivision() {
        let root = bx(-2.0, -2.0, 2.0, 2.0);
        assert!(root.is_aligned(&root));
        let kid = &root.split()[1];
        assert!(kid.is_aligned(&root));
        let grand = &kid.split()[2];
        assert!(grand.is_aligned(&root));
        // Scaled boxes leave the aligned grid but stay on the generator's
        // half-width grid.
        for factor in [2i64, 3, 4, 6, 8] {
            let scaled = grand.scale(&d(factor as f64));
            assert!(!scaled.is_aligned(&root), "factor {factor}");
            assert!(scaled.on_half_grid_of(grand), "factor {factor}");
        }
        assert_eq!(Alignment::Aligned.after_scale(), Alignment::HalfAligned);
        assert_eq!(Alignment::HalfAligned.after_scale(), Alignment::Free);
        // An offset box is not aligned.
        let off = bx(-1.9, -2.0, -0.9, -1.0);
        assert!(!off.is_aligned(&root));
        // Width mismatch fails.
        let stretched = bx(-2.0, -2.0, 1.0, 2.0);
        assert!(!stretched.is_aligned(&root));
    }

    #[test]
    fn adjacency_is_edge_sharing() {
        let a = bx(0.0, 0.0, 1.0, 1.0);
        assert!(a.is_adjacent(&bx(1.0, 0.0, 2.0, 1.0)));
        assert!(a.is_adjacent(&bx(1.0, 0.5, 2.0, 3.0)));
        assert!(!a.is_adjacent(&bx(1.0, 1.0, 2.0, 2.0))); // corner only
        assert!(!a.is_adjacent(&bx(2.0, 0.0, 3.0, 1.0))); // gap
        assert!(!a.is_adjacent(&bx(0.25, 0.25, 0.5, 0.5))); // nested
    }

    #[test]
    fn faces_are_degenerate_boxes() {
        let b = bx(0.0, 0.0, 2.0, 1.0);
        let w = b.face(Side::West);
        assert_eq!(w, bx(0.0, 0.0, 0.0, 1.0));
        assert_eq!(b.face(Side::North), bx(0.0, 1.0, 2.0, 1.0));
        assert_eq!(w.center(), Point2::new(d(0.0), d(0.5)));
    }

    #[test]
    fn non_square_regions_keep_aspect() {
        let b = bx(0.0, 0.0, 4.0, 2.0);
        let kids = b.split();
        for k in &kids {
            assert_eq!(k.width_x(), d(2.0));
            assert_eq!(k.width_y(), d(1.0));
        }
        assert!(kids[3].is_aligned(&b));
    }
}
