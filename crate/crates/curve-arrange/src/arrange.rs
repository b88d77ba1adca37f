//! Arrangement assembly: from isolated intersections to a certified graph.
//!
//! The isolation stages leave a subdivision tree plus one record per
//! intersection. This module finishes the job:
//!
//! 1. blacks out the enlarged neighborhood of every intersection and re-balances
//!    the remaining tree against a virtual leaf per neighborhood,
//! 2. refines the standard subdivision inside each neighborhood until it meets
//!    the outside tree conformally,
//! 3. places curve vertices on every boundary segment whose endpoint signs
//!    differ, wires them up inside ordinary cells by monotonicity, and wires the
//!    intersection cells as four-armed stars,
//! 4. resolves the along-segment order of coincident crossings — first from the
//!    interval-Newton certificates, then by sign bisection on transition and
//!    region-boundary segments, then by planarity propagation — and
//! 5. emits a planar straight-line graph with one labelled polyline per curve
//!    branch, auditing degree laws and edge crossings exactly.
//!
//! All vertex coordinates are dyadic, so the planarity audit is exact integer
//! arithmetic, never floating-point.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::funcmodel::eval::{eval_box, eval_box_prec, eval_point, eval_sign};
use crate::funcmodel::{CurveSystem, Which};
use crate::isolate::{Isolator, RootRecord};
use crate::numeric::{Box2, Dyadic, Point2, Side};
use crate::predicates;
use crate::subdiv::{
    internal_conform, segments_of, std_subdivision, Cell, SegOrder, Segment, SubdivTree,
};

/// Tuning knobs for a full run. `eps` is the Hausdorff tolerance (`None` means
/// unbounded: subdivide only as far as topology demands).
#[derive(Debug, Clone)]
pub struct Options {
    pub eps: Option<BigRational>,
    pub max_depth: u32,
    pub escalate_depth: u32,
    pub escalate_bits: u64,
}

impl Default for Options {
    fn default() -> Options {
        Options {
            eps: None,
            max_depth: 40,
            escalate_depth: 30,
            escalate_bits: 256,
        }
    }
}

/// What a graph vertex stands for: a crossing of one curve over a segment, or
/// an isolated intersection of both curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    F,
    G,
    Root,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PslgVertex {
    pub p: Point2,
    pub kind: VertexKind,
}

/// A straight edge of the output graph. `cell` is the index of the cell that
/// produced the edge, kept for provenance and for the exactness audits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PslgEdge {
    pub u: usize,
    pub v: usize,
    pub label: Which,
    pub cell: usize,
}

/// Planar straight-line graph: the approximation of both curves plus their
/// certified intersections.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pslg {
    pub vertices: Vec<PslgVertex>,
    pub edges: Vec<PslgEdge>,
}

impl Pslg {
    /// Per-vertex edge counts split by label, in the order `[f, g]`.
    pub fn degrees(&self) -> Vec<[usize; 2]> {
        let mut deg = vec![[0usize; 2]; self.vertices.len()];
        for e in &self.edges {
            let k = match e.label {
                Which::F => 0,
                Which::G => 1,
            };
            deg[e.u][k] += 1;
            deg[e.v][k] += 1;
        }
        deg
    }
}

/// Everything a run produces: the graph, the final cell complex (for box
/// output and diagnostics), and the intersection records.
#[derive(Debug, Clone)]
pub struct Arrangement {
    pub pslg: Pslg,
    pub cells: Vec<Cell>,
    pub roots: Vec<RootRecord>,
    /// Stage log: (stage name, item count) pairs in execution order.
    pub events: Vec<(&'static str, usize)>,
    /// Number of point sign evaluations that fell back to the perturbation
    /// convention (undecidable exact zero of a transcendental expression).
    pub perturbed_corners: usize,
}

/// Run the complete pipeline on a prepared system over `roi`.
pub fn build_arrangement(sys: &CurveSystem, roi: &Box2, opts: &Options) -> Result<Arrangement> {
    check_region(roi)?;
    sys.check_denominators(roi)?;

    let mut events: Vec<(&'static str, usize)> = Vec::new();
    let mut tree = SubdivTree::new(roi.clone());
    let isolator = Isolator::new(sys, opts.eps.clone(), opts.max_depth)
        .with_escalation(opts.escalate_depth, opts.escalate_bits);
    let roots = isolator.run(&mut tree)?;
    events.push(("isolate", roots.len()));

    let esc_depth = opts.escalate_depth;
    let esc_bits = opts.escalate_bits;
    let esc = |depth: u32| (depth > esc_depth).then_some(esc_bits);
    let mut classify = |rect: &Box2, depth: u32| predicates::classify(sys, rect, esc(depth));

    // Black out every enlarged neighborhood; the tree keeps only the outside.
    for r in &roots {
        let overlapping = tree.leaves_overlapping_rect(&r.b8);
        let seed = *overlapping
            .first()
            .ok_or_else(|| Error::Internal("no leaf overlaps an isolation region".into()))?;
        tree.prune_region(seed, &r.b8, &mut classify);
    }
    events.push(("prune", tree.len()));

    // Balance the outside against one virtual leaf per neighborhood, then read
    // off how far each neighborhood border must be refined to conform.
    let cis: Vec<usize> = roots
        .iter()
        .map(|r| tree.add_conceptual(r.b8.clone(), r.depth))
        .collect();
    tree.balance(&mut classify);
    let mut ks = Vec::with_capacity(cis.len());
    for &ci in &cis {
        ks.push(tree.conforming_k(ci)?);
    }
    events.push(("balance", tree.len()));

    // Final cell complex: surviving tree leaves plus the conforming interior of
    // every neighborhood.
    let mut cells: Vec<Cell> = tree
        .on_leaves_sorted()
        .into_iter()
        .map(|id| {
            let n = tree.node(id);
            Cell {
                rect: n.rect.clone(),
                depth: n.depth as i64,
                class: n.class,
                root_index: None,
            }
        })
        .collect();
    for (i, r) in roots.iter().enumerate() {
        let std = std_subdivision(&r.b);
        let mut cl = |rect: &Box2| predicates::classify(sys, rect, esc(r.depth));
        let mut interior = internal_conform(&std, r.depth as i64, ks[i], &mut cl)?;
        for c in &mut interior {
            if c.rect == r.b2 {
                c.root_index = Some(i);
            }
        }
        cells.append(&mut interior);
    }
    cells.sort_by_key(|c| c.rect.order_key());
    events.push(("conform", cells.len()));

    let segs = segments_of(&cells);
    events.push(("segments", segs.len()));

    let mut b = Builder {
        sys,
        roi: roi.clone(),
        max_prec: opts.escalate_bits,
        cells,
        segs,
        cell_segs: Vec::new(),
        root_cells: vec![None; roots.len()],
        roots,
        verts: Vec::new(),
        edges: Vec::new(),
        corner_signs: BTreeMap::new(),
        perturbed: 0,
        pairings: Vec::new(),
    };
    b.index_cells()?;
    b.place_vertices()?;
    events.push(("vertices", b.verts.len()));
    b.resolve_orders()?;
    b.reposition_shared()?;
    b.connect_all()?;
    events.push(("edges", b.edges.len()));
    b.audit_degrees()?;

    Ok(Arrangement {
        pslg: Pslg {
            vertices: b.verts,
            edges: b.edges,
        },
        cells: b.cells,
        roots: b.roots,
        events,
        perturbed_corners: b.perturbed,
    })
}

fn check_region(roi: &Box2) -> Result<()> {
    if roi.x0 >= roi.x1 || roi.y0 >= roi.y1 {
        return Err(Error::Region("region is empty or reversed".into()));
    }
    let wx = roi.width_x();
    let wy = roi.width_y();
    if wx > wy.double() || wy > wx.double() {
        return Err(Error::Region(
            "aspect ratio exceeds 2: subdivide the region or pad the short side".into(),
        ));
    }
    Ok(())
}

fn rat_sign(q: &BigRational) -> i32 {
    if q.is_zero() {
        0
    } else if q > &BigRational::zero() {
        1
    } else {
        -1
    }
}

/// Decide which curve crosses first along a doubly-crossed segment of an
/// intersection cell boundary, from the preconditioner row for that face.
///
/// The preconditioned combination `phi = alpha*f + beta*g` keeps the definite
/// sign `s` on the whole face. At the g-crossing `phi` reduces to `alpha*f`,
/// at the f-crossing to `beta*g`, so exactly one of the two sign equations
/// below can hold; which one tells the order. Both holding (or neither, or a
/// vanishing coefficient next to two crossings) contradicts the certificate.
fn order_from_certificate(
    alpha: &BigRational,
    beta: &BigRational,
    s: i32,
    sf0: i32,
    sg0: i32,
) -> Result<SegOrder> {
    if alpha.is_zero() || beta.is_zero() {
        return Err(Error::Internal(
            "certificate coefficient vanishes on a doubly-crossed face".into(),
        ));
    }
    let f_term = rat_sign(alpha) * sf0;
    let g_term = rat_sign(beta) * sg0;
    match (f_term == s, g_term == s) {
        (true, false) => Ok(SegOrder::GFirst),
        (false, true) => Ok(SegOrder::FFirst),
        _ => Err(Error::Internal(
            "certificate sign pattern inconsistent with segment endpoint signs".into(),
        )),
    }
}

/// Pair an even set of same-curve vertices on a cell boundary into arcs.
///
/// When the y-partial is sign-definite the zero set meets every vertical line
/// in the cell at most once, so arc spans are disjoint in x and sorting by x
/// makes each arc a consecutive pair; symmetrically for the x-partial and y.
fn pv_pairing(mut verts: Vec<(usize, Point2)>, sort_by_x: bool) -> Vec<(usize, usize)> {
    verts.sort_by(|a, b| {
        let ka = if sort_by_x { (&a.1.x, &a.1.y) } else { (&a.1.y, &a.1.x) };
        let kb = if sort_by_x { (&b.1.x, &b.1.y) } else { (&b.1.y, &b.1.x) };
        ka.cmp(&kb).then(a.0.cmp(&b.0))
    });
    verts
        .chunks(2)
        .map(|pair| (pair[0].0, pair[1].0))
        .collect()
}

struct Builder<'a> {
    sys: &'a CurveSystem,
    roi: Box2,
    max_prec: u64,
    cells: Vec<Cell>,
    segs: Vec<Segment>,
    cell_segs: Vec<Vec<usize>>,
    root_cells: Vec<Option<usize>>,
    roots: Vec<RootRecord>,
    verts: Vec<PslgVertex>,
    edges: Vec<PslgEdge>,
    corner_signs: BTreeMap<(Dyadic, Dyadic), [i32; 2]>,
    perturbed: usize,
    /// Per-cell arc pairings `(label, u, v)`, filled during order resolution
    /// and reused when the edges are emitted.
    pairings: Vec<Vec<(Which, usize, usize)>>,
}

impl<'a> Builder<'a> {
    fn index_cells(&mut self) -> Result<()> {
        self.cell_segs = vec![Vec::new(); self.cells.len()];
        for (si, s) in self.segs.iter().enumerate() {
            for ci in [s.lo_cell, s.hi_cell].into_iter().flatten() {
                self.cell_segs[ci].push(si);
            }
        }
        for (ci, c) in self.cells.iter().enumerate() {
            if let Some(ri) = c.root_index {
                if self.root_cells[ri].is_some() {
                    return Err(Error::Internal("duplicate intersection cell".into()));
                }
                self.root_cells[ri] = Some(ci);
            }
        }
        for (ri, rc) in self.root_cells.iter().enumerate() {
            if rc.is_none() {
                return Err(Error::Internal(format!(
                    "intersection cell {ri} missing from the complex"
                )));
            }
        }
        self.pairings = vec![Vec::new(); self.cells.len()];
        Ok(())
    }

    fn corner_sign(&mut self, p: &Point2) -> [i32; 2] {
        let key = (p.y.clone(), p.x.clone());
        if let Some(s) = self.corner_signs.get(&key) {
            return *s;
        }
        let mut pert = false;
        let sf = eval_sign(&self.sys.f, p, self.max_prec, &mut pert);
        let sg = eval_sign(&self.sys.g, p, self.max_prec, &mut pert);
        if pert {
            self.perturbed += 1;
        }
        let s = [sf, sg];
        self.corner_signs.insert(key, s);
        s
    }

    /// Approximate |h| at a segment endpoint, for interpolation only. The
    /// returned value never affects topology, just where along the segment the
    /// vertex lands.
    fn approx_abs(&self, which: Which, p: &Point2) -> f64 {
        match eval_point(self.sys.func(which), p) {
            Some(iv) => {
                let m = 0.5 * (iv.lo + iv.hi);
                if m.is_finite() {
                    m.abs()
                } else {
                    f64::NAN
                }
            }
            None => f64::NAN,
        }
    }

    fn interp_param(&self, which: Which, a: &Point2, b: &Point2) -> Dyadic {
        let va = self.approx_abs(which, a);
        let vb = self.approx_abs(which, b);
        let t = if va.is_finite() && vb.is_finite() && va + vb > 0.0 {
            va / (va + vb)
        } else {
            0.5
        };
        // Snap to 16 fractional bits and keep clear of the segment endpoints
        // so no vertex ever lands on a cell corner.
        let k = ((t * 65536.0).round() as i64).clamp(16384, 49152);
        Dyadic::new(k.into(), -16)
    }

    fn position_at(seg: &Segment, t: &Dyadic) -> Point2 {
        if seg.vertical {
            let y = seg.a.y.clone() + (seg.b.y.clone() - seg.a.y.clone()) * t.clone();
            Point2::new(seg.a.x.clone(), y)
        } else {
            let x = seg.a.x.clone() + (seg.b.x.clone() - seg.a.x.clone()) * t.clone();
            Point2::new(x, seg.a.y.clone())
        }
    }

    fn place_vertices(&mut self) -> Result<()> {
        for si in 0..self.segs.len() {
            let (a, b) = (self.segs[si].a.clone(), self.segs[si].b.clone());
            let sa = self.corner_sign(&a);
            let sb = self.corner_sign(&b);
            self.segs[si].fsign = [sa[0], sb[0]];
            self.segs[si].gsign = [sa[1], sb[1]];
            if sa[0] * sb[0] < 0 {
                let t = self.interp_param(Which::F, &a, &b);
                let p = Self::position_at(&self.segs[si], &t);
                self.verts.push(PslgVertex { p, kind: VertexKind::F });
                self.segs[si].f_vertex = Some(self.verts.len() - 1);
            }
            if sa[1] * sb[1] < 0 {
                let t = self.interp_param(Which::G, &a, &b);
                let p = Self::position_at(&self.segs[si], &t);
                self.verts.push(PslgVertex { p, kind: VertexKind::G });
                self.segs[si].g_vertex = Some(self.verts.len() - 1);
            }
        }
        Ok(())
    }

    fn is_shared(&self, si: usize) -> bool {
        self.segs[si].f_vertex.is_some() && self.segs[si].g_vertex.is_some()
    }

    /// Which side of `rect` the segment lies on. The segment is assumed to be
    /// part of the rectangle boundary.
    fn side_on(seg: &Segment, rect: &Box2) -> Result<Side> {
        if seg.vertical {
            if seg.a.x == rect.x0 {
                Ok(Side::West)
            } else if seg.a.x == rect.x1 {
                Ok(Side::East)
            } else {
                Err(Error::Internal("segment not on the cell boundary".into()))
            }
        } else if seg.a.y == rect.y0 {
            Ok(Side::South)
        } else if seg.a.y == rect.y1 {
            Ok(Side::North)
        } else {
            Err(Error::Internal("segment not on the cell boundary".into()))
        }
    }

    /// Seed crossing orders on the boundary segments of every intersection
    /// cell from the stored interval-Newton certificate.
    fn seed_root_orders(&mut self) -> Result<()> {
        for ri in 0..self.roots.len() {
            let ci = self.root_cells[ri].unwrap();
            for si in self.cell_segs[ci].clone() {
                if !self.is_shared(si) {
                    continue;
                }
                let side = Self::side_on(&self.segs[si], &self.cells[ci].rect)?;
                let (alpha, beta, s) = self.roots[ri].cert.edge_combo(side);
                let order = order_from_certificate(
                    alpha,
                    beta,
                    s,
                    self.segs[si].fsign[0],
                    self.segs[si].gsign[0],
                )?;
                self.segs[si].order = order;
            }
        }
        Ok(())
    }

    /// True sign-bisection order of a doubly-crossed segment: halve until the
    /// two crossings fall in different halves. Works on any segment that does
    /// not contain an intersection of both curves.
    fn bisect_segment_order(&mut self, si: usize) -> Result<SegOrder> {
        let seg = &self.segs[si];
        let (mut a, mut b) = (seg.a.clone(), seg.b.clone());
        let (mut sfa, mut sga) = (seg.fsign[0], seg.gsign[0]);
        for _ in 0..64 {
            let m = Point2::new(Dyadic::midpoint(&a.x, &b.x), Dyadic::midpoint(&a.y, &b.y));
            let sm = self.corner_sign(&m);
            let f_left = sfa * sm[0] < 0;
            let g_left = sga * sm[1] < 0;
            match (f_left, g_left) {
                (true, false) => return Ok(SegOrder::FFirst),
                (false, true) => return Ok(SegOrder::GFirst),
                (true, true) => b = m,
                (false, false) => {
                    a = m;
                    sfa = sm[0];
                    sga = sm[1];
                }
            }
        }
        Err(Error::Internal(
            "sign bisection failed to separate two crossings".into(),
        ))
    }

    /// Monotone sort direction for arcs of `which` inside the cell: `true`
    /// means sort by x (y-partial sign-definite), `false` by y.
    fn sort_axis(&self, which: Which, rect: &Box2) -> Result<bool> {
        let (hx, hy) = self.sys.grad(which);
        if let Some(iv) = eval_box(hy, rect) {
            if !iv.contains_zero() {
                return Ok(true);
            }
        }
        if let Some(iv) = eval_box(hx, rect) {
            if !iv.contains_zero() {
                return Ok(false);
            }
        }
        if let Some(iv) = eval_box_prec(hy, rect, self.max_prec) {
            if !iv.contains_zero() {
                return Ok(true);
            }
        }
        if let Some(iv) = eval_box_prec(hx, rect, self.max_prec) {
            if !iv.contains_zero() {
                return Ok(false);
            }
        }
        Err(Error::Internal(
            "no monotone direction for a multi-arc cell".into(),
        ))
    }

    fn cell_vertices(&self, ci: usize, which: Which) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &si in &self.cell_segs[ci] {
            let v = match which {
                Which::F => self.segs[si].f_vertex,
                Which::G => self.segs[si].g_vertex,
            };
            if let Some(vid) = v {
                out.push((vid, si));
            }
        }
        out
    }

    /// Arc pairing for one curve in one cell (root cells excluded).
    fn pair_in_cell(&self, ci: usize, which: Which) -> Result<Vec<(usize, usize)>> {
        let vs = self.cell_vertices(ci, which);
        match vs.len() {
            0 => Ok(Vec::new()),
            n if n % 2 == 1 => Err(Error::Internal(format!(
                "odd number of {} crossings on a cell boundary",
                which.label()
            ))),
            2 => Ok(vec![(vs[0].0, vs[1].0)]),
            _ => {
                let by_x = self.sort_axis(which, &self.cells[ci].rect)?;
                let pts = vs
                    .iter()
                    .map(|&(vid, _)| (vid, self.verts[vid].p.clone()))
                    .collect();
                Ok(pv_pairing(pts, by_x))
            }
        }
    }

    /// Boundary cycle of the cell, counterclockwise, as (label, vertex, seg)
    /// triples. `overlay` supplies trial orders for unresolved segments.
    fn cell_cycle(
        &self,
        ci: usize,
        overlay: &BTreeMap<usize, SegOrder>,
    ) -> Result<Vec<(Which, usize, usize)>> {
        let rect = self.cells[ci].rect.clone();
        let mut cycle = Vec::new();
        for side in [Side::South, Side::East, Side::North, Side::West] {
            let mut here: Vec<usize> = Vec::new();
            for &si in &self.cell_segs[ci] {
                if Self::side_on(&self.segs[si], &rect)? == side {
                    here.push(si);
                }
            }
            // South runs west->east, East south->north (both match the stored
            // segment direction); North and West run backwards.
            let reversed = matches!(side, Side::North | Side::West);
            here.sort_by(|&a, &b| {
                let ka = if side.is_vertical() {
                    &self.segs[a].a.y
                } else {
                    &self.segs[a].a.x
                };
                let kb = if side.is_vertical() {
                    &self.segs[b].a.y
                } else {
                    &self.segs[b].a.x
                };
                if reversed { kb.cmp(ka) } else { ka.cmp(kb) }
            });
            for si in here {
                let s = &self.segs[si];
                let mut inner: Vec<(Which, usize, usize)> = Vec::new();
                match (s.f_vertex, s.g_vertex) {
                    (Some(f), None) => inner.push((Which::F, f, si)),
                    (None, Some(g)) => inner.push((Which::G, g, si)),
                    (Some(f), Some(g)) => {
                        let ord = overlay.get(&si).copied().unwrap_or(s.order);
                        match ord {
                            SegOrder::FFirst => {
                                inner.push((Which::F, f, si));
                                inner.push((Which::G, g, si));
                            }
                            SegOrder::GFirst => {
                                inner.push((Which::G, g, si));
                                inner.push((Which::F, f, si));
                            }
                            SegOrder::Unresolved => {
                                return Err(Error::Internal(
                                    "cycle requested with an unresolved order".into(),
                                ))
                            }
                        }
                    }
                    (None, None) => {}
                }
                if reversed {
                    inner.reverse();
                }
                cycle.extend(inner);
            }
        }
        Ok(cycle)
    }

    /// Do the cell's arcs embed without crossings under the given trial
    /// orders? Purely combinatorial: chords cross iff they interleave on the
    /// boundary cycle.
    fn orders_feasible(&self, ci: usize, overlay: &BTreeMap<usize, SegOrder>) -> Result<bool> {
        let cycle = self.cell_cycle(ci, overlay)?;
        let mut pos: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, &(_, vid, _)) in cycle.iter().enumerate() {
            pos.insert(vid, i);
        }
        let chords = &self.pairings[ci];
        for (i, &(_, u1, v1)) in chords.iter().enumerate() {
            for &(_, u2, v2) in &chords[i + 1..] {
                let (a1, b1) = ordered(pos[&u1], pos[&v1]);
                let (a2, b2) = ordered(pos[&u2], pos[&v2]);
                let inside1 = a2 > a1 && a2 < b1;
                let inside2 = b2 > a1 && b2 < b1;
                if inside1 != inside2 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Try to fix the unresolved orders of one cell. Returns true when
    /// progress was made. Exactly one feasible assignment commits; zero is a
    /// contradiction; several leave the cell for propagation.
    fn solve_cell(&mut self, ci: usize) -> Result<bool> {
        let unresolved: Vec<usize> = self.cell_segs[ci]
            .iter()
            .copied()
            .filter(|&si| self.is_shared(si) && self.segs[si].order == SegOrder::Unresolved)
            .collect();
        if unresolved.is_empty() {
            return Ok(false);
        }
        if unresolved.len() > 8 {
            return Err(Error::Internal(
                "too many unresolved orders in one cell".into(),
            ));
        }
        let mut feasible: Vec<BTreeMap<usize, SegOrder>> = Vec::new();
        for mask in 0..(1u32 << unresolved.len()) {
            let mut overlay = BTreeMap::new();
            for (bit, &si) in unresolved.iter().enumerate() {
                let ord = if mask & (1 << bit) != 0 {
                    SegOrder::GFirst
                } else {
                    SegOrder::FFirst
                };
                overlay.insert(si, ord);
            }
            if self.orders_feasible(ci, &overlay)? {
                feasible.push(overlay);
                if feasible.len() > 1 {
                    break;
                }
            }
        }
        match feasible.len() {
            0 => Err(Error::Internal(
                "no planar crossing order exists for a cell".into(),
            )),
            1 => {
                for (si, ord) in feasible.pop().unwrap() {
                    self.segs[si].order = ord;
                }
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    /// Resolve every doubly-crossed segment order. Seeds come from the
    /// intersection certificates; afterwards planarity propagation, sign
    /// bisection on transition segments, and sign bisection on region-boundary
    /// segments are applied, in that order, until nothing is left.
    fn resolve_orders(&mut self) -> Result<()> {
        // Arc pairings are order-independent, so compute them once up front.
        for ci in 0..self.cells.len() {
            if self.cells[ci].root_index.is_some() {
                continue;
            }
            let mut chords = Vec::new();
            for which in [Which::F, Which::G] {
                for (u, v) in self.pair_in_cell(ci, which)? {
                    chords.push((which, u, v));
                }
            }
            self.pairings[ci] = chords;
        }

        self.seed_root_orders()?;
        loop {
            self.propagate()?;
            if !self.any_unresolved() {
                break;
            }
            if let Some(si) = self.pick_transition()? {
                let ord = self.bisect_segment_order(si)?;
                self.segs[si].order = ord;
                continue;
            }
            if let Some(si) = self.pick_boundary() {
                let ord = self.bisect_segment_order(si)?;
                self.segs[si].order = ord;
                continue;
            }
            return Err(Error::Internal(
                "crossing order not traceable to any certificate, transition, or \
                 boundary segment"
                    .into(),
            ));
        }
        // Every fully resolved cell must still admit a planar embedding.
        for ci in 0..self.cells.len() {
            if self.cells[ci].root_index.is_some() || self.pairings[ci].is_empty() {
                continue;
            }
            if !self.orders_feasible(ci, &BTreeMap::new())? {
                return Err(Error::Internal(
                    "resolved crossing orders admit no planar embedding".into(),
                ));
            }
        }
        Ok(())
    }

    fn any_unresolved(&self) -> bool {
        (0..self.segs.len()).any(|si| self.is_shared(si) && self.segs[si].order == SegOrder::Unresolved)
    }

    fn propagate(&mut self) -> Result<()> {
        loop {
            let mut progress = false;
            for ci in 0..self.cells.len() {
                if self.cells[ci].root_index.is_some() {
                    continue;
                }
                if self.solve_cell(ci)? {
                    progress = true;
                }
            }
            if !progress {
                return Ok(());
            }
        }
    }

    /// First unresolved segment that forms a transition pair: two unresolved
    /// doubly-crossed segments of one cell meeting at a common endpoint.
    fn pick_transition(&self) -> Result<Option<usize>> {
        for ci in 0..self.cells.len() {
            if self.cells[ci].root_index.is_some() {
                continue;
            }
            let unresolved: Vec<usize> = self.cell_segs[ci]
                .iter()
                .copied()
                .filter(|&si| self.is_shared(si) && self.segs[si].order == SegOrder::Unresolved)
                .collect();
            for (i, &a) in unresolved.iter().enumerate() {
                for &b in &unresolved[i + 1..] {
                    let (sa, sb) = (&self.segs[a], &self.segs[b]);
                    let touch = sa.a == sb.a || sa.a == sb.b || sa.b == sb.a || sa.b == sb.b;
                    if touch {
                        return Ok(Some(a.min(b)));
                    }
                }
            }
        }
        Ok(None)
    }

    /// First unresolved doubly-crossed segment lying on the region boundary.
    fn pick_boundary(&self) -> Option<usize> {
        (0..self.segs.len()).find(|&si| {
            self.is_shared(si)
                && self.segs[si].order == SegOrder::Unresolved
                && (self.segs[si].lo_cell.is_none() || self.segs[si].hi_cell.is_none())
        })
    }

    /// Make the geometric positions on every doubly-crossed segment agree with
    /// the resolved order, re-pinning both vertices at 3/8 and 5/8 on
    /// contradiction.
    fn reposition_shared(&mut self) -> Result<()> {
        for si in 0..self.segs.len() {
            if !self.is_shared(si) {
                continue;
            }
            let (f, g) = (
                self.segs[si].f_vertex.unwrap(),
                self.segs[si].g_vertex.unwrap(),
            );
            let (fp, gp) = (&self.verts[f].p, &self.verts[g].p);
            let (f_key, g_key) = if self.segs[si].vertical {
                (&fp.y, &gp.y)
            } else {
                (&fp.x, &gp.x)
            };
            let (t_first, t_second) = (Dyadic::new(3.into(), -3), Dyadic::new(5.into(), -3));
            match self.segs[si].order {
                SegOrder::FFirst if f_key < g_key => {}
                SegOrder::GFirst if g_key < f_key => {}
                SegOrder::FFirst => {
                    self.verts[f].p = Self::position_at(&self.segs[si], &t_first);
                    self.verts[g].p = Self::position_at(&self.segs[si], &t_second);
                }
                SegOrder::GFirst => {
                    self.verts[g].p = Self::position_at(&self.segs[si], &t_first);
                    self.verts[f].p = Self::position_at(&self.segs[si], &t_second);
                }
                SegOrder::Unresolved => {
                    return Err(Error::Internal(
                        "doubly-crossed segment left unresolved".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    fn connect_all(&mut self) -> Result<()> {
        for ri in 0..self.roots.len() {
            self.connect_root_cell(ri)?;
        }
        for ci in 0..self.cells.len() {
            if self.cells[ci].root_index.is_none() {
                self.connect_pv_cell(ci)?;
            }
        }
        Ok(())
    }

    /// Intersection cells become four-armed stars: a central vertex joined to
    /// the two f-crossings and two g-crossings of the cell boundary.
    fn connect_root_cell(&mut self, ri: usize) -> Result<()> {
        let ci = self.root_cells[ri].unwrap();
        let fs = self.cell_vertices(ci, Which::F);
        let gs = self.cell_vertices(ci, Which::G);
        if fs.len() != 2 || gs.len() != 2 {
            return Err(Error::Internal(format!(
                "intersection cell must be crossed exactly twice per curve \
                 (found {} f, {} g)",
                fs.len(),
                gs.len()
            )));
        }
        // Sanity: when the corner signs disagree somewhere, the four crossings
        // must alternate f,g,f,g around the boundary.
        let corners = self.cells[ci].rect.corners();
        let prods: Vec<i32> = corners
            .iter()
            .map(|p| {
                let s = self.corner_sign(p);
                s[0] * s[1]
            })
            .collect();
        let mixed_corners = prods.iter().any(|&p| p != prods[0]);
        if mixed_corners {
            let cycle = self.cell_cycle(ci, &BTreeMap::new())?;
            if cycle.len() != 4 {
                return Err(Error::Internal(
                    "intersection cell boundary cycle malformed".into(),
                ));
            }
            for i in 0..4 {
                if cycle[i].0 == cycle[(i + 1) % 4].0 {
                    return Err(Error::Internal(
                        "crossings fail to alternate around an intersection cell".into(),
                    ));
                }
            }
        }
        let center = self.cells[ci].rect.center();
        self.verts.push(PslgVertex {
            p: center,
            kind: VertexKind::Root,
        });
        let cv = self.verts.len() - 1;
        for &(vid, _) in &fs {
            self.edges.push(PslgEdge { u: cv, v: vid, label: Which::F, cell: ci });
        }
        for &(vid, _) in &gs {
            self.edges.push(PslgEdge { u: cv, v: vid, label: Which::G, cell: ci });
        }
        Ok(())
    }

    /// Ordinary cells: connect each arc pair with a straight chord, bending
    /// chords whose endpoints lie on one side line into the interior, and
    /// audit the resulting pieces for crossings exactly.
    fn connect_pv_cell(&mut self, ci: usize) -> Result<()> {
        let chords = self.pairings[ci].clone();
        if chords.is_empty() {
            return Ok(());
        }
        let rect = self.cells[ci].rect.clone();

        // A chord whose endpoints share a side line of the cell would lie on
        // the boundary; it bows into the interior instead. Nested dips on the
        // same line get strictly increasing offsets, innermost closest.
        let lines: Vec<Option<(BendLine, Dyadic, Dyadic)>> = chords
            .iter()
            .map(|&(_, u, v)| {
                let (pu, pv) = (&self.verts[u].p, &self.verts[v].p);
                if pu.x == pv.x && (pu.x == rect.x0 || pu.x == rect.x1) {
                    let (lo, hi) = ordered_dy(&pu.y, &pv.y);
                    Some((BendLine::Vertical(pu.x == rect.x0), lo, hi))
                } else if pu.y == pv.y && (pu.y == rect.y0 || pu.y == rect.y1) {
                    let (lo, hi) = ordered_dy(&pu.x, &pv.x);
                    Some((BendLine::Horizontal(pu.y == rect.y0), lo, hi))
                } else {
                    None
                }
            })
            .collect();
        let mut max_rank = 0usize;
        let ranks: Vec<usize> = lines
            .iter()
            .map(|entry| match entry {
                None => 0,
                Some((l, lo, hi)) => {
                    let r = lines
                        .iter()
                        .flatten()
                        .filter(|(l2, lo2, hi2)| {
                            same_line(*l, *l2)
                                && ((lo2 < lo && hi <= hi2) || (lo2 <= lo && hi < hi2))
                        })
                        .count();
                    max_rank = max_rank.max(r);
                    r
                }
            })
            .collect();
        let mut denom_pow = 1i64;
        while (1i64 << denom_pow) < 2 * (max_rank as i64 + 2) {
            denom_pow += 1;
        }

        for attempt in 0..60i64 {
            let shift = denom_pow + attempt;
            let mut bends: Vec<Option<Point2>> = Vec::with_capacity(chords.len());
            for (idx, &(_, u, v)) in chords.iter().enumerate() {
                let (pu, pv) = (&self.verts[u].p, &self.verts[v].p);
                bends.push(lines[idx].as_ref().map(|(line, ..)| {
                    let steps = Dyadic::from_i64(ranks[idx] as i64 + 1);
                    match line {
                        BendLine::Vertical(low_side) => {
                            let off = rect.width_x().mul_pow2(-shift) * steps;
                            let x = if *low_side {
                                pu.x.clone() + off
                            } else {
                                pu.x.clone() - off
                            };
                            Point2::new(x, Dyadic::midpoint(&pu.y, &pv.y))
                        }
                        BendLine::Horizontal(low_side) => {
                            let off = rect.width_y().mul_pow2(-shift) * steps;
                            let y = if *low_side {
                                pu.y.clone() + off
                            } else {
                                pu.y.clone() - off
                            };
                            Point2::new(Dyadic::midpoint(&pu.x, &pv.x), y)
                        }
                    }
                }));
            }
            let mut pieces: Vec<(Point2, Point2, usize)> = Vec::new();
            for (idx, &(_, u, v)) in chords.iter().enumerate() {
                let (pu, pv) = (self.verts[u].p.clone(), self.verts[v].p.clone());
                match &bends[idx] {
                    None => pieces.push((pu, pv, idx)),
                    Some(bp) => {
                        pieces.push((pu, bp.clone(), idx));
                        pieces.push((bp.clone(), pv, idx));
                    }
                }
            }
            if !pieces_planar(&pieces) {
                continue;
            }
            for (idx, &(w, u, v)) in chords.iter().enumerate() {
                match bends[idx].take() {
                    None => self.edges.push(PslgEdge { u, v, label: w, cell: ci }),
                    Some(bp) => {
                        let kind = match w {
                            Which::F => VertexKind::F,
                            Which::G => VertexKind::G,
                        };
                        self.verts.push(PslgVertex { p: bp, kind });
                        let bv = self.verts.len() - 1;
                        self.edges.push(PslgEdge { u, v: bv, label: w, cell: ci });
                        self.edges.push(PslgEdge { u: bv, v, label: w, cell: ci });
                    }
                }
            }
            return Ok(());
        }
        Err(Error::Internal(
            "cell chords cannot be embedded without crossings".into(),
        ))
    }

    fn audit_degrees(&self) -> Result<()> {
        let pslg = Pslg {
            vertices: self.verts.clone(),
            edges: self.edges.clone(),
        };
        let deg = pslg.degrees();
        for (vid, v) in self.verts.iter().enumerate() {
            let [df, dg] = deg[vid];
            match v.kind {
                VertexKind::Root => {
                    if df != 2 || dg != 2 {
                        return Err(Error::Internal(format!(
                            "intersection vertex {vid} has degree {df}+{dg}, expected 2+2"
                        )));
                    }
                }
                VertexKind::F => {
                    if dg != 0 || df == 0 || df > 2 {
                        return Err(Error::Internal(format!(
                            "f-vertex {vid} has degree {df}+{dg}"
                        )));
                    }
                    if df == 1 && !on_boundary(&v.p, &self.roi) {
                        return Err(Error::Internal(format!(
                            "interior f-vertex {vid} is a dead end"
                        )));
                    }
                }
                VertexKind::G => {
                    if df != 0 || dg == 0 || dg > 2 {
                        return Err(Error::Internal(format!(
                            "g-vertex {vid} has degree {df}+{dg}"
                        )));
                    }
                    if dg == 1 && !on_boundary(&v.p, &self.roi) {
                        return Err(Error::Internal(format!(
                            "interior g-vertex {vid} is a dead end"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum BendLine {
    /// True when the chord lies on the low-coordinate side of the cell, so the
    /// bend moves in the positive direction.
    Vertical(bool),
    Horizontal(bool),
}

fn same_line(a: BendLine, b: BendLine) -> bool {
    matches!(
        (a, b),
        (BendLine::Vertical(x), BendLine::Vertical(y)) if x == y
    ) || matches!(
        (a, b),
        (BendLine::Horizontal(x), BendLine::Horizontal(y)) if x == y
    )
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn ordered_dy(a: &Dyadic, b: &Dyadic) -> (Dyadic, Dyadic) {
    if a < b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

fn on_boundary(p: &Point2, roi: &Box2) -> bool {
    p.x == roi.x0 || p.x == roi.x1 || p.y == roi.y0 || p.y == roi.y1
}

/// Exact 2x2 orientation sign of the triple (a, b, c).
fn orient(a: &Point2, b: &Point2, c: &Point2) -> i32 {
    let d1x = b.x.clone() - a.x.clone();
    let d1y = b.y.clone() - a.y.clone();
    let d2x = c.x.clone() - a.x.clone();
    let d2y = c.y.clone() - a.y.clone();
    (d1x * d2y - d1y * d2x).signum()
}

/// Do two closed segments intersect anywhere besides a shared endpoint?
pub(crate) fn segments_conflict(p1: &Point2, p2: &Point2, q1: &Point2, q2: &Point2) -> bool {
    let shared = [(p1, q1), (p1, q2), (p2, q1), (p2, q2)]
        .iter()
        .filter(|(a, b)| a == b)
        .count();
    if shared >= 2 {
        return true;
    }
    if shared == 1 {
        // Touching at the shared endpoint is fine unless the segments overlap
        // along a common line beyond it.
        let (s, po, qo) = if p1 == q1 {
            (p1, p2, q2)
        } else if p1 == q2 {
            (p1, p2, q1)
        } else if p2 == q1 {
            (p2, p1, q2)
        } else {
            (p2, p1, q1)
        };
        if orient(s, po, qo) != 0 {
            return false;
        }
        // Collinear: conflict iff both run in the same direction from s.
        let dot = (po.x.clone() - s.x.clone()) * (qo.x.clone() - s.x.clone())
            + (po.y.clone() - s.y.clone()) * (qo.y.clone() - s.y.clone());
        return dot.signum() > 0;
    }
    let o1 = orient(p1, p2, q1);
    let o2 = orient(p1, p2, q2);
    let o3 = orient(q1, q2, p1);
    let o4 = orient(q1, q2, p2);
    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return true;
    }
    (o1 == 0 && within(p1, p2, q1))
        || (o2 == 0 && within(p1, p2, q2))
        || (o3 == 0 && within(q1, q2, p1))
        || (o4 == 0 && within(q1, q2, p2))
}

fn within(a: &Point2, b: &Point2, c: &Point2) -> bool {
    let (xlo, xhi) = ordered_dy(&a.x, &b.x);
    let (ylo, yhi) = ordered_dy(&a.y, &b.y);
    c.x >= xlo && c.x <= xhi && c.y >= ylo && c.y <= yhi
}

fn pieces_planar(pieces: &[(Point2, Point2, usize)]) -> bool {
    for (i, a) in pieces.iter().enumerate() {
        for b in &pieces[i + 1..] {
            if a.2 == b.2 {
                // Two halves of the same bent chord meet at the bend point.
                continue;
            }
            if segments_conflict(&a.0, &a.1, &b.0, &b.1) {
                return false;
            }
        }
    }
    true
}
