//! Quadtree subdivision of the region of interest, together with the
//! structural operations the pipeline needs: neighbor traversal by extreme
//! pointers, depth balancing (including the virtual deep leaves that stand in
//! for blacked-out root neighborhoods), the standard 37-box subdivision of an
//! extended root neighborhood, pruning, conforming refinement, and segment
//! extraction for the final box complex.
//!
//! Every leaf keeps eight neighbor pointers: for each side, the two extreme
//! adjacent leaves along that side (equal when there is only one). Splitting a
//! leaf repairs the pointers of the new children *and* of every neighbor that
//! pointed at the old leaf, so the pointers always reference current leaves and
//! all adjacent leaves can be listed by walking a side from one extreme to the
//! other.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::numeric::{Box2, Dyadic, Point2, Side};
use crate::predicates::BoxClass;

pub type NodeId = usize;

/// Children are stored in the same order as [`Box2::split`]: SW, SE, NW, NE.
#[derive(Debug, Clone)]
pub struct Node {
    pub rect: Box2,
    pub depth: u32,
    pub parent: Option<NodeId>,
    pub children: Option<[NodeId; 4]>,
    /// OFF leaves are excluded from the region of interest (used to black out
    /// root neighborhoods, which get their own interior subdivisions).
    pub on: bool,
    pub class: BoxClass,
    /// `nbr[side][end]`: the extreme adjacent leaves per side. For vertical
    /// sides (W/E), end 0 is the southernmost and end 1 the northernmost; for
    /// horizontal sides (S/N), end 0 is the westernmost and end 1 the
    /// easternmost. `None` on the region boundary.
    nbr: [[Option<NodeId>; 2]; 4],
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// A virtual leaf standing in for a blacked-out extended root neighborhood
/// during balancing. It is never split; its (mutable) depth forces the real
/// leaves around it to a uniform width.
#[derive(Debug, Clone)]
pub struct Conceptual {
    pub rect: Box2,
    pub depth: u32,
    /// Depth of the generating root box in the tree.
    pub base_depth: u32,
}

pub struct SubdivTree {
    nodes: Vec<Node>,
    root: NodeId,
    conceptuals: Vec<Conceptual>,
}

/// Work queue item: deeper entries first, ties broken by the lower-left
/// corner in (y, x) order so runs are reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Item {
    Leaf(NodeId),
    Virtual(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct QEntry {
    depth: u32,
    key: (Dyadic, Dyadic),
    item: Item,
}

impl Ord for QEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap: larger depth wins; among equals, smaller (y, x) wins.
        self.depth
            .cmp(&other.depth)
            .then_with(|| other.key.cmp(&self.key))
            .then_with(|| {
                let rank = |i: &Item| match i {
                    Item::Leaf(id) => (0usize, *id),
                    Item::Virtual(i) => (1usize, *i),
                };
                rank(&other.item).cmp(&rank(&self.item))
            })
    }
}

impl PartialOrd for QEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Children positions within a split, used when repairing pointers.
const SW: usize = 0;
const SE: usize = 1;
const NW: usize = 2;
const NE: usize = 3;

impl SubdivTree {
    pub fn new(roi: Box2) -> SubdivTree {
        SubdivTree {
            nodes: vec![Node {
                rect: roi,
                depth: 0,
                parent: None,
                children: None,
                on: true,
                class: BoxClass::Unresolved,
                nbr: [[None; 2]; 4],
            }],
            root: 0,
            conceptuals: Vec::new(),
        }
    }

    pub fn roi(&self) -> &Box2 {
        &self.nodes[self.root].rect
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn set_class(&mut self, id: NodeId, class: BoxClass) {
        self.nodes[id].class = class;
    }

    pub fn set_off(&mut self, id: NodeId) {
        self.nodes[id].on = false;
    }

    pub fn conceptuals(&self) -> &[Conceptual] {
        &self.conceptuals
    }

    /// All leaf ids, in creation order.
    pub fn leaf_ids(&self) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf()).collect()
    }

    /// ON leaves sorted by lower-left corner (y, x): the deterministic
    /// iteration order used whenever processing order is observable.
    pub fn on_leaves_sorted(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].is_leaf() && self.nodes[i].on)
            .collect();
        ids.sort_by(|&a, &b| {
            self.nodes[a].rect.order_key().cmp(&self.nodes[b].rect.order_key())
        });
        ids
    }

    /// Split a leaf into its four quadrants, repairing all neighbor pointers.
    /// Children start ON with class `Unresolved`; classification is the
    /// caller's job. Returns the children as [SW, SE, NW, NE].
    pub fn expand(&mut self, id: NodeId) -> [NodeId; 4] {
        assert!(self.nodes[id].is_leaf(), "expand on internal node");
        assert!(self.nodes[id].on, "expand on OFF leaf");

        // Snapshot the neighbor chains along each side before any mutation.
        let chains: [Vec<NodeId>; 4] = [
            self.walk_side(id, Side::West),
            self.walk_side(id, Side::East),
            self.walk_side(id, Side::South),
            self.walk_side(id, Side::North),
        ];

        let parent = &self.nodes[id];
        let rects = parent.rect.split();
        let depth = parent.depth + 1;
        let center = parent.rect.center();
        let base = self.nodes.len();
        for rect in rects {
            self.nodes.push(Node {
                rect,
                depth,
                parent: Some(id),
                children: None,
                on: true,
                class: BoxClass::Unresolved,
                nbr: [[None; 2]; 4],
            });
        }
        let kids = [base + SW, base + SE, base + NW, base + NE];
        self.nodes[id].children = Some(kids);

        // Sibling pointers: each child sees exactly one sibling per inner side.
        let w = Side::West.index();
        let e = Side::East.index();
        let s = Side::South.index();
        let n = Side::North.index();
        self.nodes[kids[SW]].nbr[e] = [Some(kids[SE]); 2];
        self.nodes[kids[SW]].nbr[n] = [Some(kids[NW]); 2];
        self.nodes[kids[SE]].nbr[w] = [Some(kids[SW]); 2];
        self.nodes[kids[SE]].nbr[n] = [Some(kids[NE]); 2];
        self.nodes[kids[NW]].nbr[e] = [Some(kids[NE]); 2];
        self.nodes[kids[NW]].nbr[s] = [Some(kids[SW]); 2];
        self.nodes[kids[NE]].nbr[w] = [Some(kids[NW]); 2];
        self.nodes[kids[NE]].nbr[s] = [Some(kids[SE]); 2];

        // Outer pointers, derived by cutting each old chain at the center
        // line; then retarget every chain member whose extreme pointer was the
        // split leaf.
        let cy = &center.y;
        let cx = &center.x;
        for side in Side::ALL {
            let chain = &chains[side.index()];
            if chain.is_empty() {
                continue;
            }
            let first = chain[0];
            let last = *chain.last().unwrap();
            // The chain member covering the span just below/left of the
            // center line, and the one just above/right of it.
            let (below, above) = if side.is_vertical() {
                let below = *chain
                    .iter()
                    .filter(|&&c| self.nodes[c].rect.y0 < *cy)
                    .last()
                    .unwrap();
                let above = *chain
                    .iter()
                    .find(|&&c| self.nodes[c].rect.y1 > *cy)
                    .unwrap();
                (below, above)
            } else {
                let below = *chain
                    .iter()
                    .filter(|&&c| self.nodes[c].rect.x0 < *cx)
                    .last()
                    .unwrap();
                let above = *chain
                    .iter()
                    .find(|&&c| self.nodes[c].rect.x1 > *cx)
                    .unwrap();
                (below, above)
            };
            let (lo_kid, hi_kid) = match side {
                Side::West => (kids[SW], kids[NW]),
                Side::East => (kids[SE], kids[NE]),
                Side::South => (kids[SW], kids[SE]),
                Side::North => (kids[NW], kids[NE]),
            };
            self.nodes[lo_kid].nbr[side.index()] = [Some(first), Some(below)];
            self.nodes[hi_kid].nbr[side.index()] = [Some(above), Some(last)];

            let back = side.opposite().index();
            for &nb in chain {
                let rect = self.nodes[nb].rect.clone();
                // End 0 is the south/west extreme of the neighbor's own side.
                if self.nodes[nb].nbr[back][0] == Some(id) {
                    let kid = if side.is_vertical() {
                        if rect.y0 < *cy { lo_kid } else { hi_kid }
                    } else if rect.x0 < *cx {
                        lo_kid
                    } else {
                        hi_kid
                    };
                    self.nodes[nb].nbr[back][0] = Some(kid);
                }
                if self.nodes[nb].nbr[back][1] == Some(id) {
                    let kid = if side.is_vertical() {
                        if rect.y1 > *cy { hi_kid } else { lo_kid }
                    } else if rect.x1 > *cx {
                        hi_kid
                    } else {
                        lo_kid
                    };
                    self.nodes[nb].nbr[back][1] = Some(kid);
                }
            }
        }
        kids
    }

    /// All leaves adjacent to `id` along `side`, ordered from the south/west
    /// end to the north/east end, by walking from one extreme pointer to the
    /// other.
    pub fn walk_side(&self, id: NodeId, side: Side) -> Vec<NodeId> {
        let node = &self.nodes[id];
        let mut out = Vec::new();
        let stop = node.nbr[side.index()][1];
        let mut cur = node.nbr[side.index()][0];
        debug_assert_eq!(cur.is_some(), stop.is_some());
        while let Some(c) = cur {
            out.push(c);
            if Some(c) == stop {
                break;
            }
            // The next leaf along the wall hugs the shared line, so it is the
            // appropriate extreme among the neighbors of `c` on the advancing
            // side.
            cur = match side {
                Side::West => self.nodes[c].nbr[Side::North.index()][1],
                Side::East => self.nodes[c].nbr[Side::North.index()][0],
                Side::South => self.nodes[c].nbr[Side::East.index()][1],
                Side::North => self.nodes[c].nbr[Side::East.index()][0],
            };
            debug_assert!(out.len() <= self.nodes.len(), "neighbor chain cycle");
        }
        out
    }

    /// All adjacent leaves of `id`, each exactly once (west, east, south,
    /// north chains in order).
    pub fn neighbors(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        for side in Side::ALL {
            out.extend(self.walk_side(id, side));
        }
        out
    }

    /// Leaves whose boxes are edge-adjacent to an arbitrary rectangle
    /// (corner contact excluded), found by descending the tree.
    pub fn leaves_adjacent_to_rect(&self, rect: &Box2) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !node.rect.closed_intersects(rect) {
                continue;
            }
            match node.children {
                Some(kids) => stack.extend(kids),
                None => {
                    if node.rect.is_adjacent(rect) {
                        out.push(id);
                    }
                }
            }
        }
        out.sort_by(|&a, &b| {
            self.nodes[a].rect.order_key().cmp(&self.nodes[b].rect.order_key())
        });
        out
    }

    /// Leaves whose interiors meet the interior of `rect`.
    pub fn leaves_overlapping_rect(&self, rect: &Box2) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !node.rect.closed_intersects(rect) {
                continue;
            }
            match node.children {
                Some(kids) => stack.extend(kids),
                None => {
                    if node.rect.interiors_intersect(rect) {
                        out.push(id);
                    }
                }
            }
        }
        out.sort_by(|&a, &b| {
            self.nodes[a].rect.order_key().cmp(&self.nodes[b].rect.order_key())
        });
        out
    }

    /// Black out one extended root neighborhood: every leaf inside `region`
    /// is turned OFF; leaves straddling its boundary are split (children
    /// classified by the callback) until contained or disjoint. Terminates
    /// because the region's corners lie on the half-width grid of the
    /// generating aligned box.
    pub fn prune_region(
        &mut self,
        seed: NodeId,
        region: &Box2,
        classify: &mut dyn FnMut(&Box2, u32) -> BoxClass,
    ) {
        let mut queue = vec![seed];
        let mut seen = std::collections::HashSet::new();
        while let Some(id) = queue.pop() {
            if !self.nodes[id].is_leaf() || !self.nodes[id].on {
                continue;
            }
            let rect = self.nodes[id].rect.clone();
            if region.contains_box(&rect) {
                self.nodes[id].on = false;
                for nb in self.neighbors(id) {
                    if seen.insert(nb) {
                        queue.push(nb);
                    }
                }
            } else if rect.interiors_intersect(region) {
                let kids = self.expand(id);
                for kid in kids {
                    let (r, d) = {
                        let n = &self.nodes[kid];
                        (n.rect.clone(), n.depth)
                    };
                    let class = classify(&r, d);
                    self.nodes[kid].class = class;
                    queue.push(kid);
                }
            }
        }
    }

    /// Register a virtual deep leaf over a blacked-out region. `base_depth`
    /// is the tree depth of the generating root box; the initial forcing
    /// depth follows the deepest current neighbor, with a floor that
    /// guarantees the neighbors end at least one level deeper than the
    /// generator.
    pub fn add_conceptual(&mut self, rect: Box2, base_depth: u32) -> usize {
        let m = self
            .leaves_adjacent_to_rect(&rect)
            .into_iter()
            .filter(|&id| self.nodes[id].on)
            .map(|id| self.nodes[id].depth)
            .max()
            .unwrap_or(base_depth);
        let k = if m > base_depth { m } else { base_depth + 1 };
        let c = Conceptual { rect, depth: k + 1, base_depth };
        self.conceptuals.push(c);
        self.conceptuals.len() - 1
    }

    /// Depth-balance the ON leaves: afterwards any two adjacent ON leaves
    /// differ in depth by at most one, and all ON leaves adjacent to a
    /// registered virtual leaf sit exactly one level below its forcing depth
    /// (hence have uniform width around that region).
    ///
    /// Deeper entries are processed first; each popped leaf splits any
    /// too-shallow neighbor and enqueues the children. A popped virtual leaf
    /// first raises its own depth to one more than its deepest current
    /// neighbor (never lowering it), then splits neighbors that lag; it is
    /// re-enqueued whenever an adjacent leaf is split, so late refinements
    /// propagate back around the region.
    pub fn balance(&mut self, classify: &mut dyn FnMut(&Box2, u32) -> BoxClass) {
        let mut heap: BinaryHeap<QEntry> = BinaryHeap::new();
        for id in 0..self.nodes.len() {
            if self.nodes[id].is_leaf() && self.nodes[id].on {
                heap.push(self.leaf_entry(id));
            }
        }
        for ci in 0..self.conceptuals.len() {
            heap.push(self.virtual_entry(ci));
        }
        while let Some(entry) = heap.pop() {
            match entry.item {
                Item::Leaf(id) => {
                    if !self.nodes[id].is_leaf() || !self.nodes[id].on {
                        continue;
                    }
                    let depth = self.nodes[id].depth;
                    // Split too-shallow neighbors until everything adjacent is
                    // at most one level up; with a gap of g this cascades g-1
                    // times toward the popped leaf, leaving the familiar path
                    // of hanging leaves.
                    loop {
                        let lagging: Vec<NodeId> = self
                            .neighbors(id)
                            .into_iter()
                            .filter(|&nb| {
                                self.nodes[nb].is_leaf()
                                    && self.nodes[nb].on
                                    && self.nodes[nb].depth + 1 < depth
                            })
                            .collect();
                        if lagging.is_empty() {
                            break;
                        }
                        for nb in lagging {
                            if self.nodes[nb].is_leaf() {
                                self.split_for_balance(nb, classify, &mut heap);
                            }
                        }
                    }
                }
                Item::Virtual(ci) => {
                    let rect = self.conceptuals[ci].rect.clone();
                    let m = self
                        .leaves_adjacent_to_rect(&rect)
                        .into_iter()
                        .filter(|&id| self.nodes[id].on)
                        .map(|id| self.nodes[id].depth)
                        .max();
                    let m = match m {
                        Some(m) => m,
                        None => continue,
                    };
                    if m + 1 > self.conceptuals[ci].depth {
                        self.conceptuals[ci].depth = m + 1;
                    }
                    let want = self.conceptuals[ci].depth - 1;
                    loop {
                        let lagging: Vec<NodeId> = self
                            .leaves_adjacent_to_rect(&rect)
                            .into_iter()
                            .filter(|&id| {
                                self.nodes[id].is_leaf()
                                    && self.nodes[id].on
                                    && self.nodes[id].depth < want
                            })
                            .collect();
                        if lagging.is_empty() {
                            break;
                        }
                        for id in lagging {
                            if self.nodes[id].is_leaf() {
                                self.split_for_balance(id, classify, &mut heap);
                            }
                        }
                    }
                }
            }
        }
    }

    fn split_for_balance(
        &mut self,
        id: NodeId,
        classify: &mut dyn FnMut(&Box2, u32) -> BoxClass,
        heap: &mut BinaryHeap<QEntry>,
    ) {
        let kids = self.expand(id);
        for kid in kids {
            let (r, d) = {
                let n = &self.nodes[kid];
                (n.rect.clone(), n.depth)
            };
            let class = classify(&r, d);
            self.nodes[kid].class = class;
            heap.push(self.leaf_entry(kid));
        }
        // A split beside a blacked-out region may break its uniform border:
        // give the virtual leaf another turn.
        let rect = self.nodes[id].rect.clone();
        for ci in 0..self.conceptuals.len() {
            if self.conceptuals[ci].rect.is_adjacent(&rect) {
                heap.push(self.virtual_entry(ci));
            }
        }
    }

    fn leaf_entry(&self, id: NodeId) -> QEntry {
        QEntry {
            depth: self.nodes[id].depth,
            key: self.nodes[id].rect.order_key(),
            item: Item::Leaf(id),
        }
    }

    fn virtual_entry(&self, ci: usize) -> QEntry {
        QEntry {
            depth: self.conceptuals[ci].depth,
            key: self.conceptuals[ci].rect.order_key(),
            item: Item::Virtual(ci),
        }
    }

    /// Width exponent of the uniform border around a virtual leaf's region,
    /// relative to its generating root box: adjacent ON leaves have width
    /// `w(B) / 2^k`. Errors if balancing somehow left the border non-uniform.
    pub fn conforming_k(&self, ci: usize) -> Result<u32> {
        let c = &self.conceptuals[ci];
        let mut depths = self
            .leaves_adjacent_to_rect(&c.rect)
            .into_iter()
            .filter(|&id| self.nodes[id].on)
            .map(|id| self.nodes[id].depth);
        let first = match depths.next() {
            Some(d) => d,
            None => return Ok(1),
        };
        if depths.all(|d| d == first) && first > c.base_depth {
            Ok(first - c.base_depth)
        } else {
            Err(Error::Internal(format!(
                "non-uniform border around blacked-out region {}",
                c.rect
            )))
        }
    }
}

/// The standard 37-box subdivision of an extended root neighborhood: the
/// 6-times box is tiled by nine copies of the root box (the root box itself in
/// the middle), and the frame between the 6- and 8-times boxes by twenty-eight
/// copies of the generator.
#[derive(Debug, Clone)]
pub struct StdSubdivision {
    pub b: Box2,
    pub b2: Box2,
    pub b6: Box2,
    pub b8: Box2,
    /// Nine boxes congruent to `b2` tiling `b6`; index 4 is `b2` itself.
    pub inner: Vec<Box2>,
    /// Twenty-eight boxes congruent to `b` tiling the `b8` minus `b6` frame.
    pub ring: Vec<Box2>,
}

pub fn std_subdivision(b: &Box2) -> StdSubdivision {
    let b2 = b.times2();
    let b6 = b.times6();
    let b8 = b.times8();
    let wx2 = b2.width_x();
    let wy2 = b2.width_y();
    let mut inner = Vec::with_capacity(9);
    for row in 0..3i64 {
        for col in 0..3i64 {
            let x0 = &b6.x0 + &(wx2.clone() * Dyadic::from_i64(col));
            let y0 = &b6.y0 + &(wy2.clone() * Dyadic::from_i64(row));
            inner.push(Box2::new(x0.clone(), y0.clone(), &x0 + &wx2, &y0 + &wy2));
        }
    }
    debug_assert_eq!(inner[4], b2);
    let wx = b.width_x();
    let wy = b.width_y();
    let mut ring = Vec::with_capacity(28);
    // Bottom and top rows: eight boxes each, spanning the full width of b8.
    for row in [0i64, 7] {
        for col in 0..8i64 {
            let x0 = &b8.x0 + &(wx.clone() * Dyadic::from_i64(col));
            let y0 = &b8.y0 + &(wy.clone() * Dyadic::from_i64(row));
            ring.push(Box2::new(x0.clone(), y0.clone(), &x0 + &wx, &y0 + &wy));
        }
    }
    // Left and right columns: six boxes each, between the rows.
    for col in [0i64, 7] {
        for row in 1..7i64 {
            let x0 = &b8.x0 + &(wx.clone() * Dyadic::from_i64(col));
            let y0 = &b8.y0 + &(wy.clone() * Dyadic::from_i64(row));
            ring.push(Box2::new(x0.clone(), y0.clone(), &x0 + &wx, &y0 + &wy));
        }
    }
    StdSubdivision { b: b.clone(), b2, b6, b8, inner, ring }
}

/// One cell of the final box complex (a tree leaf or a piece of a root
/// neighborhood's interior subdivision).
#[derive(Debug, Clone)]
pub struct Cell {
    pub rect: Box2,
    /// Width exponent relative to the region of interest: `w(rect) =
    /// w(roi) / 2^depth`. Comparable across the tree and the interior
    /// subdivisions even though the latter are not tree-aligned.
    pub depth: i64,
    pub class: BoxClass,
    /// `Some(i)` when this cell is the root box of isolated intersection `i`.
    pub root_index: Option<usize>,
}

/// Subdivide the interior of an extended root neighborhood until it is
/// balanced against its (uniform, width `w(B)/2^k`) exterior neighbors. The
/// root box itself is protected: it is never split, and the construction
/// guarantees its neighbors never get more than one level deeper, keeping
/// each of its edges to at most two segments.
///
/// Returns the interior cells with depths on the shared width scale.
pub fn internal_conform(
    std: &StdSubdivision,
    base_depth: i64,
    k: u32,
    classify: &mut dyn FnMut(&Box2) -> BoxClass,
) -> Result<Vec<Cell>> {
    #[derive(Clone)]
    struct Piece {
        rect: Box2,
        depth: i64,
        protected: bool,
    }
    let mut pieces: Vec<Piece> = Vec::new();
    for (i, rect) in std.inner.iter().enumerate() {
        pieces.push(Piece { rect: rect.clone(), depth: base_depth - 1, protected: i == 4 });
    }
    for rect in &std.ring {
        pieces.push(Piece { rect: rect.clone(), depth: base_depth, protected: false });
    }
    // Virtual exterior band: every leaf beyond the 8-times box has width
    // w(B)/2^k, i.e. depth base_depth + k. Represent the demand abstractly by
    // treating the frame's outer boundary as a depth source.
    let exterior_depth = base_depth + k as i64;

    // Repeatedly split any interior piece that is two or more levels
    // shallower than an adjacent piece (or than the exterior, if it touches
    // the outer boundary). Deterministic order: deepest demands are satisfied
    // by scanning for the shallowest offender each round.
    loop {
        let mut split_at: Option<usize> = None;
        'scan: for i in 0..pieces.len() {
            if pieces[i].protected {
                continue;
            }
            let touches_outer = {
                let r = &pieces[i].rect;
                r.x0 == std.b8.x0 || r.x1 == std.b8.x1 || r.y0 == std.b8.y0 || r.y1 == std.b8.y1
            };
            if touches_outer && pieces[i].depth + 1 < exterior_depth {
                split_at = Some(i);
                break 'scan;
            }
            for j in 0..pieces.len() {
                if i != j
                    && pieces[i].depth + 1 < pieces[j].depth
                    && pieces[i].rect.is_adjacent(&pieces[j].rect)
                {
                    split_at = Some(i);
                    break 'scan;
                }
            }
        }
        match split_at {
            Some(i) => {
                let piece = pieces.swap_remove(i);
                for rect in piece.rect.split() {
                    pieces.push(Piece { rect, depth: piece.depth + 1, protected: false });
                }
            }
            None => break,
        }
    }
    // The protected root box must have ended with neighbors at most one level
    // deeper, or the complex would not be balanced.
    let rb = &std.b2;
    let rb_depth = base_depth - 1;
    for p in &pieces {
        if p.rect.is_adjacent(rb) && p.depth > rb_depth + 1 {
            return Err(Error::Internal(format!(
                "root box {rb} has a neighbor two levels deeper"
            )));
        }
    }
    let mut cells: Vec<Cell> = pieces
        .into_iter()
        .map(|p| Cell {
            class: classify(&p.rect),
            root_index: None,
            rect: p.rect,
            depth: p.depth,
        })
        .collect();
    cells.sort_by(|a, b| a.rect.order_key().cmp(&b.rect.order_key()));
    Ok(cells)
}

/// Relative position of the two cells sharing a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegOrder {
    Unresolved,
    FFirst,
    GFirst,
}

/// A maximal common sub-edge of the final complex: the full shared side of
/// the smaller of two adjacent cells, or a cell side on the region boundary.
/// The sign/vertex/order fields are populated by the arrangement stages.
#[derive(Debug, Clone)]
pub struct Segment {
    /// Lies on a vertical grid line (cells to its west and east)?
    pub vertical: bool,
    /// Endpoints in increasing order along the line (south to north, or west
    /// to east).
    pub a: Point2,
    pub b: Point2,
    /// Cell index on the west (vertical) or south (horizontal) side; `None`
    /// on the region boundary.
    pub lo_cell: Option<usize>,
    /// Cell index on the east or north side.
    pub hi_cell: Option<usize>,
    /// Signs of the two curve functions at `a` and `b` (+1/-1 after the
    /// perturbation convention; 0 = not yet evaluated).
    pub fsign: [i32; 2],
    pub gsign: [i32; 2],
    /// Output vertex ids of the curve crossings on this segment, if any.
    pub f_vertex: Option<usize>,
    pub g_vertex: Option<usize>,
    pub order: SegOrder,
}

/// Build all segments of a box complex by geometric adjacency: every shared
/// grid line is cut at all incident cell corners, elementary intervals are
/// attributed to the covering cell on each side, and runs with identical
/// coverage merge back into maximal segments.
pub fn segments_of(cells: &[Cell]) -> Vec<Segment> {
    use std::collections::BTreeMap;
    let mut out = Vec::new();
    for vertical in [true, false] {
        // line coordinate -> list of (span-lo, span-hi, cell, is_lo_side).
        let mut lines: BTreeMap<Dyadic, Vec<(Dyadic, Dyadic, usize, bool)>> = BTreeMap::new();
        for (i, cell) in cells.iter().enumerate() {
            let r = &cell.rect;
            if vertical {
                lines.entry(r.x0.clone()).or_default().push((
                    r.y0.clone(),
                    r.y1.clone(),
                    i,
                    false,
                ));
                lines.entry(r.x1.clone()).or_default().push((
                    r.y0.clone(),
                    r.y1.clone(),
                    i,
                    true,
                ));
            } else {
                lines.entry(r.y0.clone()).or_default().push((
                    r.x0.clone(),
                    r.x1.clone(),
                    i,
                    false,
                ));
                lines.entry(r.y1.clone()).or_default().push((
                    r.x0.clone(),
                    r.x1.clone(),
                    i,
                    true,
                ));
            }
        }
        for (coord, mut sides) in lines {
            sides.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            let mut cuts: Vec<Dyadic> = Vec::new();
            for (lo, hi, _, _) in &sides {
                cuts.push(lo.clone());
                cuts.push(hi.clone());
            }
            cuts.sort();
            cuts.dedup();
            // Elementary intervals with their (lo-side, hi-side) coverage.
            let mut runs: Vec<(Dyadic, Dyadic, Option<usize>, Option<usize>)> = Vec::new();
            for win in cuts.windows(2) {
                let (a, b) = (&win[0], &win[1]);
                let mut lo_cell = None;
                let mut hi_cell = None;
                for (lo, hi, cell, is_lo) in &sides {
                    if lo <= a && b <= hi {
                        if *is_lo {
                            lo_cell = Some(*cell);
                        } else {
                            hi_cell = Some(*cell);
                        }
                    }
                }
                if lo_cell.is_none() && hi_cell.is_none() {
                    continue;
                }
                match runs.last_mut() {
                    Some((_, end, lc, hc)) if *end == *a && *lc == lo_cell && *hc == hi_cell => {
                        *end = b.clone();
                    }
                    _ => runs.push((a.clone(), b.clone(), lo_cell, hi_cell)),
                }
            }
            for (a, b, lo_cell, hi_cell) in runs {
                let (pa, pb) = if vertical {
                    (Point2::new(coord.clone(), a), Point2::new(coord.clone(), b))
                } else {
                    (Point2::new(a, coord.clone()), Point2::new(b, coord.clone()))
                };
                out.push(Segment {
                    vertical,
                    a: pa,
                    b: pb,
                    lo_cell,
                    hi_cell,
                    fsign: [0, 0],
                    gsign: [0, 0],
                    f_vertex: None,
                    g_vertex: None,
                    order: SegOrder::Unresolved,
                });
            }
        }
    }
    out
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

    fn no_classify(_: &Box2, _: u32) -> BoxClass {
        BoxClass::Unresolved
    }

    /// Brute-force adjacency over all ON leaves, for cross-checking walks.
    fn brute_neighbors(t: &SubdivTree, id: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = t
            .leaf_ids()
            .into_iter()
            .filter(|&o| o != id && t.node(o).rect.is_adjacent(&t.node(id).rect))
            .collect();
        out.sort();
        out
    }

    fn assert_walks_match(t: &SubdivTree) {
        for id in t.leaf_ids() {
            let mut walked = t.neighbors(id);
            walked.sort();
            walked.dedup();
            assert_eq!(walked, brute_neighbors(t, id), "leaf {id}");
        }
    }

    #[test]
    fn expand_root_makes_four_leaves() {
        let mut t = SubdivTree::new(bx(0.0, 0.0, 4.0, 4.0));
        let kids = t.expand(0);
        assert_eq!(kids.len(), 4);
        for kid in kids {
            assert_eq!(t.node(kid).rect.width_x(), d(2.0));
            assert_eq!(t.node(kid).depth, 1);
        }
        // SW's neighbors are its two siblings.
        let mut nbs = t.neighbors(kids[0]);
        nbs.sort();
        assert_eq!(nbs, vec![kids[1], kids[2]]);
        assert_walks_match(&t);
    }

    #[test]
    fn uniform_grid_neighbor_counts() {
        let mut t = SubdivTree::new(bx(0.0, 0.0, 4.0, 4.0));
        let kids = t.expand(0);
        for kid in kids {
            t.expand(kid);
        }
        // Depth-2 uniform grid: interior leaves have 4 neighbors, corner
        // leaves 2.
        let mut by_count = [0usize; 5];
        for id in t.leaf_ids() {
            let mut nbs = t.neighbors(id);
            nbs.sort();
            nbs.dedup();
            by_count[nbs.len()] += 1;
        }
        assert_eq!(by_count[2], 4); // corners
        assert_eq!(by_count[3], 8); // edges
        assert_eq!(by_count[4], 4); // interior
        assert_walks_match(&t);
    }

    #[test]
    fn leaf_beside_two_half_size_leaves_sees_both() {
        let mut t = SubdivTree::new(bx(0.0, 0.0, 2.0, 2.0));
        let kids = t.expand(0);
        let ne_kids = t.expand(kids[3]); // split NE
        // SE ([1,2]x[0,1]) borders NE's southern children along y = 1.
        let north_of_se = t.walk_side(kids[1], Side::North);
        assert_eq!(north_of_se, vec![ne_kids[0], ne_kids[1]]);
        assert_walks_match(&t);
    }

    #[test]
    fn pointer_repair_survives_deep_asymmetric_splits() {
        let mut t = SubdivTree::new(bx(0.0, 0.0, 8.0, 8.0));
        let k0 = t.expand(0);
        let k1 = t.expand(k0[0]); // SW
        let k2 = t.expand(k1[3]); // SW.NE
        let _k3 = t.expand(k2[3]); // SW.NE.NE
        assert_walks_match(&t);
        // Splitting a leaf whose side faces a mix of depths must repair all
        // backpointers.
        t.expand(k0[1]); // SE, faces depth 2..4 on its west side
        assert_walks_match(&t);
    }

    #[test]
    fn balance_splits_big_neighbor_once_along_far_edge() {
        // A depth-4 leaf in the corner of SW adjacent to the depth-1 leaves
        // SE and NW: depth gap 3.
        let mut t = SubdivTree::new(bx(0.0, 0.0, 8.0, 8.0));
        let k0 = t.expand(0);
        let k1 = t.expand(k0[0]);
        let k2 = t.expand(k1[3]);
        let _k3 = t.expand(k2[3]);
        let before: usize = t.leaf_ids().len();
        t.balance(&mut no_classify);
        assert_walks_match(&t);

        // Every adjacent ON pair differs by at most one level.
        for id in t.leaf_ids() {
            for nb in t.neighbors(id) {
                let a = t.node(id).depth as i64;
                let b = t.node(nb).depth as i64;
                assert!((a - b).abs() <= 1, "{a} vs {b}");
            }
        }
        // The big east neighbor (SE, [4,8]x[0,4]) was refined into a path
        // with hanging leaves: net leaves added = 3 * (depth gap - 1) = 6,
        // and its far (east) edge is split exactly once.
        let se_leaves: Vec<NodeId> = t
            .leaf_ids()
            .into_iter()
            .filter(|&id| {
                let r = &t.node(id).rect;
                bx(4.0, 0.0, 8.0, 4.0).contains_box(r)
            })
            .collect();
        assert_eq!(se_leaves.len(), 7); // 1 box became 7 leaves: +6
        let far_edge: Vec<NodeId> = se_leaves
            .iter()
            .copied()
            .filter(|&id| t.node(id).rect.x1 == d(8.0))
            .collect();
        assert_eq!(far_edge.len(), 2);
        let _ = before;
    }

    #[test]
    fn balanced_tree_is_a_fixpoint() {
        let mut t = SubdivTree::new(bx(0.0, 0.0, 4.0, 4.0));
        let kids = t.expand(0);
        t.expand(kids[0]);
        t.balance(&mut no_classify); // depth 1 vs 2: already balanced
        let count = t.len();
        t.balance(&mut no_classify);
        assert_eq!(t.len(), count);
    }

    #[test]
    fn standard_subdivision_shape() {
        let b = bx(0.0, 0.0, 1.0, 1.0);
        let std = std_subdivision(&b);
        assert_eq!(std.b2, bx(-0.5, -0.5, 1.5, 1.5));
        assert_eq!(std.b6, bx(-2.5, -2.5, 3.5, 3.5));
        assert_eq!(std.b8, bx(-3.5, -3.5, 4.5, 4.5));
        assert_eq!(std.inner.len(), 9);
        assert_eq!(std.ring.len(), 28);
        assert_eq!(std.inner[4], std.b2);
        for r in &std.inner {
            assert_eq!(r.width_x(), d(2.0));
            assert!(std.b6.contains_box(r));
        }
        for r in &std.ring {
            assert_eq!(r.width_x(), d(1.0));
            assert!(std.b8.contains_box(r));
            assert!(!r.interiors_intersect(&std.b6));
            // Ring boxes sit on the generator's half-width grid.
            assert!(r.on_half_grid_of(&b));
        }
        // Pairwise disjoint interiors and total area 64 w^2: count by tiling.
        let all: Vec<&Box2> = std.inner.iter().chain(std.ring.iter()).collect();
        assert_eq!(all.len(), 37);
        for i in 0..all.len() {
            for j in 0..i {
                assert!(!all[i].interiors_intersect(all[j]));
            }
        }
    }

    #[test]
    fn prune_blacks_out_region_and_splits_straddlers() {
        let mut t = SubdivTree::new(bx(0.0, 0.0, 8.0, 8.0));
        let k0 = t.expand(0);
        for kid in k0 {
            t.expand(kid);
        }
        // Black out a half-aligned region around the center: [3,5]^2 has its
        // corners on the 1-width grid, so straddling depth-2 leaves (width 2)
        // split once.
        let region = bx(3.0, 3.0, 5.0, 5.0);
        let seed = t
            .leaf_ids()
            .into_iter()
            .find(|&id| t.node(id).rect.interiors_intersect(&region))
            .unwrap();
        t.prune_region(seed, &region, &mut no_classify);
        for id in t.leaf_ids() {
            let r = &t.node(id).rect;
            if region.contains_box(r) {
                assert!(!t.node(id).on, "leaf inside region must be OFF: {r}");
            } else {
                assert!(t.node(id).on);
                assert!(!r.interiors_intersect(&region), "straddler left: {r}");
            }
        }
        // ON leaves tile the complement: total ON area = 64 - 4.
        let area: f64 = t
            .leaf_ids()
            .iter()
            .filter(|&&id| t.node(id).on)
            .map(|&id| {
                let r = &t.node(id).rect;
                r.width_x().to_f64_nearest() * r.width_y().to_f64_nearest()
            })
            .sum();
        assert!((area - 60.0).abs() < 1e-9);
        assert_walks_match(&t);
    }

    #[test]
    fn conceptual_forcing_gives_uniform_border() {
        // Root box B = [3,4]^2 at depth 3 in [0,8]^2 (after three splits).
        // Black out 8B-like region [3,5]^2 (toy: use a 2x2 region) and check
        // the conformity exponent under the two depth regimes.
        let mut t = SubdivTree::new(bx(0.0, 0.0, 8.0, 8.0));
        let k0 = t.expand(0);
        for kid in k0 {
            t.expand(kid);
        }
        let region = bx(3.0, 3.0, 5.0, 5.0);
        let seed = t
            .leaves_overlapping_rect(&region)
            .first()
            .copied()
            .unwrap();
        t.prune_region(seed, &region, &mut no_classify);
        // All neighbors of the region have width 1 or 2 now; the generator
        // depth for a width-1 root box in [0,8]^2 is 3.
        let ci = t.add_conceptual(region.clone(), 3);
        t.balance(&mut no_classify);
        let k = t.conforming_k(ci).unwrap();
        assert_eq!(k, 1, "all-large neighbors give the minimum exponent");
        let border: Vec<NodeId> = t
            .leaves_adjacent_to_rect(&region)
            .into_iter()
            .filter(|&id| t.node(id).on)
            .collect();
        for id in &border {
            assert_eq!(t.node(*id).rect.width_x(), d(0.5));
        }
        assert_walks_match(&t);
    }

    #[test]
    fn conceptual_follows_deeper_neighbors() {
        let mut t = SubdivTree::new(bx(0.0, 0.0, 8.0, 8.0));
        let k0 = t.expand(0);
        for kid in k0 {
            t.expand(kid);
        }
        let region = bx(3.0, 3.0, 5.0, 5.0);
        let seed = t.leaves_overlapping_rect(&region).first().copied().unwrap();
        t.prune_region(seed, &region, &mut no_classify);
        // Make one neighbor much deeper than the generator: depth 6 = width
        // 1/8 beside the region.
        let mut deep = t
            .leaves_adjacent_to_rect(&region)
            .into_iter()
            .find(|&id| t.node(id).on)
            .unwrap();
        for _ in 0..3 {
            let kids = t.expand(deep);
            deep = kids
                .into_iter()
                .find(|&kid| t.node(kid).rect.is_adjacent(&region))
                .unwrap();
        }
        let ci = t.add_conceptual(region.clone(), 3);
        t.balance(&mut no_classify);
        let k = t.conforming_k(ci).unwrap();
        assert_eq!(k, 3, "border follows the deepest neighbor: width 1/2^3");
        for id in t.leaves_adjacent_to_rect(&region) {
            if t.node(id).on {
                assert_eq!(t.node(id).rect.width_x(), d(0.125));
            }
        }
        // And the whole tree is balanced.
        for id in t.leaf_ids() {
            if !t.node(id).on {
                continue;
            }
            for nb in t.neighbors(id) {
                if !t.node(nb).on {
                    continue;
                }
                let a = t.node(id).depth as i64;
                let b = t.node(nb).depth as i64;
                assert!((a - b).abs() <= 1);
            }
        }
    }

    #[test]
    fn internal_conform_identity_at_k1() {
        let b = bx(3.0, 3.0, 4.0, 4.0);
        let std = std_subdivision(&b);
        let cells = internal_conform(&std, 3, 1, &mut |_| BoxClass::Excluded).unwrap();
        assert_eq!(cells.len(), 37, "k = 1 leaves the standard subdivision alone");
    }

    #[test]
    fn internal_conform_k3_boundary_widths() {
        let b = bx(3.0, 3.0, 4.0, 4.0); // w(B) = 1, depth 3 in an 8-wide ROI
        let std = std_subdivision(&b);
        let cells = internal_conform(&std, 3, 3, &mut |_| BoxClass::Excluded).unwrap();
        // Boundary cells have width w(B)/2^{k-1} = 1/4.
        for c in &cells {
            let r = &c.rect;
            let on_boundary =
                r.x0 == std.b8.x0 || r.x1 == std.b8.x1 || r.y0 == std.b8.y0 || r.y1 == std.b8.y1;
            if on_boundary {
                assert_eq!(r.width_x(), d(0.25), "boundary cell {r}");
            }
        }
        // Total area is preserved: 8 x 8 times w(B)^2.
        let area: f64 = cells
            .iter()
            .map(|c| c.rect.width_x().to_f64_nearest() * c.rect.width_y().to_f64_nearest())
            .sum();
        assert!((area - 64.0).abs() < 1e-9);
        // Balanced: adjacent cells differ by at most one width level.
        for i in 0..cells.len() {
            for j in 0..i {
                if cells[i].rect.is_adjacent(&cells[j].rect) {
                    assert!((cells[i].depth - cells[j].depth).abs() <= 1);
                }
            }
        }
        // The root box is intact and each of its edges carries at most two
        // segments: count the cells abutting each side by coordinate spans.
        let rb = &std.b2;
        assert!(cells.iter().any(|c| c.rect == *rb));
        let spans_y = |r: &Box2| r.y0 < rb.y1 && r.y1 > rb.y0;
        let spans_x = |r: &Box2| r.x0 < rb.x1 && r.x1 > rb.x0;
        let west = cells.iter().filter(|c| c.rect.x1 == rb.x0 && spans_y(&c.rect)).count();
        let east = cells.iter().filter(|c| c.rect.x0 == rb.x1 && spans_y(&c.rect)).count();
        let south = cells.iter().filter(|c| c.rect.y1 == rb.y0 && spans_x(&c.rect)).count();
        let north = cells.iter().filter(|c| c.rect.y0 == rb.y1 && spans_x(&c.rect)).count();
        for (label, count) in [("west", west), ("east", east), ("south", south), ("north", north)]
        {
            assert!((1..=2).contains(&count), "{label} side of the root box: {count} neighbors");
        }
    }

    #[test]
    fn segments_cover_shared_sides() {
        // 2x2 grid with the NE cell split again: classic balanced complex.
        let mut cells = Vec::new();
        for r in [
            bx(0.0, 0.0, 1.0, 1.0),
            bx(1.0, 0.0, 2.0, 1.0),
            bx(0.0, 1.0, 1.0, 2.0),
            bx(1.0, 1.0, 1.5, 1.5),
            bx(1.5, 1.0, 2.0, 1.5),
            bx(1.0, 1.5, 1.5, 2.0),
            bx(1.5, 1.5, 2.0, 2.0),
        ] {
            cells.push(Cell { rect: r, depth: 0, class: BoxClass::Excluded, root_index: None });
        }
        let segs = segments_of(&cells);
        // The SE cell's north side is one segment against cell 0's... check
        // key counts instead: every segment's cells are really adjacent, and
        // each cell side is a union of at most 2 segments.
        for s in &segs {
            if let (Some(lo), Some(hi)) = (s.lo_cell, s.hi_cell) {
                assert!(cells[lo].rect.is_adjacent(&cells[hi].rect));
            }
        }
        // Cell 1 ([1,2]x[0,1]) north side: two segments (two half-size cells
        // above). West side: one segment. South and east: boundary segments.
        let sides_of = |cell: usize, vertical: bool| {
            segs.iter()
                .filter(|s| {
                    s.vertical == vertical
                        && (s.lo_cell == Some(cell) || s.hi_cell == Some(cell))
                })
                .count()
        };
        assert_eq!(sides_of(1, false), 3); // south boundary + 2 north segments
        assert_eq!(sides_of(1, true), 2); // west shared + east boundary
        // Boundary segments have exactly one cell.
        let boundary = segs
            .iter()
            .filter(|s| s.lo_cell.is_none() || s.hi_cell.is_none())
            .count();
        // Perimeter: west 2 cells, east 3 cells, south 2, north 3.
        assert_eq!(boundary, 10);
        // Total length of vertical segments at x = 1: the full height 2.
        let len: f64 = segs
            .iter()
            .filter(|s| s.vertical && s.a.x == d(1.0))
            .map(|s| s.b.y.to_f64_nearest() - s.a.y.to_f64_nearest())
            .sum();
        assert!((len - 2.0).abs() < 1e-12);
    }

    #[test]
    fn walks_match_brute_force_on_random_trees() {
        // Deterministic pseudo-random split sequence; cross-validate the
        // pointer walks against brute-force adjacency after every split.
        let mut t = SubdivTree::new(bx(0.0, 0.0, 1.0, 1.0));
        let mut state = 0x1234_5678_u64;
        let mut rand = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as usize
        };
        for round in 0..60 {
            let leaves = t.leaf_ids();
            let id = leaves[rand() % leaves.len()];
            if t.node(id).depth < 6 {
                t.expand(id);
            }
            if round % 10 == 9 {
                assert_walks_match(&t);
            }
        }
        assert_walks_match(&t);
    }
}
