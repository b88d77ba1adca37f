//! Root isolation over the subdivision tree, in four sequential stages:
//!
//! 1. resolution — every leaf is refined until the box predicates resolve it
//!    (excluded, or gradient-certified for one or both curves), and candidate
//!    leaves are further refined below the width cap derived from the output
//!    tolerance;
//! 2. Jacobian gate — each both-curve candidate `B` is refined until its
//!    six-times neighborhood fits the region and carries an interval-regular
//!    Jacobian, which caps the root count in that neighborhood at one;
//! 3. existence search — a depth-first scan under each gated box finds a
//!    sub-box whose doubled box passes the preconditioned existence test, and
//!    overlapping hits of the same root are deduplicated;
//! 4. strong isolation — hits are refined, largest first, until the
//!    eight-times neighborhoods are pairwise disjoint, inside the region, and
//!    gradient-certified for both curves, yielding one certified record per
//!    intersection point.
//!
//! Every box handled here is an aligned box (a node of the subdivision tree
//! or a grid box of the same dyadic lattice).

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::funcmodel::{CurveSystem, Which};
use crate::numeric::Box2;
use crate::predicates::{self, BoxClass, MkCertificate};
use crate::subdiv::{NodeId, SubdivTree};

/// An existence-test hit: an aligned box whose doubled box certifiably
/// contains exactly one common root.
#[derive(Debug, Clone)]
pub struct MkEntry {
    pub rect: Box2,
    pub depth: u32,
    pub cert: MkCertificate,
}

/// A strongly isolated intersection: the doubled box `b2` holds exactly one
/// common root, the six-times box has an interval-regular Jacobian, the
/// eight-times box is inside the region, gradient-certified for both curves,
/// and disjoint from every other record's eight-times box. The annulus
/// between `b8` and `b2` is root-free by the stage discipline (every root
/// ends in some record's `b2`, and those are pairwise disjoint).
#[derive(Debug, Clone)]
pub struct RootRecord {
    pub b: Box2,
    pub depth: u32,
    pub b2: Box2,
    pub b6: Box2,
    pub b8: Box2,
    pub cert: MkCertificate,
}

/// Stage driver: owns the tolerance and escalation policy.
pub struct Isolator<'a> {
    sys: &'a CurveSystem,
    /// Output tolerance; `None` means topology-only (no width cap).
    eps: Option<BigRational>,
    max_depth: u32,
    /// Box predicates escalate to exact arithmetic below this depth.
    escalate_depth: u32,
    escalate_bits: u64,
}

impl<'a> Isolator<'a> {
    pub fn new(sys: &'a CurveSystem, eps: Option<BigRational>, max_depth: u32) -> Isolator<'a> {
        Isolator { sys, eps, max_depth, escalate_depth: 30, escalate_bits: 256 }
    }

    pub fn with_escalation(mut self, depth: u32, bits: u64) -> Isolator<'a> {
        self.escalate_depth = depth;
        self.escalate_bits = bits;
        self
    }

    fn esc(&self, depth: u32) -> Option<u64> {
        (depth > self.escalate_depth).then_some(self.escalate_bits)
    }

    fn classify(&self, rect: &Box2, depth: u32) -> BoxClass {
        predicates::classify(self.sys, rect, self.esc(depth))
    }

    /// Candidate boxes are refined until max side width ≤ ε/6: the later
    /// stages introduce boxes up to twice a candidate width, the polyline can
    /// sit a box diameter away from the curve on either side, and a diameter
    /// is at most √2 times the width — 2·√2·(2ε/6) < ε.
    fn too_wide(&self, rect: &Box2) -> bool {
        match &self.eps {
            None => false,
            Some(eps) => {
                let six = BigRational::from_integer(BigInt::from(6));
                six * rect.max_width().to_rational() > *eps
            }
        }
    }

    fn depth_error(&self, rect: &Box2) -> Error {
        Error::ResolutionLimit { max_depth: self.max_depth, rect: rect.to_bad_box() }
    }

    /// Classify a leaf and keep splitting while it stays unresolved (or, when
    /// `enforce_cap`, while a candidate exceeds the width cap). Settled
    /// descendant leaves are appended to `settled`.
    fn resolve_leaf(
        &self,
        tree: &mut SubdivTree,
        id: NodeId,
        enforce_cap: bool,
        settled: &mut Vec<NodeId>,
    ) -> Result<()> {
        let (rect, depth) = {
            let n = tree.node(id);
            (n.rect.clone(), n.depth)
        };
        let class = self.classify(&rect, depth);
        tree.set_class(id, class);
        let split = match class {
            BoxClass::Unresolved => true,
            BoxClass::Excluded => false,
            _ => enforce_cap && self.too_wide(&rect),
        };
        if !split {
            settled.push(id);
            return Ok(());
        }
        if depth >= self.max_depth {
            return Err(self.depth_error(&rect));
        }
        for kid in tree.expand(id) {
            self.resolve_leaf(tree, kid, enforce_cap, settled)?;
        }
        Ok(())
    }

    /// Stage 1: refine a fresh tree until every leaf is resolved and every
    /// candidate leaf obeys the width cap.
    pub fn stage1_resolve(&self, tree: &mut SubdivTree) -> Result<()> {
        let mut settled = Vec::new();
        for id in tree.on_leaves_sorted() {
            self.resolve_leaf(tree, id, true, &mut settled)?;
        }
        Ok(())
    }

    /// Stage 2: refine both-curve candidates until their six-times box fits
    /// the region and passes the Jacobian gate. Returns the gated leaves.
    pub fn stage2_jacobian(&self, tree: &mut SubdivTree) -> Result<Vec<NodeId>> {
        let roi = tree.roi().clone();
        let mut work: VecDeque<NodeId> = tree
            .on_leaves_sorted()
            .into_iter()
            .filter(|&id| tree.node(id).class == BoxClass::FGCandidate)
            .collect();
        let mut qjc = Vec::new();
        while let Some(id) = work.pop_front() {
            let (rect, depth) = {
                let n = tree.node(id);
                (n.rect.clone(), n.depth)
            };
            let b6 = rect.times6();
            let fits = roi.contains_box(&b6);
            if fits && predicates::jc(self.sys, &b6, self.esc(depth)) {
                qjc.push(id);
                continue;
            }
            if depth >= self.max_depth {
                // A both-curve candidate pinned against the region boundary
                // is a root we cannot push away from it; elsewhere it is a
                // tangency the Jacobian gate can never certify.
                return Err(if !fits {
                    Error::BoundaryRoot { max_depth: self.max_depth, rect: rect.to_bad_box() }
                } else {
                    self.depth_error(&rect)
                });
            }
            let mut settled = Vec::new();
            for kid in tree.expand(id) {
                self.resolve_leaf(tree, kid, false, &mut settled)?;
            }
            for kid in settled {
                if tree.node(kid).class == BoxClass::FGCandidate {
                    work.push_back(kid);
                }
            }
        }
        Ok(qjc)
    }

    /// Stage 3: under each gated box, depth-first-search (SW, SE, NW, NE) for
    /// a sub-box whose doubled box passes the existence test; at most one hit
    /// per gated box since its six-times Jacobian caps the root count at one.
    /// Hits whose doubled boxes overlap an earlier hit's are duplicates of
    /// the same root and are dropped.
    pub fn stage3_mk(&self, tree: &mut SubdivTree, qjc: &[NodeId]) -> Result<Vec<MkEntry>> {
        let mut qmk: Vec<MkEntry> = Vec::new();
        for &top in qjc {
            let mut stack = vec![top];
            while let Some(id) = stack.pop() {
                if tree.node(id).class != BoxClass::FGCandidate {
                    continue;
                }
                let (rect, depth) = {
                    let n = tree.node(id);
                    (n.rect.clone(), n.depth)
                };
                let b2 = rect.times2();
                if let Some(cert) = predicates::mk_test(self.sys, &b2, self.esc(depth)) {
                    qmk.push(MkEntry { rect, depth, cert });
                    break; // remaining stack boxes stay both-curve candidates
                }
                if depth >= self.max_depth {
                    return Err(self.depth_error(&rect));
                }
                let mut settled = Vec::new();
                for kid in tree.expand(id) {
                    self.resolve_leaf(tree, kid, false, &mut settled)?;
                }
                // Push in reverse of the scan order so SW pops first.
                for &kid in settled.iter().rev() {
                    if tree.node(kid).class == BoxClass::FGCandidate {
                        stack.push(kid);
                    }
                }
            }
        }
        dedup_overlapping(&mut qmk);
        Ok(qmk)
    }

    /// Stage 4: pop hits largest first; refine any whose eight-times box
    /// leaves the region, fails a gradient certificate, fails the Jacobian
    /// gate on the six-times box, or touches another hit's eight-times box.
    pub fn stage4_strong_isolation(
        &self,
        tree: &mut SubdivTree,
        qmk: Vec<MkEntry>,
    ) -> Result<Vec<RootRecord>> {
        let roi = tree.roi().clone();
        let mut pending = qmk;
        let mut records: Vec<RootRecord> = Vec::new();
        while let Some(entry) = pop_largest(&mut pending) {
            let b8 = entry.rect.times8();
            let b6 = entry.rect.times6();
            let esc = self.esc(entry.depth);
            let inside = roi.contains_box(&b8);
            let isolated = inside
                && predicates::c1(self.sys, Which::F, &b8, esc)
                && predicates::c1(self.sys, Which::G, &b8, esc)
                && predicates::jc(self.sys, &b6, esc)
                && !pending.iter().any(|o| o.rect.times8().closed_intersects(&b8))
                && !records.iter().any(|r| r.b8.closed_intersects(&b8));
            if isolated {
                records.push(RootRecord {
                    b2: entry.rect.times2(),
                    b6,
                    b8,
                    b: entry.rect,
                    depth: entry.depth,
                    cert: entry.cert,
                });
                continue;
            }
            if entry.depth >= self.max_depth {
                return Err(if !inside {
                    Error::BoundaryRoot {
                        max_depth: self.max_depth,
                        rect: entry.rect.to_bad_box(),
                    }
                } else {
                    self.depth_error(&entry.rect)
                });
            }
            let refined = self.refine_root(tree, &entry)?;
            pending.push(refined);
        }
        Ok(records)
    }

    /// Replace a hit by a half-width hit around the same root: subdivide the
    /// tree to half width over the doubled box, then scan the sixteen
    /// half-width grid boxes covering it (row-major from the southwest) for
    /// the first whose doubled box passes the existence test. If none passes
    /// at this width, the scan recurses breadth-first on candidate quarters.
    pub fn refine_root(&self, tree: &mut SubdivTree, entry: &MkEntry) -> Result<MkEntry> {
        let b2 = entry.rect.times2();
        // Keep the tree in step: every leaf overlapping the doubled box gets
        // width ≤ w(B)/2, with the pieces classified as usual.
        loop {
            let coarse: Vec<NodeId> = tree
                .leaves_overlapping_rect(&b2)
                .into_iter()
                .filter(|&id| tree.node(id).on && tree.node(id).depth <= entry.depth)
                .collect();
            if coarse.is_empty() {
                break;
            }
            for id in coarse {
                if tree.node(id).is_leaf() {
                    let mut settled = Vec::new();
                    for kid in tree.expand(id) {
                        self.resolve_leaf(tree, kid, false, &mut settled)?;
                    }
                }
            }
        }
        let half_x = entry.rect.width_x().halve();
        let half_y = entry.rect.width_y().halve();
        let mut queue: VecDeque<(Box2, u32)> = VecDeque::new();
        for row in 0..4i64 {
            for col in 0..4i64 {
                let x0 = &b2.x0 + &(half_x.clone() * crate::numeric::Dyadic::from_i64(col));
                let y0 = &b2.y0 + &(half_y.clone() * crate::numeric::Dyadic::from_i64(row));
                let cell = Box2::new(x0.clone(), y0.clone(), &x0 + &half_x, &y0 + &half_y);
                queue.push_back((cell, entry.depth + 1));
            }
        }
        while let Some((cell, depth)) = queue.pop_front() {
            if let Some(cert) = predicates::mk_test(self.sys, &cell.times2(), self.esc(depth)) {
                return Ok(MkEntry { rect: cell, depth, cert });
            }
            if depth >= self.max_depth {
                continue;
            }
            for kid in cell.split() {
                if predicates::classify(self.sys, &kid, self.esc(depth + 1))
                    == BoxClass::FGCandidate
                {
                    queue.push_back((kid, depth + 1));
                }
            }
        }
        // The root is interior to the doubled box and simple, so the scan
        // cannot exhaust below the depth cap.
        Err(self.depth_error(&entry.rect))
    }

    /// Stages 1–4 in order on a fresh tree.
    pub fn run(&self, tree: &mut SubdivTree) -> Result<Vec<RootRecord>> {
        self.stage1_resolve(tree)?;
        let qjc = self.stage2_jacobian(tree)?;
        let qmk = self.stage3_mk(tree, &qjc)?;
        self.stage4_strong_isolation(tree, qmk)
    }
}

/// Drop every hit whose doubled box meets an earlier hit's doubled box: the
/// Jacobian gates guarantee both contain the same root, so the first
/// (deterministic scan order) wins.
pub fn dedup_overlapping(qmk: &mut Vec<MkEntry>) {
    let mut kept: Vec<MkEntry> = Vec::new();
    for entry in qmk.drain(..) {
        let b2 = entry.rect.times2();
        if !kept.iter().any(|k| k.rect.times2().closed_intersects(&b2)) {
            kept.push(entry);
        }
    }
    *qmk = kept;
}

/// Largest width first; ties broken by lower-left corner (y, x).
fn pop_largest(pending: &mut Vec<MkEntry>) -> Option<MkEntry> {
    if pending.is_empty() {
        return None;
    }
    let mut best = 0;
    for i in 1..pending.len() {
        let wi = pending[i].rect.max_width();
        let wb = pending[best].rect.max_width();
        if wi > wb
            || (wi == wb && pending[i].rect.order_key() < pending[best].rect.order_key())
        {
            best = i;
        }
    }
    Some(pending.remove(best))
}
