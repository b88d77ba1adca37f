//! Plain-float oracles for the integration suite: bisection, dense-grid curve
//! extraction, Newton polishing, sampled set distances, and a seeded generator
//! of random low-degree curve pairs. Nothing here touches the library's
//! interval or dyadic machinery — these are the independent answers the
//! library's output is compared against.

// Compiled once per test target; each target uses its own slice of this.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

pub type Pt = (f64, f64);
pub type Seg = (Pt, Pt);

/// Sign with the same tie-break the library uses: zero counts as positive.
fn sgn(v: f64) -> i32 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Bisection root of a continuous function with a sign change on [a, b],
/// to an interval width of 1e-12.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    assert!(fa * f(b) < 0.0, "bisection needs a sign change");
    while b - a > 1e-12 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fa * fm <= 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// A piecewise-linear extraction of `f = 0` over a rectangle on an `n` by `n`
/// cell grid (marching squares with center-sample saddle resolution).
pub struct CurveNet {
    pub segments: Vec<Seg>,
    /// Grid cell (column, row) each segment was produced in.
    pub seg_cells: Vec<(usize, usize)>,
    /// Connected components, with segment endpoints identified by the grid
    /// edge they lie on.
    pub components: usize,
    /// One endpoint per polyline end that stops on the rectangle boundary.
    pub open_ends: Vec<Pt>,
}

pub fn extract_curve(f: &dyn Fn(f64, f64) -> f64, roi: (f64, f64, f64, f64), n: usize) -> CurveNet {
    let (x0, y0, x1, y1) = roi;
    let hx = (x1 - x0) / n as f64;
    let hy = (y1 - y0) / n as f64;
    let nodes = n + 1;
    let mut vals = vec![0.0f64; nodes * nodes];
    for j in 0..nodes {
        let y = y0 + j as f64 * hy;
        for i in 0..nodes {
            vals[j * nodes + i] = f(x0 + i as f64 * hx, y);
        }
    }
    let val = |i: usize, j: usize| vals[j * nodes + i];

    // Grid-edge identifiers: horizontal edge (i,j)-(i+1,j) and vertical edge
    // (i,j)-(i,j+1).
    let h_id = |i: usize, j: usize| j * nodes + i;
    let v_id = |i: usize, j: usize| nodes * nodes + j * nodes + i;
    let cross = |va: f64, vb: f64| sgn(va) != sgn(vb);
    let lerp = |a: f64, b: f64, va: f64, vb: f64| {
        let t = (va / (va - vb)).clamp(0.0, 1.0);
        a + t * (b - a)
    };

    let mut segments = Vec::new();
    let mut seg_cells = Vec::new();
    let mut links: Vec<(usize, usize)> = Vec::new();
    let mut edge_uses: HashMap<usize, usize> = HashMap::new();
    for j in 0..n {
        for i in 0..n {
            let (sw, se, nw, ne) = (val(i, j), val(i + 1, j), val(i, j + 1), val(i + 1, j + 1));
            let xa = x0 + i as f64 * hx;
            let xb = xa + hx;
            let ya = y0 + j as f64 * hy;
            let yb = ya + hy;
            // Crossing point and edge id per crossed cell side, in the fixed
            // order south, east, north, west.
            let mut hits: Vec<(Pt, usize)> = Vec::new();
            if cross(sw, se) {
                hits.push(((lerp(xa, xb, sw, se), ya), h_id(i, j)));
            }
            if cross(se, ne) {
                hits.push(((xb, lerp(ya, yb, se, ne)), v_id(i + 1, j)));
            }
            if cross(nw, ne) {
                hits.push(((lerp(xa, xb, nw, ne), yb), h_id(i, j + 1)));
            }
            if cross(sw, nw) {
                hits.push(((xa, lerp(ya, yb, sw, nw)), v_id(i, j)));
            }
            let pairs: Vec<(usize, usize)> = match hits.len() {
                0 => continue,
                2 => vec![(0, 1)],
                4 => {
                    // Saddle: the two branches bend around the corners whose
                    // sign differs from the cell center's.
                    let center = f(0.5 * (xa + xb), 0.5 * (ya + yb));
                    if sgn(center) == sgn(sw) {
                        // Branches isolate SE and NW: (S,E) and (N,W).
                        vec![(0, 1), (2, 3)]
                    } else {
                        // Branches isolate SW and NE: (S,W) and (E,N).
                        vec![(0, 3), (1, 2)]
                    }
                }
                k => panic!("marching cell with {k} crossings"),
            };
            for (a, b) in pairs {
                segments.push((hits[a].0, hits[b].0));
                seg_cells.push((i, j));
                links.push((hits[a].1, hits[b].1));
                *edge_uses.entry(hits[a].1).or_insert(0) += 1;
                *edge_uses.entry(hits[b].1).or_insert(0) += 1;
            }
        }
    }

    // Union-find over the grid edges that carry crossings.
    let mut index: HashMap<usize, usize> = HashMap::new();
    for &(a, b) in &links {
        let k = index.len();
        index.entry(a).or_insert(k);
        let k = index.len();
        index.entry(b).or_insert(k);
    }
    let mut parent: Vec<usize> = (0..index.len()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in &links {
        let (ra, rb) = (find(&mut parent, index[&a]), find(&mut parent, index[&b]));
        parent[ra] = rb;
    }
    let mut reps: Vec<usize> = (0..parent.len()).map(|i| find(&mut parent, i)).collect();
    reps.sort();
    reps.dedup();

    // A crossing used by exactly one segment sits on an open polyline end;
    // for a net clipped to the rectangle that means a boundary point.
    let mut open_ends = Vec::new();
    for (si, &(a, b)) in links.iter().enumerate() {
        if edge_uses[&a] == 1 {
            open_ends.push(segments[si].0);
        }
        if edge_uses[&b] == 1 {
            open_ends.push(segments[si].1);
        }
    }

    CurveNet { segments, seg_cells, components: reps.len(), open_ends }
}

/// Intersection point of the supporting lines of two segments, if the lines
/// are not parallel and the point lies in both segments' bounding boxes
/// (inflated by a hair, so touching counts).
fn seg_crossing(s: &Seg, t: &Seg) -> Option<Pt> {
    let ((x1, y1), (x2, y2)) = *s;
    let ((x3, y3), (x4, y4)) = *t;
    let den = (x2 - x1) * (y4 - y3) - (y2 - y1) * (x4 - x3);
    if den.abs() < 1e-14 {
        return None;
    }
    let ta = ((x3 - x1) * (y4 - y3) - (y3 - y1) * (x4 - x3)) / den;
    let tb = ((x3 - x1) * (y2 - y1) - (y3 - y1) * (x2 - x1)) / den;
    let pad = 1e-9;
    if (-pad..=1.0 + pad).contains(&ta) && (-pad..=1.0 + pad).contains(&tb) {
        Some((x1 + ta * (x2 - x1), y1 + ta * (y2 - y1)))
    } else {
        None
    }
}

pub fn dist(a: Pt, b: Pt) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Common zeros of `f` and `g`, found by crossing the two nets and polishing
/// each crossing with Newton's method. `None` when a seed fails to converge —
/// the pair is then not trustworthy desk-scale input.
pub fn oracle_roots(
    f: &dyn Fn(f64, f64) -> f64,
    g: &dyn Fn(f64, f64) -> f64,
    jac: &dyn Fn(f64, f64) -> [[f64; 2]; 2],
    fnet: &CurveNet,
    gnet: &CurveNet,
) -> Option<Vec<Pt>> {
    let mut by_cell: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (k, &c) in gnet.seg_cells.iter().enumerate() {
        by_cell.entry(c).or_default().push(k);
    }
    let mut roots: Vec<Pt> = Vec::new();
    for (k, seg) in fnet.segments.iter().enumerate() {
        let (ci, cj) = fnet.seg_cells[k];
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                let cell = ((ci as i64 + di) as usize, (cj as i64 + dj) as usize);
                let Some(cands) = by_cell.get(&cell) else { continue };
                for &gk in cands {
                    let Some(seed) = seg_crossing(seg, &gnet.segments[gk]) else { continue };
                    let (mut x, mut y) = seed;
                    let mut converged = false;
                    for _ in 0..60 {
                        let (fv, gv) = (f(x, y), g(x, y));
                        let j = jac(x, y);
                        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                        if det.abs() < 1e-12 {
                            break;
                        }
                        let dx = (fv * j[1][1] - gv * j[0][1]) / det;
                        let dy = (gv * j[0][0] - fv * j[1][0]) / det;
                        x -= dx;
                        y -= dy;
                        if dx.abs() + dy.abs() < 1e-14 {
                            converged = true;
                            break;
                        }
                    }
                    if !converged || f(x, y).abs() > 1e-9 || g(x, y).abs() > 1e-9 {
                        return None;
                    }
                    if !roots.iter().any(|&r| dist(r, (x, y)) < 1e-6) {
                        roots.push((x, y));
                    }
                }
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(roots)
}

/// Walk a small circle around a transversal crossing and report whether the
/// sign changes of `f` and `g` interleave (f, g, f, g around the circle).
/// `None` when either curve does not cross the circle exactly twice.
pub fn circle_alternation(
    f: &dyn Fn(f64, f64) -> f64,
    g: &dyn Fn(f64, f64) -> f64,
    center: Pt,
    radius: f64,
) -> Option<bool> {
    let n = 720;
    let mut events: Vec<(usize, u8)> = Vec::new();
    let eval = |k: usize| {
        let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let p = (center.0 + radius * th.cos(), center.1 + radius * th.sin());
        (sgn(f(p.0, p.1)), sgn(g(p.0, p.1)))
    };
    let mut prev = eval(0);
    for k in 1..=n {
        let cur = eval(k % n);
        if cur.0 != prev.0 {
            events.push((k, 0));
        }
        if cur.1 != prev.1 {
            events.push((k, 1));
        }
        prev = cur;
    }
    let flips_f = events.iter().filter(|e| e.1 == 0).count();
    let flips_g = events.iter().filter(|e| e.1 == 1).count();
    if flips_f != 2 || flips_g != 2 || events.len() != 4 {
        return None;
    }
    events.sort();
    Some(events[0].1 != events[1].1 && events[1].1 != events[2].1 && events[2].1 != events[3].1)
}

pub fn point_seg_dist(p: Pt, a: Pt, b: Pt) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0)
    };
    dist(p, (a.0 + t * vx, a.1 + t * vy))
}

pub fn dist_to_segs(p: Pt, segs: &[Seg]) -> f64 {
    segs.iter().map(|&(a, b)| point_seg_dist(p, a, b)).fold(f64::INFINITY, f64::min)
}

/// `n` points spread over a segment soup by cumulative length (degenerate
/// soups contribute their endpoints).
pub fn sample_segs(segs: &[Seg], n: usize) -> Vec<Pt> {
    let total: f64 = segs.iter().map(|&(a, b)| dist(a, b)).sum();
    if segs.is_empty() {
        return Vec::new();
    }
    if total == 0.0 {
        return segs.iter().map(|&(a, _)| a).take(n).collect();
    }
    let mut out = Vec::with_capacity(n);
    let step = total / n as f64;
    let mut want = 0.5 * step;
    let mut done = 0.0;
    for &(a, b) in segs {
        let len = dist(a, b);
        while want <= done + len && out.len() < n {
            let t = if len == 0.0 { 0.0 } else { (want - done) / len };
            out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
            want += step;
        }
        done += len;
    }
    out
}

/// Symmetric sampled Hausdorff distance between two segment soups.
pub fn sampled_hausdorff(a: &[Seg], b: &[Seg], samples: usize) -> f64 {
    let mut worst = 0.0f64;
    for p in sample_segs(a, samples) {
        worst = worst.max(dist_to_segs(p, b));
    }
    for p in sample_segs(b, samples) {
        worst = worst.max(dist_to_segs(p, a));
    }
    worst
}

/// A bivariate polynomial as a list of nonzero terms `c * x^i * y^j`.
#[derive(Clone, Debug)]
pub struct TermPoly {
    pub terms: Vec<(u32, u32, f64)>,
}

impl TermPoly {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|&(i, j, c)| c * x.powi(i as i32) * y.powi(j as i32)).sum()
    }

    pub fn dx(&self) -> TermPoly {
        let terms = self
            .terms
            .iter()
            .filter(|&&(i, _, _)| i > 0)
            .map(|&(i, j, c)| (i - 1, j, c * i as f64))
            .collect();
        TermPoly { terms }
    }

    pub fn dy(&self) -> TermPoly {
        let terms = self
            .terms
            .iter()
            .filter(|&&(_, j, _)| j > 0)
            .map(|&(i, j, c)| (i, j - 1, c * j as f64))
            .collect();
        TermPoly { terms }
    }

    /// Formula text the library's parser reads back exactly: coefficients are
    /// sixteenths, so their decimal forms are finite.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for &(i, j, c) in &self.terms {
            let mag = c.abs();
            if out.is_empty() {
                if c < 0.0 {
                    out.push('-');
                }
            } else {
                out.push_str(if c < 0.0 { " - " } else { " + " });
            }
            let mut factors = Vec::new();
            if mag != 1.0 || (i == 0 && j == 0) {
                factors.push(format!("{mag}"));
            }
            match i {
                0 => {}
                1 => factors.push("x".into()),
                _ => factors.push(format!("x^{i}")),
            }
            match j {
                0 => {}
                1 => factors.push("y".into()),
                _ => factors.push(format!("y^{j}")),
            }
            out.push_str(&factors.join("*"));
        }
        if out.is_empty() {
            out.push('0');
        }
        out
    }
}

/// Random dense polynomial of total degree <= 3 with coefficients on the
/// sixteenths lattice in [-2, 2]; at least one term of each drawn polynomial
/// is nonzero.
pub fn random_poly(rng: &mut ChaCha8Rng) -> TermPoly {
    loop {
        let mut terms = Vec::new();
        for i in 0..=3u32 {
            for j in 0..=3u32 - i {
                let c = rng.gen_range(-32i32..=32) as f64 / 16.0;
                if c != 0.0 {
                    terms.push((i, j, c));
                }
            }
        }
        if !terms.is_empty() {
            return TermPoly { terms };
        }
    }
}
