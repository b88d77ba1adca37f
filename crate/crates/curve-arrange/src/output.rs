//! Artifact emitters: canonical JSON, an SVG rendering, and the root report.
//!
//! The JSON document is the stable wire format. Coordinates are the exact
//! decimal expansions of the dyadic values (every dyadic is a finite decimal),
//! so emission loses nothing and golden files diff cleanly. Output order is
//! canonical — vertices by (y, x), edges by (min id, max id, label) — which
//! makes repeated runs byte-identical.

use serde::{Deserialize, Serialize};

use crate::arrange::{Pslg, VertexKind};
use crate::funcmodel::Which;
use crate::numeric::Box2;
use crate::predicates::BoxClass;
use crate::subdiv::Cell;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonVertex {
    pub id: usize,
    pub x: String,
    pub y: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonEdge {
    pub u: usize,
    pub v: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonRoot {
    pub rect: [String; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonBox {
    pub rect: [String; 4],
    pub depth: i64,
    pub class: String,
}

/// The complete document. `boxes` is omitted from the output entirely unless
/// the caller asked for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonDoc {
    pub vertices: Vec<JsonVertex>,
    pub edges: Vec<JsonEdge>,
    pub roots: Vec<JsonRoot>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<JsonBox>>,
}

fn kind_str(k: VertexKind) -> &'static str {
    match k {
        VertexKind::F => "f",
        VertexKind::G => "g",
        VertexKind::Root => "root",
    }
}

fn label_str(w: Which) -> &'static str {
    match w {
        Which::F => "S",
        Which::G => "T",
    }
}

fn class_str(c: BoxClass) -> &'static str {
    match c {
        BoxClass::Unresolved => "unresolved",
        BoxClass::Excluded => "excluded",
        BoxClass::FCandidate => "f",
        BoxClass::GCandidate => "g",
        BoxClass::FGCandidate => "fg",
    }
}

fn rect_strings(b: &Box2) -> [String; 4] {
    [
        b.x0.to_decimal_string(),
        b.y0.to_decimal_string(),
        b.x1.to_decimal_string(),
        b.y1.to_decimal_string(),
    ]
}

/// Build the canonical document: vertices renumbered in (y, x) order, edges
/// normalized to (min id, max id) and sorted by (u, v, label), roots sorted by
/// position.
pub fn json_document(pslg: &Pslg, roots: &[Box2], boxes: Option<&[Cell]>) -> JsonDoc {
    let mut order: Vec<usize> = (0..pslg.vertices.len()).collect();
    order.sort_by(|&a, &b| {
        pslg.vertices[a]
            .p
            .cmp(&pslg.vertices[b].p)
            .then(a.cmp(&b))
    });
    let mut renum = vec![0usize; pslg.vertices.len()];
    for (new_id, &old_id) in order.iter().enumerate() {
        renum[old_id] = new_id;
    }
    let vertices = order
        .iter()
        .enumerate()
        .map(|(id, &old)| {
            let v = &pslg.vertices[old];
            JsonVertex {
                id,
                x: v.p.x.to_decimal_string(),
                y: v.p.y.to_decimal_string(),
                kind: kind_str(v.kind).to_string(),
            }
        })
        .collect();
    let mut edges: Vec<JsonEdge> = pslg
        .edges
        .iter()
        .map(|e| {
            let (u, v) = (renum[e.u].min(renum[e.v]), renum[e.u].max(renum[e.v]));
            JsonEdge {
                u,
                v,
                label: label_str(e.label).to_string(),
            }
        })
        .collect();
    edges.sort_by(|a, b| (a.u, a.v, &a.label).cmp(&(b.u, b.v, &b.label)));
    let mut root_rects: Vec<&Box2> = roots.iter().collect();
    root_rects.sort_by_key(|r| r.order_key());
    let roots = root_rects
        .into_iter()
        .map(|r| JsonRoot {
            rect: rect_strings(r),
        })
        .collect();
    let boxes = boxes.map(|cells| {
        cells
            .iter()
            .map(|c| JsonBox {
                rect: rect_strings(&c.rect),
                depth: c.depth,
                class: class_str(c.class).to_string(),
            })
            .collect()
    });
    JsonDoc {
        vertices,
        edges,
        roots,
        boxes,
    }
}

pub fn emit_json(pslg: &Pslg, roots: &[Box2], boxes: Option<&[Cell]>) -> String {
    serde_json::to_string(&json_document(pslg, roots, boxes))
        .expect("document serialization cannot fail")
}

pub fn parse_json(doc: &str) -> serde_json::Result<JsonDoc> {
    serde_json::from_str(doc)
}

/// Root report: one line per intersection, the containing rectangle as four
/// exact decimals.
pub fn emit_roots(roots: &[Box2]) -> String {
    let mut rects: Vec<&Box2> = roots.iter().collect();
    rects.sort_by_key(|r| r.order_key());
    let mut out = String::new();
    for r in rects {
        let [x0, y0, x1, y1] = rect_strings(r);
        out.push_str(&format!("{x0},{y0},{x1},{y1}\n"));
    }
    out
}

/// SVG rendering. The drawing group is mirrored in y so the mathematical
/// orientation (y up) matches the image; all coordinates stay exact decimals.
pub fn emit_svg(pslg: &Pslg, roi: &Box2, boxes: Option<&[Cell]>) -> String {
    let w = roi.width_x();
    let h = roi.width_y();
    let stroke = roi.max_width().mul_pow2(-9).to_decimal_string();
    let hair = roi.max_width().mul_pow2(-11).to_decimal_string();
    let marker_r = roi.max_width().mul_pow2(-7).to_decimal_string();
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
        roi.x0.to_decimal_string(),
        (-roi.y1.clone()).to_decimal_string(),
        w.to_decimal_string(),
        h.to_decimal_string()
    ));
    svg.push_str("<g transform=\"scale(1,-1)\">\n");
    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\" \
         stroke=\"#444444\" stroke-width=\"{hair}\"/>\n",
        roi.x0.to_decimal_string(),
        roi.y0.to_decimal_string(),
        w.to_decimal_string(),
        h.to_decimal_string()
    ));
    if let Some(cells) = boxes {
        for c in cells {
            let fill = match c.class {
                BoxClass::Unresolved => "#fcf3cf",
                BoxClass::Excluded => "#f7f7f7",
                BoxClass::FCandidate => "#fadbd8",
                BoxClass::GCandidate => "#d6eaf8",
                BoxClass::FGCandidate => "#e8daef",
            };
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" \
                 stroke=\"#cccccc\" stroke-width=\"{hair}\"/>\n",
                c.rect.x0.to_decimal_string(),
                c.rect.y0.to_decimal_string(),
                c.rect.width_x().to_decimal_string(),
                c.rect.width_y().to_decimal_string()
            ));
        }
    }
    let doc = json_document(pslg, &[], None);
    for e in &doc.edges {
        let color = if e.label == "S" { "#c0392b" } else { "#2471a3" };
        let (u, v) = (&doc.vertices[e.u], &doc.vertices[e.v]);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" \
             stroke-width=\"{stroke}\" stroke-linecap=\"round\"/>\n",
            u.x, u.y, v.x, v.y
        ));
    }
    for v in &doc.vertices {
        if v.kind == "root" {
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"{marker_r}\" fill=\"#111111\"/>\n",
                v.x, v.y
            ));
        }
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrange::{PslgEdge, PslgVertex};
    use crate::numeric::{Dyadic, Point2};

    fn d(v: f64) -> Dyadic {
        Dyadic::from_f64(v).unwrap()
    }

    fn pt(x: f64, y: f64) -> Point2 {
        Point2::new(d(x), d(y))
    }

    #[test]
    fn empty_arrangement_has_fixed_bytes() {
        let doc = emit_json(&Pslg::default(), &[], None);
        assert_eq!(doc, r#"{"vertices":[],"edges":[],"roots":[]}"#);
    }

    /// The coordinate-axes picture: one intersection vertex joined to four
    /// crossings, hand-built to pin the schema.
    fn axes_pslg() -> (Pslg, Vec<Box2>) {
        let verts = vec![
            PslgVertex { p: pt(0.0, 0.0), kind: VertexKind::Root },
            PslgVertex { p: pt(-1.0, 0.0), kind: VertexKind::F },
            PslgVertex { p: pt(1.0, 0.0), kind: VertexKind::F },
            PslgVertex { p: pt(0.0, -1.0), kind: VertexKind::G },
            PslgVertex { p: pt(0.0, 1.0), kind: VertexKind::G },
        ];
        let edges = vec![
            PslgEdge { u: 0, v: 1, label: Which::F, cell: 0 },
            PslgEdge { u: 0, v: 2, label: Which::F, cell: 0 },
            PslgEdge { u: 0, v: 3, label: Which::G, cell: 0 },
            PslgEdge { u: 0, v: 4, label: Which::G, cell: 0 },
        ];
        let rect = Box2::new(d(-0.25), d(-0.25), d(0.25), d(0.25));
        (Pslg { vertices: verts, edges }, vec![rect])
    }

    #[test]
    fn axes_document_has_five_vertices_four_edges_one_root() {
        let (pslg, roots) = axes_pslg();
        let doc = json_document(&pslg, &roots, None);
        assert_eq!(doc.vertices.len(), 5);
        assert_eq!(doc.edges.len(), 4);
        assert_eq!(doc.roots.len(), 1);
        // Canonical vertex order is by (y, x): bottom crossing first.
        assert_eq!(doc.vertices[0].kind, "g");
        assert_eq!(doc.vertices[0].y, "-1");
        assert_eq!(doc.vertices[2].kind, "root");
        // Edges are sorted and normalized to (min, max).
        for e in &doc.edges {
            assert!(e.u < e.v);
        }
        for pair in doc.edges.windows(2) {
            assert!((pair[0].u, pair[0].v) <= (pair[1].u, pair[1].v));
        }
        assert_eq!(doc.roots[0].rect[0], "-0.25");
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let (pslg, roots) = axes_pslg();
        let bytes = emit_json(&pslg, &roots, None);
        let parsed = parse_json(&bytes).unwrap();
        let again = serde_json::to_string(&parsed).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn boxes_key_appears_only_on_request() {
        let cells = vec![Cell {
            rect: Box2::new(d(0.0), d(0.0), d(1.0), d(1.0)),
            depth: 0,
            class: BoxClass::Excluded,
            root_index: None,
        }];
        let without = emit_json(&Pslg::default(), &[], None);
        assert!(!without.contains("boxes"));
        let with = emit_json(&Pslg::default(), &[], Some(&cells));
        assert!(with.contains(r#""boxes":[{"rect":["0","0","1","1"],"depth":0,"class":"excluded"}]"#));
    }

    #[test]
    fn svg_counts_match_the_graph() {
        let (pslg, _) = axes_pslg();
        let roi = Box2::new(d(-1.0), d(-1.0), d(1.0), d(1.0));
        let svg = emit_svg(&pslg, &roi, None);
        assert_eq!(svg.matches("<line").count(), pslg.edges.len());
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("<rect").count(), 1); // region frame only
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        // Emission is deterministic.
        assert_eq!(svg, emit_svg(&pslg, &roi, None));
    }

    #[test]
    fn roots_report_lists_sorted_rectangles() {
        let a = Box2::new(d(0.5), d(0.5), d(1.0), d(1.0));
        let b = Box2::new(d(-1.0), d(-1.0), d(-0.5), d(-0.5));
        let report = emit_roots(&[a, b]);
        assert_eq!(report, "-1,-1,-0.5,-0.5\n0.5,0.5,1,1\n");
    }
}
