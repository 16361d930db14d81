//! 2D meshes of triangles or axis-aligned quadrilaterals with at most one
//! hanging node per face.
//!
//! Elements refine into four similar children (quads split at edge
//! midpoints, triangles split red into four congruent children). Hanging
//! nodes carry no degree-of-freedom constraints; they only fragment face
//! integration into mortar sub-faces. Records are append-only: coarsening
//! and refinement toggle `active` flags so that an identical operation
//! sequence reproduces bit-identical topology.

mod refine;

pub use refine::{Closure, CoarsenEvent, RefineOutcome};

use crate::basis::ElemKind;
use nalgebra::{Matrix2, Vector2};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("unsupported domain/kind pairing: {0}")]
    Unsupported(String),
    #[error("red-green closure requires a triangular mesh")]
    RedGreenOnQuads,
    #[error("face {0} has no minus side")]
    NoMinusSide(usize),
    #[error("invalid mesh: {0}")]
    Invalid(String),
}

/// Computational domains used by the benchmarks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    UnitSquare,
    /// (-1,1)^2 minus the closed quadrant [0,1) x (-1,0].
    LShape,
}

impl Domain {
    pub fn area(&self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub id: usize,
    pub coords: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct ElementRecord {
    pub id: usize,
    pub kind: ElemKind,
    /// Counterclockwise vertex ids (3 for triangles, 4 for quads).
    pub vertex_ids: Vec<usize>,
    pub level: u32,
    pub parent: Option<usize>,
    /// Red children (always 4), kept across coarsening for exact re-merge.
    pub children: Option<Vec<usize>>,
    /// Green bisection pair, if this element is currently green-split.
    pub green_children: Option<[usize; 2]>,
    pub active: bool,
    /// Element diameter.
    pub h: f64,
    /// True for green closure elements; these are never refined directly.
    pub green: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    Interior,
    Boundary,
}

/// Which side of a face an element sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceSide {
    Plus,
    Minus,
}

#[derive(Clone, Debug)]
pub struct FaceRecord {
    pub id: usize,
    /// Endpoint vertex ids, ordered along the plus element's boundary walk.
    pub vertex_ids: [usize; 2],
    pub kind: FaceKind,
    pub plus_elem: usize,
    pub minus_elem: Option<usize>,
    /// Unit normal pointing out of the plus element.
    pub normal: [f64; 2],
    /// Unit tangent, normal rotated by +90 degrees.
    pub tangent: [f64; 2],
    /// Face diameter (segment length).
    pub h: f64,
    /// Sub-face ids when this face carries a hanging node. Such a parent
    /// face is skipped by integration; its sub-faces are integrated instead.
    pub mortar: Option<Vec<usize>>,
}

impl FaceRecord {
    pub fn is_integration_face(&self) -> bool {
        self.mortar.is_none()
    }
}

/// Affine map from the reference element onto a physical element.
#[derive(Clone, Copy, Debug)]
pub struct ElementMap {
    pub jac: Matrix2<f64>,
    pub inv: Matrix2<f64>,
    pub origin: Vector2<f64>,
    pub det: f64,
}

impl ElementMap {
    pub fn to_physical(&self, r: [f64; 2]) -> [f64; 2] {
        let p = self.origin + self.jac * Vector2::new(r[0], r[1]);
        [p.x, p.y]
    }

    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let r = self.inv * (Vector2::new(x[0], x[1]) - self.origin);
        [r.x, r.y]
    }
}

/// Affine parametrization [0,1] -> reference coordinates of an element,
/// tracing a face (or mortar sub-face) in its stored physical direction.
#[derive(Clone, Copy, Debug)]
pub struct TraceMap {
    pub start: [f64; 2],
    pub end: [f64; 2],
}

impl TraceMap {
    pub fn eval(&self, t: f64) -> [f64; 2] {
        [
            self.start[0] + t * (self.end[0] - self.start[0]),
            self.start[1] + t * (self.end[1] - self.start[1]),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub domain: Domain,
    pub kind: ElemKind,
    pub vertices: Vec<Vertex>,
    pub elements: Vec<ElementRecord>,
    pub faces: Vec<FaceRecord>,
    /// Per-element polynomial degree (indexed by element id, >= 2).
    pub degree: Vec<usize>,
    /// Midpoint vertex of an edge, keyed by sorted endpoint ids.
    pub(crate) edge_midpoints: BTreeMap<(usize, usize), usize>,
}

impl Mesh {
    /// Builds a structured initial mesh with uniform degree `p0`.
    pub fn build_initial(
        domain: Domain,
        kind: ElemKind,
        n_per_side: usize,
        p0: usize,
    ) -> Result<Mesh, MeshError> {
        if n_per_side < 1 {
            return Err(MeshError::Unsupported(
                "n_per_side must be at least 1".into(),
            ));
        }
        if p0 < 2 {
            return Err(MeshError::Unsupported("degree must be at least 2".into()));
        }
        let mut mesh = Mesh {
            domain,
            kind,
            vertices: Vec::new(),
            elements: Vec::new(),
            faces: Vec::new(),
            degree: Vec::new(),
            edge_midpoints: BTreeMap::new(),
        };
        let blocks: &[[f64; 4]] = match domain {
            Domain::UnitSquare => &[[0.0, 1.0, 0.0, 1.0]],
            // Second, first, and third quadrants of (-1,1)^2.
            Domain::LShape => &[
                [-1.0, 0.0, 0.0, 1.0],
                [0.0, 1.0, 0.0, 1.0],
                [-1.0, 0.0, -1.0, 0.0],
            ],
        };
        let n = n_per_side;
        let mut lookup: BTreeMap<(u64, u64), usize> = BTreeMap::new();
        let coord = |lo: f64, hi: f64, i: usize| -> f64 {
            ((n - i) as f64 * lo + i as f64 * hi) / n as f64
        };
        for block in blocks {
            let [x_lo, x_hi, y_lo, y_hi] = *block;
            for j in 0..n {
                for i in 0..n {
                    let xs = [coord(x_lo, x_hi, i), coord(x_lo, x_hi, i + 1)];
                    let ys = [coord(y_lo, y_hi, j), coord(y_lo, y_hi, j + 1)];
                    let mut corner = |x: f64, y: f64, m: &mut Mesh| -> usize {
                        let key = (x.to_bits(), y.to_bits());
                        *lookup.entry(key).or_insert_with(|| m.push_vertex([x, y]))
                    };
                    let a = corner(xs[0], ys[0], &mut mesh);
                    let b = corner(xs[1], ys[0], &mut mesh);
                    let c = corner(xs[1], ys[1], &mut mesh);
                    let d = corner(xs[0], ys[1], &mut mesh);
                    match kind {
                        ElemKind::Quad => {
                            mesh.push_element(ElemKind::Quad, vec![a, b, c, d], 0, None, p0);
                        }
                        ElemKind::Triangle => {
                            // Diagonal along (1,1) keeps the L-shape mesh
                            // symmetric under (x,y) -> (-y,-x).
                            mesh.push_element(ElemKind::Triangle, vec![a, b, c], 0, None, p0);
                            mesh.push_element(ElemKind::Triangle, vec![a, c, d], 0, None, p0);
                        }
                    }
                }
            }
        }
        mesh.rebuild_faces();
        Ok(mesh)
    }

    pub(crate) fn push_vertex(&mut self, coords: [f64; 2]) -> usize {
        let id = self.vertices.len();
        self.vertices.push(Vertex { id, coords });
        id
    }

    pub(crate) fn push_element(
        &mut self,
        kind: ElemKind,
        vertex_ids: Vec<usize>,
        level: u32,
        parent: Option<usize>,
        p: usize,
    ) -> usize {
        let id = self.elements.len();
        let h = self.hull_diameter(&vertex_ids);
        self.elements.push(ElementRecord {
            id,
            kind,
            vertex_ids,
            level,
            parent,
            children: None,
            green_children: None,
            active: true,
            h,
            green: false,
        });
        self.degree.push(p);
        id
    }

    fn hull_diameter(&self, vids: &[usize]) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..vids.len() {
            for j in (i + 1)..vids.len() {
                let a = self.vertices[vids[i]].coords;
                let b = self.vertices[vids[j]].coords;
                d = d.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        d
    }

    pub fn coords(&self, v: usize) -> [f64; 2] {
        self.vertices[v].coords
    }

    pub fn n_active(&self) -> usize {
        self.elements.iter().filter(|e| e.active).count()
    }

    pub fn active_ids(&self) -> Vec<usize> {
        self.elements
            .iter()
            .filter(|e| e.active)
            .map(|e| e.id)
            .collect()
    }

    pub fn p(&self, elem: usize) -> usize {
        self.degree[elem]
    }

    /// Midpoint vertex of the edge (a, b), creating it on first use.
    pub(crate) fn midpoint(&mut self, a: usize, b: usize) -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&m) = self.edge_midpoints.get(&key) {
            return m;
        }
        let pa = self.coords(a);
        let pb = self.coords(b);
        let m = self.push_vertex([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        self.edge_midpoints.insert(key, m);
        m
    }

    pub(crate) fn existing_midpoint(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_midpoints
            .get(&(a.min(b), a.max(b)))
            .copied()
    }

    /// Affine reference-to-physical map of an element.
    pub fn element_map(&self, elem: usize) -> ElementMap {
        let e = &self.elements[elem];
        let v0 = Vector2::from(self.coords(e.vertex_ids[0]));
        let v1 = Vector2::from(self.coords(e.vertex_ids[1]));
        let last = match e.kind {
            ElemKind::Triangle => self.coords(e.vertex_ids[2]),
            ElemKind::Quad => self.coords(e.vertex_ids[3]),
        };
        let v2 = Vector2::from(last);
        let jac = Matrix2::from_columns(&[v1 - v0, v2 - v0]);
        let det = jac.determinant();
        let inv = jac.try_inverse().expect("degenerate element geometry");
        ElementMap {
            jac,
            inv,
            origin: v0,
            det,
        }
    }

    /// Jacobian determinant of the reference-to-physical map, computed
    /// without inverting (safe on degenerate geometry).
    pub fn map_determinant(&self, elem: usize) -> f64 {
        let e = &self.elements[elem];
        let v0 = self.coords(e.vertex_ids[0]);
        let v1 = self.coords(e.vertex_ids[1]);
        let last = match e.kind {
            ElemKind::Triangle => self.coords(e.vertex_ids[2]),
            ElemKind::Quad => self.coords(e.vertex_ids[3]),
        };
        (v1[0] - v0[0]) * (last[1] - v0[1]) - (v1[1] - v0[1]) * (last[0] - v0[0])
    }

    /// Element area.
    pub fn area(&self, elem: usize) -> f64 {
        let det = self.map_determinant(elem).abs();
        match self.elements[elem].kind {
            ElemKind::Triangle => 0.5 * det,
            ElemKind::Quad => det,
        }
    }

    /// Face ids that take part in integration (mortar parents excluded).
    pub fn integration_faces(&self) -> impl Iterator<Item = &FaceRecord> {
        self.faces.iter().filter(|f| f.is_integration_face())
    }

    /// Facewise polynomial degree: max of the two neighbours on interior
    /// faces, the element degree on boundary faces.
    pub fn face_degree(&self, face: &FaceRecord) -> usize {
        match face.minus_elem {
            Some(minus) => self.degree[face.plus_elem].max(self.degree[minus]),
            None => self.degree[face.plus_elem],
        }
    }

    /// Trace parametrization of a face from one of its sides. Plus and
    /// Minus both traverse the physical segment in the stored direction.
    pub fn face_trace_map(&self, face: usize, side: FaceSide) -> Result<TraceMap, MeshError> {
        let f = &self.faces[face];
        let elem = match side {
            FaceSide::Plus => f.plus_elem,
            FaceSide::Minus => f.minus_elem.ok_or(MeshError::NoMinusSide(face))?,
        };
        let map = self.element_map(elem);
        let a = self.coords(f.vertex_ids[0]);
        let b = self.coords(f.vertex_ids[1]);
        Ok(TraceMap {
            start: map.to_reference(a),
            end: map.to_reference(b),
        })
    }

    /// Local edges of an element as directed vertex pairs (CCW walk).
    pub(crate) fn element_edges(&self, elem: usize) -> Vec<(usize, usize)> {
        let vids = &self.elements[elem].vertex_ids;
        (0..vids.len())
            .map(|i| (vids[i], vids[(i + 1) % vids.len()]))
            .collect()
    }

    /// Rebuilds the face list from the active elements.
    pub(crate) fn rebuild_faces(&mut self) {
        self.faces.clear();
        // Undirected edge -> (element, directed pair) entries.
        let mut edge_map: BTreeMap<(usize, usize), Vec<(usize, (usize, usize))>> = BTreeMap::new();
        let active: Vec<usize> = self.active_ids();
        for &e in &active {
            for (a, b) in self.element_edges(e) {
                edge_map
                    .entry((a.min(b), a.max(b)))
                    .or_default()
                    .push((e, (a, b)));
            }
        }

        let mut consumed: BTreeMap<(usize, usize), bool> = BTreeMap::new();
        // Conforming faces first, in element-id order of traversal.
        for &e in &active {
            for (a, b) in self.element_edges(e) {
                let key = (a.min(b), a.max(b));
                if consumed.contains_key(&key) {
                    continue;
                }
                let entries = &edge_map[&key];
                if entries.len() == 2 {
                    consumed.insert(key, true);
                    let (e1, d1) = entries[0];
                    let (e2, d2) = entries[1];
                    let (plus, dir, minus) = if e1 < e2 { (e1, d1, e2) } else { (e2, d2, e1) };
                    self.push_face(dir, FaceKind::Interior, plus, Some(minus), None);
                }
            }
        }
        // Hanging faces: a leftover coarse edge whose two halves are leftover
        // fine edges of other elements.
        for &e in &active {
            for (a, b) in self.element_edges(e) {
                let key = (a.min(b), a.max(b));
                if consumed.contains_key(&key) {
                    continue;
                }
                let m = match self.existing_midpoint(a, b) {
                    Some(m) => m,
                    None => continue,
                };
                let half = |x: usize, y: usize| -> Option<(usize, (usize, usize))> {
                    let k = (x.min(y), x.max(y));
                    if consumed.contains_key(&k) {
                        return None;
                    }
                    match edge_map.get(&k) {
                        Some(v) if v.len() == 1 => Some(v[0]),
                        _ => None,
                    }
                };
                let (h1, h2) = match (half(a, m), half(m, b)) {
                    (Some(h1), Some(h2)) => (h1, h2),
                    _ => continue,
                };
                consumed.insert(key, true);
                consumed.insert((a.min(m), a.max(m)), true);
                consumed.insert((m.min(b), m.max(b)), true);
                // Two sub-faces; plus side per smaller element id.
                let mut subs = Vec::with_capacity(2);
                for (fine, sub) in [(h1.0, (a, m)), (h2.0, (m, b))] {
                    let (plus, dir, minus) = if e < fine {
                        (e, sub, fine)
                    } else {
                        // Use the fine element's own traversal direction.
                        let fdir = if fine == h1.0 { h1.1 } else { h2.1 };
                        (fine, fdir, e)
                    };
                    let id = self.push_face(dir, FaceKind::Interior, plus, Some(minus), None);
                    subs.push(id);
                }
                self.push_face((a, b), FaceKind::Interior, e, None, Some(subs));
            }
        }
        // Everything still unmatched is a boundary face.
        for &e in &active {
            for (a, b) in self.element_edges(e) {
                let key = (a.min(b), a.max(b));
                if consumed.contains_key(&key) {
                    continue;
                }
                let entries = &edge_map[&key];
                if entries.len() == 1 {
                    consumed.insert(key, true);
                    self.push_face((a, b), FaceKind::Boundary, e, None, None);
                }
            }
        }
    }

    fn push_face(
        &mut self,
        dir: (usize, usize),
        kind: FaceKind,
        plus: usize,
        minus: Option<usize>,
        mortar: Option<Vec<usize>>,
    ) -> usize {
        let id = self.faces.len();
        let a = self.coords(dir.0);
        let b = self.coords(dir.1);
        let dx = b[0] - a[0];
        let dy = b[1] - a[1];
        let len = (dx * dx + dy * dy).sqrt();
        // The plus element walks a -> b counterclockwise, so its outward
        // normal is the right-hand normal of the walk direction.
        let normal = [dy / len, -dx / len];
        let tangent = [-normal[1], normal[0]];
        self.faces.push(FaceRecord {
            id,
            vertex_ids: [dir.0, dir.1],
            kind,
            plus_elem: plus,
            minus_elem: minus,
            normal,
            tangent,
            h: len,
            mortar,
        });
        id
    }

    /// Plain-text dump: referenced vertices, active elements, faces,
    /// ordered by id.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut used: Vec<bool> = vec![false; self.vertices.len()];
        for e in self.elements.iter().filter(|e| e.active) {
            for &v in &e.vertex_ids {
                used[v] = true;
            }
        }
        for f in &self.faces {
            for &v in &f.vertex_ids {
                used[v] = true;
            }
        }
        for v in self.vertices.iter().filter(|v| used[v.id]) {
            writeln!(out, "v {} {:.17} {:.17}", v.id, v.coords[0], v.coords[1]).unwrap();
        }
        for e in self.elements.iter().filter(|e| e.active) {
            let kind = match e.kind {
                ElemKind::Triangle => "T",
                ElemKind::Quad => "Q",
            };
            let vids: Vec<String> = e.vertex_ids.iter().map(|v| v.to_string()).collect();
            writeln!(out, "e {} {} {} {}", e.id, kind, self.degree[e.id], vids.join(" ")).unwrap();
        }
        for f in &self.faces {
            let kind = match f.kind {
                FaceKind::Interior => "I",
                FaceKind::Boundary => "B",
            };
            let minus = f
                .minus_elem
                .map(|m| m.to_string())
                .unwrap_or_else(|| "-".into());
            writeln!(out, "f {} {} {} {}", f.id, kind, f.plus_elem, minus).unwrap();
        }
        out
    }

    /// Verifies the mesh invariants, returning a description of the first
    /// violation found.
    pub fn validate(&self) -> Result<(), MeshError> {
        let total_area: f64 = self
            .elements
            .iter()
            .filter(|e| e.active)
            .map(|e| self.area(e.id))
            .sum();
        let expect = self.domain.area();
        if ((total_area - expect) / expect).abs() > 1e-10 {
            return Err(MeshError::Invalid(format!(
                "active elements cover area {total_area}, expected {expect}"
            )));
        }
        for f in &self.faces {
            let n = f.normal;
            let t = f.tangent;
            if (n[0] * n[0] + n[1] * n[1] - 1.0).abs() > 1e-12
                || (n[0] * t[0] + n[1] * t[1]).abs() > 1e-12
            {
                return Err(MeshError::Invalid(format!("face {} frame not orthonormal", f.id)));
            }
            if let Some(subs) = &f.mortar {
                let sub_len: f64 = subs.iter().map(|&s| self.faces[s].h).sum();
                if (sub_len - f.h).abs() > 1e-12 * f.h {
                    return Err(MeshError::Invalid(format!(
                        "mortar sub-faces of face {} do not partition it",
                        f.id
                    )));
                }
            }
        }
        // At most one hanging node per face: every coarse edge must be
        // covered by at most two active sub-edges.
        let mut edge_set: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for e in self.elements.iter().filter(|e| e.active) {
            for (a, b) in self.element_edges(e.id) {
                *edge_set.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        for e in self.elements.iter().filter(|e| e.active) {
            for (a, b) in self.element_edges(e.id) {
                if self.hanging_depth(a, b, &edge_set) > 1 {
                    return Err(MeshError::Invalid(format!(
                        "edge ({a},{b}) of element {} carries more than one hanging node",
                        e.id
                    )));
                }
            }
        }
        // Degree compatibility and local quasi-uniformity across faces.
        for f in self.integration_faces() {
            if let Some(minus) = f.minus_elem {
                let (p1, p2) = (self.degree[f.plus_elem], self.degree[minus]);
                if p1.abs_diff(p2) > 1 {
                    return Err(MeshError::Invalid(format!(
                        "degree jump {p1} vs {p2} across face {}",
                        f.id
                    )));
                }
                let (h1, h2) = (self.elements[f.plus_elem].h, self.elements[minus].h);
                let ratio = (h1 / h2).max(h2 / h1);
                if ratio > 4.0 + 1e-12 {
                    return Err(MeshError::Invalid(format!(
                        "size ratio {ratio} across face {}",
                        f.id
                    )));
                }
            }
        }
        for e in self.elements.iter().filter(|e| e.active) {
            if self.degree[e.id] < 2 {
                return Err(MeshError::Invalid(format!("element {} has degree < 2", e.id)));
            }
            // Shape-regularity via diameter / inradius.
            let area = self.area(e.id);
            let perimeter: f64 = self
                .element_edges(e.id)
                .iter()
                .map(|&(a, b)| {
                    let pa = self.coords(a);
                    let pb = self.coords(b);
                    ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
                })
                .sum();
            let inradius = match e.kind {
                ElemKind::Triangle => 2.0 * area / perimeter,
                // For axis-aligned rectangles the inradius is half the
                // shorter side; 2A/P equals width*height/(width+height),
                // which is within a factor 2, good enough as a bound.
                ElemKind::Quad => 2.0 * area / perimeter,
            };
            if e.h / inradius > 10.0 {
                return Err(MeshError::Invalid(format!(
                    "element {} shape ratio {} exceeds 10",
                    e.id,
                    e.h / inradius
                )));
            }
        }
        Ok(())
    }

    /// Number of levels of active sub-edges covering the opposite side of
    /// edge (a, b): 0 = conforming or boundary, 1 = one hanging node.
    pub(crate) fn hanging_depth(
        &self,
        a: usize,
        b: usize,
        edge_set: &BTreeMap<(usize, usize), usize>,
    ) -> usize {
        let key = (a.min(b), a.max(b));
        if edge_set.get(&key) == Some(&2) {
            return 0;
        }
        let m = match self.existing_midpoint(a, b) {
            Some(m) => m,
            None => return 0,
        };
        let half_depth = |x: usize, y: usize| -> Option<usize> {
            let k = (x.min(y), x.max(y));
            if edge_set.contains_key(&k) {
                Some(0)
            } else {
                // Not directly an active edge: recurse if covered deeper.
                let mm = self.existing_midpoint(x, y)?;
                let k1 = (x.min(mm), x.max(mm));
                let k2 = (mm.min(y), mm.max(y));
                if edge_set.contains_key(&k1) || edge_set.contains_key(&k2) {
                    Some(1)
                } else {
                    None
                }
            }
        };
        match (half_depth(a, m), half_depth(m, b)) {
            (Some(d1), Some(d2)) => 1 + d1.max(d2),
            _ => 0,
        }
    }
}
