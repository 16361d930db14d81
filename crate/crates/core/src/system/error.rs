//! dG-norm error against a known exact solution.

use super::assemble::face_points;
use super::{cell_table, face_side_tables, penalty_on_face, BoundaryData, DGSolution, DofMap, PenaltyParams};
use crate::basis::{face_rule, graded_rule, quadrature};
use crate::mesh::Mesh;

/// A closed-form exact solution with derivatives up to the Hessian.
pub struct ExactSolution {
    pub value: Box<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
    pub gradient: Box<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>,
    pub hessian: Box<dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync>,
    /// Corner where the Hessian is singular; cell quadrature on elements
    /// touching it is dyadically graded toward the corner (8 levels).
    pub singular_corner: Option<[f64; 2]>,
}

impl ExactSolution {
    pub fn new(
        value: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static,
        hessian: impl Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: Box::new(hessian),
            singular_corner: None,
        }
    }

    pub fn with_singular_corner(mut self, corner: [f64; 2]) -> Self {
        self.singular_corner = Some(corner);
        self
    }
}

const GRADING_LEVELS: usize = 8;

/// Reference-vertex position of `corner` within the element, if the element
/// touches it.
pub(crate) fn corner_ref_vertex(mesh: &Mesh, elem: usize, corner: [f64; 2]) -> Option<[f64; 2]> {
    let e = &mesh.elements[elem];
    let ref_corners: &[[f64; 2]] = match e.kind {
        crate::basis::ElemKind::Triangle => &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        crate::basis::ElemKind::Quad => &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
    };
    for (i, &v) in e.vertex_ids.iter().enumerate() {
        let c = mesh.coords(v);
        if (c[0] - corner[0]).abs() < 1e-13 && (c[1] - corner[1]).abs() < 1e-13 {
            return Some(ref_corners[i]);
        }
    }
    None
}

/// dG-norm error ||u - u_n||_dG of a discrete solution against an exact
/// solution:
///
/// ```text
/// ||v||_dG^2 = ||D^2_n v||^2 + sum_F ||tau^(1/2) [[grad v]]||^2_F
///            + sum_F ||sigma^(1/2) [[v]]||^2_F
/// ```
///
/// On interior faces the exact solution has no jumps, so the face terms
/// reduce to the jumps of u_n; boundary faces compare traces of u_n with
/// the boundary data.
pub fn dg_norm_error(
    mesh: &Mesh,
    dofs: &DofMap,
    solution: &DGSolution,
    exact: &ExactSolution,
    boundary: &BoundaryData,
    params: &PenaltyParams,
) -> f64 {
    let mut total = 0.0;

    // Broken Hessian seminorm.
    for &elem in &mesh.active_ids() {
        let p = mesh.p(elem);
        let kind = mesh.elements[elem].kind;
        let base = quadrature(kind, 2 * p + 6);
        let rule = match exact
            .singular_corner
            .and_then(|c| corner_ref_vertex(mesh, elem, c))
        {
            Some(ref_corner) => graded_rule(kind, &base, ref_corner, GRADING_LEVELS),
            None => base,
        };
        let (table, pts, weights) = cell_table(mesh, elem, &rule, 2);
        let coeffs = dofs.slice(elem, &solution.coefficients);
        for q in 0..weights.len() {
            let h = (exact.hessian)(pts[q]);
            let exx = h[0][0] - table.combine(q, 2, 0, coeffs);
            let exy = h[0][1] - table.combine(q, 1, 1, coeffs);
            let eyy = h[1][1] - table.combine(q, 0, 2, coeffs);
            total += weights[q] * (exx * exx + 2.0 * exy * exy + eyy * eyy);
        }
    }

    for face in mesh.integration_faces() {
        let p_f = mesh.face_degree(face);
        let rule = face_rule(2 * p_f + 6);
        let (sigma, tau) = penalty_on_face(mesh, face, params);
        let (plus, minus) = face_side_tables(mesh, face, &rule, 1);
        let coeffs_p = dofs.slice(plus.elem, &solution.coefficients);
        match &minus {
            Some(minus) => {
                let coeffs_m = dofs.slice(minus.elem, &solution.coefficients);
                for q in 0..rule.points.len() {
                    let w = rule.weights[q] * face.h;
                    let jv = plus.table.combine(q, 0, 0, coeffs_p)
                        - minus.table.combine(q, 0, 0, coeffs_m);
                    let jgx = plus.table.combine(q, 1, 0, coeffs_p)
                        - minus.table.combine(q, 1, 0, coeffs_m);
                    let jgy = plus.table.combine(q, 0, 1, coeffs_p)
                        - minus.table.combine(q, 0, 1, coeffs_m);
                    total += w * (sigma * jv * jv + tau * (jgx * jgx + jgy * jgy));
                }
            }
            None => {
                let pts = face_points(mesh, face, &rule);
                let n = face.normal;
                let t = face.tangent;
                for q in 0..rule.points.len() {
                    let w = rule.weights[q] * face.h;
                    let x = pts[q];
                    let un = plus.table.combine(q, 0, 0, coeffs_p);
                    let ugx = plus.table.combine(q, 1, 0, coeffs_p);
                    let ugy = plus.table.combine(q, 0, 1, coeffs_p);
                    let jv = un - boundary.g1(x);
                    let jn = (ugx * n[0] + ugy * n[1]) - boundary.g2(x, n);
                    let jt = (ugx * t[0] + ugy * t[1]) - boundary.dg1_dt(x, t);
                    total += w * (sigma * jv * jv + tau * (jn * jn + jt * jt));
                }
            }
        }
    }
    total.sqrt()
}
