//! Interior penalty dG operator for the biharmonic problem: degree-of-freedom
//! bookkeeping, penalty parameters, assembly, and the dG-norm error.
//!
//! The bilinear form is the Hessian formulation with the lifting terms
//! assembled in their expanded face-integral form,
//!
//! ```text
//! B(u,v) = sum_K int_K D^2 u : D^2 v
//!        + sum_F int_F ( {n.grad lap v}[[u]] + {n.grad lap u}[[v]]
//!                        - {(D^2 v) n}.[[grad u]] - {(D^2 u) n}.[[grad v]]
//!                        + sigma [[u]][[v]] + tau [[grad u]].[[grad v]] )
//! ```
//!
//! with sigma = c_sigma p^6 / h^3 and tau = c_tau p^2 / h facewise. On
//! hanging faces every quantity is taken per mortar sub-face.

mod assemble;
mod boundary;
mod error;

pub use assemble::{assemble_load, assemble_operator};
pub(crate) use assemble::face_points;
pub use boundary::BoundaryData;
pub use error::{dg_norm_error, ExactSolution};

use crate::basis::{deriv_index, dof_count, BasisTable, DERIV_INDICES};
use crate::mesh::{FaceRecord, FaceSide, Mesh};
use nalgebra::Matrix2;

/// Contiguous per-element coefficient ranges.
#[derive(Clone, Debug)]
pub struct DofMap {
    offsets: Vec<usize>,
    counts: Vec<usize>,
    total: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let mut offsets = vec![usize::MAX; mesh.elements.len()];
        let mut counts = vec![0; mesh.elements.len()];
        let mut total = 0;
        for e in mesh.elements.iter().filter(|e| e.active) {
            let n = dof_count(e.kind, mesh.p(e.id));
            offsets[e.id] = total;
            counts[e.id] = n;
            total += n;
        }
        Self {
            offsets,
            counts,
            total,
        }
    }

    pub fn total_dofs(&self) -> usize {
        self.total
    }

    pub fn offset(&self, elem: usize) -> usize {
        debug_assert!(self.offsets[elem] != usize::MAX, "inactive element");
        self.offsets[elem]
    }

    pub fn count(&self, elem: usize) -> usize {
        self.counts[elem]
    }

    pub fn slice<'a>(&self, elem: usize, coeffs: &'a [f64]) -> &'a [f64] {
        let o = self.offset(elem);
        &coeffs[o..o + self.counts[elem]]
    }
}

/// A discrete dG function: coefficients over the per-element modal bases.
#[derive(Clone, Debug)]
pub struct DGSolution {
    pub coefficients: Vec<f64>,
}

impl DGSolution {
    pub fn zero(dofs: &DofMap) -> Self {
        Self {
            coefficients: vec![0.0; dofs.total_dofs()],
        }
    }
}

/// Penalisation coefficients sigma = c_sigma p^6/h^3, tau = c_tau p^2/h.
#[derive(Clone, Copy, Debug)]
pub struct PenaltyParams {
    pub c_sigma: f64,
    pub c_tau: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            c_sigma: 10.0,
            c_tau: 10.0,
        }
    }
}

/// Facewise penalty pair (sigma, tau). The facewise degree is the maximum
/// of the two neighbouring degrees on interior faces and the element degree
/// on boundary faces; h is the face diameter.
pub fn penalty_on_face(mesh: &Mesh, face: &FaceRecord, params: &PenaltyParams) -> (f64, f64) {
    let p = mesh.face_degree(face) as f64;
    let h = face.h;
    let sigma = params.c_sigma * p.powi(6) / h.powi(3);
    let tau = params.c_tau * p.powi(2) / h;
    (sigma, tau)
}

/// Converts a reference-derivative table into physical derivatives under an
/// affine map with inverse Jacobian `inv`. The result reuses the same
/// layout, so all `BasisTable` accessors keep working.
pub fn to_physical(table: &BasisTable, inv: &Matrix2<f64>) -> BasisTable {
    let nd = crate::basis::n_derivs(table.max_deriv);
    let n_modes = table.n_modes;
    let mut data = vec![0.0; table.n_points * nd * n_modes];
    // d/dx = c00 d_xi + c10 d_eta, d/dy = c01 d_xi + c11 d_eta.
    let (c00, c10) = (inv[(0, 0)], inv[(1, 0)]);
    let (c01, c11) = (inv[(0, 1)], inv[(1, 1)]);
    let binom = |n: usize, k: usize| -> f64 {
        let mut v = 1.0;
        for i in 0..k {
            v = v * (n - i) as f64 / (i + 1) as f64;
        }
        v
    };
    for (d, &(m, n)) in DERIV_INDICES.iter().take(nd).enumerate() {
        // Expand (c00 d_xi + c10 d_eta)^m (c01 d_xi + c11 d_eta)^n.
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for r in 0..=m {
            for s in 0..=n {
                let w = binom(m, r)
                    * binom(n, s)
                    * c00.powi(r as i32)
                    * c10.powi((m - r) as i32)
                    * c01.powi(s as i32)
                    * c11.powi((n - s) as i32);
                if w != 0.0 {
                    terms.push((deriv_index(r + s, (m - r) + (n - s)), w));
                }
            }
        }
        for q in 0..table.n_points {
            let out_base = (q * nd + d) * n_modes;
            for &(ref_d, w) in &terms {
                let (kx, ky) = DERIV_INDICES[ref_d];
                let row = table.row(q, kx, ky);
                for (mm, &v) in row.iter().enumerate() {
                    data[out_base + mm] += w * v;
                }
            }
        }
    }
    BasisTable::from_raw(table.kind, table.p, table.max_deriv, n_modes, table.n_points, data)
}

/// L^2 projection of a scalar field onto the dG space. The reference mass
/// matrix is the identity, so the coefficients are reference moments.
pub fn project(mesh: &Mesh, dofs: &DofMap, f: &(dyn Fn([f64; 2]) -> f64 + Sync)) -> DGSolution {
    let mut sol = DGSolution::zero(dofs);
    for &elem in &mesh.active_ids() {
        let p = mesh.p(elem);
        let kind = mesh.elements[elem].kind;
        let rule = crate::basis::quadrature(kind, 2 * p + 6);
        let map = mesh.element_map(elem);
        let table = crate::basis::eval_basis(kind, p, &rule.points, 0);
        let off = dofs.offset(elem);
        for (q, w) in rule.weights.iter().enumerate() {
            let x = map.to_physical(rule.points[q]);
            let fw = f(x) * w;
            for m in 0..table.n_modes {
                sol.coefficients[off + m] += fw * table.value(q, 0, 0, m);
            }
        }
    }
    sol
}

/// Physical-derivative basis table of one side of a face at the mapped
/// face quadrature points.
pub struct FaceSideTable {
    pub elem: usize,
    pub table: BasisTable,
}

/// Tabulates both sides of an integration face at the points of `rule`.
pub fn face_side_tables(
    mesh: &Mesh,
    face: &FaceRecord,
    rule: &crate::basis::FaceRule,
    max_deriv: usize,
) -> (FaceSideTable, Option<FaceSideTable>) {
    let side = |fs: FaceSide, elem: usize| -> FaceSideTable {
        let tm = mesh.face_trace_map(face.id, fs).unwrap();
        let pts: Vec<[f64; 2]> = rule.points.iter().map(|&t| tm.eval(t)).collect();
        let map = mesh.element_map(elem);
        let e = &mesh.elements[elem];
        let ref_table = crate::basis::eval_basis(e.kind, mesh.p(elem), &pts, max_deriv);
        FaceSideTable {
            elem,
            table: to_physical(&ref_table, &map.inv),
        }
    };
    let plus = side(FaceSide::Plus, face.plus_elem);
    let minus = face.minus_elem.map(|m| side(FaceSide::Minus, m));
    (plus, minus)
}

/// Physical-derivative basis table over an element at mapped cell points;
/// returns the physical quadrature weights alongside.
pub fn cell_table(
    mesh: &Mesh,
    elem: usize,
    rule: &crate::basis::QuadratureRule,
    max_deriv: usize,
) -> (BasisTable, Vec<[f64; 2]>, Vec<f64>) {
    let map = mesh.element_map(elem);
    let e = &mesh.elements[elem];
    let ref_table = crate::basis::eval_basis(e.kind, mesh.p(elem), &rule.points, max_deriv);
    let table = to_physical(&ref_table, &map.inv);
    let phys_pts: Vec<[f64; 2]> = rule.points.iter().map(|&p| map.to_physical(p)).collect();
    let det = map.det.abs();
    let weights: Vec<f64> = rule.weights.iter().map(|w| w * det).collect();
    (table, phys_pts, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{eval_basis, ElemKind};
    use crate::mesh::Domain;

    #[test]
    fn penalty_example_values() {
        let mut mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Quad, 2, 2).unwrap();
        let params = PenaltyParams::default();
        let boundary_face = mesh
            .faces
            .iter()
            .find(|f| f.minus_elem.is_none() && f.mortar.is_none())
            .unwrap();
        // h = 0.5, p = 2, c = 10: sigma = 10*64/0.125, tau = 10*4/0.5.
        let (sigma, tau) = penalty_on_face(&mesh, boundary_face, &params);
        assert!((sigma - 5120.0).abs() < 1e-9);
        assert!((tau - 80.0).abs() < 1e-12);

        // Interior face with degrees 2 and 3 takes the maximum.
        let interior = mesh
            .faces
            .iter()
            .find(|f| f.minus_elem.is_some())
            .unwrap()
            .id;
        let minus = mesh.faces[interior].minus_elem.unwrap();
        mesh.set_degree(minus, 3);
        let f = mesh.faces[interior].clone();
        assert_eq!(mesh.face_degree(&f), 3);

        // Doubling h divides sigma by 8 and tau by 2.
        let (s1, t1): (f64, f64) = (10.0 * 64.0 / 0.5f64.powi(3), 10.0 * 4.0 / 0.5);
        let (s2, t2): (f64, f64) = (10.0 * 64.0 / 1.0f64.powi(3), 10.0 * 4.0 / 1.0);
        assert!((s1 / s2 - 8.0).abs() < 1e-12);
        assert!((t1 / t2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dofmap_is_contiguous_and_complete() {
        let mut mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Quad, 2, 2).unwrap();
        mesh.set_degree(0, 3);
        let dofs = DofMap::new(&mesh);
        assert_eq!(dofs.total_dofs(), 16 + 3 * 9);
        let mut seen = vec![false; dofs.total_dofs()];
        for e in mesh.active_ids() {
            for k in 0..dofs.count(e) {
                let idx = dofs.offset(e) + k;
                assert!(!seen[idx]);
                seen[idx] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn physical_transform_matches_chain_rule_on_triangle() {
        let mesh = Mesh::build_initial(Domain::LShape, ElemKind::Triangle, 1, 2).unwrap();
        let elem = mesh.active_ids()[3];
        let map = mesh.element_map(elem);
        let refpt = [[0.3, 0.4]];
        let table = eval_basis(ElemKind::Triangle, 3, &refpt, 2);
        let phys = to_physical(&table, &map.inv);
        // Finite differences in physical space.
        let x0 = map.to_physical(refpt[0]);
        let h = 1e-6;
        for mode in 0..phys.n_modes {
            let eval_at = |x: [f64; 2]| {
                let r = map.to_reference(x);
                eval_basis(ElemKind::Triangle, 3, &[r], 0).value(0, 0, 0, mode)
            };
            let fd_x = (eval_at([x0[0] + h, x0[1]]) - eval_at([x0[0] - h, x0[1]])) / (2.0 * h);
            let fd_y = (eval_at([x0[0], x0[1] + h]) - eval_at([x0[0], x0[1] - h])) / (2.0 * h);
            assert!((phys.value(0, 1, 0, mode) - fd_x).abs() < 1e-6 * (1.0 + fd_x.abs()));
            assert!((phys.value(0, 0, 1, mode) - fd_y).abs() < 1e-6 * (1.0 + fd_y.abs()));
        }
    }
}
