//! Assembly of the interior penalty dG operator and load vector.

use super::{
    cell_table, face_side_tables, penalty_on_face, BoundaryData, DofMap, FaceSideTable,
    PenaltyParams,
};
use crate::basis::{face_rule, quadrature, BasisTable};
use crate::mesh::{Mesh, MeshError};
use crate::solve::{SparseSym, TripletBuilder};

/// Per-point trace quantities of one side of a face: value, gradient,
/// Hessian times normal, and the normal derivative of the Laplacian.
struct SideTraces {
    val: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
    hnx: Vec<f64>,
    hny: Vec<f64>,
    ndl: Vec<f64>,
}

fn side_traces(table: &BasisTable, q: usize, normal: [f64; 2]) -> SideTraces {
    let n_modes = table.n_modes;
    let (nx, ny) = (normal[0], normal[1]);
    let mut t = SideTraces {
        val: vec![0.0; n_modes],
        gx: vec![0.0; n_modes],
        gy: vec![0.0; n_modes],
        hnx: vec![0.0; n_modes],
        hny: vec![0.0; n_modes],
        ndl: vec![0.0; n_modes],
    };
    for m in 0..n_modes {
        t.val[m] = table.value(q, 0, 0, m);
        t.gx[m] = table.value(q, 1, 0, m);
        t.gy[m] = table.value(q, 0, 1, m);
        let hxx = table.value(q, 2, 0, m);
        let hxy = table.value(q, 1, 1, m);
        let hyy = table.value(q, 0, 2, m);
        t.hnx[m] = hxx * nx + hxy * ny;
        t.hny[m] = hxy * nx + hyy * ny;
        let gxl = table.value(q, 3, 0, m) + table.value(q, 1, 2, m);
        let gyl = table.value(q, 2, 1, m) + table.value(q, 0, 3, m);
        t.ndl[m] = nx * gxl + ny * gyl;
    }
    t
}

/// Assembles the symmetric dG operator.
pub fn assemble_operator(
    mesh: &Mesh,
    dofs: &DofMap,
    params: &PenaltyParams,
) -> Result<SparseSym, MeshError> {
    for e in mesh.elements.iter().filter(|e| e.active) {
        if mesh.area(e.id) <= 0.0 || !mesh.area(e.id).is_finite() {
            return Err(MeshError::Invalid(format!(
                "degenerate element geometry: element {} has zero area",
                e.id
            )));
        }
    }
    let mut builder = TripletBuilder::new(dofs.total_dofs());

    // Cell Hessian stiffness.
    for &elem in &mesh.active_ids() {
        let p = mesh.p(elem);
        let rule = quadrature(mesh.elements[elem].kind, 2 * p + 2);
        let (table, _, weights) = cell_table(mesh, elem, &rule, 2);
        let n = table.n_modes;
        let off = dofs.offset(elem);
        let mut local = vec![0.0; n * n];
        for q in 0..weights.len() {
            let xx = table.row(q, 2, 0);
            let xy = table.row(q, 1, 1);
            let yy = table.row(q, 0, 2);
            let w = weights[q];
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] +=
                        w * (xx[i] * xx[j] + 2.0 * xy[i] * xy[j] + yy[i] * yy[j]);
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                builder.add(off + i, off + j, local[i * n + j]);
            }
        }
    }

    // Face terms: consistency, adjoint consistency, and penalties.
    for face in mesh.integration_faces() {
        let p_f = mesh.face_degree(face);
        let rule = face_rule(2 * p_f + 2);
        let (sigma, tau) = penalty_on_face(mesh, face, params);
        let (plus, minus) = face_side_tables(mesh, face, &rule, 3);
        let sides: Vec<&FaceSideTable> = match &minus {
            Some(m) => vec![&plus, m],
            None => vec![&plus],
        };
        let interior = sides.len() == 2;
        let avg = if interior { 0.5 } else { 1.0 };
        let jump_sign = [1.0, -1.0];
        for q in 0..rule.points.len() {
            let w = rule.weights[q] * face.h;
            let traces: Vec<SideTraces> = sides
                .iter()
                .map(|s| side_traces(&s.table, q, face.normal))
                .collect();
            for (sv, tv) in traces.iter().enumerate() {
                let off_v = dofs.offset(sides[sv].elem);
                let jv = jump_sign[sv];
                for (su, tu) in traces.iter().enumerate() {
                    let off_u = dofs.offset(sides[su].elem);
                    let ju = jump_sign[su];
                    let nv = tv.val.len();
                    let nu = tu.val.len();
                    for i in 0..nv {
                        for j in 0..nu {
                            let consistency = avg * tv.ndl[i] * ju * tu.val[j]
                                + jv * tv.val[i] * avg * tu.ndl[j]
                                - avg * (tv.hnx[i] * tu.gx[j] + tv.hny[i] * tu.gy[j]) * ju
                                - jv * (tv.gx[i] * tu.hnx[j] + tv.gy[i] * tu.hny[j]) * avg;
                            let penalty = sigma * jv * tv.val[i] * ju * tu.val[j]
                                + tau * jv * ju * (tv.gx[i] * tu.gx[j] + tv.gy[i] * tu.gy[j]);
                            builder.add(off_v + i, off_u + j, w * (consistency + penalty));
                        }
                    }
                }
            }
        }
    }
    Ok(builder.build())
}

/// Physical coordinates of the face quadrature points.
pub(crate) fn face_points(mesh: &Mesh, face: &crate::mesh::FaceRecord, rule: &crate::basis::FaceRule) -> Vec<[f64; 2]> {
    let tm = mesh
        .face_trace_map(face.id, crate::mesh::FaceSide::Plus)
        .unwrap();
    let map = mesh.element_map(face.plus_elem);
    rule.points
        .iter()
        .map(|&t| map.to_physical(tm.eval(t)))
        .collect()
}

/// Assembles the load vector, including the inhomogeneous boundary terms
/// `g1 (sigma v + n.grad lap v) + (g2 n + (dg1/dt) t).(tau grad v - (D^2 v) n)`.
pub fn assemble_load(
    mesh: &Mesh,
    dofs: &DofMap,
    f: &(dyn Fn([f64; 2]) -> f64 + Sync),
    boundary: &BoundaryData,
    params: &PenaltyParams,
) -> Vec<f64> {
    let mut rhs = vec![0.0; dofs.total_dofs()];
    for &elem in &mesh.active_ids() {
        let p = mesh.p(elem);
        let rule = quadrature(mesh.elements[elem].kind, 2 * p + 6);
        let (table, pts, weights) = cell_table(mesh, elem, &rule, 0);
        let off = dofs.offset(elem);
        for q in 0..weights.len() {
            let fw = f(pts[q]) * weights[q];
            if fw == 0.0 {
                continue;
            }
            let row = table.row(q, 0, 0);
            for (m, &v) in row.iter().enumerate() {
                rhs[off + m] += fw * v;
            }
        }
    }
    for face in mesh.integration_faces().filter(|f| f.minus_elem.is_none()) {
        let p_f = mesh.face_degree(face);
        let rule = face_rule(2 * p_f + 6);
        let (sigma, tau) = penalty_on_face(mesh, face, params);
        let (plus, _) = face_side_tables(mesh, face, &rule, 3);
        let pts = face_points(mesh, face, &rule);
        let off = dofs.offset(plus.elem);
        let n = face.normal;
        let t = face.tangent;
        for q in 0..rule.points.len() {
            let w = rule.weights[q] * face.h;
            let x = pts[q];
            let g1 = boundary.g1(x);
            let g2 = boundary.g2(x, n);
            let dg1t = boundary.dg1_dt(x, t);
            let tr = side_traces(&plus.table, q, n);
            // Components of g2 n + (dg1/dt) t.
            let bx = g2 * n[0] + dg1t * t[0];
            let by = g2 * n[1] + dg1t * t[1];
            for m in 0..tr.val.len() {
                let contrib = g1 * (sigma * tr.val[m] + tr.ndl[m])
                    + bx * (tau * tr.gx[m] - tr.hnx[m])
                    + by * (tau * tr.gy[m] - tr.hny[m]);
                rhs[off + m] += w * contrib;
            }
        }
    }
    rhs
}
