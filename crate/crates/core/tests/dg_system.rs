//! Assembly, solve, and dG-norm error checks on small manufactured cases.

use biharm::basis::ElemKind;
use biharm::mesh::{Closure, Domain, Mesh};
use biharm::solve::solve_spd;
use biharm::system::{
    assemble_load, assemble_operator, dg_norm_error, BoundaryData, DGSolution, DofMap,
    ExactSolution, PenaltyParams,
};
use std::collections::BTreeSet;

fn quartic_exact() -> ExactSolution {
    ExactSolution::new(
        |x| x[0] * x[0] * x[1] * x[1],
        |x| [2.0 * x[0] * x[1] * x[1], 2.0 * x[0] * x[0] * x[1]],
        |x| {
            [
                [2.0 * x[1] * x[1], 4.0 * x[0] * x[1]],
                [4.0 * x[0] * x[1], 2.0 * x[0] * x[0]],
            ]
        },
    )
}

fn quartic_boundary() -> BoundaryData {
    BoundaryData::from_exact(
        |x| x[0] * x[0] * x[1] * x[1],
        |x| [2.0 * x[0] * x[1] * x[1], 2.0 * x[0] * x[0] * x[1]],
        |x| {
            [
                [2.0 * x[1] * x[1], 4.0 * x[0] * x[1]],
                [4.0 * x[0] * x[1], 2.0 * x[0] * x[0]],
            ]
        },
    )
}

#[test]
fn operator_is_symmetric_with_mixed_degrees() {
    let mut mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Quad, 2, 2).unwrap();
    mesh.set_degree(2, 3);
    mesh.set_degree(3, 3);
    let dofs = DofMap::new(&mesh);
    let a = assemble_operator(&mesh, &dofs, &PenaltyParams::default()).unwrap();
    assert!(a.symmetry_defect() <= 1e-10, "defect {}", a.symmetry_defect());
}

#[test]
fn single_element_operator_has_trivial_kernel() {
    let mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Quad, 1, 2).unwrap();
    let dofs = DofMap::new(&mesh);
    let a = assemble_operator(&mesh, &dofs, &PenaltyParams::default()).unwrap();
    let dense = a.to_dense();
    let eig = dense.symmetric_eigenvalues();
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min > 0.0, "minimum eigenvalue {min} should be positive");
}

#[test]
fn coercivity_probe_two_by_two() {
    let mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Quad, 2, 2).unwrap();
    let dofs = DofMap::new(&mesh);
    let a = assemble_operator(&mesh, &dofs, &PenaltyParams::default()).unwrap();
    assert!(a.symmetry_defect() <= 1e-10);
    let eig = a.to_dense().symmetric_eigenvalues();
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min > 0.0, "minimum eigenvalue {min} should be positive");
}

fn solve_quartic(mesh: &Mesh) -> (DofMap, DGSolution) {
    let dofs = DofMap::new(mesh);
    let params = PenaltyParams::default();
    let a = assemble_operator(mesh, &dofs, &params).unwrap();
    let b = assemble_load(mesh, &dofs, &|_| 8.0, &quartic_boundary(), &params);
    let rep = solve_spd(&a, &b, 1e-10).unwrap();
    (dofs, DGSolution { coefficients: rep.coefficients })
}

#[test]
fn quads_reproduce_global_quartic() {
    for p in [2usize, 3, 4] {
        let mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Quad, 2, p).unwrap();
        let (dofs, sol) = solve_quartic(&mesh);
        let err = dg_norm_error(
            &mesh,
            &dofs,
            &sol,
            &quartic_exact(),
            &quartic_boundary(),
            &PenaltyParams::default(),
        );
        assert!(err <= 1e-7, "p={p}: dG error {err}");
        // Pointwise check on every element.
        for &elem in &mesh.active_ids() {
            let map = mesh.element_map(elem);
            let coeffs = dofs.slice(elem, &sol.coefficients);
            for r in [[0.2, 0.3], [0.7, 0.9]] {
                let x = map.to_physical(r);
                let table = biharm::basis::eval_basis(ElemKind::Quad, mesh.p(elem), &[r], 0);
                let v = table.combine(0, 0, 0, coeffs);
                let exact = x[0] * x[0] * x[1] * x[1];
                assert!((v - exact).abs() <= 1e-8, "p={p}: {v} vs {exact}");
            }
        }
    }
}

#[test]
fn triangles_reproduce_global_quartic() {
    let mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Triangle, 2, 4).unwrap();
    let (dofs, sol) = solve_quartic(&mesh);
    let err = dg_norm_error(
        &mesh,
        &dofs,
        &sol,
        &quartic_exact(),
        &quartic_boundary(),
        &PenaltyParams::default(),
    );
    assert!(err <= 1e-7, "dG error {err}");
}

#[test]
fn hanging_nodes_do_not_break_reproduction() {
    let mut mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Quad, 2, 2).unwrap();
    mesh.refine(&BTreeSet::from([0]), Closure::OneIrregular).unwrap();
    assert!(mesh.hanging_face_count() > 0);
    let (dofs, sol) = solve_quartic(&mesh);
    let err = dg_norm_error(
        &mesh,
        &dofs,
        &sol,
        &quartic_exact(),
        &quartic_boundary(),
        &PenaltyParams::default(),
    );
    assert!(err <= 1e-7, "dG error on hanging mesh {err}");
}

#[test]
fn load_vanishes_for_homogeneous_data() {
    let mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Quad, 2, 3).unwrap();
    let dofs = DofMap::new(&mesh);
    let rhs = assemble_load(
        &mesh,
        &dofs,
        &|_| 0.0,
        &BoundaryData::homogeneous(),
        &PenaltyParams::default(),
    );
    assert!(rhs.iter().all(|&v| v == 0.0));
}

#[test]
fn unit_load_hits_constant_mode() {
    let mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Quad, 1, 2).unwrap();
    let dofs = DofMap::new(&mesh);
    let rhs = assemble_load(
        &mesh,
        &dofs,
        &|_| 1.0,
        &BoundaryData::homogeneous(),
        &PenaltyParams::default(),
    );
    // First mode is the constant 1 on the unit square.
    assert!((rhs[0] - 1.0).abs() < 1e-13);
    for &v in &rhs[1..] {
        assert!(v.abs() < 1e-13);
    }
}

#[test]
fn zero_solution_error_matches_analytic_value() {
    // ||u - 0||_dG^2 for u = x^2 y^2 on one unit square with p = 2:
    // cell term 232/45; boundary penalties only on the two far edges,
    // sigma int x^4 = 640/5 each and tau int (4x^4 + 4x^2) = 40*32/15 each.
    let mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Quad, 1, 2).unwrap();
    let dofs = DofMap::new(&mesh);
    let sol = DGSolution::zero(&dofs);
    let err = dg_norm_error(
        &mesh,
        &dofs,
        &sol,
        &quartic_exact(),
        &quartic_boundary(),
        &PenaltyParams::default(),
    );
    let expect = (232.0_f64 / 45.0 + 2.0 * (128.0 + 256.0 / 3.0)).sqrt();
    assert!((err - expect).abs() < 1e-10 * expect, "{err} vs {expect}");
}

#[test]
fn dg_error_is_homogeneous_in_the_coefficients() {
    let mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Quad, 2, 2).unwrap();
    let (dofs, mut sol) = solve_quartic(&mesh);
    let zero_exact = ExactSolution::new(|_| 0.0, |_| [0.0, 0.0], |_| [[0.0, 0.0], [0.0, 0.0]]);
    let params = PenaltyParams::default();
    let bd = BoundaryData::homogeneous();
    let e1 = dg_norm_error(&mesh, &dofs, &sol, &zero_exact, &bd, &params);
    for c in sol.coefficients.iter_mut() {
        *c *= 2.0;
    }
    let e2 = dg_norm_error(&mesh, &dofs, &sol, &zero_exact, &bd, &params);
    assert!((e2 - 2.0 * e1).abs() < 1e-9 * e1);
}

#[test]
fn degenerate_geometry_is_reported() {
    let mut mesh = Mesh::build_initial(Domain::UnitSquare, ElemKind::Quad, 1, 2).unwrap();
    // Collapse the element to zero area.
    let v = mesh.elements[0].vertex_ids.clone();
    mesh.vertices[v[2]].coords = mesh.vertices[v[0]].coords;
    mesh.vertices[v[1]].coords = mesh.vertices[v[0]].coords;
    mesh.vertices[v[3]].coords = mesh.vertices[v[0]].coords;
    let dofs = DofMap::new(&mesh);
    assert!(assemble_operator(&mesh, &dofs, &PenaltyParams::default()).is_err());
}
