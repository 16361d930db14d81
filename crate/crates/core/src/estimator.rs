//! Residual a posteriori error estimator.
//!
//! Per element K the estimator collects six squared contributions:
//!
//! ```text
//! eta_{K,1}^2 = || (h/p)^2 (f - lap^2 u_n) ||^2_K
//! eta_{K,2}^2 = 1/2 sum_{F in E_K ^ interior} || (h/p)^{3/2} [[n.grad lap u_n]] ||^2_F
//! eta_{K,3}^2 = 1/2 sum_{F in E_K ^ interior} || (h/p)^{1/2} [[(D^2 u_n) n]] ||^2_F
//! eta_{K,4}^2 = 1/2 sum_{F in E_K} alpha_F || (h/p)^{1/2} [[(D^2 u_n) t]] ||^2_F
//! eta_{K,5}^2 = 1/2 sum_{F in E_K} alpha_F || p^{1/2} tau^{1/2} [[grad u_n]] ||^2_F
//! eta_{K,6}^2 = 1/2 sum_{F in E_K} alpha_F || sigma^{1/2} [[u_n]] ||^2_F
//! ```
//!
//! with alpha_F = 2 on boundary faces and 1 otherwise. On boundary faces
//! the jumps compare traces of u_n against the Dirichlet data g1, g2 and
//! their facewise tangential derivatives. Hanging faces contribute per
//! mortar sub-face, exactly as in assembly.

use crate::basis::{face_rule, quadrature};
use crate::mesh::{FaceKind, Mesh};
use crate::system::{
    cell_table, face_points, face_side_tables, penalty_on_face, BoundaryData, DGSolution, DofMap,
    PenaltyParams,
};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Per-element squared estimator contributions.
#[derive(Clone, Debug)]
pub struct ElementEstimate {
    pub elem: usize,
    pub level: u32,
    pub p: usize,
    /// eta_{K,1}^2 .. eta_{K,6}^2.
    pub terms_sq: [f64; 6],
}

impl ElementEstimate {
    pub fn eta_sq(&self) -> f64 {
        self.terms_sq.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct EstimatorReport {
    /// One entry per active element, ordered by element id.
    pub elements: Vec<ElementEstimate>,
    index: BTreeMap<usize, usize>,
}

impl EstimatorReport {
    /// Builds a report from bare (element, degree, squared indicator)
    /// triples, for synthetic marking tests and external drivers.
    pub fn from_element_values(values: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut elements: Vec<ElementEstimate> = values
            .into_iter()
            .map(|(elem, p, v)| ElementEstimate {
                elem,
                level: 0,
                p,
                terms_sq: [v, 0.0, 0.0, 0.0, 0.0, 0.0],
            })
            .collect();
        elements.sort_by_key(|e| e.elem);
        let index = elements
            .iter()
            .enumerate()
            .map(|(i, e)| (e.elem, i))
            .collect();
        Self { elements, index }
    }

    pub fn get(&self, elem: usize) -> &ElementEstimate {
        &self.elements[self.index[&elem]]
    }

    pub fn global_eta_sq(&self) -> f64 {
        self.elements.iter().map(|e| e.eta_sq()).sum()
    }

    pub fn global_eta(&self) -> f64 {
        self.global_eta_sq().sqrt()
    }

    /// Global sums of the six squared terms.
    pub fn term_sums_sq(&self) -> [f64; 6] {
        let mut sums = [0.0; 6];
        for e in &self.elements {
            for (s, t) in sums.iter_mut().zip(&e.terms_sq) {
                *s += t;
            }
        }
        sums
    }

    pub fn max_eta_sq(&self) -> f64 {
        self.elements.iter().map(|e| e.eta_sq()).fold(0.0, f64::max)
    }

    /// CSV rows: id, level, p, eta1^2..eta6^2, eta_K^2.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,level,p,eta1_sq,eta2_sq,eta3_sq,eta4_sq,eta5_sq,eta6_sq,eta_k_sq\n");
        for e in &self.elements {
            write!(out, "{},{},{}", e.elem, e.level, e.p).unwrap();
            for t in &e.terms_sq {
                write!(out, ",{:.17e}", t).unwrap();
            }
            writeln!(out, ",{:.17e}", e.eta_sq()).unwrap();
        }
        out
    }
}

/// Effectivity index eta / ||u - u_n||_dG.
pub fn effectivity(report: &EstimatorReport, dg_error: f64) -> f64 {
    assert!(dg_error > 0.0, "effectivity undefined for zero error");
    report.global_eta() / dg_error
}

/// Computes the estimator for a discrete solution.
pub fn estimate(
    mesh: &Mesh,
    dofs: &DofMap,
    solution: &DGSolution,
    f: &(dyn Fn([f64; 2]) -> f64 + Sync),
    boundary: &BoundaryData,
    params: &PenaltyParams,
) -> EstimatorReport {
    let active = mesh.active_ids();
    let mut index = BTreeMap::new();
    let mut elements: Vec<ElementEstimate> = active
        .iter()
        .enumerate()
        .map(|(i, &elem)| {
            index.insert(elem, i);
            ElementEstimate {
                elem,
                level: mesh.elements[elem].level,
                p: mesh.p(elem),
                terms_sq: [0.0; 6],
            }
        })
        .collect();

    // Cell residual: (h/p)^4 || f - lap^2 u_n ||^2.
    for (i, &elem) in active.iter().enumerate() {
        let p = mesh.p(elem);
        let rule = quadrature(mesh.elements[elem].kind, 2 * p + 4);
        let (table, pts, weights) = cell_table(mesh, elem, &rule, 4);
        let coeffs = dofs.slice(elem, &solution.coefficients);
        let mut acc = 0.0;
        for q in 0..weights.len() {
            let bilap = table.combine(q, 4, 0, coeffs)
                + 2.0 * table.combine(q, 2, 2, coeffs)
                + table.combine(q, 0, 4, coeffs);
            let r = f(pts[q]) - bilap;
            acc += weights[q] * r * r;
        }
        let hp = mesh.elements[elem].h / p as f64;
        elements[i].terms_sq[0] = hp.powi(4) * acc;
    }

    // Face terms.
    for face in mesh.integration_faces() {
        let p_f = mesh.face_degree(face) as f64;
        let rule = face_rule(2 * mesh.face_degree(face) + 4);
        let (sigma, tau) = penalty_on_face(mesh, face, params);
        let (plus, minus) = face_side_tables(mesh, face, &rule, 3);
        let hp = face.h / p_f;
        let n = face.normal;
        let t = face.tangent;
        let coeffs_p = dofs.slice(plus.elem, &solution.coefficients);
        // Accumulated squared face integrals for eta_2 .. eta_6.
        let mut acc = [0.0; 5];
        match &minus {
            Some(minus) => {
                let coeffs_m = dofs.slice(minus.elem, &solution.coefficients);
                for q in 0..rule.points.len() {
                    let w = rule.weights[q] * face.h;
                    let d = |kx: usize, ky: usize| {
                        plus.table.combine(q, kx, ky, coeffs_p)
                            - minus.table.combine(q, kx, ky, coeffs_m)
                    };
                    let jv = d(0, 0);
                    let (jgx, jgy) = (d(1, 0), d(0, 1));
                    let (jxx, jxy, jyy) = (d(2, 0), d(1, 1), d(0, 2));
                    let jxxx = d(3, 0);
                    let jxxy = d(2, 1);
                    let jxyy = d(1, 2);
                    let jyyy = d(0, 3);
                    let j_ndl = n[0] * (jxxx + jxyy) + n[1] * (jxxy + jyyy);
                    let (jhnx, jhny) = (jxx * n[0] + jxy * n[1], jxy * n[0] + jyy * n[1]);
                    let (jhtx, jhty) = (jxx * t[0] + jxy * t[1], jxy * t[0] + jyy * t[1]);
                    acc[0] += w * j_ndl * j_ndl;
                    acc[1] += w * (jhnx * jhnx + jhny * jhny);
                    acc[2] += w * (jhtx * jhtx + jhty * jhty);
                    acc[3] += w * (jgx * jgx + jgy * jgy);
                    acc[4] += w * jv * jv;
                }
            }
            None => {
                let pts = face_points(mesh, face, &rule);
                for q in 0..rule.points.len() {
                    let w = rule.weights[q] * face.h;
                    let x = pts[q];
                    let v = plus.table.combine(q, 0, 0, coeffs_p);
                    let gx = plus.table.combine(q, 1, 0, coeffs_p);
                    let gy = plus.table.combine(q, 0, 1, coeffs_p);
                    let hxx = plus.table.combine(q, 2, 0, coeffs_p);
                    let hxy = plus.table.combine(q, 1, 1, coeffs_p);
                    let hyy = plus.table.combine(q, 0, 2, coeffs_p);
                    // [[(D^2 u_n) t]] -> (t^T D^2(u_n - g1) t) t
                    //                  + (n^T ((D^2 u_n) t - grad g2)) n.
                    let (htx, hty) = (hxx * t[0] + hxy * t[1], hxy * t[0] + hyy * t[1]);
                    let tht = t[0] * htx + t[1] * hty;
                    let nht = n[0] * htx + n[1] * hty;
                    let c_t = tht - boundary.d2g1_dt2(x, t);
                    let c_n = nht - boundary.dg2_dt(x, n, t);
                    acc[2] += w * (c_t * c_t + c_n * c_n);
                    // [[grad u_n]] -> (n.grad u_n - g2) n + ((grad(u_n - g1)).t) t.
                    let jn = gx * n[0] + gy * n[1] - boundary.g2(x, n);
                    let jt = gx * t[0] + gy * t[1] - boundary.dg1_dt(x, t);
                    acc[3] += w * (jn * jn + jt * jt);
                    // [[u_n]] -> u_n - g1.
                    let jv = v - boundary.g1(x);
                    acc[4] += w * jv * jv;
                }
            }
        }
        let alpha = match face.kind {
            FaceKind::Boundary => 2.0,
            FaceKind::Interior => 1.0,
        };
        let contributions = [
            hp.powi(3) * acc[0],          // eta_2 (interior only)
            hp * acc[1],                  // eta_3 (interior only)
            alpha * hp * acc[2],          // eta_4
            alpha * p_f * tau * acc[3],   // eta_5
            alpha * sigma * acc[4],       // eta_6
        ];
        let mut push = |elem: usize, scale: f64| {
            let e = &mut elements[index[&elem]];
            for (j, c) in contributions.iter().enumerate() {
                e.terms_sq[j + 1] += scale * c;
            }
        };
        push(plus.elem, 0.5);
        if let Some(minus) = &minus {
            push(minus.elem, 0.5);
        }
    }

    EstimatorReport { elements, index }
}
