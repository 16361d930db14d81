//! Reference-element modal bases for P_p (triangles) and Q_p (quads).
//!
//! Both bases are orthonormal in L^2 of the reference element: tensor
//! products of shifted Legendre polynomials on the unit square, and the
//! Dubiner (Koornwinder) basis on the unit right triangle. Orthonormality
//! keeps the reference mass matrix equal to the identity, which is what
//! allows the penalised systems to stay solvable at high degree.
//!
//! Evaluation tables carry all mixed partial derivatives up to a requested
//! total order (at most 4; the estimator's cell residual needs the
//! bilaplacian of the discrete solution, everything else needs order 3).

mod poly1d;
pub mod quadrature;

pub use poly1d::gauss_legendre_01;
pub use quadrature::{face_rule, graded_rule, quadrature, FaceRule, QuadratureRule};

use poly1d::{homogenized_legendre_all, jacobi_all, legendre_all};

/// Element kinds supported by the solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElemKind {
    Triangle,
    Quad,
}

/// Highest derivative order the tables can hold.
pub const MAX_DERIV: usize = 4;

/// Derivative multi-indices (kx, ky) ordered by total order then kx descending.
pub const DERIV_INDICES: [(usize, usize); 15] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
    (4, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 4),
];

/// Flat index of the derivative (kx, ky) in the tables.
pub fn deriv_index(kx: usize, ky: usize) -> usize {
    let k = kx + ky;
    debug_assert!(k <= MAX_DERIV);
    // Offset of total order k is k(k+1)/2; within the block kx descends.
    k * (k + 1) / 2 + (k - kx)
}

/// Number of derivative slots for derivatives up to total order `max_deriv`.
pub fn n_derivs(max_deriv: usize) -> usize {
    (max_deriv + 1) * (max_deriv + 2) / 2
}

/// Number of basis functions of degree `p` on an element of `kind`.
pub fn dof_count(kind: ElemKind, p: usize) -> usize {
    match kind {
        ElemKind::Triangle => (p + 1) * (p + 2) / 2,
        ElemKind::Quad => (p + 1) * (p + 1),
    }
}

/// Mode exponent pairs in table order.
pub fn mode_indices(kind: ElemKind, p: usize) -> Vec<(usize, usize)> {
    let mut modes = Vec::with_capacity(dof_count(kind, p));
    match kind {
        ElemKind::Quad => {
            for i in 0..=p {
                for j in 0..=p {
                    modes.push((i, j));
                }
            }
        }
        ElemKind::Triangle => {
            for d in 0..=p {
                for i in 0..=d {
                    modes.push((i, d - i));
                }
            }
        }
    }
    modes
}

/// Evaluation tables of a reference basis at a fixed set of points.
///
/// Storage layout is `[point][deriv][mode]` with the mode index contiguous.
#[derive(Clone, Debug)]
pub struct BasisTable {
    pub kind: ElemKind,
    pub p: usize,
    pub max_deriv: usize,
    pub n_modes: usize,
    pub n_points: usize,
    n_derivs: usize,
    data: Vec<f64>,
}

impl BasisTable {
    /// Assembles a table from raw data in `[point][deriv][mode]` layout.
    pub fn from_raw(
        kind: ElemKind,
        p: usize,
        max_deriv: usize,
        n_modes: usize,
        n_points: usize,
        data: Vec<f64>,
    ) -> Self {
        let nd = n_derivs(max_deriv);
        assert_eq!(data.len(), n_points * nd * n_modes);
        Self {
            kind,
            p,
            max_deriv,
            n_modes,
            n_points,
            n_derivs: nd,
            data,
        }
    }

    /// Value of d^(kx,ky) phi_mode at point index `q`.
    #[inline]
    pub fn value(&self, q: usize, kx: usize, ky: usize, mode: usize) -> f64 {
        self.data[(q * self.n_derivs + deriv_index(kx, ky)) * self.n_modes + mode]
    }

    /// Slice of all mode values for derivative (kx, ky) at point `q`.
    #[inline]
    pub fn row(&self, q: usize, kx: usize, ky: usize) -> &[f64] {
        let base = (q * self.n_derivs + deriv_index(kx, ky)) * self.n_modes;
        &self.data[base..base + self.n_modes]
    }

    /// Dot product of a coefficient vector against derivative (kx, ky) at `q`.
    #[inline]
    pub fn combine(&self, q: usize, kx: usize, ky: usize, coeffs: &[f64]) -> f64 {
        self.row(q, kx, ky)
            .iter()
            .zip(coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Tabulates the modal basis of degree `p` and all mixed partials up to
/// total order `max_deriv` at the given reference points.
pub fn eval_basis(kind: ElemKind, p: usize, points: &[[f64; 2]], max_deriv: usize) -> BasisTable {
    assert!(max_deriv <= MAX_DERIV, "derivative order {max_deriv} not tabulated");
    let n_modes = dof_count(kind, p);
    let nd = n_derivs(max_deriv);
    let modes = mode_indices(kind, p);
    let mut data = vec![0.0; points.len() * nd * n_modes];

    match kind {
        ElemKind::Quad => {
            for (q, pt) in points.iter().enumerate() {
                // Orthonormal shifted Legendre factors and their derivatives.
                let lx = shifted_legendre(p, pt[0], max_deriv);
                let ly = shifted_legendre(p, pt[1], max_deriv);
                for (d, &(kx, ky)) in DERIV_INDICES.iter().take(nd).enumerate() {
                    let base = (q * nd + d) * n_modes;
                    for (m, &(i, j)) in modes.iter().enumerate() {
                        data[base + m] = lx[kx][i] * ly[ky][j];
                    }
                }
            }
        }
        ElemKind::Triangle => {
            for (q, pt) in points.iter().enumerate() {
                let (x, y) = (pt[0], pt[1]);
                let u = 2.0 * x + y - 1.0;
                let v = 1.0 - y;
                let b = 2.0 * y - 1.0;
                let h = homogenized_legendre_all(p, u, v, max_deriv);
                // Jacobi tables per first index i: jac[i][k][j] = d^k P_j^{(2i+1,0)}(b).
                let jac: Vec<Vec<Vec<f64>>> = (0..=p)
                    .map(|i| jacobi_all(p - i, (2 * i + 1) as f64, 0.0, b, max_deriv))
                    .collect();
                for (d, &(kx, ky)) in DERIV_INDICES.iter().take(nd).enumerate() {
                    let base = (q * nd + d) * n_modes;
                    for (m, &(i, j)) in modes.iter().enumerate() {
                        let norm = (2.0 * (2 * i + 1) as f64 * (i + j + 1) as f64).sqrt();
                        // d_x^kx d_y^ky [H_i(u,v) Q_j(y)] with u = 2x+y-1,
                        // v = 1-y, Q_j(y) = P_j^{(2i+1,0)}(2y-1):
                        // the x-derivatives act on H through u only (factor
                        // 2 each); every y-derivative applies (d_u - d_v) to
                        // H or lands on Q via Leibniz.
                        let mut sum = 0.0;
                        for r in 0..=ky {
                            let mut hterm = 0.0;
                            for k in 0..=r {
                                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                                hterm += binom(r, k) * sign * h[kx + r - k][k][i];
                            }
                            let qder = 2f64.powi((ky - r) as i32) * jac[i][ky - r][j];
                            sum += binom(ky, r) * hterm * qder;
                        }
                        data[base + m] = norm * 2f64.powi(kx as i32) * sum;
                    }
                }
            }
        }
    }

    BasisTable {
        kind,
        p,
        max_deriv,
        n_modes,
        n_points: points.len(),
        n_derivs: nd,
        data,
    }
}

fn binom(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Orthonormal shifted Legendre values/derivatives on [0,1]:
/// `out[k][i]` = d^k L_i(x), L_i = sqrt(2i+1) P_i(2x-1).
fn shifted_legendre(p: usize, x: f64, max_deriv: usize) -> Vec<Vec<f64>> {
    let t = 2.0 * x - 1.0;
    let mut tab = legendre_all(p, t, max_deriv);
    for (k, row) in tab.iter_mut().enumerate() {
        let scale = 2f64.powi(k as i32);
        for (i, v) in row.iter_mut().enumerate() {
            *v *= scale * ((2 * i + 1) as f64).sqrt();
        }
    }
    tab
}

/// A reference basis descriptor: mode count plus evaluation on demand.
#[derive(Clone, Copy, Debug)]
pub struct ReferenceBasis {
    pub kind: ElemKind,
    pub p: usize,
}

impl ReferenceBasis {
    pub fn new(kind: ElemKind, p: usize) -> Self {
        Self { kind, p }
    }

    pub fn dof_count(&self) -> usize {
        dof_count(self.kind, self.p)
    }

    pub fn tabulate(&self, points: &[[f64; 2]], max_deriv: usize) -> BasisTable {
        eval_basis(self.kind, self.p, points, max_deriv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn dof_counts() {
        assert_eq!(dof_count(ElemKind::Quad, 1), 4);
        assert_eq!(dof_count(ElemKind::Quad, 2), 9);
        assert_eq!(dof_count(ElemKind::Triangle, 2), 6);
        assert_eq!(dof_count(ElemKind::Triangle, 3), 10);
        assert_eq!(dof_count(ElemKind::Quad, 20), 441);
    }

    #[test]
    fn constant_mode_is_constant() {
        for kind in [ElemKind::Quad, ElemKind::Triangle] {
            let pts = [[0.17, 0.21], [0.5, 0.25], [0.05, 0.9]];
            let tab = eval_basis(kind, 3, &pts, 2);
            let expected = match kind {
                ElemKind::Quad => 1.0,
                ElemKind::Triangle => 2f64.sqrt(),
            };
            for q in 0..pts.len() {
                assert!((tab.value(q, 0, 0, 0) - expected).abs() < 1e-14);
                assert!(tab.value(q, 1, 0, 0).abs() < 1e-14);
                assert!(tab.value(q, 0, 1, 0).abs() < 1e-14);
                assert!(tab.value(q, 2, 0, 0).abs() < 1e-14);
            }
        }
    }

    fn gram(kind: ElemKind, p: usize) -> DMatrix<f64> {
        let rule = quadrature(kind, 2 * p + 2);
        let tab = eval_basis(kind, p, &rule.points, 0);
        let n = tab.n_modes;
        let mut g = DMatrix::zeros(n, n);
        for q in 0..rule.len() {
            let row = tab.row(q, 0, 0);
            let w = rule.weights[q];
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += w * row[i] * row[j];
                }
            }
        }
        g
    }

    #[test]
    fn mass_matrix_is_identity_and_well_conditioned() {
        for kind in [ElemKind::Quad, ElemKind::Triangle] {
            for p in [1, 2, 5, 10] {
                let g = gram(kind, p);
                let n = g.nrows();
                for i in 0..n {
                    for j in 0..n {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (g[(i, j)] - expect).abs() < 1e-10,
                            "{kind:?} p={p} ({i},{j}) = {}",
                            g[(i, j)]
                        );
                    }
                }
                let eig = g.symmetric_eigenvalues();
                let cond = eig.max() / eig.min();
                assert!(cond <= 10.0, "{kind:?} p={p} cond={cond}");
            }
        }
    }

    #[test]
    fn span_reproduces_monomials() {
        // Project x^a y^b onto the orthonormal basis and check the residual
        // at random points.
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut rand01 = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for kind in [ElemKind::Quad, ElemKind::Triangle] {
            for p in [2usize, 4, 6] {
                let rule = quadrature(kind, 2 * p + 2);
                let tab = eval_basis(kind, p, &rule.points, 0);
                let pairs: Vec<(usize, usize)> = match kind {
                    ElemKind::Quad => (0..=p)
                        .flat_map(|a| (0..=p).map(move |b| (a, b)))
                        .collect(),
                    ElemKind::Triangle => (0..=p)
                        .flat_map(|a| (0..=(p - a)).map(move |b| (a, b)))
                        .collect(),
                };
                for (a, b) in pairs {
                    let mut coeffs = vec![0.0; tab.n_modes];
                    for q in 0..rule.len() {
                        let mono = rule.points[q][0].powi(a as i32) * rule.points[q][1].powi(b as i32);
                        let w = rule.weights[q];
                        for (m, c) in coeffs.iter_mut().enumerate() {
                            *c += w * mono * tab.value(q, 0, 0, m);
                        }
                    }
                    for _ in 0..100 {
                        let (x, y) = match kind {
                            ElemKind::Quad => (rand01(), rand01()),
                            ElemKind::Triangle => {
                                let (mut x, mut y) = (rand01(), rand01());
                                if x + y > 1.0 {
                                    x = 1.0 - x;
                                    y = 1.0 - y;
                                }
                                (x, y)
                            }
                        };
                        let point_tab = eval_basis(kind, p, &[[x, y]], 0);
                        let value = point_tab.combine(0, 0, 0, &coeffs);
                        let mono = x.powi(a as i32) * y.powi(b as i32);
                        assert!(
                            (value - mono).abs() <= 1e-10,
                            "{kind:?} p={p} x^{a} y^{b}: {value} vs {mono}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for kind in [ElemKind::Quad, ElemKind::Triangle] {
            for p in [2usize, 4, 6] {
                let (x0, y0) = (0.31, 0.27);
                let n = dof_count(kind, p);
                let eval = |x: f64, y: f64, kx: usize, ky: usize, m: usize| {
                    eval_basis(kind, p, &[[x, y]], 3).value(0, kx, ky, m)
                };
                for m in 0..n {
                    for (kx, ky) in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1)] {
                        // Differentiate the already-tabulated next-lower order.
                        let (bx, by, dir) = if kx > 0 {
                            (kx - 1, ky, 0)
                        } else {
                            (kx, ky - 1, 1)
                        };
                        let fd = if dir == 0 {
                            (eval(x0 + h, y0, bx, by, m) - eval(x0 - h, y0, bx, by, m)) / (2.0 * h)
                        } else {
                            (eval(x0, y0 + h, bx, by, m) - eval(x0, y0 - h, bx, by, m)) / (2.0 * h)
                        };
                        let exact = eval(x0, y0, kx, ky, m);
                        let scale = 1.0 + exact.abs();
                        assert!(
                            (exact - fd).abs() < 1e-7 * scale.max(fd.abs()),
                            "{kind:?} p={p} mode {m} d({kx},{ky}): {exact} vs fd {fd}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_unsupported_derivative_order() {
        let result = std::panic::catch_unwind(|| {
            eval_basis(ElemKind::Quad, 2, &[[0.5, 0.5]], 5);
        });
        assert!(result.is_err());
    }
}
