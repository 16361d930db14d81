//! Quadrature rules on the reference elements.
//!
//! Reference square: [0,1]^2 (tensor Gauss). Reference triangle:
//! {(0,0),(1,0),(0,1)} via a collapsed (Duffy) tensor rule. Both families
//! have strictly positive weights and interior points, and are exact for
//! polynomials up to the requested order.

use super::poly1d::gauss_legendre_01;
use super::ElemKind;

/// A quadrature rule on a reference element.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Integrates a callback over the reference element.
    pub fn integrate(&self, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }
}

/// A quadrature rule on the reference interval [0,1], used for faces.
#[derive(Clone, Debug)]
pub struct FaceRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss rule on [0,1] exact for polynomials of degree `order`.
pub fn face_rule(order: usize) -> FaceRule {
    let n = order / 2 + 1;
    let (points, weights) = gauss_legendre_01(n);
    FaceRule { points, weights }
}

/// Quadrature on the reference element of `kind`, exact to degree `order`.
pub fn quadrature(kind: ElemKind, order: usize) -> QuadratureRule {
    match kind {
        ElemKind::Quad => {
            let n = order / 2 + 1;
            let (x, w) = gauss_legendre_01(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    points.push([x[i], x[j]]);
                    weights.push(w[i] * w[j]);
                }
            }
            QuadratureRule { points, weights }
        }
        ElemKind::Triangle => {
            // Duffy map (s,t) -> (s(1-t), t) with Jacobian (1-t). A degree-d
            // integrand becomes degree <= d in s and d+1 in t.
            let ns = order / 2 + 1;
            let nt = (order + 1) / 2 + 1;
            let (xs, ws) = gauss_legendre_01(ns);
            let (xt, wt) = gauss_legendre_01(nt);
            let mut points = Vec::with_capacity(ns * nt);
            let mut weights = Vec::with_capacity(ns * nt);
            for i in 0..ns {
                for j in 0..nt {
                    let s = xs[i];
                    let t = xt[j];
                    points.push([s * (1.0 - t), t]);
                    weights.push(ws[i] * wt[j] * (1.0 - t));
                }
            }
            QuadratureRule { points, weights }
        }
    }
}

/// Dyadically graded rule toward a corner of the reference element, for
/// integrands with an integrable point singularity there. The element is
/// recursively quartered `levels` times toward `corner_ref` (which must be
/// a vertex of the reference element); the base rule is applied on every
/// sub-cell, including the innermost one.
pub fn graded_rule(
    kind: ElemKind,
    base: &QuadratureRule,
    corner_ref: [f64; 2],
    levels: usize,
) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let near = |a: f64, b: f64| (a - b).abs() < 1e-9;
    match kind {
        ElemKind::Quad => {
            let mut origin = [0.0, 0.0];
            let mut size = 1.0f64;
            for _ in 0..levels {
                let half = 0.5 * size;
                let corner_origin = [
                    if near(corner_ref[0], origin[0]) {
                        origin[0]
                    } else {
                        origin[0] + half
                    },
                    if near(corner_ref[1], origin[1]) {
                        origin[1]
                    } else {
                        origin[1] + half
                    },
                ];
                for dx in [0.0, half] {
                    for dy in [0.0, half] {
                        let o = [origin[0] + dx, origin[1] + dy];
                        if near(o[0], corner_origin[0]) && near(o[1], corner_origin[1]) {
                            continue;
                        }
                        for (p, w) in base.points.iter().zip(&base.weights) {
                            points.push([o[0] + half * p[0], o[1] + half * p[1]]);
                            weights.push(w * half * half);
                        }
                    }
                }
                origin = corner_origin;
                size = half;
            }
            for (p, w) in base.points.iter().zip(&base.weights) {
                points.push([origin[0] + size * p[0], origin[1] + size * p[1]]);
                weights.push(w * size * size);
            }
        }
        ElemKind::Triangle => {
            let mut tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
            let mid = |a: [f64; 2], b: [f64; 2]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let push_mapped =
                |tri: &[[f64; 2]; 3], points: &mut Vec<[f64; 2]>, weights: &mut Vec<f64>| {
                    let (a, b, c) = (tri[0], tri[1], tri[2]);
                    let e1 = [b[0] - a[0], b[1] - a[1]];
                    let e2 = [c[0] - a[0], c[1] - a[1]];
                    let det = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
                    for (p, w) in base.points.iter().zip(&base.weights) {
                        points.push([
                            a[0] + p[0] * e1[0] + p[1] * e2[0],
                            a[1] + p[0] * e1[1] + p[1] * e2[1],
                        ]);
                        weights.push(w * det);
                    }
                };
            for _ in 0..levels {
                let [a, b, c] = tri;
                let (mab, mbc, mca) = (mid(a, b), mid(b, c), mid(c, a));
                let children = [
                    [a, mab, mca],
                    [mab, b, mbc],
                    [mca, mbc, c],
                    [mab, mbc, mca],
                ];
                let corner_child = children
                    .iter()
                    .position(|t| {
                        t.iter()
                            .any(|v| near(v[0], corner_ref[0]) && near(v[1], corner_ref[1]))
                    })
                    .expect("corner_ref must be a vertex of the reference triangle");
                for (i, child) in children.iter().enumerate() {
                    if i != corner_child {
                        push_mapped(child, &mut points, &mut weights);
                    }
                }
                tri = children[corner_child];
            }
            push_mapped(&tri, &mut points, &mut weights);
        }
    }
    QuadratureRule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn graded_rule_preserves_polynomial_exactness_and_measure() {
        for kind in [ElemKind::Quad, ElemKind::Triangle] {
            let base = quadrature(kind, 8);
            for corner in match kind {
                ElemKind::Quad => vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
                ElemKind::Triangle => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            } {
                let rule = graded_rule(kind, &base, corner, 8);
                assert!(rule.weights.iter().all(|&w| w > 0.0));
                let total = rule.integrate(|_, _| 1.0);
                let expect = match kind {
                    ElemKind::Quad => 1.0,
                    ElemKind::Triangle => 0.5,
                };
                assert!((total - expect).abs() < 1e-12, "{kind:?} {corner:?}: {total}");
                let m = rule.integrate(|x, y| x * y * y);
                let exact = match kind {
                    ElemKind::Quad => 1.0 / 6.0,
                    ElemKind::Triangle => 1.0 / 60.0,
                };
                assert!((m - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn graded_rule_captures_corner_singularity() {
        // int over [0,1]^2 of r^{-4/3} with r measured from the origin:
        // a plain Gauss rule is far off, the graded rule much closer.
        let base = quadrature(ElemKind::Quad, 12);
        let graded = graded_rule(ElemKind::Quad, &base, [0.0, 0.0], 8);
        let f = |x: f64, y: f64| (x * x + y * y).powf(-2.0 / 3.0);
        // Reference value via a very deep grading.
        let reference = graded_rule(ElemKind::Quad, &base, [0.0, 0.0], 40).integrate(|x, y| f(x, y));
        let plain = base.integrate(|x, y| f(x, y));
        let with_grading = graded.integrate(|x, y| f(x, y));
        assert!(
            (with_grading - reference).abs() < 0.02 * reference,
            "graded {with_grading} vs reference {reference}"
        );
        assert!((with_grading - reference).abs() < (plain - reference).abs());
    }

    #[test]
    fn unit_square_measures_one() {
        let rule = quadrature(ElemKind::Quad, 4);
        assert!((rule.integrate(|_, _| 1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn square_monomial_x2y2() {
        let rule = quadrature(ElemKind::Quad, 4);
        let v = rule.integrate(|x, y| x * x * y * y);
        assert!((v - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_first_moment() {
        let rule = quadrature(ElemKind::Triangle, 2);
        let v = rule.integrate(|x, _| x);
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn exactness_for_all_monomials_up_to_order() {
        for order in 0..=16 {
            let rule = quadrature(ElemKind::Quad, order);
            for a in 0..=order {
                for b in 0..=order {
                    let v = rule.integrate(|x, y| x.powi(a as i32) * y.powi(b as i32));
                    let exact = 1.0 / ((a as f64 + 1.0) * (b as f64 + 1.0));
                    assert!((v - exact).abs() < 1e-13 * exact.max(1.0), "quad {a},{b}");
                }
            }
            let rule = quadrature(ElemKind::Triangle, order);
            for a in 0..=order {
                for b in 0..=(order - a) {
                    let v = rule.integrate(|x, y| x.powi(a as i32) * y.powi(b as i32));
                    // int_T x^a y^b = a! b! / (a+b+2)!
                    let exact =
                        factorial(a as u32) * factorial(b as u32) / factorial((a + b + 2) as u32);
                    assert!(
                        (v - exact).abs() < 1e-13 * exact.max(1.0),
                        "tri {a},{b}: {v} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn weights_positive_points_interior() {
        for order in [0, 3, 7, 15, 25] {
            for kind in [ElemKind::Quad, ElemKind::Triangle] {
                let rule = quadrature(kind, order);
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    assert!(*w > 0.0);
                    assert!(p[0] > 0.0 && p[1] > 0.0);
                    match kind {
                        ElemKind::Quad => assert!(p[0] < 1.0 && p[1] < 1.0),
                        ElemKind::Triangle => assert!(p[0] + p[1] < 1.0),
                    }
                }
            }
        }
    }
}
