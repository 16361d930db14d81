//! Univariate polynomial building blocks: Legendre and Jacobi evaluation
//! with derivatives via differentiated three-term recurrences, and the
//! homogenised Legendre form used by the simplex basis.

/// Evaluates Legendre polynomials P_0..P_n on [-1,1] together with
/// derivatives up to `max_deriv`.
///
/// Returns `out[k][i]` = d^k/dx^k P_i(x). The recurrence
/// `(i+1) P_{i+1} = (2i+1) x P_i - i P_{i-1}` is differentiated k times,
/// which is stable on the whole interval including the endpoints.
pub fn legendre_all(n: usize, x: f64, max_deriv: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n + 1]; max_deriv + 1];
    out[0][0] = 1.0;
    if n == 0 {
        return out;
    }
    out[0][1] = x;
    if max_deriv >= 1 {
        out[1][1] = 1.0;
    }
    for i in 1..n {
        let a = (2 * i + 1) as f64;
        let b = i as f64;
        let c = (i + 1) as f64;
        for k in 0..=max_deriv {
            let lower = if k > 0 { out[k - 1][i] } else { 0.0 };
            out[k][i + 1] = (a * (x * out[k][i] + k as f64 * lower) - b * out[k][i - 1]) / c;
        }
    }
    out
}

/// Evaluates Jacobi polynomials P_0^{(a,b)}..P_n^{(a,b)} at x in [-1,1]
/// with derivatives up to `max_deriv`; `out[k][i]` = d^k P_i / dx^k.
pub fn jacobi_all(n: usize, alpha: f64, beta: f64, x: f64, max_deriv: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n + 1]; max_deriv + 1];
    out[0][0] = 1.0;
    if n == 0 {
        return out;
    }
    out[0][1] = 0.5 * ((alpha + beta + 2.0) * x + (alpha - beta));
    if max_deriv >= 1 {
        out[1][1] = 0.5 * (alpha + beta + 2.0);
    }
    for i in 1..n {
        let if64 = i as f64;
        let s = 2.0 * if64 + alpha + beta;
        let a = 2.0 * (if64 + 1.0) * (if64 + alpha + beta + 1.0) * s;
        let b = (s + 1.0) * (alpha * alpha - beta * beta);
        let c = (s + 1.0) * (s + 2.0) * s;
        let d = 2.0 * (if64 + alpha) * (if64 + beta) * (s + 2.0);
        for k in 0..=max_deriv {
            let lower = if k > 0 { out[k - 1][i] } else { 0.0 };
            out[k][i + 1] =
                (b * out[k][i] + c * (x * out[k][i] + k as f64 * lower) - d * out[k][i - 1]) / a;
        }
    }
    out
}

/// Evaluates the homogenised Legendre polynomials H_i(u,v) = v^i P_i(u/v)
/// and their mixed partials d^a/du^a d^b/dv^b up to total order `max_deriv`.
///
/// `out[a][b][i]` = ∂_u^a ∂_v^b H_i(u,v) for a + b <= max_deriv. Each H_i is
/// a bivariate polynomial, so the evaluation stays finite for v = 0 as well.
pub fn homogenized_legendre_all(
    n: usize,
    u: f64,
    v: f64,
    max_deriv: usize,
) -> Vec<Vec<Vec<f64>>> {
    let m = max_deriv;
    let mut out = vec![vec![vec![0.0; n + 1]; m + 1]; m + 1];
    out[0][0][0] = 1.0;
    if n == 0 {
        return out;
    }
    out[0][0][1] = u;
    if m >= 1 {
        out[1][0][1] = 1.0;
    }
    for i in 1..n {
        let p = (2 * i + 1) as f64;
        let q = i as f64;
        let r = (i + 1) as f64;
        for a in 0..=m {
            for b in 0..=(m - a) {
                let du = if a > 0 { out[a - 1][b][i] } else { 0.0 };
                let dv1 = if b > 0 { out[a][b - 1][i - 1] } else { 0.0 };
                let dv2 = if b > 1 {
                    (b * (b - 1)) as f64 * out[a][b - 2][i - 1]
                } else {
                    0.0
                };
                out[a][b][i + 1] = (p * (u * out[a][b][i] + a as f64 * du)
                    - q * (v * v * out[a][b][i - 1] + 2.0 * b as f64 * v * dv1 + dv2))
                    / r;
            }
        }
    }
    out
}

/// Gauss-Legendre nodes and weights on [0,1] with `n` points
/// (exact for polynomials of degree 2n-1).
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let tab = legendre_all(n, x, 1);
            let f = tab[0][n];
            let df = tab[1][n];
            let dx = f / df;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let tab = legendre_all(n, x, 1);
        let dp = tab[1][n];
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1,1] -> [0,1]; reverse so points come out increasing.
        points[n - 1 - k] = 0.5 * (x + 1.0);
        weights[n - 1 - k] = 0.5 * w;
    }
    (points, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_values_match_closed_forms() {
        let x = 0.3;
        let tab = legendre_all(4, x, 3);
        assert!((tab[0][2] - 0.5 * (3.0 * x * x - 1.0)).abs() < 1e-14);
        assert!((tab[0][3] - 0.5 * (5.0 * x * x * x - 3.0 * x)).abs() < 1e-14);
        assert!((tab[1][2] - 3.0 * x).abs() < 1e-14);
        assert!((tab[2][3] - 15.0 * x).abs() < 1e-14);
        assert!((tab[3][3] - 15.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_reduces_to_legendre_for_zero_weights() {
        let x = -0.42;
        let leg = legendre_all(6, x, 2);
        let jac = jacobi_all(6, 0.0, 0.0, x, 2);
        for k in 0..=2 {
            for i in 0..=6 {
                assert!((leg[k][i] - jac[k][i]).abs() < 1e-12, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn jacobi_derivative_matches_finite_difference() {
        let alpha = 3.0;
        let x = 0.2;
        let h = 1e-6;
        let f = |x: f64| jacobi_all(5, alpha, 0.0, x, 0)[0][5];
        let fd = (f(x + h) - f(x - h)) / (2.0 * h);
        let tab = jacobi_all(5, alpha, 0.0, x, 1);
        assert!((tab[1][5] - fd).abs() < 1e-7 * (1.0 + fd.abs()));
    }

    #[test]
    fn homogenized_matches_scaled_legendre() {
        // H_i(u,v) = v^i P_i(u/v) for v != 0.
        let (u, v) = (0.37, 0.81);
        let h = homogenized_legendre_all(5, u, v, 0);
        let leg = legendre_all(5, u / v, 0);
        for i in 0..=5 {
            let expect = v.powi(i as i32) * leg[0][i];
            assert!((h[0][0][i] - expect).abs() < 1e-13, "i={i}");
        }
    }

    #[test]
    fn homogenized_mixed_partials_match_finite_differences() {
        let (u, v) = (0.2, 0.55);
        let h = 1e-5;
        let val = |u: f64, v: f64, i: usize| homogenized_legendre_all(6, u, v, 0)[0][0][i];
        for i in 2..=6 {
            let tab = homogenized_legendre_all(6, u, v, 2);
            let du_fd = (val(u + h, v, i) - val(u - h, v, i)) / (2.0 * h);
            let dv_fd = (val(u, v + h, i) - val(u, v - h, i)) / (2.0 * h);
            let duv_fd = (val(u + h, v + h, i) - val(u + h, v - h, i) - val(u - h, v + h, i)
                + val(u - h, v - h, i))
                / (4.0 * h * h);
            assert!((tab[1][0][i] - du_fd).abs() < 1e-7 * (1.0 + du_fd.abs()));
            assert!((tab[0][1][i] - dv_fd).abs() < 1e-7 * (1.0 + dv_fd.abs()));
            assert!((tab[1][1][i] - duv_fd).abs() < 1e-5 * (1.0 + duv_fd.abs()));
        }
    }

    #[test]
    fn gauss_rule_integrates_monomials() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre_01(n);
            for d in 0..=(2 * n - 1) {
                let approx: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(xi, wi)| wi * xi.powi(d as i32))
                    .sum();
                let exact = 1.0 / (d as f64 + 1.0);
                assert!(
                    (approx - exact).abs() < 1e-13,
                    "n={n} d={d} approx={approx} exact={exact}"
                );
            }
        }
    }
}
