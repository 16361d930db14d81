//! Dirichlet boundary data for the biharmonic problem.
//!
//! The two boundary conditions are g1 = u on the boundary and
//! g2 = n.grad u. All boundary terms in the load vector, the error, and
//! the estimator need only the trace of g1, the facewise tangential
//! derivatives of g1, the value of g2, and the tangential derivative of
//! g2 along each (straight) face. Supplying value/gradient/Hessian
//! closures of a smooth extension provides all of these at quadrature
//! accuracy.

type Scalar2 = [f64; 2];

pub struct BoundaryData {
    value: Box<dyn Fn(Scalar2) -> f64 + Send + Sync>,
    gradient: Box<dyn Fn(Scalar2) -> Scalar2 + Send + Sync>,
    hessian: Box<dyn Fn(Scalar2) -> [[f64; 2]; 2] + Send + Sync>,
}

impl BoundaryData {
    /// Homogeneous (clamped) boundary conditions g1 = g2 = 0.
    pub fn homogeneous() -> Self {
        Self {
            value: Box::new(|_| 0.0),
            gradient: Box::new(|_| [0.0, 0.0]),
            hessian: Box::new(|_| [[0.0, 0.0], [0.0, 0.0]]),
        }
    }

    /// Boundary data of a known exact solution.
    pub fn from_exact(
        value: impl Fn(Scalar2) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(Scalar2) -> Scalar2 + Send + Sync + 'static,
        hessian: impl Fn(Scalar2) -> [[f64; 2]; 2] + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: Box::new(hessian),
        }
    }

    /// g1 at a boundary point.
    pub fn g1(&self, x: Scalar2) -> f64 {
        (self.value)(x)
    }

    /// g2 = n.grad u at a boundary point.
    pub fn g2(&self, x: Scalar2, n: Scalar2) -> f64 {
        let g = (self.gradient)(x);
        g[0] * n[0] + g[1] * n[1]
    }

    /// Tangential derivative of g1 along the face direction t.
    pub fn dg1_dt(&self, x: Scalar2, t: Scalar2) -> f64 {
        let g = (self.gradient)(x);
        g[0] * t[0] + g[1] * t[1]
    }

    /// Second tangential derivative of g1 along the face: t^T D^2 g1 t.
    pub fn d2g1_dt2(&self, x: Scalar2, t: Scalar2) -> f64 {
        let h = (self.hessian)(x);
        t[0] * (h[0][0] * t[0] + h[0][1] * t[1]) + t[1] * (h[1][0] * t[0] + h[1][1] * t[1])
    }

    /// Tangential derivative of g2 along the face: t^T D^2 u n, the only
    /// derivative information of g2 that exists on the face.
    pub fn dg2_dt(&self, x: Scalar2, n: Scalar2, t: Scalar2) -> f64 {
        let h = (self.hessian)(x);
        t[0] * (h[0][0] * n[0] + h[0][1] * n[1]) + t[1] * (h[1][0] * n[0] + h[1][1] * n[1])
    }
}
