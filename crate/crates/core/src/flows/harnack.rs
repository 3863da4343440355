//! Pointwise D-quantity and Harnack expressions.

use crate::geometry::covariant::{divergence_from, norm_sq};
use crate::geometry::curvature::NodeGeometry;
use crate::geometry::linalg::{self, Mat, Vec3};

/// Everything the D and Harnack expressions read at one point and time.
#[derive(Debug, Clone, Copy)]
pub struct TensorJet {
    pub geo: NodeGeometry,
    pub s_tensor: Mat,
    pub s: f64,
    /// `∂_k S`.
    pub ds: Vec3,
    /// Covariant Hessian of `S`.
    pub hess_s: Mat,
    /// `∇_k S_ij` as `[k][i][j]`.
    pub nabla_s: [Mat; 3],
    /// `∂_t S_ij`.
    pub dt_s_tensor: Mat,
    /// `∂_t S`.
    pub dt_s: f64,
}

impl TensorJet {
    pub fn n(&self) -> usize {
        self.geo.n
    }

    pub fn lap_s(&self) -> f64 {
        linalg::contract(self.n(), &self.geo.ginv, &self.hess_s)
    }

    /// `(div S)_j = ∇^i S_ij`.
    pub fn div_s(&self) -> Vec3 {
        divergence_from(self.n(), &self.geo.ginv, &self.nabla_s)
    }

    pub fn s_norm_sq(&self) -> f64 {
        norm_sq(self.n(), &self.geo.ginv, &self.s_tensor)
    }

    /// `(∇_X S)(Y, Z)`.
    pub fn nabla_s_xyz(&self, x: &Vec3, y: &Vec3, z: &Vec3) -> f64 {
        let n = self.n();
        (0..n).map(|k| x[k] * linalg::bilinear(n, &self.nabla_s[k], y, z)).sum()
    }

    /// `|S(Y, ·)|²`.
    pub fn s_y_norm_sq(&self, y: &Vec3) -> f64 {
        let n = self.n();
        let w = linalg::mat_vec(n, &self.s_tensor, y);
        linalg::bilinear(n, &self.geo.ginv, &w, &w)
    }

    /// `D(S, X) = ∂tS − ΔS − 2|S|² + 4(div S)(X) − 2⟨∇S, X⟩ + 2Ric(X,X) − 2S(X,X)`.
    pub fn d_quantity(&self, x: &Vec3) -> f64 {
        let n = self.n();
        self.dt_s - self.lap_s() - 2.0 * self.s_norm_sq() + 4.0 * linalg::dot(n, &self.div_s(), x)
            - 2.0 * linalg::dot(n, &self.ds, x)
            + 2.0 * linalg::bilinear(n, &self.geo.ricci, x, x)
            - 2.0 * linalg::bilinear(n, &self.s_tensor, x, x)
    }

    /// Trace Harnack expression `∂tS + σS/s − 2⟨∇S, X⟩ + 2S(X,X)`, where `s`
    /// is the orientation time and `σ = ±1` (backwards: `∂_t = −∂_τ`).
    pub fn harnack_trace(&self, x: &Vec3, sigma: f64, s_time: f64) -> f64 {
        let n = self.n();
        self.dt_s + sigma * self.s / s_time - 2.0 * linalg::dot(n, &self.ds, x)
            + 2.0 * linalg::bilinear(n, &self.s_tensor, x, x)
    }

    /// Matrix Harnack expression `H(S, X, Y)`.
    pub fn harnack_matrix(&self, x: &Vec3, y: &Vec3, sigma: f64, s_time: f64) -> f64 {
        let n = self.n();
        2.0 * linalg::bilinear(n, &self.dt_s_tensor, y, y)
            + sigma * linalg::bilinear(n, &self.s_tensor, y, y) / s_time
            + 2.0 * self.s_y_norm_sq(y)
            - linalg::bilinear(n, &self.hess_s, y, y)
            - 4.0 * self.nabla_s_xyz(x, y, y)
            + 4.0 * self.nabla_s_xyz(y, x, y)
            - 2.0 * self.geo.rm_xyxy(x, y)
    }

    /// `Σ_i H(S, X, e_i) − H(S, X) − D(S, X)` over the frame obtained by
    /// Gram–Schmidt from `basis`.
    pub fn trace_residual(&self, x: &Vec3, sigma: f64, s_time: f64, basis: &[Vec3]) -> f64 {
        let n = self.n();
        let frame = linalg::orthonormalize(n, &self.geo.g, basis);
        let tr: f64 = frame.iter().map(|e| self.harnack_matrix(x, e, sigma, s_time)).sum();
        tr - self.harnack_trace(x, sigma, s_time) - self.d_quantity(x)
    }

    /// `∂tS − 2|S|² − Σ_i (∂t S)(e_i, e_i)`, zero along an exact solution.
    pub fn time_consistency(&self) -> f64 {
        self.dt_s - 2.0 * self.s_norm_sq() - linalg::contract(self.n(), &self.geo.ginv, &self.dt_s_tensor)
    }
}

/// Coordinate basis `e_1, …, e_n`.
pub fn coordinate_basis(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            let mut v = [0.0; 3];
            v[i] = 1.0;
            v
        })
        .collect()
}
