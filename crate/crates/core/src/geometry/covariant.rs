use crate::error::{Error, Result};
use crate::geometry::curvature::{CurvatureBundle, NodeGeometry};
use crate::geometry::field::{Field, MetricField, ScalarField, SymTensorField, VectorField};
use crate::geometry::grid::Grid;
use crate::geometry::linalg::{self, Mat, Vec3, ZERO_MAT};
use crate::geometry::stencil;

/// `∇_k T_ij` at a torus node, as `out[k][i][j]`.
pub fn nabla_tensor_at(grid: &Grid, t: &[Mat], geo: &NodeGeometry, idx: usize) -> [Mat; 3] {
    let n = geo.n;
    let d = stencil::grad(grid, t, idx);
    let tt = &t[idx];
    let c = &geo.christoffel;
    let mut out = [ZERO_MAT; 3];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = d[k][i][j];
                for m in 0..n {
                    s -= c[m][k][i] * tt[m][j] + c[m][k][j] * tt[i][m];
                }
                out[k][i][j] = s;
            }
        }
    }
    out
}

/// Covariant Hessian `∂_i∂_j f − Γ^k_ij ∂_k f` at a torus node.
pub fn hessian_at(grid: &Grid, f: &[f64], geo: &NodeGeometry, idx: usize) -> Mat {
    let n = geo.n;
    let d = stencil::grad(grid, f, idx);
    let dd = stencil::hessian(grid, f, idx);
    let mut h = ZERO_MAT;
    for i in 0..n {
        for j in 0..n {
            let mut s = dd[i][j];
            for k in 0..n {
                s -= geo.christoffel[k][i][j] * d[k];
            }
            h[i][j] = s;
        }
    }
    h
}

/// Divergence `g^{ik} ∇_k T_ij` from a precomputed `∇T`.
pub fn divergence_from(n: usize, ginv: &Mat, nt: &[Mat; 3]) -> Vec3 {
    let mut r = [0.0; 3];
    for (j, rj) in r.iter_mut().enumerate().take(n) {
        let mut s = 0.0;
        for i in 0..n {
            for k in 0..n {
                s += ginv[i][k] * nt[k][i][j];
            }
        }
        *rj = s;
    }
    r
}

/// `|T|² = g^{ia} g^{jb} T_ij T_ab`.
pub fn norm_sq(n: usize, ginv: &Mat, t: &Mat) -> f64 {
    let up = linalg::mul(n, &linalg::mul(n, ginv, t), ginv);
    linalg::contract(n, &up, t)
}

/// Raise an index: `(g^{-1} w)^i`.
pub fn raise(n: usize, ginv: &Mat, w: &Vec3) -> Vec3 {
    linalg::mat_vec(n, ginv, w)
}

/// Covariant differential operators bound to one metric and its curvature.
pub struct CovOps<'a> {
    g: &'a MetricField,
    bundle: &'a CurvatureBundle,
}

impl<'a> CovOps<'a> {
    pub fn new(g: &'a MetricField, bundle: &'a CurvatureBundle) -> Result<Self> {
        g.field().same_grid(&bundle.ricci)?;
        Ok(Self { g, bundle })
    }

    fn grid(&self) -> &Grid {
        self.g.grid()
    }

    fn n(&self) -> usize {
        self.g.dim()
    }

    fn check<T>(&self, f: &Field<T>, differentiates: bool) -> Result<()> {
        self.g.field().same_grid(f)?;
        if differentiates && !self.grid().is_torus() {
            return Err(Error::Unsupported(
                "stencil derivatives of sampled fields on the analytic sphere".into(),
            ));
        }
        Ok(())
    }

    fn node(&self, idx: usize) -> &NodeGeometry {
        &self.bundle.nodes[idx]
    }

    pub fn gradient(&self, f: &ScalarField) -> Result<VectorField> {
        self.check(f, true)?;
        let n = self.n();
        Ok(Field::from_fn(self.g.grid().clone(), f.t, |i| {
            raise(n, &self.node(i).ginv, &stencil::grad(self.grid(), &f.data, i))
        }))
    }

    pub fn hessian(&self, f: &ScalarField) -> Result<SymTensorField> {
        self.check(f, true)?;
        Ok(Field::from_fn(self.g.grid().clone(), f.t, |i| {
            hessian_at(self.grid(), &f.data, self.node(i), i)
        }))
    }

    /// Hessian evaluated on `(Y, Y)`.
    pub fn hessian_yy(&self, f: &ScalarField, y: &VectorField) -> Result<ScalarField> {
        self.check(y, false)?;
        let h = self.hessian(f)?;
        Ok(Field::from_fn(h.grid.clone(), f.t, |i| linalg::bilinear(self.n(), &h.data[i], &y.data[i], &y.data[i])))
    }

    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        let h = self.hessian(f)?;
        let n = self.n();
        Ok(Field::from_fn(h.grid.clone(), f.t, |i| linalg::contract(n, &self.node(i).ginv, &h.data[i])))
    }

    /// `(div T)_j = ∇^i T_ij` (covector components).
    pub fn divergence(&self, t: &SymTensorField) -> Result<VectorField> {
        self.check(t, true)?;
        let n = self.n();
        Ok(Field::from_fn(self.g.grid().clone(), t.t, |i| {
            let nt = nabla_tensor_at(self.grid(), &t.data, self.node(i), i);
            divergence_from(n, &self.node(i).ginv, &nt)
        }))
    }

    /// `(∇_X T)_ij`.
    pub fn nabla_x(&self, t: &SymTensorField, x: &VectorField) -> Result<SymTensorField> {
        self.check(t, true)?;
        self.check(x, false)?;
        let n = self.n();
        Ok(Field::from_fn(self.g.grid().clone(), t.t, |i| {
            let nt = nabla_tensor_at(self.grid(), &t.data, self.node(i), i);
            let mut r = ZERO_MAT;
            for k in 0..n {
                r = linalg::axpy(n, &r, x.data[i][k], &nt[k]);
            }
            r
        }))
    }

    pub fn norm_sq(&self, t: &SymTensorField) -> Result<ScalarField> {
        self.check(t, false)?;
        let n = self.n();
        Ok(Field::from_fn(self.g.grid().clone(), t.t, |i| norm_sq(n, &self.node(i).ginv, &t.data[i])))
    }

    /// `T(X, Y)`.
    pub fn eval(&self, t: &SymTensorField, x: &VectorField, y: &VectorField) -> Result<ScalarField> {
        self.check(t, false)?;
        self.check(x, false)?;
        self.check(y, false)?;
        let n = self.n();
        Ok(Field::from_fn(self.g.grid().clone(), t.t, |i| linalg::bilinear(n, &t.data[i], &x.data[i], &y.data[i])))
    }

    /// `⟨Rm(X,Y)X, Y⟩`.
    pub fn rm_xyxy(&self, x: &VectorField, y: &VectorField) -> Result<ScalarField> {
        self.check(x, false)?;
        self.check(y, false)?;
        Ok(Field::from_fn(self.g.grid().clone(), x.t, |i| self.node(i).rm_xyxy(&x.data[i], &y.data[i])))
    }
}
