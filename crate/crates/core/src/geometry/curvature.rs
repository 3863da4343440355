use crate::error::{Error, Result};
use crate::geometry::field::{Field, MetricField, ScalarField, SymTensorField};
use crate::geometry::grid::{Grid, GridKind};
use crate::geometry::linalg::{self, Mat, Vec3, ZERO_MAT};
use crate::geometry::stencil;
use std::sync::Arc;

/// `R^l_{ijk}` stored as `r[l][i][j][k]`, with
/// `R(∂_i, ∂_j)∂_k = R^l_{ijk} ∂_l`.
pub type Riemann = [[[[f64; 3]; 3]; 3]; 3];
/// `Γ^k_{ij}` stored as `c[k][i][j]`.
pub type Christoffel = [Mat; 3];

/// Metric and curvature data at one point.
#[derive(Debug, Clone, Copy)]
pub struct NodeGeometry {
    pub n: usize,
    pub g: Mat,
    pub ginv: Mat,
    pub christoffel: Christoffel,
    pub riemann: Riemann,
    pub ricci: Mat,
    pub scalar: f64,
}

impl NodeGeometry {
    /// Assemble from the metric and its first and second coordinate
    /// derivatives (`dg[k] = ∂_k g`, `ddg[k][m] = ∂_k ∂_m g`, symmetric in k, m).
    pub fn from_jets(n: usize, g: &Mat, dg: &[Mat; 3], ddg: &[[Mat; 3]; 3]) -> Option<Self> {
        let ginv = linalg::inverse(n, g)?;
        // Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
        let mut low = [ZERO_MAT; 3];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    low[l][i][j] = 0.5 * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                }
            }
        }
        let mut chr = [ZERO_MAT; 3];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[k][l] * low[l][i][j];
                    }
                    chr[k][i][j] = s;
                }
            }
        }
        // ∂_m Γ^k_ij = (∂_m g^{kl}) Γ_{l,ij} + g^{kl} ∂_m Γ_{l,ij}
        let mut dchr = [[ZERO_MAT; 3]; 3]; // dchr[m][k] = ∂_m Γ^k
        for m in 0..n {
            let dginv = linalg::scale(n, &linalg::mul(n, &linalg::mul(n, &ginv, &dg[m]), &ginv), -1.0);
            let mut dlow = [ZERO_MAT; 3];
            for l in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        dlow[l][i][j] = 0.5 * (ddg[m][i][j][l] + ddg[m][j][i][l] - ddg[m][l][i][j]);
                    }
                }
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            s += dginv[k][l] * low[l][i][j] + ginv[k][l] * dlow[l][i][j];
                        }
                        dchr[m][k][i][j] = s;
                    }
                }
            }
        }
        let mut rm: Riemann = [[[[0.0; 3]; 3]; 3]; 3];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = dchr[i][l][j][k] - dchr[j][l][i][k];
                        for p in 0..n {
                            s += chr[l][i][p] * chr[p][j][k] - chr[l][j][p] * chr[p][i][k];
                        }
                        rm[l][i][j][k] = s;
                    }
                }
            }
        }
        Some(Self::assemble(n, *g, ginv, chr, rm))
    }

    /// Constant-curvature point in a chart where the Christoffels vanish.
    pub fn constant_curvature(n: usize, g: &Mat, k: f64) -> Option<Self> {
        let ginv = linalg::inverse(n, g)?;
        let mut rm: Riemann = [[[[0.0; 3]; 3]; 3]; 3];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for kk in 0..n {
                        let di = if l == i { 1.0 } else { 0.0 };
                        let dj = if l == j { 1.0 } else { 0.0 };
                        rm[l][i][j][kk] = k * (g[j][kk] * di - g[i][kk] * dj);
                    }
                }
            }
        }
        Some(Self::assemble(n, *g, ginv, [ZERO_MAT; 3], rm))
    }

    fn assemble(n: usize, g: Mat, ginv: Mat, christoffel: Christoffel, riemann: Riemann) -> Self {
        let mut ricci = ZERO_MAT;
        for j in 0..n {
            for k in 0..n {
                ricci[j][k] = (0..n).map(|i| riemann[i][i][j][k]).sum();
            }
        }
        let ricci = linalg::symmetrize(n, &ricci);
        let scalar = linalg::contract(n, &ginv, &ricci);
        Self { n, g, ginv, christoffel, riemann, ricci, scalar }
    }

    /// Fully covariant `R_{lijk} = g_{lm} R^m_{ijk}`.
    pub fn riemann_lower(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        (0..self.n).map(|m| self.g[l][m] * self.riemann[m][i][j][k]).sum()
    }

    /// `⟨Rm(X,Y)X, Y⟩`.
    pub fn rm_xyxy(&self, x: &Vec3, y: &Vec3) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        s += self.riemann_lower(l, i, j, k) * x[i] * y[j] * x[k] * y[l];
                    }
                }
            }
        }
        s
    }

    /// `Γ(v, w)^k = Γ^k_ij v^i w^j`.
    pub fn christoffel_contract(&self, v: &Vec3, w: &Vec3) -> Vec3 {
        let mut r = [0.0; 3];
        for (k, rk) in r.iter_mut().enumerate().take(self.n) {
            *rk = linalg::bilinear(self.n, &self.christoffel[k], v, w);
        }
        r
    }

    /// Largest violation of the pair antisymmetries and the first Bianchi identity.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut m = 0.0f64;
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let r = self.riemann_lower(l, i, j, k);
                        m = m.max((r + self.riemann_lower(l, j, i, k)).abs());
                        m = m.max((r + self.riemann_lower(k, i, j, l)).abs());
                        let b = self.riemann[l][i][j][k] + self.riemann[l][j][k][i] + self.riemann[l][k][i][j];
                        m = m.max(b.abs());
                    }
                }
            }
        }
        m
    }
}

/// Curvature of a whole metric field.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub nodes: Vec<NodeGeometry>,
    pub ricci: SymTensorField,
    pub scalar: ScalarField,
}

impl CurvatureBundle {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.ricci.grid
    }

    pub fn christoffel(&self, idx: usize) -> &Christoffel {
        &self.nodes[idx].christoffel
    }
}

/// Finite-difference geometry at a torus node.
pub fn torus_node(grid: &Grid, g: &[Mat], idx: usize) -> Option<NodeGeometry> {
    let dg = stencil::grad(grid, g, idx);
    let ddg = stencil::hessian(grid, g, idx);
    NodeGeometry::from_jets(grid.dim(), &g[idx], &dg, &ddg)
}

/// Sphere node geometry: stored metrics are `4ρ δ` in a stereographic
/// chart centred at the node, so `K = 4 / g_00`.
pub fn sphere_node(g: &Mat) -> Option<NodeGeometry> {
    NodeGeometry::constant_curvature(2, g, 4.0 / g[0][0])
}

pub fn curvature(g: &MetricField) -> Result<CurvatureBundle> {
    let grid = g.grid().clone();
    let data = &g.field().data;
    let mut nodes = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let node = match grid.kind() {
            GridKind::Torus => torus_node(&grid, data, idx),
            GridKind::AnalyticSphere => sphere_node(&data[idx]),
        };
        match node {
            Some(n) => nodes.push(n),
            None => {
                return Err(Error::NotPositiveDefinite {
                    node: idx,
                    eigenvalue: linalg::min_eigenvalue(grid.dim(), &data[idx]),
                })
            }
        }
    }
    let ricci = Field::from_fn(grid.clone(), g.t(), |i| nodes[i].ricci);
    let scalar = Field::from_fn(grid, g.t(), |i| nodes[i].scalar);
    Ok(CurvatureBundle { nodes, ricci, scalar })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conformal(n: usize, amp: f64) -> MetricField {
        let grid = Arc::new(Grid::torus(&[n, n], &[std::f64::consts::TAU; 2]).unwrap());
        let f = Field::from_fn(grid.clone(), 0.0, |i| {
            let x = grid.coords(i);
            let u = amp * x[0].sin() * x[1].sin();
            linalg::scaled_identity(2, (2.0 * u).exp())
        });
        MetricField::new(f).unwrap()
    }

    #[test]
    fn flat_torus_has_no_curvature() {
        let grid = Arc::new(Grid::torus(&[8, 8, 8], &[1.0; 3]).unwrap());
        let b = curvature(&MetricField::flat(grid, 0.0)).unwrap();
        assert!(b.scalar.max_abs() < 1e-12);
        assert!(b.ricci.data.iter().all(|m| linalg::max_abs(3, m) < 1e-12));
    }

    #[test]
    fn conformal_scalar_curvature_second_order() {
        let mut errs = Vec::new();
        for &n in &[32usize, 64] {
            let g = conformal(n, 0.1);
            let b = curvature(&g).unwrap();
            let grid = g.grid();
            let mut e = 0.0f64;
            for i in 0..grid.len() {
                let x = grid.coords(i);
                let u = 0.1 * x[0].sin() * x[1].sin();
                let lap = -2.0 * u;
                let exact = -2.0 * (-2.0 * u).exp() * lap;
                e = e.max((b.scalar.data[i] - exact).abs());
            }
            errs.push(e);
        }
        assert!(errs[1] < 1e-3);
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn discrete_riemann_symmetries_exact() {
        let g = conformal(16, 0.3);
        let b = curvature(&g).unwrap();
        for node in &b.nodes {
            assert!(node.symmetry_residual() < 1e-12);
            assert!((linalg::contract(2, &node.ginv, &node.ricci) - node.scalar).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_closed_form() {
        let r = 1.7;
        let node = sphere_node(&linalg::scaled_identity(2, 4.0 * r * r)).unwrap();
        assert!((node.scalar - 2.0 / (r * r)).abs() < 1e-14);
        for i in 0..2 {
            for j in 0..2 {
                assert!((node.ricci[i][j] - node.g[i][j] / (r * r)).abs() < 1e-12);
            }
        }
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        let k = -node.rm_xyxy(&x, &y) / (node.g[0][0] * node.g[1][1]);
        assert!((k - 1.0 / (r * r)).abs() < 1e-14);
    }
}
