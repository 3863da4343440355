use crate::error::{Error, Result};
use crate::flows::harnack::TensorJet;
use crate::flows::spec::FlowSpec;
use crate::flows::state::FlowState;
use crate::geometry::covariant::{hessian_at, nabla_tensor_at};
use crate::geometry::curvature::{sphere_node, torus_node};
use crate::geometry::field::{ScalarField, SymTensorField};
use crate::geometry::grid::Grid;
use crate::geometry::linalg::{self, Mat, ZERO_MAT};
use crate::geometry::sphere::SphereModel;
use crate::geometry::stencil;
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    Torus,
    /// Closed-form sphere; all time derivatives are exact.
    Sphere(SphereModel),
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: FlowState,
    pub s_tensor: SymTensorField,
    pub s: ScalarField,
}

impl Snapshot {
    pub fn t(&self) -> f64 {
        self.state.t
    }
}

/// Time-ordered snapshots of one flow run.
#[derive(Debug, Clone)]
pub struct SpacetimeSolution {
    pub spec: FlowSpec,
    pub backend: Backend,
    pub snapshots: Vec<Snapshot>,
    /// Integrator step.
    pub dt: f64,
    pub stride: usize,
    /// Diagnostic if the run stopped at a singularity.
    pub truncation: Option<String>,
    pub warnings: Vec<String>,
    dt_s_tensor: Vec<Vec<Mat>>,
    dt_s: Vec<Vec<f64>>,
}

/// Second-order differencing weights for sample `k` of `m` equispaced samples.
fn diff_weights(k: usize, m: usize) -> Vec<(usize, f64)> {
    if m == 2 {
        vec![(0, -1.0), (1, 1.0)]
    } else if k == 0 {
        vec![(0, -1.5), (1, 2.0), (2, -0.5)]
    } else if k == m - 1 {
        vec![(m - 3, 0.5), (m - 2, -2.0), (m - 1, 1.5)]
    } else {
        vec![(k - 1, -0.5), (k + 1, 0.5)]
    }
}

impl SpacetimeSolution {
    pub fn new(
        spec: FlowSpec,
        backend: Backend,
        snapshots: Vec<Snapshot>,
        dt: f64,
        stride: usize,
        truncation: Option<String>,
        warnings: Vec<String>,
    ) -> Result<Self> {
        if snapshots.len() < 2 {
            return Err(Error::InsufficientFields { needed: 2, got: snapshots.len() });
        }
        for w in snapshots.windows(2) {
            if !(w[1].t() > w[0].t()) {
                return Err(Error::Config("snapshot times must increase strictly".into()));
            }
        }
        let m = snapshots.len();
        let len = snapshots[0].state.grid().len();
        let (dts_t, dts) = match backend {
            Backend::Torus => {
                let h = snapshots[1].t() - snapshots[0].t();
                let mut a = Vec::with_capacity(m);
                let mut b = Vec::with_capacity(m);
                for k in 0..m {
                    let w = diff_weights(k, m);
                    let mut st = vec![ZERO_MAT; len];
                    let mut sc = vec![0.0; len];
                    for &(j, c) in &w {
                        for i in 0..len {
                            st[i] = linalg::axpy(3, &st[i], c / h, &snapshots[j].s_tensor.data[i]);
                            sc[i] += c / h * snapshots[j].s.data[i];
                        }
                    }
                    a.push(st);
                    b.push(sc);
                }
                (a, b)
            }
            Backend::Sphere(model) => (
                vec![vec![ZERO_MAT; len]; m],
                snapshots.iter().map(|s| vec![model.dt_scalar_s(s.t()); len]).collect(),
            ),
        };
        Ok(Self { spec, backend, snapshots, dt, stride, truncation, warnings, dt_s_tensor: dts_t, dt_s: dts })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.snapshots[0].state.grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t()).collect()
    }

    pub fn t_start(&self) -> f64 {
        self.snapshots[0].t()
    }

    pub fn t_end(&self) -> f64 {
        self.snapshots.last().unwrap().t()
    }

    /// Spacing of stored snapshots.
    pub fn snapshot_dt(&self) -> f64 {
        self.snapshots[1].t() - self.snapshots[0].t()
    }

    pub fn is_truncated(&self) -> bool {
        self.truncation.is_some()
    }

    /// Index of the snapshot stored at time `t`.
    pub fn snapshot_index(&self, t: f64) -> Result<usize> {
        let (a, b) = (self.t_start(), self.t_end());
        if t < a - 1e-12 || t > b + 1e-12 {
            return Err(Error::TimeOutOfRange { t, min: a, max: b });
        }
        let h = self.snapshot_dt();
        let k = ((t - a) / h).round() as usize;
        if k < self.snapshots.len() && (self.snapshots[k].t() - t).abs() <= 1e-9 * (1.0 + t.abs()) {
            Ok(k)
        } else {
            Err(Error::NotSnapshotTime { t })
        }
    }

    /// `∂_t S_ij` at the nodes of snapshot `k`.
    pub fn dt_s_tensor(&self, k: usize) -> &[Mat] {
        &self.dt_s_tensor[k]
    }

    /// `∂_t S` at the nodes of snapshot `k`.
    pub fn dt_s(&self, k: usize) -> &[f64] {
        &self.dt_s[k]
    }

    /// Pointwise data for the D and Harnack expressions at snapshot `k`.
    pub fn jet(&self, k: usize, idx: usize) -> Result<TensorJet> {
        let snap = &self.snapshots[k];
        let grid = snap.state.grid();
        let g = &snap.state.g.field().data;
        let fail = || Error::NotPositiveDefinite {
            node: idx,
            eigenvalue: linalg::min_eigenvalue(grid.dim(), &g[idx]),
        };
        let base = TensorJet {
            geo: match self.backend {
                Backend::Torus => torus_node(grid, g, idx).ok_or_else(fail)?,
                Backend::Sphere(_) => sphere_node(&g[idx]).ok_or_else(fail)?,
            },
            s_tensor: snap.s_tensor.data[idx],
            s: snap.s.data[idx],
            ds: [0.0; 3],
            hess_s: ZERO_MAT,
            nabla_s: [ZERO_MAT; 3],
            dt_s_tensor: self.dt_s_tensor[k][idx],
            dt_s: self.dt_s[k][idx],
        };
        Ok(match self.backend {
            // S is constant in space and S_ij parallel on the round sphere
            Backend::Sphere(_) => base,
            Backend::Torus => TensorJet {
                ds: stencil::grad(grid, &snap.s.data, idx),
                hess_s: hessian_at(grid, &snap.s.data, &base.geo, idx),
                nabla_s: nabla_tensor_at(grid, &snap.s_tensor.data, &base.geo, idx),
                ..base
            },
        })
    }

    pub fn jets(&self, k: usize) -> Result<Vec<TensorJet>> {
        (0..self.grid().len()).into_par_iter().map(|i| self.jet(k, i)).collect()
    }

    /// Run-wide `C₀ = max |eig(g⁻¹S)|`, so that `−C₀ g ≤ S ≤ C₀ g`.
    pub fn c0(&self) -> f64 {
        if let Backend::Sphere(m) = self.backend {
            return self.snapshots.iter().map(|s| m.s_bound(s.t())).fold(0.0, f64::max);
        }
        let n = self.grid().dim();
        let mut c = 0.0f64;
        for s in &self.snapshots {
            for i in 0..s.s.len() {
                if let Some(ev) = linalg::relative_eigenvalues(n, s.state.g.at(i), &s.s_tensor.data[i]) {
                    c = c.max(ev[0].abs()).max(ev[n - 1].abs());
                }
            }
        }
        c
    }

    /// Closed-form sphere model, if any.
    pub fn sphere(&self) -> Option<SphereModel> {
        match self.backend {
            Backend::Sphere(m) => Some(m),
            Backend::Torus => None,
        }
    }

    /// Solution restricted to snapshots `[from, to]` (inclusive).
    pub fn window(&self, from: usize, to: usize) -> Result<Self> {
        let snaps = self.snapshots[from..=to].to_vec();
        Self::new(self.spec.clone(), self.backend, snaps, self.dt, self.stride, None, Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differencing_weights_are_consistent() {
        for m in [2usize, 3, 6] {
            for k in 0..m {
                let w = diff_weights(k, m);
                let s0: f64 = w.iter().map(|p| p.1).sum();
                let s1: f64 = w.iter().map(|p| p.1 * (p.0 as f64 - k as f64)).sum();
                assert!(s0.abs() < 1e-15 && (s1 - 1.0).abs() < 1e-15);
            }
        }
    }
}
