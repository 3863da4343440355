//! Off-node spacetime evaluation of the metric and flow tensor.

use crate::error::{Error, Result};
use crate::flows::{Backend, SpacetimeSolution};
use crate::geometry::grid::Grid;
use crate::geometry::interp::{hermite, PeriodicInterp};
use crate::geometry::linalg::{self, Mat, Vec3, ZERO_MAT};
use crate::geometry::sphere::SphereModel;
use std::sync::Arc;

/// Field data at one point and flow time.
#[derive(Debug, Clone, Copy)]
pub struct Local {
    pub g: Mat,
    /// `∂_k g_ij` stored as `dg[k]`.
    pub dg: [Mat; 3],
    pub s_tensor: Mat,
    pub s: f64,
    pub ds: Vec3,
    /// Flow-time derivative `∂_t S`.
    pub dt_s: f64,
}

impl Local {
    /// `Γ^k_ij` as `[k][i][j]`.
    pub fn christoffel(&self, n: usize, ginv: &Mat) -> [Mat; 3] {
        let mut c = [ZERO_MAT; 3];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[k][l] * (self.dg[i][j][l] + self.dg[j][i][l] - self.dg[l][i][j]);
                    }
                    c[k][i][j] = 0.5 * s;
                    c[k][j][i] = 0.5 * s;
                }
            }
        }
        c
    }
}

fn sym_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for i in 0..n {
        for j in i..n {
            v.push((i, j));
        }
    }
    v
}

#[derive(Debug, Clone)]
enum Kind {
    Torus { interps: Vec<PeriodicInterp> },
    Sphere(SphereModel),
}

/// Spacetime interpolant of a solution: periodic cubic B-splines in space and
/// cubic Hermite in time, with `∂t g = −2S` as the metric slope. On the
/// analytic sphere the closed form is evaluated in stereographic charts.
#[derive(Debug, Clone)]
pub struct PathField {
    grid: Arc<Grid>,
    n: usize,
    times: Vec<f64>,
    kind: Kind,
    pairs: Vec<(usize, usize)>,
    /// Per snapshot: `(min eig g, min S, max S)` over nodes.
    node_bounds: Vec<(f64, f64, f64)>,
}

impl PathField {
    pub fn new(sol: &SpacetimeSolution) -> Result<Self> {
        let grid = sol.grid().clone();
        let n = grid.dim();
        let pairs = sym_pairs(n);
        let kind = match sol.backend {
            Backend::Sphere(m) => Kind::Sphere(m),
            Backend::Torus => {
                let np = pairs.len();
                let nc = 3 * np + 2;
                let mut interps = Vec::with_capacity(sol.snapshots.len());
                for (k, snap) in sol.snapshots.iter().enumerate() {
                    let dts = sol.dt_s_tensor(k);
                    let dt = sol.dt_s(k);
                    let mut data = Vec::with_capacity(grid.len() * nc);
                    for i in 0..grid.len() {
                        let g = snap.state.g.at(i);
                        let st = &snap.s_tensor.data[i];
                        data.extend(pairs.iter().map(|&(a, b)| g[a][b]));
                        data.extend(pairs.iter().map(|&(a, b)| st[a][b]));
                        data.push(snap.s.data[i]);
                        data.push(dt[i]);
                        data.extend(pairs.iter().map(|&(a, b)| dts[i][a][b]));
                    }
                    interps.push(PeriodicInterp::new(grid.clone(), nc, data));
                }
                Kind::Torus { interps }
            }
        };
        let node_bounds = sol
            .snapshots
            .iter()
            .map(|snap| {
                let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY);
                for i in 0..snap.s.len() {
                    b.0 = b.0.min(linalg::min_eigenvalue(n, snap.state.g.at(i)));
                    b.1 = b.1.min(snap.s.data[i]);
                    b.2 = b.2.max(snap.s.data[i]);
                }
                b
            })
            .collect();
        Ok(Self { grid, n, times: sol.times(), kind, pairs, node_bounds })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn t_min(&self) -> f64 {
        self.times[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn sphere(&self) -> Option<SphereModel> {
        match self.kind {
            Kind::Sphere(m) => Some(m),
            Kind::Torus { .. } => None,
        }
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let (a, b) = (self.t_min(), self.t_max());
        let eps = 1e-12 * (1.0 + a.abs().max(b.abs()));
        if t < a - eps || t > b + eps {
            return Err(Error::TimeOutOfRange { t, min: a, max: b });
        }
        if let Kind::Sphere(m) = self.kind {
            if m.rho(t) <= 0.0 {
                return Err(Error::TimeOutOfRange { t, min: a, max: m.singular_time() });
            }
        }
        Ok(())
    }

    /// Snapshot interval, span, and Hermite parameter for flow time `t`.
    fn bracket(&self, t: f64) -> (usize, f64, f64) {
        let m = self.times.len();
        let h = self.times[1] - self.times[0];
        let k = (((t - self.times[0]) / h).floor().max(0.0) as usize).min(m - 2);
        let span = self.times[k + 1] - self.times[k];
        (k, span, ((t - self.times[k]) / span).clamp(0.0, 1.0))
    }

    fn unpack(&self, chunk: &[f64]) -> Mat {
        let mut m = ZERO_MAT;
        for (c, &(a, b)) in self.pairs.iter().enumerate() {
            m[a][b] = chunk[c];
            m[b][a] = chunk[c];
        }
        m
    }

    /// Metric, flow tensor and their first derivatives.
    pub fn eval(&self, x: &Vec3, t: f64) -> Local {
        match &self.kind {
            Kind::Sphere(m) => {
                let (g, dg, st) = m.chart_fields(x, t);
                Local { g, dg, s_tensor: st, s: m.scalar_s(t), ds: [0.0; 3], dt_s: m.dt_scalar_s(t) }
            }
            Kind::Torus { interps } => {
                let n = self.n;
                let np = self.pairs.len();
                let nc = 3 * np + 2;
                let (k, span, u) = self.bracket(t);
                let (h, dh) = hermite(u);
                let mut v = [[0.0; 20]; 2];
                let mut gr = [[0.0; 60]; 2];
                interps[k].eval_into(x, 1.0, &mut v[0][..nc], &mut gr[0][..3 * nc]);
                interps[k + 1].eval_into(x, 1.0, &mut v[1][..nc], &mut gr[1][..3 * nc]);
                // channel offsets
                let (og, os, osc, odsc, ods) = (0, np, 2 * np, 2 * np + 1, 2 * np + 2);
                let comb = |w: &[f64; 4], a: &dyn Fn(usize) -> f64, b: &dyn Fn(usize) -> f64| {
                    w[0] * a(0) + w[1] * span * b(0) + w[2] * a(1) + w[3] * span * b(1)
                };
                let mut gch = [0.0; 6];
                let mut sch = [0.0; 6];
                let mut dgch = [[0.0; 6]; 3];
                for c in 0..np {
                    gch[c] = comb(&h, &|s| v[s][og + c], &|s| -2.0 * v[s][os + c]);
                    sch[c] = comb(&h, &|s| v[s][os + c], &|s| v[s][ods + c]);
                    for a in 0..n {
                        dgch[a][c] =
                            comb(&h, &|s| gr[s][(og + c) * 3 + a], &|s| -2.0 * gr[s][(os + c) * 3 + a]);
                    }
                }
                let s = comb(&h, &|q| v[q][osc], &|q| v[q][odsc]);
                let dt_s = comb(&dh, &|q| v[q][osc], &|q| v[q][odsc]) / span;
                let mut ds = [0.0; 3];
                for a in 0..n {
                    ds[a] = comb(&h, &|q| gr[q][osc * 3 + a], &|q| gr[q][odsc * 3 + a]);
                }
                let mut dg = [ZERO_MAT; 3];
                for a in 0..n {
                    dg[a] = self.unpack(&dgch[a]);
                }
                Local { g: self.unpack(&gch), dg, s_tensor: self.unpack(&sch), s, ds, dt_s }
            }
        }
    }

    /// Metric and the scalar `S` only; channels are packed as
    /// `g, S_ij, S, ∂tS, ∂tS_ij` so this reads a prefix.
    pub fn eval_values(&self, x: &Vec3, t: f64) -> (Mat, f64) {
        match &self.kind {
            Kind::Sphere(m) => {
                let (w, _) = crate::geometry::sphere::conformal(x);
                (linalg::scaled_identity(2, m.rho(t) * w * w), m.scalar_s(t))
            }
            Kind::Torus { interps } => {
                let np = self.pairs.len();
                let used = 2 * np + 2;
                let (k, span, u) = self.bracket(t);
                let (h, _) = hermite(u);
                let mut v = [[0.0; 20]; 2];
                interps[k].eval_values_into(x, 1.0, used, &mut v[0]);
                interps[k + 1].eval_values_into(x, 1.0, used, &mut v[1]);
                let mut gch = [0.0; 6];
                for c in 0..np {
                    gch[c] = h[0] * v[0][c] - 2.0 * h[1] * span * v[0][np + c] + h[2] * v[1][c]
                        - 2.0 * h[3] * span * v[1][np + c];
                }
                let (osc, odsc) = (2 * np, 2 * np + 1);
                let s = h[0] * v[0][osc] + h[1] * span * v[0][odsc] + h[2] * v[1][osc] + h[3] * span * v[1][odsc];
                (self.unpack(&gch), s)
            }
        }
    }

    /// Smallest eigenvalue of `g` and the range of `S` over the snapshots
    /// covering flow times `[ta, tb]`. On the sphere the chart factor is
    /// unbounded, so the eigenvalue bound is zero.
    pub fn bounds_on(&self, ta: f64, tb: f64) -> (f64, f64, f64) {
        let (lo, hi) = (ta.min(tb), ta.max(tb));
        if let Kind::Sphere(m) = self.kind {
            let (a, b) = (m.scalar_s(lo), m.scalar_s(hi));
            return (0.0, a.min(b), a.max(b));
        }
        let h = self.times[1] - self.times[0];
        let mut out = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (k, &t) in self.times.iter().enumerate() {
            if t < lo - h || t > hi + h {
                continue;
            }
            let b = self.node_bounds[k];
            out = (out.0.min(b.0), out.1.min(b.1), out.2.max(b.2));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{evolve, EvolveOptions, FlowSpec, FlowState, FlowVariant};
    use crate::geometry::field::{Field, MetricField};

    #[test]
    fn reproduces_snapshot_data_at_nodes() {
        let grid = Arc::new(Grid::torus(&[16, 16], &[std::f64::consts::TAU; 2]).unwrap());
        let g = Field::from_fn(grid.clone(), 0.0, |i| {
            let x = grid.coords(i);
            linalg::scaled_identity(2, (0.2 * x[0].sin() * x[1].sin()).exp())
        });
        let mut o = EvolveOptions::new(0.1);
        o.snapshot_stride = 2;
        let sol = evolve(FlowState::new(MetricField::new(g).unwrap()), &FlowSpec::new(FlowVariant::Ricci), &o).unwrap();
        let f = PathField::new(&sol).unwrap();
        let k = 1;
        let t = sol.times()[k];
        for idx in [0usize, 37, 101] {
            let x = grid.coords(idx);
            let l = f.eval(&x, t);
            let snap = &sol.snapshots[k];
            assert!((l.g[0][1] - snap.state.g.at(idx)[0][1]).abs() < 1e-13);
            assert!((l.s - snap.s.data[idx]).abs() < 1e-13);
            assert!((l.dt_s - sol.dt_s(k)[idx]).abs() < 1e-10);
            let (gv, sv) = f.eval_values(&x, t);
            assert!((gv[0][0] - l.g[0][0]).abs() < 1e-14 && (sv - l.s).abs() < 1e-14);
        }
        // off-node values agree between the two evaluators
        let x = [1.3, 2.7, 0.0];
        let t = 0.5 * (sol.times()[1] + sol.times()[2]);
        let l = f.eval(&x, t);
        let (gv, sv) = f.eval_values(&x, t);
        assert!((gv[1][1] - l.g[1][1]).abs() < 1e-14 && (sv - l.s).abs() < 1e-14);
    }

    #[test]
    fn christoffel_of_sphere_chart() {
        let m = SphereModel::ricci(1.0);
        let x = [0.3, -0.2, 0.0];
        let (g, dg, st) = m.chart_fields(&x, 0.1);
        let l = Local { g, dg, s_tensor: st, s: 0.0, ds: [0.0; 3], dt_s: 0.0 };
        let ginv = linalg::inverse(2, &g).unwrap();
        let c = l.christoffel(2, &ginv);
        // conformal metric: Γ^0_00 = ∂_0 log w
        let (w, dw) = crate::geometry::sphere::conformal(&x);
        assert!((c[0][0][0] - dw[0] / w).abs() < 1e-14);
        assert!((c[0][1][1] + dw[0] / w).abs() < 1e-14);
    }
}
