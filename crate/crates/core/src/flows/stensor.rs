use crate::error::{Error, Result};
use crate::flows::spec::{FlowSpec, FlowVariant};
use crate::flows::state::{FlowState, Raw};
use crate::geometry::covariant::hessian_at;
use crate::geometry::curvature::torus_node;
use crate::geometry::field::{Field, ScalarField, SymTensorField};
use crate::geometry::grid::Grid;
use crate::geometry::linalg::{self, Mat, Vec3, ZERO_MAT, ZERO_VEC};
use crate::geometry::stencil;
use rayon::prelude::*;

pub const MAX_TARGET_DIM: usize = 4;

/// Extrinsic data of the embedded hypersurface `F = (x + ξ, u)` at a node.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddingNode {
    /// Induced metric.
    pub g: Mat,
    pub ginv: Mat,
    /// Unit normal in `R^{n+1}` (timelike in the Lorentzian case).
    pub normal: [f64; 4],
    /// Second fundamental form `⟨F_ij, ν⟩`.
    pub a: Mat,
    pub h: f64,
}

pub fn embedding_node(grid: &Grid, u: &[f64], xi: &[Vec3], idx: usize, lorentzian: bool) -> Option<EmbeddingNode> {
    let n = grid.dim();
    let du = stencil::grad(grid, u, idx);
    let ddu = stencil::hessian(grid, u, idx);
    let dxi = stencil::grad(grid, xi, idx);
    let ddxi = stencil::hessian(grid, xi, idx);
    let eta = |a: usize| if a == n && lorentzian { -1.0 } else { 1.0 };
    // tangent vectors F_i and second derivatives F_ij, indexed [i][A]
    let mut f1 = [[0.0; 4]; 3];
    let mut f2 = [[[0.0; 4]; 3]; 3];
    for i in 0..n {
        for a in 0..n {
            f1[i][a] = if a == i { 1.0 } else { 0.0 } + dxi[i][a];
        }
        f1[i][n] = du[i];
        for j in 0..n {
            for a in 0..n {
                f2[i][j][a] = ddxi[i][j][a];
            }
            f2[i][j][n] = ddu[i][j];
        }
    }
    let ip = |x: &[f64; 4], y: &[f64; 4]| (0..=n).map(|a| eta(a) * x[a] * y[a]).sum::<f64>();
    let mut g = ZERO_MAT;
    for i in 0..n {
        for j in 0..n {
            g[i][j] = ip(&f1[i], &f1[j]);
        }
    }
    linalg::cholesky(n, &g)?;
    let ginv = linalg::inverse(n, &g)?;
    let mut w = [0.0; 4];
    w[n] = 1.0;
    for i in 0..n {
        for j in 0..n {
            let c = ginv[i][j] * eta(n) * f1[j][n];
            for a in 0..=n {
                w[a] -= c * f1[i][a];
            }
        }
    }
    let nn = ip(&w, &w).abs().sqrt();
    if !(nn > 0.0) {
        return None;
    }
    for v in w.iter_mut() {
        *v /= nn;
    }
    let mut a2 = ZERO_MAT;
    for i in 0..n {
        for j in 0..n {
            a2[i][j] = ip(&f2[i][j], &w);
        }
    }
    let h = linalg::contract(n, &ginv, &a2);
    Some(EmbeddingNode { g, ginv, normal: w, a: a2, h })
}

pub(crate) fn graph_failure(grid: &Grid, u: &[f64], idx: usize, lorentzian: bool) -> Error {
    let n = grid.dim();
    if lorentzian {
        let max_gradient = (0..grid.len())
            .map(|i| {
                let d = stencil::grad(grid, u, i);
                linalg::dot(n, &d, &d).sqrt()
            })
            .fold(0.0, f64::max);
        Error::NotSpacelike { node: idx, max_gradient }
    } else {
        Error::NotPositiveDefinite { node: idx, eigenvalue: f64::NAN }
    }
}

/// Per-node flow tensor and time derivatives of the evolved fields.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NodeEval {
    pub s: Mat,
    pub trace: f64,
    pub dpsi: f64,
    pub dphi: [f64; MAX_TARGET_DIM],
    pub du: f64,
    pub dxi: Vec3,
}

fn not_pd(grid: &Grid, g: &Mat, node: usize) -> Error {
    Error::NotPositiveDefinite { node, eigenvalue: linalg::min_eigenvalue(grid.dim(), g) }
}

pub(crate) fn eval_node(grid: &Grid, spec: &FlowSpec, t: f64, raw: &Raw, idx: usize) -> Result<NodeEval> {
    let n = grid.dim();
    let g = &raw.g[idx];
    let ginv = linalg::inverse(n, g).ok_or_else(|| not_pd(grid, g, idx))?;
    let mut out = NodeEval { s: ZERO_MAT, trace: 0.0, dpsi: 0.0, dphi: [0.0; MAX_TARGET_DIM], du: 0.0, dxi: ZERO_VEC };
    match spec.variant {
        FlowVariant::Static => {}
        FlowVariant::Ricci | FlowVariant::List | FlowVariant::RicciHarmonic => {
            let geo = torus_node(grid, &raw.g, idx).ok_or_else(|| not_pd(grid, g, idx))?;
            out.s = geo.ricci;
            let mut couple = |f: &[f64], weight: f64| -> f64 {
                let d = stencil::grad(grid, f, idx);
                for i in 0..n {
                    for j in 0..n {
                        out.s[i][j] -= weight * d[i] * d[j];
                    }
                }
                linalg::contract(n, &geo.ginv, &hessian_at(grid, f, &geo, idx))
            };
            if spec.variant == FlowVariant::List {
                out.dpsi = couple(&raw.psi, 2.0);
            } else if spec.variant == FlowVariant::RicciHarmonic {
                let alpha = spec.alpha.value(t);
                for (a, phi) in raw.phi.iter().enumerate() {
                    out.dphi[a] = couple(phi, alpha);
                }
            }
        }
        FlowVariant::McfEuclideanGraph | FlowVariant::McfLorentzianGraph => {
            let lor = spec.variant == FlowVariant::McfLorentzianGraph;
            let e = embedding_node(grid, &raw.u, &raw.xi, idx, lor)
                .ok_or_else(|| graph_failure(grid, &raw.u, idx, lor))?;
            let eps = if lor { -1.0 } else { 1.0 };
            out.s = linalg::scale(n, &e.a, eps * e.h);
            for k in 0..n {
                out.dxi[k] = eps * e.h * e.normal[k];
            }
            out.du = eps * e.h * e.normal[n];
        }
    }
    out.trace = linalg::contract(n, &ginv, &out.s);
    Ok(out)
}

pub(crate) fn eval_all(grid: &Grid, spec: &FlowSpec, t: f64, raw: &Raw) -> Result<Vec<NodeEval>> {
    (0..grid.len()).into_par_iter().map(|i| eval_node(grid, spec, t, raw, i)).collect()
}

/// Time derivative of all evolved components.
pub(crate) fn rhs(grid: &Grid, spec: &FlowSpec, t: f64, raw: &Raw) -> Result<Raw> {
    let ev = eval_all(grid, spec, t, raw)?;
    let col = |f: &dyn Fn(&NodeEval) -> f64| ev.iter().map(f).collect::<Vec<f64>>();
    Ok(Raw {
        g: ev.iter().map(|e| linalg::scale(3, &e.s, -2.0)).collect(),
        psi: if raw.psi.is_empty() { Vec::new() } else { col(&|e| e.dpsi) },
        phi: (0..raw.phi.len()).map(|a| col(&|e| e.dphi[a])).collect(),
        u: if raw.u.is_empty() { Vec::new() } else { col(&|e| e.du) },
        xi: if raw.xi.is_empty() { Vec::new() } else { ev.iter().map(|e| e.dxi).collect() },
    })
}

/// Coefficient `c` of the sphere flow tensor `c w² δ`.
pub(crate) fn sphere_coefficient(spec: &FlowSpec) -> Result<f64> {
    match spec.variant {
        FlowVariant::Static => Ok(0.0),
        FlowVariant::Ricci => Ok(1.0),
        v => Err(Error::Unsupported(format!("flow {} on the analytic sphere", v.name()))),
    }
}

/// The flow tensor `S_ij` and its trace `S = g^{ij} S_ij`.
pub fn s_tensor(state: &FlowState, spec: &FlowSpec) -> Result<(SymTensorField, ScalarField)> {
    state.check_for(spec)?;
    let grid = state.grid().clone();
    let t = state.t;
    if !grid.is_torus() {
        let c = sphere_coefficient(spec)?;
        let st = Field::filled(grid.clone(), t, linalg::scaled_identity(2, 4.0 * c));
        let tr = Field::from_fn(grid, t, |i| linalg::contract(2, &linalg::inverse(2, state.g.at(i)).unwrap(), &st.data[i]));
        return Ok((st, tr));
    }
    let ev = eval_all(&grid, spec, t, &state.to_raw())?;
    let n = grid.dim();
    let mut st = Field::from_fn(grid.clone(), t, |i| ev[i].s);
    for m in st.data.iter_mut() {
        *m = linalg::symmetrize(n, m);
    }
    let tr = Field::from_fn(grid, t, |i| ev[i].trace);
    Ok((st, tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::field::MetricField;
    use std::sync::Arc;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::torus(&[16, 16], &[std::f64::consts::TAU; 2]).unwrap())
    }

    fn conformal(grid: &Arc<Grid>) -> MetricField {
        let f = Field::from_fn(grid.clone(), 0.0, |i| {
            let x = grid.coords(i);
            linalg::scaled_identity(2, (0.2 * x[0].sin() * x[1].sin()).exp())
        });
        MetricField::new(f).unwrap()
    }

    #[test]
    fn static_and_flat_ricci_vanish() {
        let g = grid();
        let st = FlowState::new(conformal(&g));
        let (s, tr) = s_tensor(&st, &FlowSpec::new(FlowVariant::Static)).unwrap();
        assert!(s.data.iter().all(|m| linalg::max_abs(2, m) == 0.0) && tr.max_abs() == 0.0);
        let flat = FlowState::new(MetricField::flat(g, 0.0));
        let (s, _) = s_tensor(&flat, &FlowSpec::new(FlowVariant::Ricci)).unwrap();
        assert!(s.data.iter().all(|m| linalg::max_abs(2, m) < 1e-12));
    }

    #[test]
    fn list_with_constant_psi_is_ricci() {
        let g = grid();
        let st = FlowState::new(conformal(&g)).with_psi(Field::filled(g.clone(), 0.0, 0.7)).unwrap();
        let (a, _) = s_tensor(&st, &FlowSpec::new(FlowVariant::List)).unwrap();
        let (b, _) = s_tensor(&st, &FlowSpec::new(FlowVariant::Ricci)).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn trace_is_exact_contraction() {
        let g = grid();
        let psi = Field::from_fn(g.clone(), 0.0, |i| 0.3 * g.coords(i)[0].sin());
        let st = FlowState::new(conformal(&g)).with_psi(psi).unwrap();
        let (s, tr) = s_tensor(&st, &FlowSpec::new(FlowVariant::List)).unwrap();
        for i in 0..g.len() {
            let ginv = linalg::inverse(2, st.g.at(i)).unwrap();
            assert!((linalg::contract(2, &ginv, &s.data[i]) - tr.data[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn list_requires_psi() {
        let g = grid();
        let st = FlowState::new(conformal(&g));
        assert!(matches!(s_tensor(&st, &FlowSpec::new(FlowVariant::List)), Err(Error::MissingField { .. })));
    }

    #[test]
    fn steep_lorentzian_graph_rejected() {
        let g = grid();
        let u = Field::from_fn(g.clone(), 0.0, |i| 1.5 * g.coords(i)[0].sin());
        assert!(matches!(FlowState::graph(u, true), Err(Error::NotSpacelike { .. })));
    }

    #[test]
    fn graph_curvature_matches_linearisation() {
        // small height: H ≈ Δu, A ≈ Hess u
        let g = grid();
        let eps = 1e-4;
        let u = Field::from_fn(g.clone(), 0.0, |i| eps * g.coords(i)[0].sin());
        let xi = vec![ZERO_VEC; g.len()];
        let idx = g.index([4, 0, 0]);
        let e = embedding_node(&g, &u.data, &xi, idx, false).unwrap();
        let lap = stencil::hessian(&g, &u.data, idx)[0][0];
        assert!((e.h - lap).abs() < 1e-10);
    }
}
