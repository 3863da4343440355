//! Pointwise checks on reduced-distance fields: the distance bounds, the
//! gradient and time-derivative identities, the Laplacian bound and the
//! combined evolution inequality.

use crate::error::{Error, Result};
use crate::geometry::grid::Grid;
use crate::geometry::linalg;
use crate::geometry::stencil;
use crate::lgeo::distance::ReducedDistanceField;
use crate::lgeo::pathfield::PathField;
use crate::report::IdentityReport;

fn context(r: IdentityReport, f: &ReducedDistanceField) -> IdentityReport {
    r.with_context("orientation", f.orientation.name())
        .with_context("s1", crate::report::fmt_f64(f.s1))
        .with_context("t1", crate::report::fmt_f64(f.t1))
}

/// `d² e^{∓2C₀s}/(2√s) ∓ (2nC₀/3) s^{3/2}` around every node's L-length,
/// with `d²` measured in the metric at orientation time zero. Violations
/// are normalized by `1 + |L|`.
pub fn bounds_check(field: &ReducedDistanceField, d2: &[f64], c0: f64, tol: f64) -> Result<IdentityReport> {
    if d2.len() != field.len() {
        return Err(Error::GridMismatch);
    }
    let n = field.grid.dim() as f64;
    let s = field.s1;
    let shift = 2.0 * n * c0 / 3.0 * s.powf(1.5);
    let mut samples = Vec::with_capacity(field.len());
    let mut min_margin = f64::INFINITY;
    for i in 0..field.len() {
        let l = field.action[i];
        let lo = d2[i] * (-2.0 * c0 * s).exp() / (2.0 * s.sqrt()) - shift;
        let hi = d2[i] * (2.0 * c0 * s).exp() / (2.0 * s.sqrt()) + shift;
        let margin = (l - lo).min(hi - l) / (1.0 + l.abs());
        min_margin = min_margin.min(margin);
        samples.push((i, (-margin).max(0.0)));
    }
    let mut r = context(IdentityReport::new("distance_bounds"), field);
    r.absorb(field.len(), &samples, tol);
    r.metric("c0", c0);
    r.metric("min_margin", min_margin);
    r.judge_max();
    Ok(r)
}

/// Finite-difference data at one testable node.
#[derive(Debug, Clone, Copy)]
pub struct NodeDerivatives {
    pub node: usize,
    pub l: f64,
    pub k: f64,
    pub s: f64,
    pub grad_sq: f64,
    pub laplacian: f64,
    /// `∂_s L` by centred differences of the neighbouring fields.
    pub ds: f64,
}

/// Whether node `i` and its whole `3ⁿ` stencil box are free of suspect
/// nodes in every given field.
pub fn smooth_stencil(fields: &[&ReducedDistanceField], i: usize) -> bool {
    smooth_box(fields, i, 1)
}

/// As [`smooth_stencil`] for the `(2r+1)ⁿ` box.
pub fn smooth_box(fields: &[&ReducedDistanceField], i: usize, r: usize) -> bool {
    let grid = &*fields[0].grid;
    let n = grid.dim();
    let w = 2 * r + 1;
    (0..w.pow(n as u32)).all(|off| {
        let mut j = i;
        let mut rem = off;
        for a in 0..n {
            j = grid.shift(j, a, (rem % w) as isize - r as isize);
            rem /= w;
        }
        fields.iter().all(|f| !f.suspect[j])
    })
}

/// `(|∇f|², Δf, S)` at subset node `i` with the metric at flow time `t`.
pub fn covariant_derivatives(
    pf: &PathField,
    grid: &Grid,
    values: &[f64],
    i: usize,
    t: f64,
) -> Option<(f64, f64, f64)> {
    let n = grid.dim();
    let local = pf.eval(&grid.coords(i), t);
    let ginv = linalg::inverse(n, &local.g)?;
    let c = local.christoffel(n, &ginv);
    let d = stencil::grad(grid, values, i);
    let h = stencil::hessian(grid, values, i);
    let mut lap = 0.0;
    for a in 0..n {
        for b in 0..n {
            let mut cov = h[a][b];
            for k in 0..n {
                cov -= c[k][a][b] * d[k];
            }
            lap += ginv[a][b] * cov;
        }
    }
    Some((linalg::bilinear(n, &ginv, &d, &d), lap, local.s))
}

/// Check that `minus`/`plus` sit at `s₁ ∓ δ` on the same nodes; returns `δ`.
pub fn derivative_spacing(
    pf: &PathField,
    field: &ReducedDistanceField,
    minus: &ReducedDistanceField,
    plus: &ReducedDistanceField,
) -> Result<f64> {
    if pf.sphere().is_some() {
        return Err(Error::Unsupported("finite-difference checks of the reduced distance need a torus grid".into()));
    }
    if minus.nodes != field.nodes || plus.nodes != field.nodes {
        return Err(Error::GridMismatch);
    }
    let delta = plus.s1 - field.s1;
    if !(delta > 0.0) || ((field.s1 - minus.s1) - delta).abs() > 1e-9 * delta.max(1.0) {
        return Err(Error::Config("derivative fields must sit at s1 - δ and s1 + δ".into()));
    }
    Ok(delta)
}

/// Differentiate the L-length field on its node subset at every node whose
/// stencil box holds no suspect node in any of the three fields.
pub fn node_derivatives(
    pf: &PathField,
    field: &ReducedDistanceField,
    minus: &ReducedDistanceField,
    plus: &ReducedDistanceField,
) -> Result<Vec<NodeDerivatives>> {
    let delta = derivative_spacing(pf, field, minus, plus)?;
    let grid = &*field.grid;
    let mut out = Vec::new();
    for i in 0..field.len() {
        if !smooth_stencil(&[field, minus, plus], i) {
            continue;
        }
        let Some((grad_sq, laplacian, s)) = covariant_derivatives(pf, grid, &field.action, i, field.t1) else { continue };
        out.push(NodeDerivatives {
            node: i,
            l: field.action[i],
            k: field.k_integral[i],
            s,
            grad_sq,
            laplacian,
            ds: (plus.action[i] - minus.action[i]) / (2.0 * delta),
        });
    }
    Ok(out)
}

fn inconclusive_note(r: &mut IdentityReport) {
    if r.nodes_tested == 0 {
        r.note("no node with a smooth stencil");
    }
}

/// `|∇L|² = −4sS + 4σK/√s + 2L/√s` and `∂_s L = 2√sS − σK/s − L/2s`.
/// Relative errors use `max(|lhs|, |rhs|, floor)`, with the floor a
/// fraction `floor_frac` of the largest right-hand side.
pub fn gradient_identity_check(
    field: &ReducedDistanceField,
    derivs: &[NodeDerivatives],
    tol: f64,
    floor_frac: f64,
) -> (IdentityReport, IdentityReport) {
    let s = field.s1;
    let rs = s.sqrt();
    let sigma = field.orientation.hat_sign();
    let grad_rhs: Vec<f64> = derivs.iter().map(|d| -4.0 * s * d.s + 4.0 * sigma * d.k / rs + 2.0 * d.l / rs).collect();
    let time_rhs: Vec<f64> = derivs.iter().map(|d| 2.0 * rs * d.s - sigma * d.k / s - d.l / (2.0 * s)).collect();
    let judge = |name: &str, lhs: &dyn Fn(&NodeDerivatives) -> f64, rhs: &[f64]| {
        let floor = floor_frac * rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let samples: Vec<(usize, f64)> = derivs
            .iter()
            .zip(rhs)
            .map(|(d, &b)| {
                let a = lhs(d);
                (d.node, (a - b).abs() / a.abs().max(b.abs()).max(floor).max(f64::MIN_POSITIVE))
            })
            .collect();
        let mut r = context(IdentityReport::new(name), field);
        r.absorb(field.len(), &samples, tol);
        r.metric("relative_floor", floor);
        inconclusive_note(&mut r);
        r.judge_max();
        r
    };
    (
        judge("gradient_identity", &|d| d.grad_sq, &grad_rhs),
        judge("time_derivative_identity", &|d| d.ds, &time_rhs),
    )
}

fn inequality(
    name: &str,
    field: &ReducedDistanceField,
    derivs: &[NodeDerivatives],
    terms: &dyn Fn(&NodeDerivatives) -> (f64, f64),
    slack: f64,
    fraction: f64,
) -> IdentityReport {
    let mut min_slack = f64::INFINITY;
    let samples: Vec<(usize, f64)> = derivs
        .iter()
        .map(|d| {
            let (value, scale) = terms(d);
            let normalized = -value / (1.0 + scale);
            min_slack = min_slack.min(normalized);
            (d.node, (-normalized).max(0.0))
        })
        .collect();
    let mut r = context(IdentityReport::new(name), field);
    r.absorb(field.len(), &samples, slack);
    r.metric("min_slack", if samples.is_empty() { 0.0 } else { min_slack });
    inconclusive_note(&mut r);
    r.judge_fraction(fraction);
    r
}

/// `ΔL ≤ n/√s + 2σ√sS − K/s`, judged by the share of nodes within the
/// normalized slack.
pub fn laplacian_bound_check(
    field: &ReducedDistanceField,
    derivs: &[NodeDerivatives],
    slack: f64,
    fraction: f64,
) -> IdentityReport {
    let n = field.grid.dim() as f64;
    let s = field.s1;
    let rs = s.sqrt();
    let sigma = field.orientation.hat_sign();
    let terms = |d: &NodeDerivatives| {
        let t = [d.laplacian, -n / rs, -2.0 * sigma * rs * d.s, d.k / s];
        (t.iter().sum(), t.iter().map(|x| x.abs()).sum())
    };
    inequality("laplacian_bound", field, derivs, &terms, slack, fraction)
}

/// `Δℓ + σ∂_sℓ + σ|∇ℓ|² − σS − n/2s ≤ 0` for `ℓ = L/2√s`.
pub fn together_check(
    field: &ReducedDistanceField,
    derivs: &[NodeDerivatives],
    slack: f64,
    fraction: f64,
) -> IdentityReport {
    let n = field.grid.dim() as f64;
    let s = field.s1;
    let rs = s.sqrt();
    let sigma = field.orientation.hat_sign();
    let terms = |d: &NodeDerivatives| {
        let ell = d.l / (2.0 * rs);
        let lap = d.laplacian / (2.0 * rs);
        let ds = d.ds / (2.0 * rs) - ell / (2.0 * s);
        let grad_sq = d.grad_sq / (4.0 * s);
        let t = [lap, sigma * ds, sigma * grad_sq, -sigma * d.s, -n / (2.0 * s)];
        (t.iter().sum(), t.iter().map(|x| x.abs()).sum())
    };
    inequality("evolution_inequality", field, derivs, &terms, slack, fraction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{evolve, EvolveOptions, FlowSpec, FlowState, FlowVariant};
    use crate::geometry::field::MetricField;
    use crate::geometry::grid::Grid;
    use crate::lgeo::distance::{frozen_distance_squared, reduced_distance_field, FieldOptions};
    use crate::lgeo::minimize::MinimizeOptions;
    use crate::orientation::TimeOrientation;
    use std::sync::Arc;

    #[test]
    fn flat_torus_identities_hold() {
        let grid = Arc::new(Grid::torus(&[32, 32], &[std::f64::consts::TAU; 2]).unwrap());
        let mut o = EvolveOptions::new(2.0);
        o.dt = Some(0.25);
        let sol = evolve(FlowState::new(MetricField::flat(grid, 0.0)), &FlowSpec::new(FlowVariant::Static), &o).unwrap();
        let pf = PathField::new(&sol).unwrap();
        let opts = FieldOptions { minimize: MinimizeOptions { samples: 16, ..Default::default() }, ..Default::default() };
        let base = [3.0, 3.0, 0.0];
        for orient in [TimeOrientation::forwards(0.0), TimeOrientation::backwards(2.0)] {
            let f = |s| reduced_distance_field(&pf, orient, &base, s, &opts, None).unwrap();
            let (a, b, c) = (f(0.9), f(1.0), f(1.1));
            let d = node_derivatives(&pf, &b, &a, &c).unwrap();
            assert!(d.len() > b.len() / 3, "{} of {}", d.len(), b.len());
            let (g, t) = gradient_identity_check(&b, &d, 0.01, 1e-2);
            assert!(g.passed() && g.max_abs < 1e-9, "{}", g.to_text());
            // central difference of d²/(2√s) in s is second order
            assert!(t.passed(), "{}", t.to_text());
            let lap = laplacian_bound_check(&b, &d, 1e-3, 0.95);
            assert!(lap.passed() && lap.get_metric("min_slack").unwrap() > -1e-9);
            let tog = together_check(&b, &d, 1e-3, 0.95);
            assert!(tog.passed(), "{}", tog.to_text());
            let d2 = frozen_distance_squared(&pf, orient, &base, &opts).unwrap();
            let bounds = bounds_check(&b, &d2, 0.0, 1e-9).unwrap();
            assert!(bounds.passed(), "{}", bounds.to_text());
        }
    }
}
