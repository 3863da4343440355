//! Reduced-volume densities, integrals, monotonicity series and the
//! heat-operator inequality.

use crate::error::{Error, Result};
use crate::geometry::linalg;
use crate::geometry::stencil;
use crate::lgeo::checks::{derivative_spacing, smooth_box};
use crate::lgeo::{PathField, ReducedDistanceField};
use crate::orientation::TimeOrientation;
use crate::report::{fmt_f64, IdentityReport, Verdict};
use std::f64::consts::PI;

/// `v = (4πs)^{−n/2} e^{σℓ}` at every subset node.
pub fn density(field: &ReducedDistanceField) -> Vec<f64> {
    let n = field.grid.dim() as f64;
    let sigma = field.orientation.hat_sign();
    let pre = (4.0 * PI * field.s1).powf(-0.5 * n);
    field.ell.iter().map(|l| pre * (sigma * l).exp()).collect()
}

/// Volume weights `dV` of the subset nodes at the field's endpoint slice.
pub fn volume_weights(pf: &PathField, field: &ReducedDistanceField) -> Vec<f64> {
    let grid = &*field.grid;
    if let Some(m) = pf.sphere() {
        let rho = m.rho(field.t1);
        return (0..grid.len()).map(|i| rho * grid.sphere_weight(i)).collect();
    }
    let n = grid.dim();
    let cell = grid.cell_volume();
    (0..grid.len())
        .map(|i| {
            let (g, _) = pf.eval_values(&grid.coords(i), field.t1);
            cell * linalg::det(n, &g).sqrt()
        })
        .collect()
}

fn ordered_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = terms.collect();
    crate::geometry::integrate::deterministic_sum(&mut v)
}

/// `V(s) = ∫ v dV` and a quadrature error estimate from the rule on every
/// other node (every other longitude on the sphere).
pub fn reduced_volume(pf: &PathField, field: &ReducedDistanceField) -> Result<(f64, f64)> {
    let v = density(field);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("reduced-volume density is not finite".into()));
    }
    let w = volume_weights(pf, field);
    let grid = &*field.grid;
    let n = grid.dim();
    let fine = ordered_sum(v.iter().zip(&w).map(|(a, b)| a * b));
    let coarse = if pf.sphere().is_some() {
        ordered_sum((0..v.len()).filter(|&i| grid.multi_index(i)[1] % 2 == 0).map(|i| 2.0 * v[i] * w[i]))
    } else {
        let factor = 2f64.powi(n as i32);
        ordered_sum(
            (0..v.len())
                .filter(|&i| {
                    let mi = grid.multi_index(i);
                    (0..n).all(|a| mi[a] % 2 == 0)
                })
                .map(|i| factor * v[i] * w[i]),
        )
    };
    // second-order rule: the fine error is a third of the difference
    Ok((fine, (fine - coarse).abs() / 3.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeSample {
    /// Orientation time `s` (`t` forwards, `τ` backwards).
    pub s: f64,
    pub volume: f64,
    pub quadrature_error: f64,
    pub monotone_so_far: bool,
}

/// Reduced volume along increasing orientation time.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeSeries {
    pub orientation: TimeOrientation,
    pub samples: Vec<VolumeSample>,
    /// Additive slack `rel_tol·V` allowed on top of the quadrature errors.
    pub rel_tol: f64,
}

impl VolumeSeries {
    /// Non-increasing within tolerance at every step.
    pub fn monotone(&self) -> bool {
        self.samples.iter().all(|s| s.monotone_so_far)
    }

    pub fn verdict(&self) -> Verdict {
        if self.samples.len() < 2 {
            Verdict::Inconclusive
        } else if self.monotone() {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Largest increase `V_k − V_{k−1}` over the series.
    pub fn max_increase(&self) -> f64 {
        self.samples.windows(2).map(|w| w[1].volume - w[0].volume).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,V,quadrature_error,monotone_so_far\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(s.s),
                fmt_f64(s.volume),
                fmt_f64(s.quadrature_error),
                s.monotone_so_far
            ));
        }
        out
    }
}

/// Volumes of fields sorted by increasing `s`. Step `k` counts as
/// non-increasing if `V_k ≤ V_{k−1} + e_k + e_{k−1} + rel_tol·V_{k−1}`.
pub fn monotonicity_series(pf: &PathField, fields: &[ReducedDistanceField], rel_tol: f64) -> Result<VolumeSeries> {
    let Some(first) = fields.first() else {
        return Err(Error::InsufficientFields { needed: 1, got: 0 });
    };
    if fields.windows(2).any(|w| !(w[1].s1 > w[0].s1)) {
        return Err(Error::Config("volume series needs strictly increasing s".into()));
    }
    if fields.iter().any(|f| f.orientation != first.orientation) {
        return Err(Error::Config("volume series mixes orientations".into()));
    }
    let mut samples: Vec<VolumeSample> = Vec::with_capacity(fields.len());
    let mut ok = true;
    for f in fields {
        let (v, e) = reduced_volume(pf, f)?;
        if let Some(prev) = samples.last() {
            ok &= v <= prev.volume + e + prev.quadrature_error + rel_tol * prev.volume.abs();
        }
        samples.push(VolumeSample { s: f.s1, volume: v, quadrature_error: e, monotone_so_far: ok });
    }
    Ok(VolumeSeries { orientation: first.orientation, samples, rel_tol })
}

/// Covariant Laplacian from fourth-order differences, and `S`.
fn laplacian4(pf: &PathField, grid: &crate::geometry::grid::Grid, v: &[f64], i: usize, t: f64) -> Option<(f64, f64)> {
    let n = grid.dim();
    let local = pf.eval(&grid.coords(i), t);
    let ginv = linalg::inverse(n, &local.g)?;
    let c = local.christoffel(n, &ginv);
    let (d, h) = stencil::derivatives4(grid, v, i);
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
    Some((lap, local.s))
}

/// `(∂_s + σΔ − σS) v ≤ 0` at smooth nodes, with `∂_s v` from the fields at
/// `s ± δ` and `Δv` by fourth-order differences at `s` (the `5ⁿ` box must
/// be free of suspect nodes). Values are normalized by
/// `1 + |∂_s v| + |Δv| + |S v|`.
pub fn heat_inequality_check(
    pf: &PathField,
    field: &ReducedDistanceField,
    minus: &ReducedDistanceField,
    plus: &ReducedDistanceField,
    slack: f64,
    fraction: f64,
) -> Result<IdentityReport> {
    let delta = derivative_spacing(pf, field, minus, plus)?;
    let sigma = field.orientation.hat_sign();
    let v = density(field);
    let vm = density(minus);
    let vp = density(plus);
    let mut samples = Vec::new();
    let mut min_slack = f64::INFINITY;
    for i in 0..field.len() {
        if !smooth_box(&[field, minus, plus], i, 2) {
            continue;
        }
        let Some((lap, s)) = laplacian4(pf, &field.grid, &v, i, field.t1) else { continue };
        let dv = (vp[i] - vm[i]) / (2.0 * delta);
        let terms = [dv, sigma * lap, -sigma * s * v[i]];
        let value: f64 = terms.iter().sum();
        let normalized = -value / (1.0 + terms.iter().map(|x| x.abs()).sum::<f64>());
        min_slack = min_slack.min(normalized);
        samples.push((i, (-normalized).max(0.0)));
    }
    let mut r = IdentityReport::new("heat_inequality")
        .with_context("orientation", field.orientation.name())
        .with_context("s1", fmt_f64(field.s1))
        .with_context("t1", fmt_f64(field.t1));
    r.absorb(field.len(), &samples, slack);
    r.metric("min_slack", if samples.is_empty() { 0.0 } else { min_slack });
    if samples.is_empty() {
        r.note("no node with a smooth stencil");
    }
    r.judge_fraction(fraction);
    Ok(r)
}

/// CSV grid dump of a reduced-distance field: node coordinates, `ℓ` and the
/// suspect flag.
pub fn field_csv(field: &ReducedDistanceField) -> String {
    let n = field.grid.dim();
    let mut out = String::new();
    for a in 0..n {
        out.push_str(&format!("x{a},"));
    }
    out.push_str("ell,suspect\n");
    for i in 0..field.len() {
        let x = field.grid.coords(i);
        for v in x.iter().take(n) {
            out.push_str(&fmt_f64(*v));
            out.push(',');
        }
        out.push_str(&format!("{},{}\n", fmt_f64(field.ell[i]), field.suspect[i] as u8));
    }
    out
}
