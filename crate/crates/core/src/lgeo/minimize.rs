//! Direct minimization of the discretized L-length with multi-start.

use crate::error::{Error, Result};
use crate::geometry::linalg::{self, Mat, Vec3};
use crate::geometry::sphere::{angle, Chart};
use crate::lgeo::path::{self, GeodesicResult, LPath, Problem, MIN_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Number of λ intervals (even, at least 16).
    pub samples: usize,
    pub max_iters: usize,
    /// Stop once the preconditioned decrement falls below `tol·(1 + |L|)`.
    pub tol: f64,
    pub multi_start: bool,
    /// Relative tie tolerance `tie_tol·(1 + |L|)` for multi-start minima.
    pub tie_tol: f64,
    /// Re-solve the best start with twice the samples and return the
    /// extrapolated path and action; the residual then uses fourth-order
    /// differences.
    pub richardson: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { samples: 64, max_iters: 200, tol: 1e-16, multi_start: true, tie_tol: 1e-6, richardson: false }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES || self.samples % 2 != 0 {
            return Err(Error::ConfigCheck {
                check: "lambda_samples",
                message: format!("need an even count of at least {MIN_SAMPLES}, got {}", self.samples),
            });
        }
        if !(self.tol > 0.0) || !(self.tie_tol > 0.0) || self.max_iters == 0 {
            return Err(Error::ConfigCheck { check: "geodesic_tolerances", message: "tolerances must be positive".into() });
        }
        Ok(())
    }
}

/// Midpoint-rule discrete action over the segments.
pub fn discrete_action(problem: &Problem, pts: &[Vec3], dl: f64) -> f64 {
    let n = problem.dim();
    let mut total = 0.0;
    for k in 0..pts.len() - 1 {
        let lam = (k as f64 + 0.5) * dl;
        let (m, v) = segment(&pts[k], &pts[k + 1], dl);
        let (g, s) = problem.values(&m, lam);
        total += dl * (2.0 * lam * lam * s + 0.5 * linalg::bilinear(n, &g, &v, &v));
    }
    total
}

fn segment(a: &Vec3, b: &Vec3, dl: f64) -> (Vec3, Vec3) {
    let mut m = [0.0; 3];
    let mut v = [0.0; 3];
    for i in 0..3 {
        m[i] = 0.5 * (a[i] + b[i]);
        v[i] = (b[i] - a[i]) / dl;
    }
    (m, v)
}

/// Action, its exact gradient at every sample (endpoints zeroed) and the
/// segment metrics.
fn action_gradient(problem: &Problem, pts: &[Vec3], dl: f64) -> (f64, Vec<Vec3>, Vec<Mat>) {
    let n = problem.dim();
    let m = pts.len() - 1;
    let mut grad = vec![[0.0; 3]; m + 1];
    let mut gs = Vec::with_capacity(m);
    let mut total = 0.0;
    for k in 0..m {
        let lam = (k as f64 + 0.5) * dl;
        let (mid, v) = segment(&pts[k], &pts[k + 1], dl);
        let l = problem.local(&mid, lam);
        total += dl * (2.0 * lam * lam * l.s + 0.5 * linalg::bilinear(n, &l.g, &v, &v));
        let gv = linalg::mat_vec(n, &l.g, &v);
        for a in 0..n {
            let pot = 0.5 * dl * (2.0 * lam * lam * l.ds[a] + 0.5 * linalg::bilinear(n, &l.dg[a], &v, &v));
            grad[k][a] += pot - gv[a];
            grad[k + 1][a] += pot + gv[a];
        }
        gs.push(l.g);
    }
    grad[0] = [0.0; 3];
    grad[m] = [0.0; 3];
    (total, grad, gs)
}

/// Solve the block-tridiagonal kinetic Hessian `(1/Δλ)(G_{j-1} + G_j)` /
/// `−G_j/Δλ` against `r` for the interior samples.
fn precondition(n: usize, gs: &[Mat], dl: f64, r: &[Vec3]) -> Option<Vec<Vec3>> {
    let m = gs.len();
    let inner = m - 1;
    let mut cp: Vec<Mat> = Vec::with_capacity(inner);
    let mut rp: Vec<Vec3> = Vec::with_capacity(inner);
    for j in 1..m {
        let mut d = linalg::scale(n, &linalg::add(n, &gs[j - 1], &gs[j]), 1.0 / dl);
        let mut rhs = r[j];
        if j > 1 {
            // L_j = −G_{j−1}/Δλ
            let lmat = linalg::scale(n, &gs[j - 1], -1.0 / dl);
            d = linalg::axpy(n, &d, -1.0, &linalg::mul(n, &lmat, &cp[j - 2]));
            let lr = linalg::mat_vec(n, &lmat, &rp[j - 2]);
            for a in 0..n {
                rhs[a] -= lr[a];
            }
        }
        let dinv = linalg::inverse(n, &d)?;
        let u = linalg::scale(n, &gs[j], -1.0 / dl);
        cp.push(linalg::mul(n, &dinv, &u));
        rp.push(linalg::mat_vec(n, &dinv, &rhs));
    }
    let mut out = vec![[0.0; 3]; m + 1];
    for j in (1..m).rev() {
        let mut x = rp[j - 1];
        if j + 1 < m {
            let c = linalg::mat_vec(n, &cp[j - 1], &out[j + 1]);
            for a in 0..n {
                x[a] -= c[a];
            }
        }
        out[j] = x;
    }
    Some(out)
}

/// Descend from `init`; returns the path, whether it converged, and the
/// iteration count.
pub fn descend(problem: &Problem, init: LPath, opts: &MinimizeOptions) -> (LPath, bool, usize) {
    let n = problem.dim();
    let dl = init.dl();
    let mut pts = init.points.clone();
    let mut converged = false;
    let mut it = 0;
    while it < opts.max_iters {
        it += 1;
        let (value, grad, gs) = action_gradient(problem, &pts, dl);
        let Some(d) = precondition(n, &gs, dl, &grad) else { break };
        let dec: f64 = grad.iter().zip(&d).map(|(a, b)| linalg::dot(n, a, b)).sum();
        if !dec.is_finite() {
            break;
        }
        if dec <= opts.tol * (1.0 + value.abs()) {
            converged = true;
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<Vec3> = pts
                .iter()
                .zip(&d)
                .map(|(x, s)| [x[0] - alpha * s[0], x[1] - alpha * s[1], x[2] - alpha * s[2]])
                .collect();
            let tv = discrete_action(problem, &trial, dl);
            if tv < value && tv <= value - 1e-4 * alpha * dec {
                pts = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // stalled at round-off
            converged = dec <= 1e-9 * (1.0 + value.abs());
            break;
        }
    }
    (LPath { points: pts, ..init }, converged, it)
}

/// A multi-start candidate.
#[derive(Debug, Clone)]
pub struct Start {
    pub init: LPath,
    pub branch: usize,
    /// Lower bound for the action of any curve reachable from this start.
    pub lower_bound: f64,
}

/// Torus starts: straight lines to the `3ⁿ` nearest images of `q`.
pub fn torus_starts(problem: &Problem, p: &Vec3, q: &Vec3, intervals: usize, all: bool) -> Vec<Start> {
    let grid = problem.field.grid();
    let n = grid.dim();
    let per = grid.periods();
    let mut d = [0.0; 3];
    for a in 0..n {
        d[a] = q[a] - p[a];
    }
    let d = grid.wrap_displacement(&d);
    let (ta, tb) = (problem.t_at(0.0), problem.t_at(problem.lambda1()));
    let (mu, smin, _) = problem.field.bounds_on(ta, tb);
    let mu = 0.95 * mu;
    let smin = if problem.frozen { 0.0 } else { smin - 0.05 * smin.abs() };
    let lam1 = problem.lambda1();
    let mut out = Vec::new();
    let count = if all { 3usize.pow(n as u32) } else { 1 };
    for b in 0..count {
        let mut target = *p;
        let mut rem = b;
        for a in 0..n {
            let o = if all { (rem % 3) as f64 - 1.0 } else { 0.0 };
            rem /= 3;
            target[a] = p[a] + d[a] + o * per[a];
        }
        let mut len2 = 0.0;
        for a in 0..n {
            len2 += (target[a] - p[a]).powi(2);
        }
        let lower = mu * len2 / (2.0 * lam1) + (2.0 / 3.0) * smin * problem.s1.powf(1.5);
        out.push(Start { init: LPath::straight(p, &target, lam1, intervals, problem.orient), branch: b, lower_bound: lower });
    }
    out.sort_by(|x, y| x.lower_bound.total_cmp(&y.lower_bound).then(x.branch.cmp(&y.branch)));
    out
}

/// Sphere starts: the two great-circle arcs from `p` to `q` (unit
/// vectors), each in a chart centred at the arc midpoint.
pub fn sphere_starts(problem: &Problem, p: &Vec3, q: &Vec3, intervals: usize, all: bool) -> Vec<Start> {
    let lam1 = problem.lambda1();
    let theta = angle(p, q);
    let mut mid = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
    let nm = linalg::dot(3, &mid, &mid).sqrt();
    if nm < 1e-9 {
        mid = crate::geometry::sphere::frame(p)[0];
    } else {
        for v in mid.iter_mut() {
            *v /= nm;
        }
    }
    let anti = [-mid[0], -mid[1], -mid[2]];
    let mut out = Vec::new();
    let arcs: Vec<(Vec3, usize)> =
        if all && theta > 1e-9 { vec![(mid, 0), (anti, 1)] } else { vec![(mid, 0)] };
    for (centre, branch) in arcs {
        let chart = Chart::centred_at(&centre);
        // arc p → centre → q as a unit-speed great circle
        let a = chart.to_chart(p);
        let b = chart.to_chart(q);
        let total = angle(p, &centre) + angle(&centre, q);
        let e_start = *p;
        let mut axis = [0.0; 3];
        // rotation plane spanned by p and the centre
        let c = linalg::dot(3, &centre, p);
        for i in 0..3 {
            axis[i] = centre[i] - c * p[i];
        }
        let na = linalg::dot(3, &axis, &axis).sqrt();
        let points = (0..=intervals)
            .map(|k| {
                if k == 0 {
                    return a;
                }
                if k == intervals {
                    return b;
                }
                if na < 1e-14 {
                    return a;
                }
                let ang = total * k as f64 / intervals as f64;
                let mut y = [0.0; 3];
                for i in 0..3 {
                    y[i] = ang.cos() * e_start[i] + ang.sin() * axis[i] / na;
                }
                chart.to_chart(&y)
            })
            .collect();
        let init = LPath { lambda1: lam1, points, chart: Some(chart), orientation: problem.orient };
        out.push(Start { init, branch, lower_bound: f64::NEG_INFINITY });
    }
    out
}

/// A minimized start, before multi-start bookkeeping.
fn finish(problem: &Problem, path: LPath, converged: bool, iterations: usize, branch: usize) -> Result<GeodesicResult> {
    let action = path::l_length(&path, problem)?;
    let residual = path::max_interior_residual(&path::geodesic_residual(&path, problem));
    let v = path.initial_velocity();
    let mut disp = [0.0; 3];
    let (a, b) = (path.start(), path.end());
    for i in 0..3 {
        disp[i] = b[i] - a[i];
    }
    Ok(GeodesicResult {
        path,
        action,
        residual,
        minimal: false,
        converged,
        iterations,
        initial_velocity: v,
        branch,
        displacement: disp,
    })
}

/// Outcome of a multi-start minimization.
#[derive(Debug, Clone)]
pub struct MultiStart {
    pub best: GeodesicResult,
    /// All minimized starts, best first.
    pub candidates: Vec<GeodesicResult>,
    /// Another start reached the same action within the tie tolerance with a
    /// different initial velocity.
    pub tie: bool,
}

/// Minimize from the given starts, skipping those whose lower bound already
/// exceeds the best action found; `warm` supplies replacement initial paths
/// per branch.
pub fn minimize_starts(
    problem: &Problem,
    starts: Vec<Start>,
    opts: &MinimizeOptions,
    warm: &dyn Fn(usize) -> Option<LPath>,
) -> Result<MultiStart> {
    let n = problem.dim();
    let mut done: Vec<GeodesicResult> = Vec::new();
    let mut best = f64::INFINITY;
    for st in starts {
        if st.lower_bound > best + opts.tie_tol * (1.0 + best.abs()) {
            continue;
        }
        let init = warm(st.branch).unwrap_or(st.init);
        let (path, conv, it) = descend(problem, init, opts);
        let r = finish(problem, path, conv, it, st.branch)?;
        best = best.min(r.action);
        done.push(r);
    }
    if done.is_empty() {
        return Err(Error::ShootingFailed { lambda: 0.0, reason: "no start survived".into() });
    }
    done.sort_by(|a, b| a.action.total_cmp(&b.action).then(a.branch.cmp(&b.branch)));
    done[0].minimal = true;
    let b = &done[0];
    let tol = opts.tie_tol * (1.0 + b.action.abs());
    let g0 = problem.local(&b.path.start(), 0.0).g;
    let vn = linalg::bilinear(n, &g0, &b.initial_velocity, &b.initial_velocity).sqrt();
    let tie = done[1..].iter().any(|c| {
        let mut dv = [0.0; 3];
        for i in 0..3 {
            dv[i] = c.initial_velocity[i] - b.initial_velocity[i];
        }
        let sep = linalg::bilinear(n, &g0, &dv, &dv).sqrt();
        // sphere branches have separate charts; compare on the manifold
        let sep = if b.path.chart.is_some() && c.path.chart != b.path.chart {
            let pa = b.path.chart.unwrap().to_sphere(&b.path.points[1]);
            let pb = c.path.chart.unwrap().to_sphere(&c.path.points[1]);
            angle(&pa, &pb) / b.path.dl()
        } else {
            sep
        };
        (c.action - b.action).abs() <= tol && sep > 1e-3 * (1.0 + vn)
    });
    if opts.richardson {
        done[0] = refine(problem, &done[0], opts)?;
    }
    Ok(MultiStart { best: done[0].clone(), candidates: done, tie })
}

/// Sample midpoints by cubic interpolation (linear next to the ends).
fn prolong(path: &LPath) -> LPath {
    let p = &path.points;
    let m = p.len() - 1;
    let mut points = Vec::with_capacity(2 * m + 1);
    for k in 0..m {
        points.push(p[k]);
        let mut x = [0.0; 3];
        for a in 0..3 {
            x[a] = if k == 0 || k + 1 == m {
                0.5 * (p[k][a] + p[k + 1][a])
            } else {
                (-p[k - 1][a] + 9.0 * p[k][a] + 9.0 * p[k + 1][a] - p[k + 2][a]) / 16.0
            };
        }
        points.push(x);
    }
    points.push(p[m]);
    LPath { points, ..path.clone() }
}

/// Richardson step `(4·fine − coarse)/3` on path and action.
fn refine(problem: &Problem, coarse: &GeodesicResult, opts: &MinimizeOptions) -> Result<GeodesicResult> {
    let fine_opts = MinimizeOptions { samples: 2 * coarse.path.intervals(), ..*opts };
    let (fine, conv, it) = descend(problem, prolong(&coarse.path), &fine_opts);
    let fine_action = path::l_length(&fine, problem)?;
    let mut points = coarse.path.points.clone();
    for (k, x) in points.iter_mut().enumerate() {
        for a in 0..3 {
            x[a] = (4.0 * fine.points[2 * k][a] - x[a]) / 3.0;
        }
    }
    let path = LPath { points, ..coarse.path.clone() };
    let residual = path::max_interior_residual(&path::geodesic_residual4(&path, problem));
    Ok(GeodesicResult {
        action: (4.0 * fine_action - coarse.action) / 3.0,
        residual,
        converged: coarse.converged && conv,
        iterations: coarse.iterations + it,
        initial_velocity: path.velocities4()[0],
        path,
        ..coarse.clone()
    })
}

/// Best geodesic from `p` to `q`: torus coordinates, or `(θ, φ)` on the
/// sphere.
pub fn minimize(p: &Vec3, q: &Vec3, problem: &Problem, opts: &MinimizeOptions) -> Result<MultiStart> {
    opts.validate()?;
    let starts = match problem.field.sphere() {
        None => torus_starts(problem, p, q, opts.samples, opts.multi_start),
        Some(_) => sphere_starts(problem, &unit(p), &unit(q), opts.samples, opts.multi_start),
    };
    minimize_starts(problem, starts, opts, &|_| None)
}

/// Unit vector of colatitude/longitude coordinates.
pub fn unit(x: &Vec3) -> Vec3 {
    [x[0].sin() * x[1].cos(), x[0].sin() * x[1].sin(), x[0].cos()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{evolve, EvolveOptions, FlowSpec, FlowState, FlowVariant};
    use crate::geometry::field::{Field, MetricField};
    use crate::geometry::grid::Grid;
    use crate::lgeo::pathfield::PathField;
    use crate::orientation::TimeOrientation;
    use std::sync::Arc;

    fn conformal_field(variant: FlowVariant) -> PathField {
        let grid = Arc::new(Grid::torus(&[32, 32], &[std::f64::consts::TAU; 2]).unwrap());
        let g = Field::from_fn(grid.clone(), 0.0, |i| {
            let x = grid.coords(i);
            linalg::scaled_identity(2, (0.2 * x[0].sin() * x[1].sin()).exp())
        });
        let mut o = EvolveOptions::new(0.6);
        o.snapshot_stride = 4;
        let sol = evolve(FlowState::new(MetricField::new(g).unwrap()), &FlowSpec::new(variant), &o).unwrap();
        PathField::new(&sol).unwrap()
    }

    #[test]
    fn flat_minimizer_is_straight_line() {
        let grid = Arc::new(Grid::torus(&[16, 16], &[std::f64::consts::TAU; 2]).unwrap());
        let mut o = EvolveOptions::new(1.0);
        o.dt = Some(0.25);
        let sol = evolve(FlowState::new(MetricField::flat(grid, 0.0)), &FlowSpec::new(FlowVariant::Static), &o).unwrap();
        let f = PathField::new(&sol).unwrap();
        let pr = Problem::new(&f, TimeOrientation::forwards(0.0), 0.81).unwrap();
        let p = [0.2, 0.3, 0.0];
        let q = [6.0, 0.5, 0.0];
        let r = minimize(&p, &q, &pr, &MinimizeOptions::default()).unwrap();
        let d2 = (0.2 + std::f64::consts::TAU - 6.0f64).powi(2) + 0.04;
        assert!((r.best.action - d2 / 1.8).abs() < 1e-10, "{}", r.best.action);
        assert!(r.best.converged && !r.tie);
    }

    #[test]
    fn curved_minimizer_beats_straight_line_and_converges() {
        let f = conformal_field(FlowVariant::Ricci);
        let pr = Problem::new(&f, TimeOrientation::forwards(0.0), 0.5).unwrap();
        let p = [0.4, 1.1, 0.0];
        let q = [2.3, 2.9, 0.0];
        let r = minimize(&p, &q, &pr, &MinimizeOptions::default()).unwrap();
        let fine = minimize(&p, &q, &pr, &MinimizeOptions { samples: 128, ..Default::default() }).unwrap();
        let straight = LPath::straight(&p, &q, pr.lambda1(), 64, pr.orient);
        let ls = path::l_length(&straight, &pr).unwrap();
        assert!(r.best.converged, "iters {}", r.best.iterations);
        assert!(r.best.action <= ls + 1e-12);
        // residual of the discrete minimizer is second order in Δλ
        assert!(r.best.residual < 2e-3 && fine.best.residual < r.best.residual / 2.5, "{} {}", r.best.residual, fine.best.residual);
    }

    #[test]
    fn richardson_refinement_sharpens_residual_and_action() {
        let f = conformal_field(FlowVariant::Ricci);
        let pr = Problem::new(&f, TimeOrientation::backwards(0.6), 0.4).unwrap();
        let p = [0.4, 1.1, 0.0];
        let q = [2.3, 2.9, 0.0];
        let plain = minimize(&p, &q, &pr, &MinimizeOptions::default()).unwrap();
        let rich = minimize(&p, &q, &pr, &MinimizeOptions { richardson: true, ..Default::default() }).unwrap();
        let reference = minimize(&p, &q, &pr, &MinimizeOptions { samples: 512, ..Default::default() }).unwrap();
        assert!(rich.best.converged);
        assert_eq!(rich.best.path.intervals(), 64);
        assert!(rich.best.residual < plain.best.residual / 4.0, "{} {}", rich.best.residual, plain.best.residual);
        let e_plain = (plain.best.action - reference.best.action).abs();
        let e_rich = (rich.best.action - reference.best.action).abs();
        assert!(e_rich < e_plain / 4.0, "{e_rich} {e_plain}");
    }

    #[test]
    fn preconditioner_inverts_kinetic_hessian() {
        let gs = vec![
            [[2.0, 0.1, 0.0], [0.1, 1.0, 0.0], [0.0; 3]],
            [[1.5, 0.0, 0.0], [0.0, 1.2, 0.0], [0.0; 3]],
            [[1.0, -0.2, 0.0], [-0.2, 0.8, 0.0], [0.0; 3]],
            [[1.1, 0.0, 0.0], [0.0, 1.1, 0.0], [0.0; 3]],
        ];
        let dl = 0.3;
        let x = vec![[0.0; 3], [1.0, -2.0, 0.0], [0.5, 0.25, 0.0], [-1.0, 3.0, 0.0], [0.0; 3]];
        let mut r = vec![[0.0; 3]; 5];
        for j in 1..4 {
            let a = linalg::mat_vec(2, &linalg::add(2, &gs[j - 1], &gs[j]), &x[j]);
            let b = linalg::mat_vec(2, &gs[j - 1], &x[j - 1]);
            let c = linalg::mat_vec(2, &gs[j], &x[j + 1]);
            for k in 0..2 {
                r[j][k] = (a[k] - b[k] - c[k]) / dl;
            }
        }
        let y = precondition(2, &gs, dl, &r).unwrap();
        for j in 1..4 {
            for k in 0..2 {
                assert!((y[j][k] - x[j][k]).abs() < 1e-12);
            }
        }
    }
}
