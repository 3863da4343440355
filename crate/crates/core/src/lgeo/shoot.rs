//! Forward integration of the L-geodesic equation from an initial velocity.

use crate::error::{Error, Result};
use crate::geometry::linalg::{self, Vec3};
use crate::geometry::sphere::Chart;
use crate::lgeo::path::{LPath, Problem};

pub const DEFAULT_VELOCITY_LIMIT: f64 = 1e3;

/// Right-hand side `γ'' = −Γ(γ', γ') + 2λ²∇S + 4σλ S(γ', ·)^♯`.
fn accel(problem: &Problem, x: &Vec3, v: &Vec3, lam: f64) -> Result<Vec3> {
    let n = problem.dim();
    let l = problem.local(x, lam);
    let ginv = linalg::inverse(n, &l.g)
        .filter(|_| linalg::min_eigenvalue(n, &l.g) > 0.0)
        .ok_or_else(|| Error::ShootingFailed { lambda: lam, reason: "metric not positive-definite".into() })?;
    let c = l.christoffel(n, &ginv);
    let grad_s = linalg::mat_vec(n, &ginv, &l.ds);
    let sv = linalg::mat_vec(n, &ginv, &linalg::mat_vec(n, &l.s_tensor, v));
    let sigma = problem.sigma();
    let mut a = [0.0; 3];
    for k in 0..n {
        a[k] = -linalg::bilinear(n, &c[k], v, v) + 2.0 * lam * lam * grad_s[k] + 4.0 * sigma * lam * sv[k];
    }
    Ok(a)
}

/// RK4 in `λ` over `[0, √s₁]` with `intervals` steps, starting at `x0`
/// (chart coordinates when `chart` is given) with `dγ/dλ(0) = v0`.
pub fn shoot(
    problem: &Problem,
    x0: &Vec3,
    v0: &Vec3,
    chart: Option<Chart>,
    intervals: usize,
    velocity_limit: f64,
) -> Result<LPath> {
    let n = problem.dim();
    let g0 = problem.local(x0, 0.0).g;
    let norm = linalg::bilinear(n, &g0, v0, v0).sqrt();
    if !norm.is_finite() || norm > velocity_limit {
        return Err(Error::VelocityTooLarge { norm, limit: velocity_limit });
    }
    let lam1 = problem.lambda1();
    let h = lam1 / intervals as f64;
    let mut x = *x0;
    let mut v = *v0;
    let mut points = Vec::with_capacity(intervals + 1);
    points.push(x);
    let step = |x: &Vec3, v: &Vec3, dx: &Vec3, dv: &Vec3, c: f64| -> ([f64; 3], [f64; 3]) {
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        for i in 0..3 {
            a[i] = x[i] + c * dx[i];
            b[i] = v[i] + c * dv[i];
        }
        (a, b)
    };
    for k in 0..intervals {
        let lam = k as f64 * h;
        let a1 = accel(problem, &x, &v, lam)?;
        let (x2, v2) = step(&x, &v, &v, &a1, 0.5 * h);
        let a2 = accel(problem, &x2, &v2, lam + 0.5 * h)?;
        let (x3, v3) = step(&x, &v, &v2, &a2, 0.5 * h);
        let a3 = accel(problem, &x3, &v3, lam + 0.5 * h)?;
        let (x4, v4) = step(&x, &v, &v3, &a3, h);
        let a4 = accel(problem, &x4, &v4, lam + h)?;
        for i in 0..n {
            x[i] += h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
            v[i] += h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
        }
        if x.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(Error::ShootingFailed { lambda: lam + h, reason: "non-finite state".into() });
        }
        if chart.is_some() && x[0] * x[0] + x[1] * x[1] > 1e6 {
            return Err(Error::ShootingFailed { lambda: lam + h, reason: "left the chart".into() });
        }
        points.push(x);
    }
    Ok(LPath { lambda1: lam1, points, chart, orientation: problem.orient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{evolve, EvolveOptions, FlowSpec, FlowState, FlowVariant};
    use crate::geometry::field::{Field, MetricField};
    use crate::geometry::grid::Grid;
    use crate::geometry::sphere::{angle, SphereModel};
    use crate::lgeo::path;
    use crate::lgeo::pathfield::PathField;
    use crate::orientation::TimeOrientation;

    fn sphere_field(t_end: f64) -> PathField {
        let grid = std::sync::Arc::new(Grid::sphere(8, 8, 1.0).unwrap());
        let g = MetricField::new(Field::filled(grid, 0.0, linalg::scaled_identity(2, 4.0))).unwrap();
        let sol = evolve(FlowState::new(g), &FlowSpec::new(FlowVariant::Ricci), &EvolveOptions::new(t_end)).unwrap();
        PathField::new(&sol).unwrap()
    }

    #[test]
    fn rejects_large_velocity() {
        let f = sphere_field(0.2);
        let pr = Problem::new(&f, TimeOrientation::forwards(0.0), 0.1).unwrap();
        let r = shoot(&pr, &[0.0; 3], &[2e3, 0.0, 0.0], Some(Chart::centred_at(&[0.0, 0.0, 1.0])), 32, 1e3);
        assert!(matches!(r, Err(Error::VelocityTooLarge { .. })));
    }

    #[test]
    fn sphere_angular_momentum_is_conserved() {
        // radial motion along a great circle: θ' ρ(λ) is constant for Ricci flow
        // backwards from the origin, ρ(λ) = ρ_b + 2λ².
        let f = sphere_field(0.4);
        let orient = TimeOrientation::backwards(0.4);
        let pr = Problem::new(&f, orient, 0.25).unwrap();
        let m = SphereModel::ricci(1.0);
        let rho_b = m.rho(0.4);
        let chart = Chart::centred_at(&[0.0, 0.0, 1.0]);
        let v0 = [0.8, 0.0, 0.0];
        let p = shoot(&pr, &[0.0; 3], &v0, Some(chart), 256, 1e3).unwrap();
        // angular speed w(0)·0.8
        let omega0 = 0.8 * 2.0;
        let mut predicted = 0.0;
        let k = 256;
        let h = pr.lambda1() / k as f64;
        for j in 0..k {
            let lam = (j as f64 + 0.5) * h;
            predicted += h * omega0 * rho_b / (rho_b + 2.0 * lam * lam);
        }
        let end = chart.to_sphere(&p.end());
        let theta = angle(&[0.0, 0.0, 1.0], &end);
        assert!((theta - predicted).abs() < 1e-6, "{theta} vs {predicted}");
        let res = path::geodesic_residual(&p, &pr);
        assert!(path::max_interior_residual(&res) < 1e-3);
    }
}
