use crate::error::{Error, Result};
use crate::flows::solution::{Backend, Snapshot, SpacetimeSolution};
use crate::flows::spec::{FlowSpec, FlowVariant};
use crate::flows::state::FlowState;
use crate::flows::stensor::{self, sphere_coefficient};
use crate::geometry::field::{Field, MetricField};
use crate::geometry::linalg;
use crate::geometry::grid::Grid;
use crate::geometry::sphere::SphereModel;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub t_end: f64,
    /// Explicit step; chosen from the stability rule when absent.
    pub dt: Option<f64>,
    pub cfl: f64,
    pub snapshot_stride: usize,
}

impl EvolveOptions {
    pub fn new(t_end: f64) -> Self {
        Self { t_end, dt: None, cfl: 0.5, snapshot_stride: 1 }
    }
}

/// Largest step allowed by `dt ≤ c · min(h² λ_min(g) / n, 1 / max|g⁻¹S|)`.
pub fn stable_step(state: &FlowState, spec: &FlowSpec, cfl: f64) -> Result<f64> {
    let grid = state.grid();
    let n = grid.dim();
    if !grid.is_torus() || spec.variant == FlowVariant::Static {
        return Ok(f64::INFINITY);
    }
    let (s, _) = stensor::s_tensor(state, spec)?;
    let h2 = grid.min_spacing().powi(2);
    let mut lam = f64::INFINITY;
    let mut smax = 0.0f64;
    for i in 0..grid.len() {
        let g = state.g.at(i);
        lam = lam.min(linalg::min_eigenvalue(n, g));
        if let Some(ev) = linalg::relative_eigenvalues(n, g, &s.data[i]) {
            smax = smax.max(ev[0].abs()).max(ev[n - 1].abs());
        }
    }
    let diffusive = h2 * lam / n as f64;
    let reactive = if smax > 0.0 { 1.0 / smax } else { f64::INFINITY };
    Ok(cfl * diffusive.min(reactive))
}

/// One classical Runge–Kutta step for the metric and auxiliary fields jointly.
pub fn step(state: &FlowState, spec: &FlowSpec, dt: f64) -> Result<FlowState> {
    state.check_for(spec)?;
    let grid = state.grid().clone();
    if !grid.is_torus() {
        let c = sphere_coefficient(spec)?;
        let model = SphereModel { rho0: state.g.at(0)[0][0] / 4.0 + 2.0 * c * state.t, c };
        return sphere_state(&grid, &model, state.t + dt);
    }
    let t = state.t;
    let y = state.to_raw();
    let k1 = stensor::rhs(&grid, spec, t, &y)?;
    let k2 = stensor::rhs(&grid, spec, t + 0.5 * dt, &y.axpy(0.5 * dt, &k1))?;
    let k3 = stensor::rhs(&grid, spec, t + 0.5 * dt, &y.axpy(0.5 * dt, &k2))?;
    let k4 = stensor::rhs(&grid, spec, t + dt, &y.axpy(dt, &k3))?;
    let out = y.axpy(dt / 6.0, &k1).axpy(dt / 3.0, &k2).axpy(dt / 3.0, &k3).axpy(dt / 6.0, &k4);
    state.from_raw(t + dt, out)
}

fn sphere_state(grid: &Arc<Grid>, m: &SphereModel, t: f64) -> Result<FlowState> {
    let rho = m.rho(t);
    if rho <= 0.0 {
        return Err(Error::NotPositiveDefinite { node: 0, eigenvalue: 4.0 * rho });
    }
    let g = MetricField::new(Field::filled(grid.clone(), t, linalg::scaled_identity(2, 4.0 * rho)))?;
    Ok(FlowState::new(g))
}

fn snapshot(state: FlowState, spec: &FlowSpec) -> Result<Snapshot> {
    let (s_tensor, s) = stensor::s_tensor(&state, spec)?;
    Ok(Snapshot { state, s_tensor, s })
}

/// Integrate from `initial.t` to `t_end`, storing every `snapshot_stride`-th
/// step. A singularity mid-run returns the solution up to the last good
/// snapshot with the diagnostic recorded.
pub fn evolve(initial: FlowState, spec: &FlowSpec, opts: &EvolveOptions) -> Result<SpacetimeSolution> {
    initial.check_for(spec)?;
    let mut warnings = spec.validate(opts.t_end)?;
    let span = opts.t_end - initial.t;
    if !(span > 0.0) {
        return Err(Error::Config(format!("t_end {} must exceed the initial time {}", opts.t_end, initial.t)));
    }
    if opts.snapshot_stride == 0 {
        return Err(Error::Config("snapshot_stride must be positive".into()));
    }
    let grid = initial.grid().clone();
    let stride = opts.snapshot_stride;
    let bound = stable_step(&initial, spec, opts.cfl)?;
    let dt_raw = match opts.dt {
        Some(dt) if dt <= 0.0 => return Err(Error::Config(format!("dt {dt} must be positive"))),
        Some(dt) if dt > bound => return Err(Error::StepTooLarge { dt, bound }),
        Some(dt) => dt,
        None if bound.is_finite() => bound,
        None => span / 64.0,
    };
    let chunks = (span / (dt_raw * stride as f64) - 1e-9).ceil().max(1.0) as usize;
    let nsteps = chunks * stride;
    let dt = span / nsteps as f64;

    let backend = if grid.is_torus() {
        Backend::Torus
    } else {
        let c = sphere_coefficient(spec)?;
        Backend::Sphere(SphereModel { rho0: initial.g.at(0)[0][0] / 4.0 + 2.0 * c * initial.t, c })
    };
    let t0 = initial.t;
    let mut snaps = vec![snapshot(initial.clone(), spec)?];
    let mut truncation = None;
    let mut state = initial;
    for k in 1..=nsteps {
        let t_next = t0 + k as f64 * dt;
        let next = match backend {
            Backend::Torus => step(&state, spec, dt),
            Backend::Sphere(m) => sphere_state(&grid, &m, t_next),
        };
        match next.and_then(|mut s| {
            s.t = t_next;
            if k % stride == 0 {
                let snap = snapshot(s.clone(), spec)?;
                Ok((s, Some(snap)))
            } else {
                Ok((s, None))
            }
        }) {
            Ok((s, snap)) => {
                state = s;
                if let Some(sn) = snap {
                    snaps.push(sn);
                }
            }
            Err(e) => {
                if snaps.len() < 2 {
                    return Err(e);
                }
                warnings.push(format!("flow singularity at t = {t_next}: {e}"));
                truncation = Some(e.to_string());
                break;
            }
        }
    }
    SpacetimeSolution::new(spec.clone(), backend, snaps, dt, stride, truncation, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::integrate::integrate;

    #[test]
    fn static_flow_is_identity() {
        let grid = Arc::new(Grid::torus(&[8, 8], &[1.0, 1.0]).unwrap());
        let g = Field::from_fn(grid.clone(), 0.0, |i| {
            let x = grid.coords(i);
            linalg::scaled_identity(2, 1.0 + 0.2 * (6.0 * x[0]).sin())
        });
        let st = FlowState::new(MetricField::new(g).unwrap());
        let out = step(&st, &FlowSpec::new(FlowVariant::Static), 0.37).unwrap();
        assert_eq!(out.g.field().data, st.g.field().data);
    }

    #[test]
    fn sphere_radius_follows_einstein_ode() {
        let grid = Arc::new(Grid::sphere(8, 8, 2.0).unwrap());
        let g = MetricField::new(Field::filled(grid, 0.0, linalg::scaled_identity(2, 16.0))).unwrap();
        let mut o = EvolveOptions::new(1.0);
        o.dt = Some(0.1);
        let sol = evolve(FlowState::new(g), &FlowSpec::new(FlowVariant::Ricci), &o).unwrap();
        let last = sol.snapshots.last().unwrap();
        assert!((last.state.g.at(3)[0][0] / 4.0 - (4.0 - 2.0)).abs() < 1e-14);
    }

    fn total_curvature_drift(res: usize) -> f64 {
        let grid = Arc::new(Grid::torus(&[res, res], &[std::f64::consts::TAU; 2]).unwrap());
        let g = Field::from_fn(grid.clone(), 0.0, |i| {
            let x = grid.coords(i);
            linalg::scaled_identity(2, (0.2 * x[0].sin() * x[1].sin()).exp())
        });
        let mut o = EvolveOptions::new(0.1);
        o.snapshot_stride = 4;
        let sol = evolve(FlowState::new(MetricField::new(g).unwrap()), &FlowSpec::new(FlowVariant::Ricci), &o).unwrap();
        assert!(sol.truncation.is_none());
        sol.snapshots.iter().map(|s| integrate(&s.s, &s.state.g).unwrap().abs()).fold(0.0, f64::max)
    }

    #[test]
    fn gauss_bonnet_preserved_under_ricci() {
        let (a, b) = (total_curvature_drift(24), total_curvature_drift(48));
        assert!(b < 5e-3 && a / b > 3.5, "{a} {b}");
    }

    #[test]
    fn oversized_step_rejected() {
        let grid = Arc::new(Grid::torus(&[16, 16], &[1.0, 1.0]).unwrap());
        let st = FlowState::new(MetricField::flat(grid.clone(), 0.0))
            .with_psi(Field::from_fn(grid.clone(), 0.0, |i| (6.0 * grid.coords(i)[0]).sin()))
            .unwrap();
        let mut o = EvolveOptions::new(1.0);
        o.dt = Some(0.5);
        assert!(matches!(evolve(st, &FlowSpec::new(FlowVariant::List), &o), Err(Error::StepTooLarge { .. })));
    }
}
