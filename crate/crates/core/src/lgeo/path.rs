//! λ-parametrized curves, their L-length, the geodesic residual and the
//! K-integral.

use crate::error::{Error, Result};
use crate::geometry::linalg::{self, Mat, Vec3, ZERO_MAT};
use crate::geometry::sphere::Chart;
use crate::lgeo::pathfield::{Local, PathField};
use crate::orientation::TimeOrientation;

/// Minimum number of λ intervals.
pub const MIN_SAMPLES: usize = 16;

/// One L-length problem: a field, an orientation and the final orientation
/// time `s₁`, with `λ = √s ∈ [0, √s₁]`.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub field: &'a PathField,
    pub orient: TimeOrientation,
    pub s1: f64,
    /// Metric frozen at `s = 0` and `S` dropped: the plain energy of `g(0)`.
    pub frozen: bool,
}

impl<'a> Problem<'a> {
    pub fn new(field: &'a PathField, orient: TimeOrientation, s1: f64) -> Result<Self> {
        if !(s1 > 0.0) {
            return Err(Error::TimeTooSmall { t: s1, t_min: 0.0 });
        }
        field.check_time(orient.t_of(0.0))?;
        field.check_time(orient.t_of(s1))?;
        Ok(Self { field, orient, s1, frozen: false })
    }

    /// Energy problem for the metric at orientation time zero.
    pub fn frozen(field: &'a PathField, orient: TimeOrientation, s1: f64) -> Result<Self> {
        field.check_time(orient.t_of(0.0))?;
        Ok(Self { field, orient, s1, frozen: true })
    }

    pub fn lambda1(&self) -> f64 {
        self.s1.sqrt()
    }

    pub fn sigma(&self) -> f64 {
        self.orient.hat_sign()
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn t_at(&self, lambda: f64) -> f64 {
        if self.frozen {
            self.orient.origin
        } else {
            self.orient.t_of(lambda * lambda)
        }
    }

    pub fn local(&self, x: &Vec3, lambda: f64) -> Local {
        let mut l = self.field.eval(x, self.t_at(lambda));
        if self.frozen {
            l.s_tensor = ZERO_MAT;
            l.s = 0.0;
            l.ds = [0.0; 3];
            l.dt_s = 0.0;
        }
        l
    }

    pub fn values(&self, x: &Vec3, lambda: f64) -> (Mat, f64) {
        let (g, s) = self.field.eval_values(x, self.t_at(lambda));
        (g, if self.frozen { 0.0 } else { s })
    }

    /// `2λ²S + ½|v|²_g` at one point.
    pub fn integrand(&self, x: &Vec3, lambda: f64, v: &Vec3) -> f64 {
        let (g, s) = self.values(x, lambda);
        2.0 * lambda * lambda * s + 0.5 * linalg::bilinear(self.dim(), &g, v, v)
    }
}

/// Samples `γ(λ_k)`, `λ_k = k √s₁ / K`, in torus cover coordinates or in a
/// stereographic chart of the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct LPath {
    pub lambda1: f64,
    pub points: Vec<Vec3>,
    pub chart: Option<Chart>,
    pub orientation: TimeOrientation,
}

impl LPath {
    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dl(&self) -> f64 {
        self.lambda1 / self.intervals() as f64
    }

    pub fn lambda(&self, k: usize) -> f64 {
        k as f64 * self.dl()
    }

    pub fn start(&self) -> Vec3 {
        self.points[0]
    }

    pub fn end(&self) -> Vec3 {
        *self.points.last().unwrap()
    }

    /// Straight segment in coordinates.
    pub fn straight(p: &Vec3, q: &Vec3, lambda1: f64, intervals: usize, orientation: TimeOrientation) -> Self {
        let points = (0..=intervals)
            .map(|k| {
                let u = k as f64 / intervals as f64;
                [p[0] + u * (q[0] - p[0]), p[1] + u * (q[1] - p[1]), p[2] + u * (q[2] - p[2])]
            })
            .collect();
        Self { lambda1, points, chart: None, orientation }
    }

    /// Second-order finite-difference velocities `dγ/dλ`.
    pub fn velocities(&self) -> Vec<Vec3> {
        let m = self.points.len();
        let h = self.dl();
        let p = &self.points;
        (0..m)
            .map(|k| {
                let mut v = [0.0; 3];
                for a in 0..3 {
                    v[a] = if k == 0 {
                        (-3.0 * p[0][a] + 4.0 * p[1][a] - p[2][a]) / (2.0 * h)
                    } else if k == m - 1 {
                        (3.0 * p[k][a] - 4.0 * p[k - 1][a] + p[k - 2][a]) / (2.0 * h)
                    } else {
                        (p[k + 1][a] - p[k - 1][a]) / (2.0 * h)
                    };
                }
                v
            })
            .collect()
    }

    /// Second-order finite-difference accelerations.
    pub fn accelerations(&self) -> Vec<Vec3> {
        let m = self.points.len();
        let h2 = self.dl() * self.dl();
        let p = &self.points;
        (0..m)
            .map(|k| {
                let mut v = [0.0; 3];
                for a in 0..3 {
                    v[a] = if k == 0 {
                        (2.0 * p[0][a] - 5.0 * p[1][a] + 4.0 * p[2][a] - p[3][a]) / h2
                    } else if k == m - 1 {
                        (2.0 * p[k][a] - 5.0 * p[k - 1][a] + 4.0 * p[k - 2][a] - p[k - 3][a]) / h2
                    } else {
                        (p[k + 1][a] - 2.0 * p[k][a] + p[k - 1][a]) / h2
                    };
                }
                v
            })
            .collect()
    }

    /// Fourth-order finite-difference velocities (needs 6 samples).
    pub fn velocities4(&self) -> Vec<Vec3> {
        const END: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
        const NEAR: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
        const MID: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
        self.stencil4(12.0 * self.dl(), &END, &NEAR, &MID, -1.0)
    }

    /// Fourth-order finite-difference accelerations (needs 6 samples).
    pub fn accelerations4(&self) -> Vec<Vec3> {
        const END: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
        const NEAR: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
        const MID: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
        self.stencil4(12.0 * self.dl() * self.dl(), &END, &NEAR, &MID, 1.0)
    }

    /// One-sided weights at the two samples nearest each end (mirrored, with
    /// sign `mirror`, at the far end) and central weights elsewhere.
    fn stencil4(&self, denom: f64, end: &[f64], near: &[f64], mid: &[f64; 5], mirror: f64) -> Vec<Vec3> {
        let p = &self.points;
        let m = p.len();
        let head = |w: &[f64], a: usize| -> f64 { w.iter().enumerate().map(|(j, c)| c * p[j][a]).sum() };
        let tail = |w: &[f64], a: usize| -> f64 { mirror * w.iter().enumerate().map(|(j, c)| c * p[m - 1 - j][a]).sum::<f64>() };
        (0..m)
            .map(|k| {
                let mut v = [0.0; 3];
                for a in 0..3 {
                    let sum = match k {
                        0 => head(end, a),
                        1 => head(near, a),
                        _ if k == m - 1 => tail(end, a),
                        _ if k == m - 2 => tail(near, a),
                        _ => (0..5).map(|j| mid[j] * p[k + j - 2][a]).sum(),
                    };
                    v[a] = sum / denom;
                }
                v
            })
            .collect()
    }

    /// `v = dγ/dλ(0) = lim 2√s X`.
    pub fn initial_velocity(&self) -> Vec3 {
        self.velocities()[0]
    }

    /// Sample `k` on the manifold: wrapped torus coordinates, or a unit
    /// vector on the sphere.
    pub fn manifold_point(&self, k: usize, periods: &[f64; 3], dim: usize) -> Vec3 {
        let x = self.points[k];
        match &self.chart {
            Some(c) => c.to_sphere(&x),
            None => {
                let mut y = x;
                for a in 0..dim {
                    y[a] = x[a].rem_euclid(periods[a]);
                }
                y
            }
        }
    }
}

/// Composite Simpson weights for `m` intervals of width `h`.
pub fn simpson_weights(m: usize, h: f64) -> Result<Vec<f64>> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::Config(format!("Simpson quadrature needs an even number of intervals, got {m}")));
    }
    Ok((0..=m)
        .map(|k| {
            let c = if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect())
}

/// `L = ∫₀^{√s₁} (2λ²S + ½|dγ/dλ|²) dλ` by composite Simpson with the
/// given sample velocities.
pub fn l_length_with(path: &LPath, problem: &Problem, vel: &[Vec3]) -> Result<f64> {
    let w = simpson_weights(path.intervals(), path.dl())?;
    let mut terms: Vec<f64> = (0..path.points.len())
        .map(|k| w[k] * problem.integrand(&path.points[k], path.lambda(k), &vel[k]))
        .collect();
    Ok(crate::geometry::integrate::deterministic_sum(&mut terms))
}

/// L-length with finite-difference velocities.
pub fn l_length(path: &LPath, problem: &Problem) -> Result<f64> {
    l_length_with(path, problem, &path.velocities())
}

/// `|∇_X̃ X̃ − 2λ²∇S − 4σλ S(X̃, ·)|_g` at each sample, `X̃ = dγ/dλ`.
pub fn geodesic_residual(path: &LPath, problem: &Problem) -> Vec<f64> {
    residual_with(path, problem, &path.velocities(), &path.accelerations())
}

/// The residual with fourth-order differences.
pub fn geodesic_residual4(path: &LPath, problem: &Problem) -> Vec<f64> {
    residual_with(path, problem, &path.velocities4(), &path.accelerations4())
}

fn residual_with(path: &LPath, problem: &Problem, vel: &[Vec3], acc: &[Vec3]) -> Vec<f64> {
    let n = problem.dim();
    let sigma = problem.sigma();
    (0..path.points.len())
        .map(|k| {
            let lam = path.lambda(k);
            let l = problem.local(&path.points[k], lam);
            let Some(ginv) = linalg::inverse(n, &l.g) else { return f64::INFINITY };
            let c = l.christoffel(n, &ginv);
            let v = &vel[k];
            let grad_s = linalg::mat_vec(n, &ginv, &l.ds);
            let sv = linalg::mat_vec(n, &ginv, &linalg::mat_vec(n, &l.s_tensor, v));
            let mut r = [0.0; 3];
            for a in 0..n {
                r[a] = acc[k][a] + linalg::bilinear(n, &c[a], v, v)
                    - 2.0 * lam * lam * grad_s[a]
                    - 4.0 * sigma * lam * sv[a];
            }
            linalg::bilinear(n, &l.g, &r, &r).sqrt()
        })
        .collect()
}

/// Largest residual over interior samples.
pub fn max_interior_residual(res: &[f64]) -> f64 {
    res[1..res.len() - 1].iter().copied().fold(0.0, f64::max)
}

/// `K = ∫₀^{√s₁} 2λ⁴ H(S, −σX) dλ` with `X = X̃ / 2λ`, i.e. the Simpson
/// integral of `2λ⁴∂tS + 2σλ²S + 2σλ³⟨∇S, X̃⟩ + λ² S(X̃, X̃)`.
pub fn k_integral_with(path: &LPath, problem: &Problem, vel: &[Vec3]) -> Result<f64> {
    let n = problem.dim();
    let sigma = problem.sigma();
    let w = simpson_weights(path.intervals(), path.dl())?;
    let mut terms: Vec<f64> = (0..path.points.len())
        .map(|k| {
            let lam = path.lambda(k);
            let l = problem.local(&path.points[k], lam);
            let v = &vel[k];
            let l2 = lam * lam;
            w[k] * (2.0 * l2 * l2 * l.dt_s
                + 2.0 * sigma * l2 * l.s
                + 2.0 * sigma * l2 * lam * linalg::dot(n, &l.ds, v)
                + l2 * linalg::bilinear(n, &l.s_tensor, v, v))
        })
        .collect();
    Ok(crate::geometry::integrate::deterministic_sum(&mut terms))
}

pub fn k_integral(path: &LPath, problem: &Problem) -> Result<f64> {
    k_integral_with(path, problem, &path.velocities())
}

/// Both sides of `λ₁³(S + |X̃|²/4λ₁²) = σK + L/2` at the endpoint.
pub fn endpoint_identity(path: &LPath, problem: &Problem, l_value: f64, k_value: f64) -> (f64, f64) {
    let n = problem.dim();
    let lam = path.lambda1;
    let v = *path.velocities().last().unwrap();
    let l = problem.local(&path.end(), lam);
    let lhs = lam.powi(3) * (l.s + linalg::bilinear(n, &l.g, &v, &v) / (4.0 * lam * lam));
    (lhs, problem.sigma() * k_value + 0.5 * l_value)
}

/// A solved geodesic problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicResult {
    pub path: LPath,
    /// Simpson L-length.
    pub action: f64,
    /// Largest residual over interior samples.
    pub residual: f64,
    /// Best over all starts.
    pub minimal: bool,
    pub converged: bool,
    pub iterations: usize,
    pub initial_velocity: Vec3,
    /// Which start produced this result.
    pub branch: usize,
    /// Endpoint minus start point in cover coordinates.
    pub displacement: Vec3,
}
