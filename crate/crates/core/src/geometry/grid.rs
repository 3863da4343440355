use crate::error::{Error, Result};
use crate::geometry::linalg::Vec3;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// Uniform periodic chart of the flat torus `R^n / (P_1 Z × … × P_n Z)`.
    Torus,
    /// Round two-sphere with closed-form geometry; nodes are a
    /// Gauss–Legendre × uniform-longitude quadrature set.
    AnalyticSphere,
}

pub const MIN_RESOLUTION: usize = 8;

/// Where every field lives.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    kind: GridKind,
    dim: usize,
    resolution: [usize; 3],
    periods: [f64; 3],
    radius: f64,
    // sphere only: (colatitude, longitude, quadrature weight on the unit sphere)
    sphere_nodes: Vec<(f64, f64, f64)>,
}

impl Grid {
    pub fn torus(resolution: &[usize], periods: &[f64]) -> Result<Self> {
        let dim = resolution.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if periods.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} periods given for dimension {dim}",
                periods.len()
            )));
        }
        let mut res = [1usize; 3];
        let mut per = [1.0f64; 3];
        for a in 0..dim {
            if resolution[a] < MIN_RESOLUTION {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has {} nodes, need at least {MIN_RESOLUTION}",
                    resolution[a]
                )));
            }
            if !(periods[a] > 0.0 && periods[a].is_finite()) {
                return Err(Error::InvalidGrid(format!("axis {a} period {} must be positive", periods[a])));
            }
            res[a] = resolution[a];
            per[a] = periods[a];
        }
        Ok(Self { kind: GridKind::Torus, dim, resolution: res, periods: per, radius: 0.0, sphere_nodes: Vec::new() })
    }

    /// Round sphere of initial radius `radius` sampled at `n_theta × n_phi` nodes.
    pub fn sphere(n_theta: usize, n_phi: usize, radius: f64) -> Result<Self> {
        if n_theta < MIN_RESOLUTION || n_phi < MIN_RESOLUTION {
            return Err(Error::InvalidGrid(format!(
                "sphere resolution {n_theta}x{n_phi} below {MIN_RESOLUTION}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidGrid(format!("radius {radius} must be positive")));
        }
        let (z, w) = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        for j in 0..n_phi {
            for i in 0..n_theta {
                nodes.push((z[i].acos(), (j as f64 + 0.5) * dphi, w[i] * dphi));
            }
        }
        Ok(Self {
            kind: GridKind::AnalyticSphere,
            dim: 2,
            resolution: [n_theta, n_phi, 1],
            periods: [PI, 2.0 * PI, 1.0],
            radius,
            sphere_nodes: nodes,
        })
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn periods(&self) -> [f64; 3] {
        self.periods
    }

    /// Initial radius of the analytic sphere (zero on tori).
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_torus(&self) -> bool {
        self.kind == GridKind::Torus
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis] / self.resolution[axis] as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Coordinate volume of one torus cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let r = self.resolution;
        [idx % r[0], (idx / r[0]) % r[1], idx / (r[0] * r[1])]
    }

    pub fn index(&self, mi: [usize; 3]) -> usize {
        let r = self.resolution;
        mi[0] + r[0] * (mi[1] + r[1] * mi[2])
    }

    /// Periodic neighbour `idx + offset·e_axis`.
    #[inline]
    pub fn shift(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let mut mi = self.multi_index(idx);
        let n = self.resolution[axis] as isize;
        mi[axis] = (mi[axis] as isize + offset).rem_euclid(n) as usize;
        self.index(mi)
    }

    /// Chart coordinates of a torus node, or `(colatitude, longitude, 0)` on the sphere.
    pub fn coords(&self, idx: usize) -> Vec3 {
        match self.kind {
            GridKind::Torus => {
                let mi = self.multi_index(idx);
                let mut x = [0.0; 3];
                for a in 0..self.dim {
                    x[a] = mi[a] as f64 * self.spacing(a);
                }
                x
            }
            GridKind::AnalyticSphere => {
                let (th, ph, _) = self.sphere_nodes[idx];
                [th, ph, 0.0]
            }
        }
    }

    /// Unit-sphere point of a sphere node.
    pub fn sphere_point(&self, idx: usize) -> Vec3 {
        let (th, ph, _) = self.sphere_nodes[idx];
        [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
    }

    /// Quadrature weight of a sphere node on the unit sphere; the weights sum to 4π.
    pub fn sphere_weight(&self, idx: usize) -> f64 {
        self.sphere_nodes[idx].2
    }

    /// Wrap a coordinate displacement into the fundamental cell `[-P/2, P/2)`.
    pub fn wrap_displacement(&self, d: &Vec3) -> Vec3 {
        let mut r = *d;
        for a in 0..self.dim {
            let p = self.periods[a];
            r[a] = d[a] - p * (d[a] / p + 0.5).floor();
        }
        r
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = z;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}
