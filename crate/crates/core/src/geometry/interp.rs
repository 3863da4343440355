//! Off-node evaluation: periodic tensor-product cubic B-splines in space and
//! cubic Hermite in time.

use crate::geometry::grid::Grid;
use crate::geometry::linalg::Vec3;
use std::sync::Arc;

/// Cubic B-spline weights and their derivatives for the nodes `-1, 0, 1, 2`
/// at fractional offset `t ∈ [0, 1)`.
#[inline]
pub fn bspline(t: f64) -> ([f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    let u = 1.0 - t;
    (
        [u * u * u / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0, (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0, t3 / 6.0],
        [-0.5 * u * u, 0.5 * (3.0 * t2 - 4.0 * t), 0.5 * (-3.0 * t2 + 2.0 * t + 1.0), 0.5 * t2],
    )
}

const POLE: f64 = -0.267_949_192_431_122_7; // √3 − 2

/// In-place periodic prefilter of one line so that B-spline coefficients
/// interpolate the samples.
fn prefilter_line(f: &mut [f64]) {
    let n = f.len();
    let z = POLE;
    let zn = z.powi(n as i32);
    let mut acc = 0.0;
    let mut zk = 1.0;
    for j in 0..n {
        acc += zk * f[(n - j) % n];
        zk *= z;
    }
    f[0] = acc / (1.0 - zn);
    for k in 1..n {
        f[k] += z * f[k - 1];
    }
    let mut acc = 0.0;
    let mut zk = 1.0;
    for j in 0..n {
        acc += zk * f[(n - 1 + j) % n];
        zk *= z;
    }
    f[n - 1] = acc / (1.0 - zn);
    for k in (0..n - 1).rev() {
        f[k] += z * f[k + 1];
    }
    for v in f.iter_mut() {
        *v *= -6.0 * z;
    }
}

/// Cubic Hermite basis `(h00, h10, h01, h11)` and derivatives in `u`.
#[inline]
pub fn hermite(u: f64) -> ([f64; 4], [f64; 4]) {
    let u2 = u * u;
    let u3 = u2 * u;
    (
        [2.0 * u3 - 3.0 * u2 + 1.0, u3 - 2.0 * u2 + u, -2.0 * u3 + 3.0 * u2, u3 - u2],
        [6.0 * u2 - 6.0 * u, 3.0 * u2 - 4.0 * u + 1.0, -6.0 * u2 + 6.0 * u, 3.0 * u2 - 2.0 * u],
    )
}

/// Multi-channel periodic interpolant over torus nodes.
#[derive(Debug, Clone)]
pub struct PeriodicInterp {
    grid: Arc<Grid>,
    nchan: usize,
    data: Vec<f64>,
}

impl PeriodicInterp {
    /// `data` is node-major: channel `c` of node `i` at `i * nchan + c`.
    /// The interpolant reproduces it at the nodes.
    pub fn new(grid: Arc<Grid>, nchan: usize, mut data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.len() * nchan);
        let res = grid.resolution();
        let mut line = Vec::new();
        for a in 0..grid.dim() {
            let stride: usize = res[..a].iter().product::<usize>() * nchan;
            let len = res[a];
            for start in 0..grid.len() {
                if grid.multi_index(start)[a] != 0 {
                    continue;
                }
                for c in 0..nchan {
                    line.clear();
                    line.extend((0..len).map(|k| data[start * nchan + c + k * stride]));
                    prefilter_line(&mut line);
                    for (k, v) in line.iter().enumerate() {
                        data[start * nchan + c + k * stride] = *v;
                    }
                }
            }
        }
        Self { grid, nchan, data }
    }

    pub fn nchan(&self) -> usize {
        self.nchan
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Accumulate `scale ×` values into `val[..nchan]` and
    /// `scale ×` gradients into `grad[c*3 + axis]`.
    pub fn eval_into(&self, x: &Vec3, scale: f64, val: &mut [f64], grad: &mut [f64]) {
        let grid = &*self.grid;
        let n = grid.dim();
        let res = grid.resolution();
        let mut base = [0isize; 3];
        let mut w = [[0.0; 4]; 3];
        let mut dw = [[0.0; 4]; 3];
        for a in 0..3 {
            if a < n {
                let h = grid.spacing(a);
                let q = x[a] / h;
                let f = q.floor();
                base[a] = f as isize;
                let (ww, dd) = bspline(q - f);
                w[a] = ww;
                for k in 0..4 {
                    dw[a][k] = dd[k] / h;
                }
            } else {
                w[a] = [0.0, 1.0, 0.0, 0.0];
            }
        }
        let nc = self.nchan;
        let span = |a: usize| if a < n { 0..4 } else { 1..2 };
        for k2 in span(2) {
            let i2 = if n > 2 { (base[2] + k2 as isize - 1).rem_euclid(res[2] as isize) as usize } else { 0 };
            for k1 in span(1) {
                let i1 = if n > 1 { (base[1] + k1 as isize - 1).rem_euclid(res[1] as isize) as usize } else { 0 };
                for k0 in 0..4 {
                    let i0 = (base[0] + k0 as isize - 1).rem_euclid(res[0] as isize) as usize;
                    let idx = i0 + res[0] * (i1 + res[1] * i2);
                    let wv = w[0][k0] * w[1][k1] * w[2][k2];
                    let wg = [dw[0][k0] * w[1][k1] * w[2][k2], w[0][k0] * dw[1][k1] * w[2][k2], w[0][k0] * w[1][k1] * dw[2][k2]];
                    let node = &self.data[idx * nc..(idx + 1) * nc];
                    for c in 0..nc {
                        let v = scale * node[c];
                        val[c] += wv * v;
                        for a in 0..n {
                            grad[c * 3 + a] += wg[a] * v;
                        }
                    }
                }
            }
        }
    }


    /// Values only; accumulates `scale ×` values into `val[..nchan]` for the
    /// first `nchan_used` channels.
    pub fn eval_values_into(&self, x: &Vec3, scale: f64, nchan_used: usize, val: &mut [f64]) {
        let grid = &*self.grid;
        let n = grid.dim();
        let res = grid.resolution();
        let mut base = [0isize; 3];
        let mut w = [[0.0, 1.0, 0.0, 0.0]; 3];
        for a in 0..n {
            let q = x[a] / grid.spacing(a);
            let f = q.floor();
            base[a] = f as isize;
            w[a] = bspline(q - f).0;
        }
        let nc = self.nchan;
        let span = |a: usize| if a < n { 0..4 } else { 1..2 };
        for k2 in span(2) {
            let i2 = if n > 2 { (base[2] + k2 as isize - 1).rem_euclid(res[2] as isize) as usize } else { 0 };
            for k1 in span(1) {
                let i1 = if n > 1 { (base[1] + k1 as isize - 1).rem_euclid(res[1] as isize) as usize } else { 0 };
                let w12 = scale * w[1][k1] * w[2][k2];
                for k0 in 0..4 {
                    let i0 = (base[0] + k0 as isize - 1).rem_euclid(res[0] as isize) as usize;
                    let idx = i0 + res[0] * (i1 + res[1] * i2);
                    let wv = w[0][k0] * w12;
                    let node = &self.data[idx * nc..idx * nc + nchan_used];
                    for c in 0..nchan_used {
                        val[c] += wv * node[c];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_converges() {
        let tau = std::f64::consts::TAU;
        let mut errs = Vec::new();
        for &n in &[16usize, 32] {
            let grid = Arc::new(Grid::torus(&[n, n], &[tau, tau]).unwrap());
            let data: Vec<f64> = (0..grid.len())
                .map(|i| {
                    let x = grid.coords(i);
                    x[0].sin() * x[1].cos()
                })
                .collect();
            let ip = PeriodicInterp::new(grid.clone(), 1, data.clone());
            let mut v = [0.0];
            let mut g = [0.0; 3];
            ip.eval_into(&grid.coords(37), 1.0, &mut v, &mut g);
            assert!((v[0] - data[37]).abs() < 1e-14);
            let x = [1.234, -2.1, 0.0];
            let mut v = [0.0];
            let mut g = [0.0; 3];
            ip.eval_into(&x, 1.0, &mut v, &mut g);
            errs.push((g[0] - x[0].cos() * x[1].cos()).abs());
            let mut w = [0.0];
            ip.eval_values_into(&x, 1.0, 1, &mut w);
            assert!((w[0] - v[0]).abs() < 1e-15);
        }
        assert!(errs[0] / errs[1] > 6.0, "{errs:?}");
    }

    #[test]
    fn hermite_interpolates_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t + 0.5;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let (t0, t1) = (0.3, 0.8);
        let t = 0.61;
        let u = (t - t0) / (t1 - t0);
        let (h, _) = hermite(u);
        let d = t1 - t0;
        let v = h[0] * f(t0) + h[1] * d * df(t0) + h[2] * f(t1) + h[3] * d * df(t1);
        assert!((v - f(t)).abs() < 1e-14);
    }
}
