//! Periodic central differences, second order unless marked otherwise.

use crate::geometry::grid::Grid;
use crate::geometry::linalg::{Mat, Vec3, ZERO_MAT};

/// Values that can be differenced.
pub trait Lin: Copy + Send + Sync {
    fn zero() -> Self;
    fn comb(a: f64, x: &Self, b: f64, y: &Self) -> Self;
}

impl Lin for f64 {
    fn zero() -> Self {
        0.0
    }
    fn comb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        a * x + b * y
    }
}

impl Lin for Vec3 {
    fn zero() -> Self {
        [0.0; 3]
    }
    fn comb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        [a * x[0] + b * y[0], a * x[1] + b * y[1], a * x[2] + b * y[2]]
    }
}

impl Lin for Mat {
    fn zero() -> Self {
        ZERO_MAT
    }
    fn comb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        let mut r = ZERO_MAT;
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = a * x[i][j] + b * y[i][j];
            }
        }
        r
    }
}

/// `∂_axis f` at node `idx`.
#[inline]
pub fn d1<T: Lin>(grid: &Grid, data: &[T], idx: usize, axis: usize) -> T {
    let h = grid.spacing(axis);
    let p = grid.shift(idx, axis, 1);
    let m = grid.shift(idx, axis, -1);
    T::comb(0.5 / h, &data[p], -0.5 / h, &data[m])
}

/// All first derivatives.
pub fn grad<T: Lin>(grid: &Grid, data: &[T], idx: usize) -> [T; 3] {
    let mut out = [T::zero(); 3];
    for (a, o) in out.iter_mut().enumerate().take(grid.dim()) {
        *o = d1(grid, data, idx, a);
    }
    out
}

/// Fourth-order `∂_axis f` on five points.
pub fn d1_4(grid: &Grid, data: &[f64], idx: usize, axis: usize) -> f64 {
    let h = grid.spacing(axis);
    let at = |o: isize| data[grid.shift(idx, axis, o)];
    (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h)
}

/// Fourth-order gradient and Hessian. Mixed entries apply the five-point
/// first difference along each axis, so the stencil spans a `5ⁿ` box.
pub fn derivatives4(grid: &Grid, data: &[f64], idx: usize) -> (Vec3, Mat) {
    let n = grid.dim();
    let mut g = [0.0; 3];
    let mut hs = [[0.0; 3]; 3];
    const W: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
    for a in 0..n {
        g[a] = d1_4(grid, data, idx, a);
        let h = grid.spacing(a);
        let at = |o: isize| data[grid.shift(idx, a, o)];
        hs[a][a] = (-at(-2) + 16.0 * at(-1) - 30.0 * at(0) + 16.0 * at(1) - at(2)) / (12.0 * h * h);
        for b in 0..a {
            let k = grid.spacing(b);
            let mut v = 0.0;
            for (i, wa) in W.iter().enumerate() {
                if *wa == 0.0 {
                    continue;
                }
                let ja = grid.shift(idx, a, i as isize - 2);
                for (j, wb) in W.iter().enumerate() {
                    if *wb != 0.0 {
                        v += wa * wb * data[grid.shift(ja, b, j as isize - 2)];
                    }
                }
            }
            hs[a][b] = v / (144.0 * h * k);
            hs[b][a] = hs[a][b];
        }
    }
    (g, hs)
}

/// Compact second differences: three-point along an axis, four-point cross
/// stencil for mixed pairs. The result is symmetric in the two axes.
pub fn hessian<T: Lin>(grid: &Grid, data: &[T], idx: usize) -> [[T; 3]; 3] {
    let n = grid.dim();
    let mut out = [[T::zero(); 3]; 3];
    for a in 0..n {
        let h = grid.spacing(a);
        let p = grid.shift(idx, a, 1);
        let m = grid.shift(idx, a, -1);
        let s = T::comb(1.0, &data[p], 1.0, &data[m]);
        out[a][a] = T::comb(1.0 / (h * h), &s, -2.0 / (h * h), &data[idx]);
        for b in 0..a {
            let k = grid.spacing(b);
            let pp = grid.shift(p, b, 1);
            let pm = grid.shift(p, b, -1);
            let mp = grid.shift(m, b, 1);
            let mm = grid.shift(m, b, -1);
            let c = 0.25 / (h * k);
            let u = T::comb(c, &data[pp], -c, &data[pm]);
            let v = T::comb(-c, &data[mp], c, &data[mm]);
            let r = T::comb(1.0, &u, 1.0, &v);
            out[a][b] = r;
            out[b][a] = r;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_trig_converge() {
        let mut errs = Vec::new();
        for &n in &[16usize, 32] {
            let g = Grid::torus(&[n, n], &[1.0, 1.0]).unwrap();
            let tau = std::f64::consts::TAU;
            let f: Vec<f64> = (0..g.len())
                .map(|i| {
                    let x = g.coords(i);
                    (tau * x[0]).sin() * (tau * x[1]).cos()
                })
                .collect();
            let mut e = 0.0f64;
            for idx in 0..g.len() {
                let x = g.coords(idx);
                let h = hessian(&g, &f, idx);
                let exact = -tau * tau * (tau * x[0]).cos() * (tau * x[1]).sin();
                e = e.max((h[0][1] - exact).abs());
            }
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.5);
    }

    #[test]
    fn fourth_order_stencil_converges() {
        let mut errs = Vec::new();
        for &n in &[16usize, 32] {
            let g = Grid::torus(&[n, n], &[1.0, 1.0]).unwrap();
            let tau = std::f64::consts::TAU;
            let f: Vec<f64> = (0..g.len())
                .map(|i| {
                    let x = g.coords(i);
                    ((tau * x[0]).sin() * (tau * x[1]).cos()).exp()
                })
                .collect();
            let mut e = 0.0f64;
            for idx in 0..g.len() {
                let x = g.coords(idx);
                let (sa, ca) = (tau * x[0]).sin_cos();
                let (sb, cb) = (tau * x[1]).sin_cos();
                let u = (sa * cb).exp();
                let (d, h) = derivatives4(&g, &f, idx);
                let exact_x = tau * ca * cb * u;
                let exact_xy = tau * tau * (-ca * sb + ca * cb * sa * -sb) * u;
                e = e.max((d[0] - exact_x).abs()).max((h[0][1] - exact_xy).abs());
            }
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 12.0, "{errs:?}");
    }
}
