//! Fixed-size linear algebra for the up-to-three-dimensional tensors that
//! live at every grid node.
//!
//! All routines take the active dimension `n` explicitly and only touch the
//! leading `n × n` block; the remaining entries are kept at zero.

pub type Vec3 = [f64; 3];
pub type Mat = [[f64; 3]; 3];

pub const ZERO_VEC: Vec3 = [0.0; 3];
pub const ZERO_MAT: Mat = [[0.0; 3]; 3];

pub fn identity(n: usize) -> Mat {
    let mut m = ZERO_MAT;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

pub fn scaled_identity(n: usize, s: f64) -> Mat {
    let mut m = ZERO_MAT;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = s;
    }
    m
}

pub fn det(n: usize, m: &Mat) -> f64 {
    match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => panic!("unsupported dimension {n}"),
    }
}

/// Inverse by cofactors; `None` when the determinant vanishes.
pub fn inverse(n: usize, m: &Mat) -> Option<Mat> {
    let d = det(n, m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut r = ZERO_MAT;
    match n {
        1 => r[0][0] = 1.0 / d,
        2 => {
            r[0][0] = m[1][1] / d;
            r[0][1] = -m[0][1] / d;
            r[1][0] = -m[1][0] / d;
            r[1][1] = m[0][0] / d;
        }
        3 => {
            r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
            r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
            r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
            r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
            r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
            r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
            r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
            r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
            r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
        }
        _ => panic!("unsupported dimension {n}"),
    }
    Some(r)
}

pub fn mul(n: usize, a: &Mat, b: &Mat) -> Mat {
    let mut r = ZERO_MAT;
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i][k] * b[k][j];
            }
            r[i][j] = s;
        }
    }
    r
}

pub fn mat_vec(n: usize, m: &Mat, v: &Vec3) -> Vec3 {
    let mut r = ZERO_VEC;
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += m[i][j] * v[j];
        }
        r[i] = s;
    }
    r
}

/// Bilinear form `xᵀ M y`.
pub fn bilinear(n: usize, m: &Mat, x: &Vec3, y: &Vec3) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += m[i][j] * x[i] * y[j];
        }
    }
    s
}

pub fn dot(n: usize, a: &Vec3, b: &Vec3) -> f64 {
    (0..n).map(|i| a[i] * b[i]).sum()
}

/// Contraction `A^{ij} B_{ij}` of two matrices (no index raising).
pub fn contract(n: usize, a: &Mat, b: &Mat) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

pub fn add(n: usize, a: &Mat, b: &Mat) -> Mat {
    let mut r = ZERO_MAT;
    for i in 0..n {
        for j in 0..n {
            r[i][j] = a[i][j] + b[i][j];
        }
    }
    r
}

pub fn scale(n: usize, a: &Mat, s: f64) -> Mat {
    let mut r = ZERO_MAT;
    for i in 0..n {
        for j in 0..n {
            r[i][j] = a[i][j] * s;
        }
    }
    r
}

/// `a + s·b`, the RK4 workhorse.
pub fn axpy(n: usize, a: &Mat, s: f64, b: &Mat) -> Mat {
    let mut r = ZERO_MAT;
    for i in 0..n {
        for j in 0..n {
            r[i][j] = a[i][j] + s * b[i][j];
        }
    }
    r
}

pub fn symmetrize(n: usize, a: &Mat) -> Mat {
    let mut r = ZERO_MAT;
    for i in 0..n {
        for j in 0..n {
            r[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    r
}

pub fn max_abs(n: usize, a: &Mat) -> f64 {
    let mut m = 0.0f64;
    for row in a.iter().take(n) {
        for v in row.iter().take(n) {
            m = m.max(v.abs());
        }
    }
    m
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn sym_eigenvalues(n: usize, m: &Mat) -> Vec3 {
    match n {
        1 => [m[0][0], 0.0, 0.0],
        2 => {
            let tr = 0.5 * (m[0][0] + m[1][1]);
            let d = 0.5 * (m[0][0] - m[1][1]);
            let r = (d * d + m[0][1] * m[0][1]).sqrt();
            [tr - r, tr + r, 0.0]
        }
        3 => {
            let mut a = *m;
            for _ in 0..50 {
                let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
                if off < 1e-300 {
                    break;
                }
                for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    let mut b = a;
                    for k in 0..3 {
                        b[k][p] = c * a[k][p] - s * a[k][q];
                        b[k][q] = s * a[k][p] + c * a[k][q];
                    }
                    let mut e = b;
                    for k in 0..3 {
                        e[p][k] = c * b[p][k] - s * b[q][k];
                        e[q][k] = s * b[p][k] + c * b[q][k];
                    }
                    a = e;
                }
            }
            let mut ev = [a[0][0], a[1][1], a[2][2]];
            ev.sort_by(|x, y| x.total_cmp(y));
            ev
        }
        _ => panic!("unsupported dimension {n}"),
    }
}

pub fn min_eigenvalue(n: usize, m: &Mat) -> f64 {
    sym_eigenvalues(n, m)[0]
}

/// Eigenvalues of `g⁻¹ T` for symmetric `T` and SPD `g`, ascending.
/// Computed as the eigenvalues of `L⁻¹ T L⁻ᵀ` with `g = L Lᵀ`.
pub fn relative_eigenvalues(n: usize, g: &Mat, t: &Mat) -> Option<Vec3> {
    let l = cholesky(n, g)?;
    let linv = inverse(n, &l)?;
    let mut lt = ZERO_MAT;
    for i in 0..n {
        for j in 0..n {
            lt[i][j] = linv[j][i];
        }
    }
    let c = mul(n, &mul(n, &linv, t), &lt);
    Some(sym_eigenvalues(n, &symmetrize(n, &c)))
}

/// Lower Cholesky factor; `None` when the matrix is not positive-definite.
pub fn cholesky(n: usize, m: &Mat) -> Option<Mat> {
    let mut l = ZERO_MAT;
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Gram–Schmidt orthonormalization of `basis` with respect to `g`.
pub fn orthonormalize(n: usize, g: &Mat, basis: &[Vec3]) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::with_capacity(n);
    for b in basis.iter().take(n) {
        let mut v = *b;
        for e in &out {
            let c = bilinear(n, g, &v, e);
            for k in 0..n {
                v[k] -= c * e[k];
            }
        }
        let nrm = bilinear(n, g, &v, &v).sqrt();
        for x in v.iter_mut().take(n) {
            *x /= nrm;
        }
        out.push(v);
    }
    out
}

/// Solve the symmetric positive-definite system `m x = b`.
pub fn spd_solve(n: usize, m: &Mat, b: &Vec3) -> Option<Vec3> {
    let inv = inverse(n, m)?;
    Some(mat_vec(n, &inv, b))
}
