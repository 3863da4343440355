//! Closed-form round two-sphere `g(t) = ρ(t) g_{S²}` with `ρ(t) = ρ₀ − 2ct`.
//! Charts are stereographic from the antipode of a chosen centre, where
//! `g = ρ w² δ`, `w = 2 / (1 + |x|²)`. The flow tensor is `c w² δ`.

use crate::geometry::linalg::{self, Mat, Vec3, ZERO_MAT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereModel {
    pub rho0: f64,
    /// 1 for Ricci flow, 0 for the static sphere.
    pub c: f64,
}

/// Orthonormal frame `(e1, e2, p)` of R³ for a unit vector `p`.
pub fn frame(p: &Vec3) -> [Vec3; 3] {
    let a = if p[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let d = linalg::dot(3, &a, p);
    let mut e1 = [a[0] - d * p[0], a[1] - d * p[1], a[2] - d * p[2]];
    let nn = linalg::dot(3, &e1, &e1).sqrt();
    for v in e1.iter_mut() {
        *v /= nn;
    }
    let e2 = [p[1] * e1[2] - p[2] * e1[1], p[2] * e1[0] - p[0] * e1[2], p[0] * e1[1] - p[1] * e1[0]];
    [e1, e2, *p]
}

/// Stereographic chart centred at a unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chart {
    pub frame: [Vec3; 3],
}

impl Chart {
    pub fn centred_at(p: &Vec3) -> Self {
        Self { frame: frame(p) }
    }

    pub fn centre(&self) -> Vec3 {
        self.frame[2]
    }

    /// Chart coordinates of a unit vector (undefined at the antipode).
    pub fn to_chart(&self, y: &Vec3) -> Vec3 {
        let [e1, e2, p] = &self.frame;
        let den = 1.0 + linalg::dot(3, y, p);
        [linalg::dot(3, y, e1) / den, linalg::dot(3, y, e2) / den, 0.0]
    }

    pub fn to_sphere(&self, x: &Vec3) -> Vec3 {
        let [e1, e2, p] = &self.frame;
        let r2 = x[0] * x[0] + x[1] * x[1];
        let d = 1.0 + r2;
        let mut y = [0.0; 3];
        for k in 0..3 {
            y[k] = ((1.0 - r2) * p[k] + 2.0 * x[0] * e1[k] + 2.0 * x[1] * e2[k]) / d;
        }
        y
    }

    /// Chart coordinates of another chart's point.
    pub fn transfer(&self, other: &Chart, x: &Vec3) -> Vec3 {
        self.to_chart(&other.to_sphere(x))
    }
}

/// Conformal factor `w` and its gradient.
pub fn conformal(x: &Vec3) -> (f64, Vec3) {
    let w = 2.0 / (1.0 + x[0] * x[0] + x[1] * x[1]);
    (w, [-w * w * x[0], -w * w * x[1], 0.0])
}

/// Geodesic angle between unit vectors.
pub fn angle(a: &Vec3, b: &Vec3) -> f64 {
    let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    linalg::dot(3, &c, &c).sqrt().atan2(linalg::dot(3, a, b))
}

impl SphereModel {
    pub fn ricci(radius: f64) -> Self {
        Self { rho0: radius * radius, c: 1.0 }
    }

    pub fn static_sphere(radius: f64) -> Self {
        Self { rho0: radius * radius, c: 0.0 }
    }

    pub fn rho(&self, t: f64) -> f64 {
        self.rho0 - 2.0 * self.c * t
    }

    /// Extinction time (infinite for the static sphere).
    pub fn singular_time(&self) -> f64 {
        if self.c > 0.0 {
            self.rho0 / (2.0 * self.c)
        } else {
            f64::INFINITY
        }
    }

    pub fn scalar_s(&self, t: f64) -> f64 {
        2.0 * self.c / self.rho(t)
    }

    pub fn dt_scalar_s(&self, t: f64) -> f64 {
        let r = self.rho(t);
        4.0 * self.c * self.c / (r * r)
    }

    /// Largest |eigenvalue| of `g⁻¹S`.
    pub fn s_bound(&self, t: f64) -> f64 {
        self.c / self.rho(t)
    }

    /// Chart values at `x`: metric, its gradient, flow tensor.
    pub fn chart_fields(&self, x: &Vec3, t: f64) -> (Mat, [Mat; 3], Mat) {
        let (w, dw) = conformal(x);
        let r = self.rho(t);
        let g = linalg::scaled_identity(2, r * w * w);
        let mut dg = [ZERO_MAT; 3];
        for k in 0..2 {
            dg[k] = linalg::scaled_identity(2, 2.0 * r * w * dw[k]);
        }
        (g, dg, linalg::scaled_identity(2, self.c * w * w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_roundtrip() {
        let p = [0.3, -0.4, (1.0f64 - 0.25).sqrt()];
        let ch = Chart::centred_at(&p);
        let c = ch.to_chart(&p);
        assert!(c[0].abs() < 1e-15 && c[1].abs() < 1e-15);
        let x = [0.7, -1.3, 0.0];
        let y = ch.to_sphere(&x);
        assert!((linalg::dot(3, &y, &y) - 1.0).abs() < 1e-14);
        let z = ch.to_chart(&y);
        assert!((z[0] - x[0]).abs() < 1e-13 && (z[1] - x[1]).abs() < 1e-13);
    }

    #[test]
    fn chart_metric_matches_angle() {
        let ch = Chart::centred_at(&[0.0, 0.0, 1.0]);
        let x = [0.2, 0.1, 0.0];
        let e = 1e-6;
        let y0 = ch.to_sphere(&x);
        let y1 = ch.to_sphere(&[x[0] + e, x[1], 0.0]);
        let (w, _) = conformal(&x);
        assert!((angle(&y0, &y1) / e - w).abs() < 1e-5);
    }

    #[test]
    fn radius_schedule() {
        let m = SphereModel::ricci(2.0);
        assert_eq!(m.rho(0.5), 3.0);
        assert_eq!(m.singular_time(), 2.0);
        assert!((m.scalar_s(0.5) - 2.0 / 3.0).abs() < 1e-15);
    }
}
