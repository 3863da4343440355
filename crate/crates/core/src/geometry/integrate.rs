use crate::error::Result;
use crate::geometry::field::{MetricField, ScalarField};
use crate::geometry::grid::GridKind;
use crate::geometry::linalg;

/// Order-independent sum: terms are sorted before compensated accumulation,
/// so any permutation of the input gives the same bits.
pub fn deterministic_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values.iter() {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Riemannian volume weight of each node.
pub fn volume_weights(g: &MetricField) -> Vec<f64> {
    let grid = g.grid();
    let n = grid.dim();
    match grid.kind() {
        GridKind::Torus => {
            let cell = grid.cell_volume();
            g.field().data.iter().map(|m| linalg::det(n, m).sqrt() * cell).collect()
        }
        // stored sphere metrics are 4ρδ, so √det g / 4 = ρ
        GridKind::AnalyticSphere => (0..grid.len())
            .map(|i| grid.sphere_weight(i) * linalg::det(2, g.at(i)).sqrt() / 4.0)
            .collect(),
    }
}

/// `∫ f dV_g`.
pub fn integrate(f: &ScalarField, g: &MetricField) -> Result<f64> {
    f.same_grid(g.field())?;
    let w = volume_weights(g);
    let mut terms: Vec<f64> = f.data.iter().zip(&w).map(|(a, b)| a * b).collect();
    Ok(deterministic_sum(&mut terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::field::Field;
    use crate::geometry::grid::Grid;
    use std::f64::consts::{PI, TAU};
    use std::sync::Arc;

    #[test]
    fn unit_torus_volume() {
        let grid = Arc::new(Grid::torus(&[16, 16], &[1.0, 1.0]).unwrap());
        let g = MetricField::flat(grid.clone(), 0.0);
        let v = integrate(&Field::filled(grid, 0.0, 1.0), &g).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_area() {
        let r = 1.3;
        let grid = Arc::new(Grid::sphere(12, 16, r).unwrap());
        let g = MetricField::new(Field::filled(grid.clone(), 0.0, linalg::scaled_identity(2, 4.0 * r * r))).unwrap();
        let v = integrate(&Field::filled(grid, 0.0, 1.0), &g).unwrap();
        assert!((v - 4.0 * PI * r * r).abs() < 1e-10);
    }

    #[test]
    fn sin_squared_on_torus() {
        let grid = Arc::new(Grid::torus(&[32, 32], &[TAU, TAU]).unwrap());
        let g = MetricField::flat(grid.clone(), 0.0);
        let f = Field::from_fn(grid.clone(), 0.0, |i| grid.coords(i)[0].sin().powi(2));
        let v = integrate(&f, &g).unwrap();
        assert!((v - 2.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn sum_is_permutation_invariant() {
        let mut a: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 + 1e10 * ((i % 3) as f64 - 1.0)).collect();
        let mut b = a.clone();
        b.rotate_left(137);
        assert_eq!(deterministic_sum(&mut a).to_bits(), deterministic_sum(&mut b).to_bits());
    }
}
