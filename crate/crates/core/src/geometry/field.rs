use crate::error::{Error, Result};
use crate::geometry::grid::Grid;
use crate::geometry::linalg::{self, Mat, Vec3};
use std::sync::Arc;

/// Pointwise data on a grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub grid: Arc<Grid>,
    pub t: f64,
    pub data: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type VectorField = Field<Vec3>;
/// Symmetric 2-tensors; only the leading `dim × dim` block is meaningful.
pub type SymTensorField = Field<Mat>;

impl<T: Clone> Field<T> {
    pub fn filled(grid: Arc<Grid>, t: f64, value: T) -> Self {
        let n = grid.len();
        Self { grid, t, data: vec![value; n] }
    }

    pub fn from_fn(grid: Arc<Grid>, t: f64, f: impl Fn(usize) -> T) -> Self {
        let data = (0..grid.len()).map(f).collect();
        Self { grid, t, data }
    }

    pub fn from_data(grid: Arc<Grid>, t: f64, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values for {} nodes",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, t, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn same_grid<U>(&self, other: &Field<U>) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

impl ScalarField {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl SymTensorField {
    /// Largest deviation from exact symmetry.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0f64;
        for a in &self.data {
            for i in 0..n {
                for j in 0..i {
                    m = m.max((a[i][j] - a[j][i]).abs());
                }
            }
        }
        m
    }
}

/// A symmetric, positive-definite covariant 2-tensor field.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField(SymTensorField);

impl MetricField {
    /// Validates symmetry (the lower triangle is mirrored) and positivity.
    pub fn new(mut field: SymTensorField) -> Result<Self> {
        let n = field.dim();
        for (node, a) in field.data.iter_mut().enumerate() {
            for i in 0..n {
                for j in 0..i {
                    a[j][i] = a[i][j];
                }
            }
            let ev = linalg::min_eigenvalue(n, a);
            if !(ev > 0.0) || !ev.is_finite() {
                return Err(Error::NotPositiveDefinite { node, eigenvalue: ev });
            }
        }
        Ok(Self(field))
    }

    pub fn flat(grid: Arc<Grid>, t: f64) -> Self {
        let n = grid.dim();
        Self(Field::filled(grid, t, linalg::identity(n)))
    }

    pub fn field(&self) -> &SymTensorField {
        &self.0
    }

    pub fn into_field(self) -> SymTensorField {
        self.0
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.0.grid
    }

    pub fn t(&self) -> f64 {
        self.0.t
    }

    pub fn at(&self, idx: usize) -> &Mat {
        &self.0.data[idx]
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Pointwise inverse `g^{ij}`.
pub fn metric_inverse(g: &MetricField) -> Result<SymTensorField> {
    let n = g.dim();
    let mut out = Vec::with_capacity(g.len());
    for (node, a) in g.field().data.iter().enumerate() {
        match linalg::inverse(n, a) {
            Some(inv) => out.push(linalg::symmetrize(n, &inv)),
            None => {
                return Err(Error::NotPositiveDefinite { node, eigenvalue: linalg::min_eigenvalue(n, a) })
            }
        }
    }
    Field::from_data(g.grid().clone(), g.t(), out)
}
