use crate::error::{Error, Result};
use crate::flows::spec::{FlowSpec, FlowVariant};
use crate::flows::stensor;
use crate::geometry::field::{Field, MetricField, ScalarField, VectorField};
use crate::geometry::grid::Grid;
use crate::geometry::linalg::{Mat, Vec3, ZERO_VEC};
use std::sync::Arc;

/// Metric plus the auxiliary fields of a flow at one time.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub g: MetricField,
    /// List's scalar.
    pub psi: Option<ScalarField>,
    /// Components of the map into flat `R^m`.
    pub phi: Vec<ScalarField>,
    /// Graph height over the flat torus.
    pub height: Option<ScalarField>,
    /// Horizontal displacement of the embedding `F = (x + ξ, u)`; the
    /// hypersurface moves normally, which drags the parametrisation.
    pub shift: Option<VectorField>,
}

impl FlowState {
    pub fn new(g: MetricField) -> Self {
        let t = g.t();
        Self { t, g, psi: None, phi: Vec::new(), height: None, shift: None }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.g.grid()
    }

    pub fn with_psi(mut self, psi: ScalarField) -> Result<Self> {
        psi.same_grid(self.g.field())?;
        self.psi = Some(psi);
        Ok(self)
    }

    pub fn with_phi(mut self, phi: Vec<ScalarField>) -> Result<Self> {
        for p in &phi {
            p.same_grid(self.g.field())?;
        }
        self.phi = phi;
        Ok(self)
    }

    /// Graph of `u` over the flat torus; the metric is the induced one.
    pub fn graph(u: ScalarField, lorentzian: bool) -> Result<Self> {
        let grid = u.grid.clone();
        if !grid.is_torus() {
            return Err(Error::Unsupported("graph flows need a torus grid".into()));
        }
        let xi = vec![ZERO_VEC; grid.len()];
        let mut g = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let node = stensor::embedding_node(&grid, &u.data, &xi, idx, lorentzian)
                .ok_or_else(|| stensor::graph_failure(&grid, &u.data, idx, lorentzian))?;
            g.push(node.g);
        }
        let g = MetricField::new(Field::from_data(grid.clone(), u.t, g)?)?;
        let t = u.t;
        Ok(Self {
            t,
            g,
            psi: None,
            phi: Vec::new(),
            height: Some(u),
            shift: Some(Field::filled(grid, t, ZERO_VEC)),
        })
    }

    /// Fails if the variant's auxiliary fields are missing.
    pub fn check_for(&self, spec: &FlowSpec) -> Result<()> {
        let v = spec.variant.name();
        match spec.variant {
            FlowVariant::List if self.psi.is_none() => Err(Error::MissingField { variant: v, field: "psi" }),
            FlowVariant::RicciHarmonic if self.phi.len() != spec.target_dim || self.phi.is_empty() => {
                Err(Error::MissingField { variant: v, field: "phi" })
            }
            FlowVariant::McfEuclideanGraph | FlowVariant::McfLorentzianGraph
                if self.height.is_none() || self.shift.is_none() =>
            {
                Err(Error::MissingField { variant: v, field: "height" })
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn to_raw(&self) -> Raw {
        Raw {
            g: self.g.field().data.clone(),
            psi: self.psi.as_ref().map(|f| f.data.clone()).unwrap_or_default(),
            phi: self.phi.iter().map(|f| f.data.clone()).collect(),
            u: self.height.as_ref().map(|f| f.data.clone()).unwrap_or_default(),
            xi: self.shift.as_ref().map(|f| f.data.clone()).unwrap_or_default(),
        }
    }

    pub(crate) fn from_raw(&self, t: f64, raw: Raw) -> Result<Self> {
        let grid = self.grid().clone();
        let g = MetricField::new(Field::from_data(grid.clone(), t, raw.g)?)?;
        let psi = match self.psi {
            Some(_) => Some(Field::from_data(grid.clone(), t, raw.psi)?),
            None => None,
        };
        let phi = raw
            .phi
            .into_iter()
            .map(|d| Field::from_data(grid.clone(), t, d))
            .collect::<Result<Vec<_>>>()?;
        let height = match self.height {
            Some(_) => Some(Field::from_data(grid.clone(), t, raw.u)?),
            None => None,
        };
        let shift = match self.shift {
            Some(_) => Some(Field::from_data(grid, t, raw.xi)?),
            None => None,
        };
        Ok(Self { t, g, psi, phi, height, shift })
    }
}

/// Flat storage of all evolved components, for Runge–Kutta stages.
#[derive(Debug, Clone, Default)]
pub(crate) struct Raw {
    pub g: Vec<Mat>,
    pub psi: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub xi: Vec<Vec3>,
}

impl Raw {
    /// `self + h·d`.
    pub fn axpy(&self, h: f64, d: &Raw) -> Raw {
        let s = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + h * y).collect::<Vec<_>>();
        Raw {
            g: self
                .g
                .iter()
                .zip(&d.g)
                .map(|(a, b)| {
                    let mut r = *a;
                    for i in 0..3 {
                        for j in 0..3 {
                            r[i][j] += h * b[i][j];
                        }
                    }
                    r
                })
                .collect(),
            psi: s(&self.psi, &d.psi),
            phi: self.phi.iter().zip(&d.phi).map(|(a, b)| s(a, b)).collect(),
            u: s(&self.u, &d.u),
            xi: self
                .xi
                .iter()
                .zip(&d.xi)
                .map(|(a, b)| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]])
                .collect(),
        }
    }
}
