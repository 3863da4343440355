//! Experiment configuration files (TOML).
//!
//! Unknown keys are rejected. Everything except `manifold`, `flow` and `run`
//! has defaults.

use crate::error::{Error, Result};
use crate::flows::{AlphaSchedule, FlowSpec, FlowState, FlowVariant};
use crate::geometry::field::{Field, MetricField, ScalarField};
use crate::geometry::grid::Grid;
use crate::geometry::linalg::{self, Vec3};
use crate::lgeo::{FieldOptions, MinimizeOptions};
use crate::orientation::{Mode, TimeOrientation};
use serde::Deserialize;
use std::f64::consts::TAU;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub manifold: ManifoldConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub flow: FlowConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub reduced: ReducedConfig,
    #[serde(default)]
    pub geodesic: GeodesicConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Torus,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub kind: ManifoldKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Torus: nodes per axis. Sphere: `[n_theta, n_phi]`.
    pub resolution: Vec<usize>,
    /// Torus periods, `2π` per axis by default.
    pub periods: Option<Vec<f64>>,
    /// Initial sphere radius.
    pub radius: Option<f64>,
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Sin,
    Cos,
}

/// `amplitude · Π_a trig_a(2π k_a x_a / P_a)`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub amplitude: f64,
    pub k: Vec<f64>,
    pub trig: Vec<Trig>,
}

impl Term {
    fn eval(&self, x: &Vec3, periods: &[f64; 3]) -> f64 {
        let mut v = self.amplitude;
        for (a, (k, f)) in self.k.iter().zip(&self.trig).enumerate() {
            let arg = TAU * k * x[a] / periods[a];
            v *= match f {
                Trig::Sin => arg.sin(),
                Trig::Cos => arg.cos(),
            };
        }
        v
    }
}

fn eval_terms(terms: &[Term], x: &Vec3, periods: &[f64; 3]) -> f64 {
    terms.iter().map(|t| t.eval(x, periods)).sum()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub terms: Vec<Term>,
}

/// Initial data as sums of trigonometric terms (torus only).
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// `g = e^{2u} δ` with `u` the sum of these terms.
    #[serde(default)]
    pub conformal: Vec<Term>,
    /// List's scalar.
    #[serde(default)]
    pub psi: Vec<Term>,
    /// One entry per component of the map.
    #[serde(default)]
    pub phi: Vec<Component>,
    /// Graph height for the curvature-flow variants.
    #[serde(default)]
    pub height: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub variant: String,
    /// Coupling `α(t) = alpha + alpha_rate · t`.
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub alpha_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub t_end: f64,
    #[serde(default)]
    pub t_start: f64,
    pub dt: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_one")]
    pub snapshot_stride: usize,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_one() -> usize {
    1
}

/// Reduced distances and volumes. Sample times are orientation times `s`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedConfig {
    /// Torus coordinates, or `(θ, φ)` on the sphere.
    pub base_point: Option<Vec<f64>>,
    #[serde(default = "default_orientations")]
    pub orientations: Vec<String>,
    /// Forwards origin; the initial time when absent.
    pub forwards_origin: Option<f64>,
    /// Backwards origin; `t_end` when absent.
    pub backwards_origin: Option<f64>,
    pub sample_times: Option<Vec<f64>>,
    /// Evenly spaced samples `from + k (to − from)/(count − 1)`.
    pub sample_range: Option<SampleRange>,
    /// Times of the finite-difference identity checks.
    #[serde(default)]
    pub derivative_times: Vec<f64>,
    /// Time offset `δ` of the differencing fields; two flow steps when absent.
    pub derivative_step: Option<f64>,
}

impl Default for ReducedConfig {
    fn default() -> Self {
        Self {
            base_point: None,
            orientations: default_orientations(),
            forwards_origin: None,
            backwards_origin: None,
            sample_times: None,
            sample_range: None,
            derivative_times: Vec::new(),
            derivative_step: None,
        }
    }
}

fn default_orientations() -> Vec<String> {
    vec!["forwards".into(), "backwards".into()]
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRange {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicConfig {
    #[serde(default = "default_samples")]
    pub lambda_samples: usize,
    #[serde(default = "default_true")]
    pub multi_start: bool,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_tie")]
    pub tie_tol: f64,
    #[serde(default = "default_stride")]
    pub subset_stride: usize,
    /// Richardson-refined minimizers; on by default on the sphere.
    #[serde(default)]
    pub richardson: Option<bool>,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        let m = MinimizeOptions::default();
        Self {
            lambda_samples: m.samples,
            multi_start: m.multi_start,
            max_iters: m.max_iters,
            tol: m.tol,
            tie_tol: m.tie_tol,
            subset_stride: 2,
            richardson: None,
        }
    }
}

fn default_samples() -> usize {
    MinimizeOptions::default().samples
}
fn default_true() -> bool {
    true
}
fn default_iters() -> usize {
    MinimizeOptions::default().max_iters
}
fn default_tol() -> f64 {
    MinimizeOptions::default().tol
}
fn default_tie() -> f64 {
    MinimizeOptions::default().tie_tol
}
fn default_stride() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    /// Random vector fields per check time.
    pub draws: usize,
    pub vector_scale: f64,
    /// Snapshot times of the D and trace checks; three interior snapshots
    /// when absent.
    pub identity_times: Option<Vec<f64>>,
    pub d_sign_tol: f64,
    pub trace_tol: f64,
    pub closed_form_tol: f64,
    pub bounds_tol: f64,
    pub gradient_tol: f64,
    /// Relative errors are taken against `max(|lhs|, |rhs|, floor · max|rhs|)`.
    pub relative_floor: f64,
    pub slack: f64,
    pub fraction: f64,
    /// Additive relative slack of the monotonicity test.
    pub volume_rel_tol: f64,
    /// Largest accepted geodesic residual; 1e-3 (torus) or 1e-4 (sphere)
    /// when absent.
    pub residual_gate: Option<f64>,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            draws: 20,
            vector_scale: 1.0,
            identity_times: None,
            d_sign_tol: 1e-6,
            trace_tol: 1e-2,
            closed_form_tol: 1e-2,
            bounds_tol: 1e-6,
            gradient_tol: 0.05,
            relative_floor: 1e-2,
            slack: 1e-3,
            fraction: 0.95,
            volume_rel_tol: 1e-9,
            residual_gate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsConfig {
    pub directory: String,
    /// Binary flow snapshots.
    pub snapshots: bool,
    /// Per-sample reduced-distance CSVs.
    pub fields: bool,
    /// Report names to write; all when empty.
    pub reports: Vec<String>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self { directory: "out".into(), snapshots: false, fields: true, reports: Vec::new() }
    }
}

/// Parsed and validated config plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

pub fn parse_config(text: &str) -> Result<Parsed> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    let warnings = config.validate()?;
    Ok(Parsed { config, warnings })
}

fn check(ok: bool, check: &'static str, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::ConfigCheck { check, message: message() })
    }
}

impl ExperimentConfig {
    pub fn variant(&self) -> Result<FlowVariant> {
        FlowVariant::parse(&self.flow.variant)
            .ok_or_else(|| Error::Config(format!("unknown flow variant `{}`", self.flow.variant)))
    }

    pub fn flow_spec(&self) -> Result<FlowSpec> {
        let v = self.variant()?;
        if v == FlowVariant::RicciHarmonic {
            let alpha = if self.flow.alpha_rate == 0.0 {
                AlphaSchedule::Constant(self.flow.alpha)
            } else {
                AlphaSchedule::Linear { start: self.flow.alpha, rate: self.flow.alpha_rate }
            };
            Ok(FlowSpec::ricci_harmonic(alpha, self.initial.phi.len()))
        } else {
            Ok(FlowSpec::new(v))
        }
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        let m = &self.manifold;
        match m.kind {
            ManifoldKind::Torus => {
                let periods = m.periods.clone().unwrap_or_else(|| vec![TAU; m.dim]);
                check(m.resolution.len() == m.dim, "manifold_resolution", || {
                    format!("{} resolutions for dim {}", m.resolution.len(), m.dim)
                })?;
                check(periods.len() == m.dim, "manifold_periods", || format!("{} periods for dim {}", periods.len(), m.dim))?;
                Ok(Arc::new(Grid::torus(&m.resolution, &periods)?))
            }
            ManifoldKind::Sphere => {
                check(m.dim == 2 && m.resolution.len() == 2, "manifold_resolution", || {
                    "the sphere is two-dimensional with resolution [n_theta, n_phi]".into()
                })?;
                Ok(Arc::new(Grid::sphere(m.resolution[0], m.resolution[1], self.radius())?))
            }
        }
    }

    fn radius(&self) -> f64 {
        self.manifold.radius.unwrap_or(1.0)
    }

    pub fn initial_state(&self) -> Result<FlowState> {
        let grid = self.grid()?;
        let t0 = self.run.t_start;
        let variant = self.variant()?;
        if !grid.is_torus() {
            // chart metric at the chart centre is 4ρ δ
            let r2 = self.radius().powi(2);
            let g = MetricField::new(Field::filled(grid, t0, linalg::scaled_identity(2, 4.0 * r2)))?;
            return Ok(FlowState::new(g));
        }
        let periods = grid.periods();
        let scalar = |terms: &[Term]| -> ScalarField {
            Field::from_fn(grid.clone(), t0, |i| eval_terms(terms, &grid.coords(i), &periods))
        };
        if variant.is_graph() {
            return FlowState::graph(scalar(&self.initial.height), variant == FlowVariant::McfLorentzianGraph);
        }
        let n = grid.dim();
        let g = Field::from_fn(grid.clone(), t0, |i| {
            let u = eval_terms(&self.initial.conformal, &grid.coords(i), &periods);
            linalg::scaled_identity(n, (2.0 * u).exp())
        });
        let mut st = FlowState::new(MetricField::new(g)?);
        if variant == FlowVariant::List {
            st = st.with_psi(scalar(&self.initial.psi))?;
        }
        if variant == FlowVariant::RicciHarmonic {
            st = st.with_phi(self.initial.phi.iter().map(|c| scalar(&c.terms)).collect())?;
        }
        Ok(st)
    }

    pub fn orientations(&self) -> Result<Vec<TimeOrientation>> {
        self.reduced
            .orientations
            .iter()
            .map(|o| match Mode::parse(o) {
                Some(Mode::Forwards) => {
                    Ok(TimeOrientation::forwards(self.reduced.forwards_origin.unwrap_or(self.run.t_start)))
                }
                Some(Mode::Backwards) => {
                    Ok(TimeOrientation::backwards(self.reduced.backwards_origin.unwrap_or(self.run.t_end)))
                }
                None => Err(Error::Config(format!("unknown orientation `{o}`"))),
            })
            .collect()
    }

    /// Base point: torus coordinates or `(θ, φ)`; the centre of the domain
    /// (a point on the equator for the sphere) by default.
    pub fn base_point(&self) -> Result<Vec3> {
        let grid = self.grid()?;
        let n = grid.dim();
        let mut p = [0.0; 3];
        match &self.reduced.base_point {
            Some(b) => {
                check(b.len() == n, "base_point", || format!("{} coordinates for dim {n}", b.len()))?;
                p[..n].copy_from_slice(b);
            }
            None if grid.is_torus() => {
                let per = grid.periods();
                for a in 0..n {
                    p[a] = 0.5 * per[a];
                }
            }
            None => p[0] = 0.5 * std::f64::consts::PI,
        }
        Ok(p)
    }

    /// Orientation times of the volume series.
    pub fn sample_times(&self) -> Result<Vec<f64>> {
        let r = &self.reduced;
        match (&r.sample_times, r.sample_range) {
            (Some(_), Some(_)) => Err(Error::Config("give either sample_times or sample_range".into())),
            (Some(v), None) => Ok(v.clone()),
            (None, Some(SampleRange { from, to, count })) => {
                check(count >= 2 && to > from, "sample_range", || "need count >= 2 and to > from".into())?;
                Ok((0..count).map(|k| from + (to - from) * k as f64 / (count - 1) as f64).collect())
            }
            (None, None) => {
                let span = self.run.t_end - self.run.t_start;
                Ok((1..=8).map(|k| span * k as f64 / 9.0).collect())
            }
        }
    }

    pub fn minimize_options(&self) -> MinimizeOptions {
        let g = &self.geodesic;
        MinimizeOptions {
            samples: g.lambda_samples,
            max_iters: g.max_iters,
            tol: g.tol,
            multi_start: g.multi_start,
            tie_tol: g.tie_tol,
            richardson: g.richardson.unwrap_or(self.manifold.kind == ManifoldKind::Sphere),
        }
    }

    pub fn field_options(&self) -> FieldOptions {
        FieldOptions { minimize: self.minimize_options(), subset_stride: self.geodesic.subset_stride, keep_paths: false }
    }

    pub fn residual_gate(&self) -> f64 {
        self.checks.residual_gate.unwrap_or(if self.manifold.kind == ManifoldKind::Sphere { 1e-4 } else { 1e-3 })
    }

    pub fn identity_times(&self) -> Option<&[f64]> {
        self.checks.identity_times.as_deref()
    }

    /// Validates invariants; returns warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let grid = self.grid()?;
        let variant = self.variant()?;
        let run = &self.run;
        check(run.t_end > run.t_start, "run_times", || format!("t_end {} must exceed t_start {}", run.t_end, run.t_start))?;
        check(run.snapshot_stride > 0, "snapshot_stride", || "must be positive".into())?;
        check(run.cfl > 0.0, "cfl", || "must be positive".into())?;
        if let Some(dt) = run.dt {
            check(dt > 0.0, "dt", || format!("{dt} must be positive"))?;
        }
        if !grid.is_torus() {
            check(matches!(variant, FlowVariant::Static | FlowVariant::Ricci), "sphere_variant", || {
                format!("the sphere backend supports static and ricci, not {}", variant.name())
            })?;
        }
        let init = &self.initial;
        let n = grid.dim();
        let all_terms = init.conformal.iter().chain(&init.psi).chain(init.phi.iter().flat_map(|c| &c.terms)).chain(&init.height);
        for t in all_terms.clone() {
            check(t.k.len() == n && t.trig.len() == n, "initial_terms", || {
                format!("each term needs {n} wavenumbers and {n} trig kinds")
            })?;
        }
        if !grid.is_torus() && all_terms.count() > 0 {
            return Err(Error::ConfigCheck { check: "initial_terms", message: "sphere runs take no initial terms".into() });
        }
        if variant == FlowVariant::RicciHarmonic {
            check(!init.phi.is_empty(), "phi", || "ricci_harmonic needs at least one phi component".into())?;
        }
        if variant.is_graph() && !init.conformal.is_empty() {
            warnings.push("conformal terms are ignored for graph flows; the metric is induced".into());
        }
        warnings.extend(self.flow_spec()?.validate(run.t_end)?);

        self.minimize_options().validate()?;
        check(self.geodesic.subset_stride > 0, "subset_stride", || "must be positive".into())?;
        let c = &self.checks;
        for (name, v) in [
            ("vector_scale", c.vector_scale),
            ("d_sign_tol", c.d_sign_tol),
            ("trace_tol", c.trace_tol),
            ("closed_form_tol", c.closed_form_tol),
            ("bounds_tol", c.bounds_tol),
            ("gradient_tol", c.gradient_tol),
            ("relative_floor", c.relative_floor),
            ("slack", c.slack),
            ("volume_rel_tol", c.volume_rel_tol),
            ("residual_gate", self.residual_gate()),
        ] {
            check(v > 0.0 && v.is_finite(), "tolerances_positive", || format!("{name} = {v} must be positive"))?;
        }
        check(c.fraction > 0.0 && c.fraction <= 1.0, "fraction", || format!("{} not in (0, 1]", c.fraction))?;
        check(c.draws > 0, "draws", || "must be positive".into())?;

        let orients = self.orientations()?;
        check(!orients.is_empty(), "orientations", || "at least one orientation".into())?;
        self.base_point()?;
        let samples = self.sample_times()?;
        check(!samples.is_empty(), "sample_times", || "at least one sample time".into())?;
        check(samples.windows(2).all(|w| w[1] > w[0]), "sample_times", || "must be strictly increasing".into())?;
        for o in &orients {
            for &s in samples.iter().chain(&self.reduced.derivative_times) {
                let t1 = o.t_of(s);
                check(s > 0.0 && t1 > run.t_start && t1 < run.t_end, "sample_times", || {
                    format!("{} time s = {s} maps to t = {t1}, outside ({}, {})", o.name(), run.t_start, run.t_end)
                })?;
            }
        }
        if let Some(d) = self.reduced.derivative_step {
            check(d > 0.0, "derivative_step", || "must be positive".into())?;
        }
        if let Some(times) = self.identity_times() {
            for &t in times {
                check(t >= run.t_start && t <= run.t_end, "identity_times", || format!("{t} outside the run"))?;
            }
        }
        Ok(warnings)
    }
}
