//! Experiment pipeline: evolve, reduced distances, volumes, checks, reports.

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::flows::checks as fchecks;
use crate::flows::{evolve, export, EvolveOptions, FlowVariant, SpacetimeSolution};
use crate::geometry::linalg::Vec3;
use crate::lgeo::checks as lchecks;
use crate::lgeo::path::{self, Problem};
use crate::lgeo::{frozen_distance_squared, minimize, reduced_distance_series, MultiStart, PathField, ReducedDistanceField};
use crate::orientation::TimeOrientation;
use crate::report::{fmt_f64, IdentityReport, Verdict};
use crate::volume::{self, VolumeSeries};
use std::fmt::Write as _;
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SINGULARITY: i32 = 3;

/// Exit code for an error that stopped a run.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::ConfigCheck { .. }
        | Error::MissingField { .. }
        | Error::InvalidGrid(_)
        | Error::StepTooLarge { .. }
        | Error::Unsupported(_) => EXIT_CONFIG,
        Error::NotPositiveDefinite { .. } | Error::NotSpacelike { .. } => EXIT_SINGULARITY,
        _ => EXIT_CHECK_FAILED,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub contents: Vec<u8>,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub seed: u64,
    pub reports: Vec<IdentityReport>,
    pub series: Vec<VolumeSeries>,
    /// Reduced-distance fields of each volume series (paths dropped).
    pub fields: Vec<Vec<ReducedDistanceField>>,
    pub artifacts: Vec<Artifact>,
    pub warnings: Vec<String>,
    /// Set when the flow stopped early.
    pub singularity: Option<String>,
}

impl Outcome {
    fn new(seed: u64, warnings: Vec<String>) -> Self {
        Self {
            seed,
            reports: Vec::new(),
            series: Vec::new(),
            fields: Vec::new(),
            artifacts: Vec::new(),
            warnings,
            singularity: None,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityReport> {
        self.reports.iter().filter(|r| r.verdict.is_failure())
    }

    /// Reports with the given check name.
    pub fn reports_named<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a IdentityReport> + 'a {
        self.reports.iter().filter(move |r| r.check == check)
    }

    /// `--strict` also fails on warnings and inconclusive checks.
    pub fn exit_code(&self, strict: bool) -> i32 {
        if self.singularity.is_some() {
            return EXIT_SINGULARITY;
        }
        let failed = self.failures().next().is_some();
        let soft = !self.warnings.is_empty() || self.reports.iter().any(|r| r.verdict == Verdict::Inconclusive);
        if failed || (strict && soft) {
            EXIT_CHECK_FAILED
        } else {
            EXIT_OK
        }
    }

    /// One line per report.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.reports {
            let ctx: Vec<String> = r.context.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(
                s,
                "{:<8} {:<26} max={} tested={} {}",
                r.verdict.name(),
                r.check,
                fmt_f64(r.max_abs),
                r.nodes_tested,
                ctx.join(" ")
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning  {w}");
        }
        if let Some(e) = &self.singularity {
            let _ = writeln!(s, "singular {e}");
        }
        s
    }

    /// Writes every artifact below `dir`, in order.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for a in &self.artifacts {
            let p = dir.join(&a.path);
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, &a.contents)?;
        }
        Ok(())
    }

    fn text(&mut self, path: String, body: String) {
        let contents = format!("# seed = {}\n{body}", self.seed).into_bytes();
        self.artifacts.push(Artifact { path, contents });
    }

    fn report_artifacts(&mut self, wanted: &[String]) {
        let mut names: Vec<String> = Vec::new();
        for r in &self.reports {
            if !names.contains(&r.check) {
                names.push(r.check.clone());
            }
        }
        for name in names {
            if !wanted.is_empty() && !wanted.contains(&name) {
                continue;
            }
            let body: Vec<String> = self.reports_named(&name).map(|r| r.to_text()).collect();
            self.text(format!("reports/{name}.txt"), body.join("\n"));
        }
        if !self.warnings.is_empty() || self.singularity.is_some() {
            let mut body = String::new();
            for w in &self.warnings {
                let _ = writeln!(body, "{w}");
            }
            self.text("warnings.txt".into(), body);
        }
        let summary = self.summary();
        self.text("summary.txt".into(), summary);
    }
}

/// Flow of a config.
pub fn evolve_config(cfg: &ExperimentConfig) -> Result<SpacetimeSolution> {
    let state = cfg.initial_state()?;
    let spec = cfg.flow_spec()?;
    let opts = EvolveOptions { t_end: cfg.run.t_end, dt: cfg.run.dt, cfl: cfg.run.cfl, snapshot_stride: cfg.run.snapshot_stride };
    evolve(state, &spec, &opts)
}

/// Combine per-field reports of one check into a single report.
pub fn merge_reports(check: &str, parts: &[IdentityReport]) -> IdentityReport {
    let mut r = IdentityReport::new(check);
    let Some(first) = parts.first() else {
        r.note("no data");
        return r;
    };
    r.context = first.context.iter().filter(|(k, _)| k != "s1" && k != "t1").cloned().collect();
    r.tolerance = first.tolerance;
    let mut weighted = 0.0;
    for p in parts {
        r.nodes_total += p.nodes_total;
        r.nodes_tested += p.nodes_tested;
        r.nodes_ok += p.nodes_ok;
        weighted += p.mean_abs * p.nodes_tested as f64;
        if r.worst_node.is_none() || p.max_abs > r.max_abs {
            r.max_abs = p.max_abs;
            r.worst_node = p.worst_node;
        }
        for (k, v) in &p.metrics {
            match r.metrics.iter_mut().find(|(a, _)| a == k) {
                Some((_, w)) if k.starts_with("min_") => *w = w.min(*v),
                Some((_, w)) => *w = w.max(*v),
                None => r.metrics.push((k.clone(), *v)),
            }
        }
        for n in &p.notes {
            r.notes.push(n.clone());
        }
    }
    r.mean_abs = if r.nodes_tested > 0 { weighted / r.nodes_tested as f64 } else { 0.0 };
    let worst_field = parts.iter().max_by(|a, b| a.max_abs.total_cmp(&b.max_abs));
    if let Some(w) = worst_field {
        if let Some((_, s)) = w.context.iter().find(|(k, _)| k == "s1") {
            r.context.push(("worst_s1".into(), s.clone()));
        }
    }
    r.context.push(("fields".into(), parts.len().to_string()));
    r.verdict = if parts.iter().any(|p| p.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if parts.iter().all(|p| p.verdict == Verdict::NotAsserted) {
        Verdict::NotAsserted
    } else if parts.iter().all(|p| matches!(p.verdict, Verdict::Pass | Verdict::NotAsserted)) {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    r
}

/// Snapshot times of the D and trace checks.
fn identity_times(cfg: &ExperimentConfig, sol: &SpacetimeSolution) -> Vec<f64> {
    let times = sol.times();
    match cfg.identity_times() {
        Some(t) => t.iter().map(|&x| nearest(&times, x)).collect(),
        None => {
            let m = times.len();
            let mut ks = vec![m / 4, m / 2, (3 * m) / 4];
            ks.iter_mut().for_each(|k| *k = (*k).clamp(1.min(m - 1), m.saturating_sub(2).max(1).min(m - 1)));
            ks.dedup();
            ks.into_iter().map(|k| times[k]).collect()
        }
    }
}

fn nearest(times: &[f64], x: f64) -> f64 {
    *times.iter().min_by(|a, b| (*a - x).abs().total_cmp(&(*b - x).abs())).unwrap()
}

/// Randomized D-sign, closed-form and trace checks.
fn flow_reports(cfg: &ExperimentConfig, sol: &SpacetimeSolution) -> Result<Vec<IdentityReport>> {
    let c = &cfg.checks;
    let times = identity_times(cfg, sol);
    let mut out = Vec::new();
    let mut d = fchecks::d_sign_report(sol, &times, c.draws, c.vector_scale, cfg.seed, c.d_sign_tol)?;
    d.context.push(("seed".into(), cfg.seed.to_string()));
    out.push(d);

    let mut closed = IdentityReport::new("d_closed_form")
        .with_context("flow", sol.spec.variant.name())
        .with_context("seed", cfg.seed);
    let mut samples = Vec::new();
    let mut trace_parts = Vec::new();
    let mut rng = fchecks::check_rng(cfg.seed.wrapping_add(1));
    for &t in &times {
        for _ in 0..c.draws {
            let x = fchecks::random_vector_field(sol.grid(), t, c.vector_scale, &mut rng);
            let a = fchecks::d_quantity(sol, t, &x)?;
            let b = fchecks::d_closed_form(sol, t, &x)?;
            let base = samples.len();
            samples.extend(a.data.iter().zip(&b.data).enumerate().map(|(i, (p, q))| (base + i, p - q)));
            trace_parts.push(fchecks::trace_identity_residual(sol, t, &x, c.trace_tol)?);
        }
    }
    closed.absorb(samples.len(), &samples, c.closed_form_tol);
    closed.judge_max();
    out.push(closed);
    let mut tr = merge_reports("trace_identity", &trace_parts);
    tr.context.push(("seed".into(), cfg.seed.to_string()));
    out.push(tr);
    Ok(out)
}

/// Whether the run verified the hypothesis `D ≥ 0` that monotonicity needs.
fn hypothesis_holds(sol: &SpacetimeSolution, d_sign: Option<&IdentityReport>) -> bool {
    match sol.spec.variant {
        FlowVariant::Static | FlowVariant::Ricci => true,
        v if v.expected_d_sign() == Some(1) => d_sign.is_some_and(|r| r.passed()),
        _ => false,
    }
}

fn monotonicity_report(series: &VolumeSeries, asserted: bool) -> IdentityReport {
    let mut r = IdentityReport::new("volume_monotonicity").with_context("orientation", series.orientation.name());
    let mut samples = Vec::new();
    for (k, w) in series.samples.windows(2).enumerate() {
        let allowed = w[0].quadrature_error + w[1].quadrature_error + series.rel_tol * w[0].volume.abs();
        samples.push((k + 1, (w[1].volume - w[0].volume - allowed).max(0.0)));
    }
    r.absorb(series.samples.len(), &samples, 0.0);
    r.metric("max_increase", series.max_increase());
    if let (Some(a), Some(b)) = (series.samples.first(), series.samples.last()) {
        r.metric("first_volume", a.volume);
        r.metric("last_volume", b.volume);
    }
    r.metric("max_quadrature_error", series.samples.iter().map(|s| s.quadrature_error).fold(0.0, f64::max));
    if asserted {
        r.verdict = series.verdict();
    } else {
        r.verdict = Verdict::NotAsserted;
        r.note(if series.monotone() { "monotone (not asserted)" } else { "not monotone (not asserted)" });
        r.note("the hypothesis D >= 0 is not verified for this run");
    }
    r
}

fn residual_report(field: &ReducedDistanceField, gate: f64) -> IdentityReport {
    let samples: Vec<(usize, f64)> =
        (0..field.len()).filter(|&i| !field.suspect[i]).map(|i| (i, field.residual[i])).collect();
    let mut r = IdentityReport::new("geodesic_residual")
        .with_context("orientation", field.orientation.name())
        .with_context("s1", fmt_f64(field.s1));
    r.absorb(field.len(), &samples, gate);
    r.metric("suspect_nodes", field.suspect.iter().filter(|&&s| s).count() as f64);
    r.metric("unconverged_nodes", field.converged.iter().filter(|&&c| !c).count() as f64);
    r.judge_max();
    r
}

fn unsupported(check: &str, orient: TimeOrientation, s: f64, why: &str) -> IdentityReport {
    let mut r = IdentityReport::new(check).with_context("orientation", orient.name()).with_context("s1", fmt_f64(s));
    r.verdict = Verdict::NotAsserted;
    r.note(why);
    r
}

fn derivative_reports(
    cfg: &ExperimentConfig,
    sol: &SpacetimeSolution,
    pf: &PathField,
    orient: TimeOrientation,
    base: &Vec3,
) -> Result<Vec<IdentityReport>> {
    let c = &cfg.checks;
    let delta = cfg.reduced.derivative_step.unwrap_or(2.0 * sol.dt);
    let opts = cfg.field_options();
    let mut out = Vec::new();
    for &s in &cfg.reduced.derivative_times {
        let names =
            ["gradient_identity", "time_derivative_identity", "laplacian_bound", "evolution_inequality", "heat_inequality"];
        if pf.sphere().is_some() {
            for n in names {
                out.push(unsupported(n, orient, s, "finite-difference checks of the reduced distance need a torus grid"));
            }
            continue;
        }
        let t_lo = orient.t_of(s - delta).min(orient.t_of(s + delta));
        let t_hi = orient.t_of(s - delta).max(orient.t_of(s + delta));
        if s - delta <= 0.0 || t_lo < sol.t_start() || t_hi > sol.t_end() {
            for n in names {
                out.push(unsupported(n, orient, s, "differencing fields fall outside the run"));
            }
            continue;
        }
        let f = reduced_distance_series(pf, orient, base, &[s - delta, s, s + delta], &opts)?;
        let d = lchecks::node_derivatives(pf, &f[1], &f[0], &f[2])?;
        let (g, t) = lchecks::gradient_identity_check(&f[1], &d, c.gradient_tol, c.relative_floor);
        out.push(g);
        out.push(t);
        out.push(lchecks::laplacian_bound_check(&f[1], &d, c.slack, c.fraction));
        out.push(lchecks::together_check(&f[1], &d, c.slack, c.fraction));
        out.push(volume::heat_inequality_check(pf, &f[1], &f[0], &f[2], c.slack, c.fraction)?);
    }
    Ok(out)
}

/// Sample times whose endpoint slice lies inside the (possibly truncated)
/// run.
fn usable_samples(samples: &[f64], orient: TimeOrientation, sol: &SpacetimeSolution) -> Vec<f64> {
    samples
        .iter()
        .copied()
        .filter(|&s| {
            let t = orient.t_of(s);
            s > 0.0 && t > sol.t_start() && t <= sol.t_end() && orient.t_of(0.0) <= sol.t_end()
        })
        .collect()
}

/// The full pipeline. `warnings` come from parsing.
pub fn run_experiment(cfg: &ExperimentConfig, warnings: Vec<String>) -> Result<Outcome> {
    let mut out = Outcome::new(cfg.seed, warnings);
    let sol = evolve_config(cfg)?;
    out.warnings.extend(sol.warnings.iter().cloned());
    out.singularity = sol.truncation.clone();
    if cfg.outputs.snapshots {
        for (k, snap) in sol.snapshots.iter().enumerate() {
            let mut buf = Vec::new();
            export::write_snapshot(&mut buf, snap)?;
            out.artifacts.push(Artifact { path: format!("snapshots/snap_{k:04}.rvsnap"), contents: buf });
        }
    }
    out.reports.extend(flow_reports(cfg, &sol)?);
    let d_sign = out.reports.iter().find(|r| r.check == "d_sign").cloned();
    let asserted = hypothesis_holds(&sol, d_sign.as_ref());

    let pf = PathField::new(&sol)?;
    let base = cfg.base_point()?;
    let opts = cfg.field_options();
    let samples = cfg.sample_times()?;
    let c0 = sol.c0();
    for orient in cfg.orientations()? {
        let s_values = usable_samples(&samples, orient, &sol);
        if s_values.len() < samples.len() {
            out.warnings.push(format!(
                "{}: {} of {} sample times dropped (outside the run)",
                orient.name(),
                samples.len() - s_values.len(),
                samples.len()
            ));
        }
        if s_values.is_empty() {
            continue;
        }
        let fields = reduced_distance_series(&pf, orient, &base, &s_values, &opts)?;
        let series = volume::monotonicity_series(&pf, &fields, cfg.checks.volume_rel_tol)?;
        out.reports.push(monotonicity_report(&series, asserted));

        let d2 = frozen_distance_squared(&pf, orient, &base, &opts)?;
        let bounds: Vec<IdentityReport> =
            fields.iter().map(|f| lchecks::bounds_check(f, &d2, c0, cfg.checks.bounds_tol)).collect::<Result<_>>()?;
        out.reports.push(merge_reports("distance_bounds", &bounds));
        let res: Vec<IdentityReport> = fields.iter().map(|f| residual_report(f, cfg.residual_gate())).collect();
        out.reports.push(merge_reports("geodesic_residual", &res));
        out.reports.extend(derivative_reports(cfg, &sol, &pf, orient, &base)?);

        out.text(format!("volume_{}.csv", orient.name()), series.to_csv());
        if cfg.outputs.fields {
            for (k, f) in fields.iter().enumerate() {
                out.text(format!("fields/{}_{k:03}.csv", orient.name()), volume::field_csv(f));
            }
        }
        out.series.push(series);
        out.fields.push(fields);
    }
    out.report_artifacts(&cfg.outputs.reports);
    Ok(out)
}

/// Randomized trace-identity and closed-form D checks only.
pub fn check_identities(cfg: &ExperimentConfig, warnings: Vec<String>) -> Result<Outcome> {
    let mut out = Outcome::new(cfg.seed, warnings);
    let sol = evolve_config(cfg)?;
    out.warnings.extend(sol.warnings.iter().cloned());
    out.singularity = sol.truncation.clone();
    out.reports.extend(flow_reports(cfg, &sol)?);
    out.report_artifacts(&cfg.outputs.reports);
    Ok(out)
}

/// Reduced volume and its quadrature error at orientation time `s`, with
/// the config's base point and geodesic options.
pub fn reduced_volume_at(cfg: &ExperimentConfig, pf: &PathField, orient: TimeOrientation, s: f64) -> Result<(f64, f64)> {
    let field = crate::lgeo::reduced_distance_field(pf, orient, &cfg.base_point()?, s, &cfg.field_options(), None)?;
    volume::reduced_volume(pf, &field)
}

/// A single minimizing geodesic and its CSV dump.
#[derive(Debug, Clone)]
pub struct GeodesicRun {
    pub orientation: TimeOrientation,
    pub s1: f64,
    pub result: MultiStart,
    pub reduced_distance: f64,
    pub csv: String,
}

/// Minimizer from `from` to `to` ending at flow time `t1`, in the first
/// orientation of the config.
pub fn geodesic(cfg: &ExperimentConfig, from: &[f64], to: &[f64], t1: f64) -> Result<GeodesicRun> {
    let grid = cfg.grid()?;
    let n = grid.dim();
    if from.len() != n || to.len() != n {
        return Err(Error::ConfigCheck { check: "geodesic_points", message: format!("points need {n} coordinates") });
    }
    let orient = cfg.orientations()?[0];
    let sol = evolve_config(cfg)?;
    let pf = PathField::new(&sol)?;
    geodesic_on(cfg, &pf, orient, from, to, t1)
}

/// As [`geodesic`] on an already evolved flow.
pub fn geodesic_on(
    cfg: &ExperimentConfig,
    pf: &PathField,
    orient: TimeOrientation,
    from: &[f64],
    to: &[f64],
    t1: f64,
) -> Result<GeodesicRun> {
    let grid = pf.grid().clone();
    let n = grid.dim();
    if from.len() != n || to.len() != n {
        return Err(Error::ConfigCheck { check: "geodesic_points", message: format!("points need {n} coordinates") });
    }
    let s1 = orient.s_of(t1);
    if !(s1 > 0.0) {
        return Err(Error::ConfigCheck {
            check: "geodesic_time",
            message: format!("t1 = {t1} gives orientation time {s1} <= 0 ({})", orient.name()),
        });
    }
    let problem = Problem::new(pf, orient, s1)?;
    let mut p = [0.0; 3];
    let mut q = [0.0; 3];
    p[..n].copy_from_slice(from);
    q[..n].copy_from_slice(to);
    let result = minimize(&p, &q, &problem, &cfg.minimize_options())?;
    let best = &result.best;
    let res = if cfg.minimize_options().richardson {
        path::geodesic_residual4(&best.path, &problem)
    } else {
        path::geodesic_residual(&best.path, &problem)
    };
    let periods = grid.periods();
    let dims = if grid.is_torus() { n } else { 3 };
    let mut csv = format!("# seed = {}\nlambda,t", cfg.seed);
    for a in 0..dims {
        let _ = write!(csv, ",x{a}");
    }
    csv.push_str(",residual\n");
    for k in 0..best.path.points.len() {
        let lam = best.path.lambda(k);
        let x = best.path.manifold_point(k, &periods, n);
        let _ = write!(csv, "{},{}", fmt_f64(lam), fmt_f64(problem.t_at(lam)));
        for v in x.iter().take(dims) {
            let _ = write!(csv, ",{}", fmt_f64(*v));
        }
        let r = if k == 0 || k + 1 == res.len() { f64::NAN } else { res[k] };
        let _ = writeln!(csv, ",{}", if r.is_nan() { "nan".to_string() } else { fmt_f64(r) });
    }
    Ok(GeodesicRun { orientation: orient, s1, reduced_distance: best.action / (2.0 * s1.sqrt()), result, csv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const FLAT: &str = r#"
seed = 5

[manifold]
kind = "torus"
resolution = [32, 32]

[flow]
variant = "static"

[run]
t_end = 2.0
dt = 0.25

[reduced]
orientations = ["backwards"]
sample_times = [0.2, 0.3, 0.4]
derivative_times = [0.5]
derivative_step = 0.01

[geodesic]
lambda_samples = 16
subset_stride = 1

[checks]
draws = 2
"#;

    #[test]
    fn flat_run_passes_and_writes_artifacts() {
        let p = parse_config(FLAT).unwrap();
        let out = run_experiment(&p.config, p.warnings).unwrap();
        assert_eq!(out.exit_code(false), EXIT_OK, "{}", out.summary());
        assert!(out.series[0].monotone());
        assert!(out.reports_named("heat_inequality").next().is_some());
        let csv = out.artifacts.iter().find(|a| a.path == "volume_backwards.csv").unwrap();
        let text = String::from_utf8(csv.contents.clone()).unwrap();
        assert!(text.starts_with("# seed = 5\ntime,V,quadrature_error,monotone_so_far\n"));
        let dir = tempfile::tempdir().unwrap();
        out.write(dir.path()).unwrap();
        assert!(dir.path().join("reports/d_sign.txt").exists());
        assert!(dir.path().join("fields/backwards_000.csv").exists());
    }

    #[test]
    fn geodesic_on_flat_torus_is_straight() {
        let p = parse_config(FLAT).unwrap();
        let g = geodesic(&p.config, &[1.0, 1.0], &[2.0, 1.5], 1.5).unwrap();
        assert!((g.s1 - 0.5).abs() < 1e-15);
        let d2 = 1.0 + 0.25;
        assert!((g.reduced_distance - d2 / (4.0 * 0.5)).abs() < 1e-9);
        assert_eq!(g.csv.lines().count(), 2 + 17);
    }

    #[test]
    fn error_codes_follow_the_taxonomy() {
        assert_eq!(error_exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(error_exit_code(&Error::NotPositiveDefinite { node: 0, eigenvalue: -1.0 }), EXIT_SINGULARITY);
    }
}
