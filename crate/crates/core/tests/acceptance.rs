//! One pass/fail line per acceptance criterion, printed straight to stdout.
//!
//! The full torus runs are shared between criteria and computed once.

use rvlab::config::{parse_config, ExperimentConfig, SampleRange};
use rvlab::flows::checks as fchecks;
use rvlab::flows::SpacetimeSolution;
use rvlab::lgeo::LPath;
use rvlab::lgeo::{minimize, shoot, MinimizeOptions, PathField, Problem};
use rvlab::report::{IdentityReport, Verdict};
use rvlab::runner::{self, Outcome};
use rvlab::{Mode, TimeOrientation};
use std::io::Write;
use std::sync::OnceLock;

const STATIC: &str = include_str!("../../../configs/static_flat_torus.toml");
const RICCI: &str = include_str!("../../../configs/ricci_torus.toml");
const LIST: &str = include_str!("../../../configs/list_torus.toml");
const HARMONIC: &str = include_str!("../../../configs/ricci_harmonic_torus.toml");
const SPHERE: &str = include_str!("../../../configs/ricci_sphere.toml");
const MCF_E: &str = include_str!("../../../configs/mcf_euclidean_graph.toml");
const MCF_L: &str = include_str!("../../../configs/mcf_lorentzian_graph.toml");

fn line(n: u32, name: &str, pass: bool, detail: String) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n:>2} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    let _ = out.flush();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn config(text: &str) -> ExperimentConfig {
    parse_config(text).expect("config parses").config
}

fn run(text: &str) -> Outcome {
    runner::run_experiment(&config(text), Vec::new()).expect("run succeeds")
}

macro_rules! shared_run {
    ($name:ident, $text:expr) => {
        fn $name() -> &'static Outcome {
            static CELL: OnceLock<Outcome> = OnceLock::new();
            CELL.get_or_init(|| run($text))
        }
    };
}

shared_run!(static_run, STATIC);
shared_run!(ricci_run, RICCI);
shared_run!(list_run, LIST);
shared_run!(harmonic_run, HARMONIC);
shared_run!(sphere_run, SPHERE);

fn theorem_runs() -> [(&'static str, &'static Outcome); 4] {
    [("static", static_run()), ("ricci", ricci_run()), ("list", list_run()), ("ricci_harmonic", harmonic_run())]
}

fn sphere_solution() -> &'static SpacetimeSolution {
    static CELL: OnceLock<SpacetimeSolution> = OnceLock::new();
    CELL.get_or_init(|| runner::evolve_config(&config(SPHERE)).unwrap())
}

/// Short explicit run of a torus config at `res²` with a shared step, so
/// grid halving is the only change between two solutions.
fn short_torus(text: &str, res: usize) -> SpacetimeSolution {
    let mut c = config(text);
    c.manifold.resolution = vec![res, res];
    c.run.t_end = 0.03;
    c.run.dt = Some(0.0015);
    c.run.snapshot_stride = 1;
    runner::evolve_config(&c).unwrap()
}

fn context<'a>(r: &'a IdentityReport, key: &str) -> Option<&'a str> {
    r.context.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn named<'a>(out: &'a Outcome, check: &'a str) -> Vec<&'a IdentityReport> {
    out.reports_named(check).collect()
}

fn all_pass(reports: &[&IdentityReport]) -> bool {
    !reports.is_empty() && reports.iter().all(|r| r.verdict == Verdict::Pass)
}

fn worst(reports: &[&IdentityReport]) -> f64 {
    reports.iter().map(|r| r.max_abs).fold(0.0, f64::max)
}

const T_MID: f64 = 0.015;

#[test]
fn criterion_01_trace_identity() {
    let sphere = sphere_solution();
    let mut sphere_max = 0.0f64;
    for k in [1, sphere.snapshots.len() / 2, sphere.snapshots.len() - 2] {
        let t = sphere.snapshots[k].t();
        sphere_max = sphere_max.max(fchecks::trace_residual_max(sphere, t, 20, 1.0, 101).unwrap());
    }
    let coarse = fchecks::trace_residual_max(&short_torus(LIST, 32), T_MID, 20, 1.0, 102).unwrap();
    let fine = fchecks::trace_residual_max(&short_torus(LIST, 64), T_MID, 20, 1.0, 102).unwrap();
    let order = fchecks::observed_order(coarse, fine);
    line(
        1,
        "trace identity",
        sphere_max <= 1e-8 && order >= 1.8,
        format!("sphere max {sphere_max:.2e}; list torus 32² {coarse:.3e}, 64² {fine:.3e}, order {order:.2}"),
    );
}

#[test]
fn criterion_02_ricci_d_vanishes() {
    let sphere = sphere_solution();
    let mut sphere_max = 0.0f64;
    for k in [1, sphere.snapshots.len() / 2, sphere.snapshots.len() - 2] {
        let t = sphere.snapshots[k].t();
        sphere_max = sphere_max.max(fchecks::d_max_abs(sphere, t, 10, 1.0, 201).unwrap());
    }
    let coarse = fchecks::d_max_abs(&short_torus(RICCI, 32), T_MID, 10, 1.0, 202).unwrap();
    let fine = fchecks::d_max_abs(&short_torus(RICCI, 64), T_MID, 10, 1.0, 202).unwrap();
    let order = fchecks::observed_order(coarse, fine);
    line(
        2,
        "ricci D vanishes",
        sphere_max <= 1e-8 && order >= 1.8,
        format!("sphere max {sphere_max:.2e}; torus 32² {coarse:.3e}, 64² {fine:.3e}, order {order:.2}"),
    );
}

#[test]
fn criterion_03_closed_form_d() {
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, text) in [("list", LIST), ("ricci_harmonic", HARMONIC)] {
        let coarse = fchecks::d_mismatch(&short_torus(text, 32), T_MID, 10, 1.0, 301).unwrap();
        let fine = fchecks::d_mismatch(&short_torus(text, 64), T_MID, 10, 1.0, 301).unwrap();
        let order = fchecks::observed_order(coarse, fine);
        ok &= order >= 1.8;
        detail.push(format!("{name} {coarse:.2e}→{fine:.2e} order {order:.2}"));
    }
    let mcf = |text: &str| runner::check_identities(&config(text), Vec::new()).unwrap();
    let signs: [(&str, Outcome, &str); 4] = [
        ("list", list_run().clone(), "nonnegative"),
        ("ricci_harmonic", harmonic_run().clone(), "nonnegative"),
        ("mcf_lorentzian", mcf(MCF_L), "nonnegative"),
        ("mcf_euclidean", mcf(MCF_E), "nonpositive"),
    ];
    for (name, out, sign) in &signs {
        let d = named(out, "d_sign");
        let right = d.iter().all(|r| context(r, "expected_sign") == Some(sign));
        let pass = all_pass(&d) && right;
        ok &= pass;
        detail.push(format!("{name} sign {} ({} nodes)", if pass { "ok" } else { "bad" }, d.iter().map(|r| r.nodes_tested).sum::<usize>()));
    }
    line(3, "closed-form D and signs", ok, detail.join("; "));
}

#[test]
fn criterion_04_static_flat_backwards() {
    let out = static_run();
    let k = out.series.iter().position(|s| s.orientation.mode == Mode::Backwards).expect("backwards series");
    let series = &out.series[k];
    let mut worst_rel = 0.0f64;
    let mut tested = 0;
    for f in &out.fields[k] {
        let tau = f.s1;
        for i in 0..f.len() {
            if f.suspect[i] {
                continue;
            }
            let x = f.grid.coords(i);
            let mut d = [0.0; 3];
            for a in 0..2 {
                d[a] = x[a] - f.base[a];
            }
            let d = f.grid.wrap_displacement(&d);
            let exact = (d[0] * d[0] + d[1] * d[1]) / (4.0 * tau);
            let rel = (f.ell[i] - exact).abs() / exact.max(1e-12);
            worst_rel = worst_rel.max(if exact < 1e-12 { f.ell[i].abs() } else { rel });
            tested += 1;
        }
    }
    let first = &series.samples[0];
    let target = 0.01 * std::f64::consts::TAU.powi(2);
    let v0_ok = (first.s - target).abs() < 1e-9 && (0.99..=1.0 + 1e-3).contains(&first.volume);
    let ok = worst_rel <= 0.01 && series.samples.len() >= 20 && series.monotone() && v0_ok;
    line(
        4,
        "static flat backwards",
        ok,
        format!(
            "ℓ rel err {worst_rel:.2e} over {tested} nodes; {} samples monotone {}; V_b({:.4}) = {:.6}",
            series.samples.len(),
            series.monotone(),
            first.s,
            first.volume
        ),
    );
}

#[test]
fn criterion_05_monotone_volumes() {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, out) in theorem_runs() {
        for mode in [Mode::Forwards, Mode::Backwards] {
            let s = out.series.iter().find(|s| s.orientation.mode == mode);
            let pass = s.is_some_and(|s| s.samples.len() >= 20 && s.monotone() && s.verdict() == Verdict::Pass);
            ok &= pass;
            let tag = if mode == Mode::Forwards { "f" } else { "b" };
            detail.push(format!("{name} V_{tag} {}", if pass { "ok" } else { "bad" }));
        }
    }
    line(5, "reduced volumes monotone", ok, detail.join(", "));
}

#[test]
fn criterion_06_distance_bounds() {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, out) in theorem_runs() {
        let r = named(out, "distance_bounds");
        let pass = all_pass(&r) && r.len() == 2 && r.iter().all(|x| x.nodes_ok == x.nodes_tested);
        ok &= pass;
        detail.push(format!("{name} {}", if pass { "0 violations" } else { "violations" }));
    }
    line(6, "distance bounds", ok, detail.join(", "));
}

#[test]
fn criterion_07_gradient_and_time_identities() {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, out, tol) in [("static", static_run(), 0.01), ("ricci", ricci_run(), 0.05)] {
        for check in ["gradient_identity", "time_derivative_identity"] {
            let r = named(out, check);
            let err = worst(&r);
            let pass = all_pass(&r) && err <= tol;
            ok &= pass;
            detail.push(format!("{name} {check} {err:.2e}"));
        }
    }
    line(7, "gradient and time identities", ok, detail.join(", "));
}

fn fraction_line(n: u32, name: &str, checks: &[&str], runs: &[(&str, &Outcome)]) {
    let mut ok = true;
    let mut detail = Vec::new();
    for (run, out) in runs {
        for check in checks {
            let r = named(out, check);
            let frac = r.iter().map(|x| x.fraction_ok()).fold(1.0, f64::min);
            let pass = all_pass(&r) && frac >= 0.95;
            ok &= pass;
            detail.push(format!("{run} {check} {:.1}%", 100.0 * frac));
        }
    }
    line(n, name, ok, detail.join(", "));
}

#[test]
fn criterion_08_laplacian_and_evolution() {
    let runs = theorem_runs();
    fraction_line(8, "laplacian bound and evolution inequality", &["laplacian_bound", "evolution_inequality"], &runs);
}

#[test]
fn criterion_09_heat_inequality() {
    fraction_line(9, "heat inequality", &["heat_inequality"], &[("static", static_run()), ("ricci", ricci_run())]);
}

fn small_ricci() -> ExperimentConfig {
    let mut c = config(RICCI);
    c.manifold.resolution = vec![32, 32];
    c.run.t_end = 1.0;
    c.run.snapshot_stride = 2;
    c.reduced.backwards_origin = Some(1.0);
    c.reduced.sample_range = Some(SampleRange { from: 0.3, to: 0.6, count: 4 });
    c.reduced.sample_times = None;
    c.reduced.derivative_times = vec![0.5];
    c.geodesic.lambda_samples = 32;
    c.checks.draws = 4;
    c
}

struct Case {
    field: PathField,
    orient: TimeOrientation,
    s1: f64,
    pairs: Vec<([f64; 3], [f64; 3])>,
}

/// Endpoint error of shooting from the minimizer's initial velocity, and the
/// minimizer's action.
fn shoot_error(case: &Case, p: &[f64; 3], q: &[f64; 3], intervals: usize) -> (f64, f64) {
    let pr = Problem::new(&case.field, case.orient, case.s1).unwrap();
    let opts = MinimizeOptions { samples: intervals, richardson: false, ..Default::default() };
    let best = minimize(p, q, &pr, &opts).unwrap().best;
    let target = best.path.end();
    let shot: LPath = shoot(&pr, &best.path.start(), &best.initial_velocity, best.path.chart, intervals, 1e6).unwrap();
    let e = shot.end();
    let err = ((e[0] - target[0]).powi(2) + (e[1] - target[1]).powi(2) + (e[2] - target[2]).powi(2)).sqrt();
    (err, best.action)
}

#[test]
fn criterion_10_solver_quality() {
    let torus = Case {
        field: PathField::new(&runner::evolve_config(&small_ricci()).unwrap()).unwrap(),
        orient: TimeOrientation::backwards(1.0),
        s1: 0.5,
        pairs: vec![([1.0, 2.0, 0.0], [2.6, 3.1, 0.0]), ([3.0, 3.0, 0.0], [5.5, 1.2, 0.0])],
    };
    let sphere = Case {
        field: PathField::new(sphere_solution()).unwrap(),
        orient: TimeOrientation::forwards(0.0),
        s1: 0.6,
        pairs: vec![([1.2, 0.4, 0.0], [2.0, 1.5, 0.0])],
    };
    let mut shoot_ratio = f64::INFINITY;
    let mut action_ratio = f64::INFINITY;
    for case in [&torus, &sphere] {
        for (p, q) in &case.pairs {
            let runs: Vec<(f64, f64)> = [32, 64, 128, 256].iter().map(|&n| shoot_error(case, p, q, n)).collect();
            let reference = runs[3].1;
            for k in 0..2 {
                shoot_ratio = shoot_ratio.min(runs[k].0 / runs[k + 1].0);
                action_ratio = action_ratio.min((runs[k].1 - reference).abs() / (runs[k + 1].1 - reference).abs());
            }
        }
    }
    let mut gate_ok = true;
    let mut torus_res = 0.0f64;
    for (_, out) in theorem_runs() {
        let r = named(out, "geodesic_residual");
        gate_ok &= all_pass(&r) && r.iter().all(|x| x.max_abs <= 1e-3);
        torus_res = torus_res.max(worst(&r));
    }
    let s = named(sphere_run(), "geodesic_residual");
    let sphere_res = worst(&s);
    gate_ok &= all_pass(&s) && sphere_res <= 1e-4;
    line(
        10,
        "solver quality gates",
        shoot_ratio >= 3.0 && action_ratio >= 3.0 && gate_ok,
        format!(
            "shoot endpoint ratio {shoot_ratio:.2}; action error ratio {action_ratio:.2}; residual torus {torus_res:.2e}, sphere {sphere_res:.2e}"
        ),
    );
}

#[test]
fn criterion_11_determinism() {
    let cfg = small_ricci();
    let in_pool = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| runner::run_experiment(&cfg, Vec::new()).unwrap())
    };
    let a = in_pool(1);
    let b = in_pool(8);
    let again = in_pool(1);
    let csv = |o: &Outcome| -> Vec<(String, Vec<u8>)> {
        o.artifacts.iter().filter(|x| x.path.ends_with(".csv")).map(|x| (x.path.clone(), x.contents.clone())).collect()
    };
    let count = csv(&a).len();
    let ok = count > 0 && csv(&a) == csv(&b) && csv(&a) == csv(&again);
    line(11, "determinism", ok, format!("{count} CSV artifacts compared across 1, 8 and 1 threads"));
}
