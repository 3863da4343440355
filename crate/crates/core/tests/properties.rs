use proptest::prelude::*;
use rvlab::config::parse_config;
use rvlab::flows::{SpacetimeSolution, TensorJet};
use rvlab::flows::harnack::coordinate_basis;
use rvlab::lgeo::path::l_length;
use rvlab::lgeo::{minimize, LPath, MinimizeOptions, PathField, Problem};
use rvlab::runner;
use rvlab::TimeOrientation;
use std::sync::OnceLock;

const RICCI: &str = r#"
seed = 7

[manifold]
kind = "torus"
resolution = [16, 16]

[[initial.conformal]]
amplitude = 0.15
k = [1, 1]
trig = ["sin", "cos"]

[flow]
variant = "ricci"

[run]
t_end = 0.8
snapshot_stride = 4
"#;

const LIST: &str = r#"
[manifold]
kind = "torus"
resolution = [16, 16]

[[initial.conformal]]
amplitude = 0.1
k = [1, 1]
trig = ["sin", "sin"]

[[initial.psi]]
amplitude = 0.3
k = [1, 0]
trig = ["sin", "cos"]

[flow]
variant = "list"

[run]
t_end = 0.2
"#;

const FLAT: &str = r#"
[manifold]
kind = "torus"
resolution = [16, 16]

[flow]
variant = "static"

[run]
t_end = 2.0
dt = 0.25
"#;

fn evolve(text: &str) -> SpacetimeSolution {
    runner::evolve_config(&parse_config(text).unwrap().config).unwrap()
}

fn ricci_field() -> &'static PathField {
    static CELL: OnceLock<PathField> = OnceLock::new();
    CELL.get_or_init(|| PathField::new(&evolve(RICCI)).unwrap())
}

fn flat_field() -> &'static PathField {
    static CELL: OnceLock<PathField> = OnceLock::new();
    CELL.get_or_init(|| PathField::new(&evolve(FLAT)).unwrap())
}

fn list_jets() -> &'static Vec<TensorJet> {
    static CELL: OnceLock<Vec<TensorJet>> = OnceLock::new();
    CELL.get_or_init(|| {
        let sol = evolve(LIST);
        sol.jets(sol.snapshots.len() / 2).unwrap()
    })
}

fn opts(multi_start: bool) -> MinimizeOptions {
    MinimizeOptions { samples: 32, multi_start, ..Default::default() }
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    (0.0..std::f64::consts::TAU, 0.0..std::f64::consts::TAU).prop_map(|(a, b)| [a, b, 0.0])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn trace_residual_is_frame_independent(
        node in 0usize..256,
        x in prop::array::uniform2(-2.0..2.0f64),
        a in prop::array::uniform2(-1.0..1.0f64),
        b in prop::array::uniform2(-1.0..1.0f64),
        sigma in prop::bool::ANY,
        s in 0.1..2.0f64,
    ) {
        let det = a[0] * b[1] - a[1] * b[0];
        prop_assume!(det.abs() > 0.1);
        let jet = &list_jets()[node];
        let x = [x[0], x[1], 0.0];
        let sigma = if sigma { 1.0 } else { -1.0 };
        let reference = jet.trace_residual(&x, sigma, s, &coordinate_basis(2));
        let other = jet.trace_residual(&x, sigma, s, &[[a[0], a[1], 0.0], [b[0], b[1], 0.0]]);
        let scale = 1.0 + jet.harnack_trace(&x, sigma, s).abs() + jet.d_quantity(&x).abs();
        prop_assert!((reference - other).abs() <= 1e-10 * scale, "{reference} vs {other}");
    }

    #[test]
    fn more_starts_never_increase_the_action(p in point(), q in point(), s1 in 0.1..0.7f64) {
        let pr = Problem::new(ricci_field(), TimeOrientation::forwards(0.0), s1).unwrap();
        let single = minimize(&p, &q, &pr, &opts(false)).unwrap();
        let multi = minimize(&p, &q, &pr, &opts(true)).unwrap();
        prop_assert!(multi.best.action <= single.best.action + 1e-10 * (1.0 + single.best.action.abs()));
    }

    #[test]
    fn minimizer_beats_the_straight_line(p in point(), q in point(), s1 in 0.1..0.7f64) {
        let pr = Problem::new(ricci_field(), TimeOrientation::backwards(0.8), s1).unwrap();
        let best = minimize(&p, &q, &pr, &opts(true)).unwrap().best;
        let straight = LPath::straight(&p, &q, pr.lambda1(), 32, pr.orient);
        let ls = l_length(&straight, &pr).unwrap();
        prop_assert!(best.action <= ls + 1e-10 * (1.0 + ls.abs()), "{} > {ls}", best.action);
    }

    #[test]
    fn static_forwards_and_backwards_agree(p in point(), q in point(), s1 in 0.1..1.5f64) {
        let field = flat_field();
        let f = Problem::new(field, TimeOrientation::forwards(0.0), s1).unwrap();
        let b = Problem::new(field, TimeOrientation::backwards(2.0), s1).unwrap();
        let lf = minimize(&p, &q, &f, &opts(true)).unwrap().best.action;
        let lb = minimize(&p, &q, &b, &opts(true)).unwrap().best.action;
        prop_assert!((lf - lb).abs() <= 1e-10 * (1.0 + lf.abs()), "{lf} vs {lb}");
    }

    #[test]
    fn minimization_is_deterministic(p in point(), q in point(), s1 in 0.1..0.7f64) {
        let pr = Problem::new(ricci_field(), TimeOrientation::forwards(0.0), s1).unwrap();
        let a = minimize(&p, &q, &pr, &opts(true)).unwrap();
        let b = minimize(&p, &q, &pr, &opts(true)).unwrap();
        prop_assert_eq!(a.best.action.to_bits(), b.best.action.to_bits());
        prop_assert_eq!(a.best.path, b.best.path);
    }
}
