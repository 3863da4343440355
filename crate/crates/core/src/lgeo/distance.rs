//! Reduced-distance fields over a node subset.

use crate::error::{Error, Result};
use crate::geometry::grid::Grid;
use crate::geometry::linalg::Vec3;
use crate::lgeo::minimize::{self, MinimizeOptions, Start};
use crate::lgeo::path::{self, LPath, Problem};
use crate::lgeo::pathfield::PathField;
use crate::orientation::TimeOrientation;
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOptions {
    pub minimize: MinimizeOptions,
    /// Torus nodes are taken every `subset_stride` grid nodes per axis.
    pub subset_stride: usize,
    /// Keep the minimizing paths for warm starts.
    pub keep_paths: bool,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self { minimize: MinimizeOptions::default(), subset_stride: 2, keep_paths: true }
    }
}

/// The node subset: its own grid and the full-grid index of every subset node.
pub fn subset_grid(grid: &Arc<Grid>, stride: usize) -> Result<(Arc<Grid>, Vec<usize>)> {
    if !grid.is_torus() || stride == 1 {
        return Ok((grid.clone(), (0..grid.len()).collect()));
    }
    let n = grid.dim();
    let res = grid.resolution();
    let per = grid.periods();
    let mut sub = Vec::with_capacity(n);
    for a in 0..n {
        if stride == 0 || res[a] % stride != 0 {
            return Err(Error::ConfigCheck {
                check: "subset_stride",
                message: format!("stride {stride} does not divide resolution {}", res[a]),
            });
        }
        sub.push(res[a] / stride);
    }
    let sg = Arc::new(Grid::torus(&sub, &per[..n])?);
    let map = (0..sg.len())
        .map(|i| {
            let mut mi = sg.multi_index(i);
            for v in mi.iter_mut().take(n) {
                *v *= stride;
            }
            grid.index(mi)
        })
        .collect();
    Ok((sg, map))
}

/// `ℓ(q, s₁)` from a base point at every subset node.
#[derive(Debug, Clone)]
pub struct ReducedDistanceField {
    pub orientation: TimeOrientation,
    pub s1: f64,
    /// Flow time of the endpoint slice.
    pub t1: f64,
    /// Base point: torus coordinates or `(colatitude, longitude)`.
    pub base: Vec3,
    pub grid: Arc<Grid>,
    /// Full-grid index of each subset node.
    pub nodes: Vec<usize>,
    pub ell: Vec<f64>,
    /// L-length of the minimizer.
    pub action: Vec<f64>,
    pub k_integral: Vec<f64>,
    pub suspect: Vec<bool>,
    pub converged: Vec<bool>,
    pub velocity: Vec<Vec3>,
    pub branch: Vec<usize>,
    pub residual: Vec<f64>,
    pub displacement: Vec<Vec3>,
    /// Per node: `(branch, path)` of every minimized start.
    pub paths: Vec<Vec<(usize, LPath)>>,
}

impl ReducedDistanceField {
    pub fn len(&self) -> usize {
        self.ell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ell.is_empty()
    }

    pub fn lambda1(&self) -> f64 {
        self.s1.sqrt()
    }

    pub fn drop_paths(&mut self) {
        self.paths = Vec::new();
    }

    pub fn smooth_nodes(&self) -> usize {
        self.suspect.iter().filter(|&&s| !s).count()
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }
}

struct NodeOut {
    action: f64,
    k: f64,
    tie: bool,
    converged: bool,
    velocity: Vec3,
    branch: usize,
    residual: f64,
    displacement: Vec3,
    paths: Vec<(usize, LPath)>,
}

fn solve_node(
    problem: &Problem,
    base: &Vec3,
    q: &Vec3,
    opts: &FieldOptions,
    warm: Option<&[(usize, LPath)]>,
) -> Result<NodeOut> {
    let m = &opts.minimize;
    let starts: Vec<Start> = match problem.field.sphere() {
        None => minimize::torus_starts(problem, base, q, m.samples, m.multi_start),
        Some(_) => minimize::sphere_starts(problem, &minimize::unit(base), &minimize::unit(q), m.samples, m.multi_start),
    };
    let lam1 = problem.lambda1();
    let warm_fn = |b: usize| -> Option<LPath> {
        let w = warm?;
        let (_, p) = w.iter().find(|(wb, p)| *wb == b && p.intervals() == m.samples)?;
        Some(LPath { lambda1: lam1, orientation: problem.orient, ..p.clone() })
    };
    let ms = minimize::minimize_starts(problem, starts, m, &warm_fn)?;
    let best = &ms.best;
    let k = path::k_integral(&best.path, problem)?;
    let paths = if opts.keep_paths { ms.candidates.iter().map(|c| (c.branch, c.path.clone())).collect() } else { Vec::new() };
    Ok(NodeOut {
        action: best.action,
        k,
        tie: ms.tie,
        converged: best.converged,
        velocity: best.initial_velocity,
        branch: best.branch,
        residual: best.residual,
        displacement: best.displacement,
        paths,
    })
}

/// Minimize from `base` to every subset node with final orientation time
/// `s1`. `prev` supplies warm starts and must share the node subset.
pub fn reduced_distance_field(
    field: &PathField,
    orient: TimeOrientation,
    base: &Vec3,
    s1: f64,
    opts: &FieldOptions,
    prev: Option<&ReducedDistanceField>,
) -> Result<ReducedDistanceField> {
    let problem = Problem::new(field, orient, s1)?;
    build(&problem, base, opts, prev)
}

/// `d²_{g(0)}(p, q)` on the subset: twice the frozen energy with `λ₁ = 1`.
pub fn frozen_distance_squared(
    field: &PathField,
    orient: TimeOrientation,
    base: &Vec3,
    opts: &FieldOptions,
) -> Result<Vec<f64>> {
    let problem = Problem::frozen(field, orient, 1.0)?;
    let o = FieldOptions { keep_paths: false, ..*opts };
    Ok(build(&problem, base, &o, None)?.action.iter().map(|a| 2.0 * a).collect())
}

fn build(
    problem: &Problem,
    base: &Vec3,
    opts: &FieldOptions,
    prev: Option<&ReducedDistanceField>,
) -> Result<ReducedDistanceField> {
    opts.minimize.validate()?;
    let field = problem.field;
    let full = field.grid();
    let (grid, nodes) = subset_grid(full, opts.subset_stride)?;
    if let Some(p) = prev {
        if p.nodes != nodes {
            return Err(Error::GridMismatch);
        }
    }
    let warm_paths = prev.filter(|p| p.paths.len() == nodes.len() && p.base == *base);
    let out: Vec<NodeOut> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, &idx)| {
            let q = full.coords(idx);
            solve_node(problem, base, &q, opts, warm_paths.map(|p| p.paths[i].as_slice()))
        })
        .collect::<Result<_>>()?;
    let lam1 = problem.lambda1();
    let mut suspect: Vec<bool> = out.iter().map(|o| o.tie || !o.converged).collect();
    mark_branch_jumps(&grid, field.sphere().is_some(), &out, &mut suspect);
    let mut f = ReducedDistanceField {
        orientation: problem.orient,
        s1: problem.s1,
        t1: problem.t_at(lam1),
        base: *base,
        grid,
        nodes,
        ell: Vec::with_capacity(out.len()),
        action: Vec::with_capacity(out.len()),
        k_integral: Vec::with_capacity(out.len()),
        suspect: Vec::new(),
        converged: Vec::with_capacity(out.len()),
        velocity: Vec::with_capacity(out.len()),
        branch: Vec::with_capacity(out.len()),
        residual: Vec::with_capacity(out.len()),
        displacement: Vec::with_capacity(out.len()),
        paths: Vec::with_capacity(out.len()),
    };
    for o in out {
        f.ell.push(o.action / (2.0 * lam1));
        f.action.push(o.action);
        f.k_integral.push(o.k);
        f.converged.push(o.converged);
        f.velocity.push(o.velocity);
        f.branch.push(o.branch);
        f.residual.push(o.residual);
        f.displacement.push(o.displacement);
        f.paths.push(o.paths);
    }
    if !opts.keep_paths {
        f.paths = Vec::new();
    }
    f.suspect = suspect;
    Ok(f)
}

/// Flag neighbouring nodes whose minimizers reach them through different
/// sheets of the cover (torus) or along different arcs (sphere).
fn mark_branch_jumps(grid: &Grid, sphere: bool, out: &[NodeOut], suspect: &mut [bool]) {
    let n = grid.dim();
    let per = grid.periods();
    let half = (0..n).map(|a| per[a]).fold(f64::INFINITY, f64::min) * 0.5;
    let mut flag = vec![false; out.len()];
    for i in 0..out.len() {
        for off in 0..3usize.pow(n as u32) {
            let mut j = i;
            let mut rem = off;
            let mut shift = [0.0; 3];
            for a in 0..n {
                let o = (rem % 3) as isize - 1;
                rem /= 3;
                if sphere && a == 0 {
                    // colatitude index does not wrap
                    let mi = grid.multi_index(j)[0] as isize + o;
                    if mi < 0 || mi >= grid.resolution()[0] as isize {
                        j = usize::MAX;
                        break;
                    }
                }
                j = grid.shift(j, a, o);
                shift[a] = o as f64 * grid.spacing(a);
            }
            if j == usize::MAX || j == i {
                continue;
            }
            let jump = if sphere {
                out[i].branch != out[j].branch
            } else {
                (0..n).any(|a| (out[j].displacement[a] - out[i].displacement[a] - shift[a]).abs() > half)
            };
            if jump {
                flag[i] = true;
                flag[j] = true;
            }
        }
    }
    for (s, f) in suspect.iter_mut().zip(flag) {
        *s |= f;
    }
}

/// Fields at increasing `s` values, each warm-started from the previous one.
pub fn reduced_distance_series(
    field: &PathField,
    orient: TimeOrientation,
    base: &Vec3,
    s_values: &[f64],
    opts: &FieldOptions,
) -> Result<Vec<ReducedDistanceField>> {
    let mut out: Vec<ReducedDistanceField> = Vec::with_capacity(s_values.len());
    let warm = FieldOptions { keep_paths: true, ..*opts };
    for &s in s_values {
        let f = reduced_distance_field(field, orient, base, s, &warm, out.last())?;
        if let Some(last) = out.last_mut() {
            if !opts.keep_paths {
                last.drop_paths();
            }
        }
        out.push(f);
    }
    if !opts.keep_paths {
        if let Some(last) = out.last_mut() {
            last.drop_paths();
        }
    }
    Ok(out)
}
