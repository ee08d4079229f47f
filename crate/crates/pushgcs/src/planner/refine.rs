//! Local refinement of a rounded path into a trajectory that satisfies the
//! bilinear constraints exactly.
//!
//! Sequential convex programming with an ℓ1 penalty on linearized quadratic
//! constraints and a box trust region, followed by a minimum-norm
//! Gauss-Newton projection onto equalities and active inequalities.

use nalgebra::{DMatrix, DVector};
use pushgcs_core::conic::{ConicSolver, ProgramBuilder, SolveSettings, SolveStatus};
use pushgcs_core::expr::{Affine, QuadForm, Relation};
use pushgcs_core::modes::{CostAtom, ModeKind, ModeTranscription};
use pushgcs_core::sdp::geodesic_cut;
use pushgcs_core::math::Vec2;

pub const QUADRATIC_TOL: f64 = 1e-6;
pub const AFFINE_TOL: f64 = 1e-8;
/// Starting weight of the exact penalty on quadratic violations.
const INITIAL_PENALTY: f64 = 100.0;
/// Starting half-width of the box trust region.
const INITIAL_RADIUS: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineOptions {
    pub max_iter: usize,
    pub quadratic_tol: f64,
    pub affine_tol: f64,
    /// Levenberg damping of the projection steps.
    pub damping: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { max_iter: 200, quadratic_tol: QUADRATIC_TOL, affine_tol: AFFINE_TOL, damping: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RefineError {
    #[error("initial guess has {got} values, expected {expected}")]
    BadGuess { expected: usize, got: usize },
    #[error("convex subproblem failed: {0:?}")]
    Subproblem(SolveStatus),
    #[error("refinement ended with residuals {quadratic:.3e} (quadratic) and {affine:.3e} (affine)")]
    RefinementFailed { quadratic: f64, affine: f64 },
}

/// The modes of one path stacked into a single nonconvex program.
#[derive(Clone, Debug)]
pub struct PathProblem {
    pub num_vars: usize,
    pub offsets: Vec<usize>,
    pub sizes: Vec<usize>,
    pub affine: Vec<(Affine, Relation)>,
    pub quadratic: Vec<(QuadForm, Relation)>,
    /// Cost atoms of each mode over that mode's local variables.
    pub cost: Vec<Vec<CostAtom>>,
}

fn shift_quad(q: &QuadForm, off: usize) -> QuadForm {
    QuadForm {
        constant: q.constant,
        linear: q.linear.iter().map(|&(i, c)| (i + off, c)).collect(),
        quadratic: q.quadratic.iter().map(|&(i, j, c)| (i + off, j + off, c)).collect(),
    }
}

impl PathProblem {
    /// Stacks `modes`, pins the first entry state to `start` and the last
    /// exit state to `goal`, and joins consecutive modes by continuity.
    pub fn new(modes: &[&ModeTranscription], start: &[f64; 6], goal: &[f64; 6], rot_start: Vec2, rot_goal: Vec2) -> Self {
        let mut offsets = Vec::new();
        let mut sizes = Vec::new();
        let mut affine = Vec::new();
        let mut quadratic = Vec::new();
        let mut cost = Vec::new();
        let mut n = 0;
        let cut = geodesic_cut(rot_start, rot_goal);
        for tr in modes {
            let off = n;
            let shift = |i: usize| i + off;
            offsets.push(off);
            sizes.push(tr.num_vars());
            for (a, r) in &tr.affine {
                affine.push((a.remap(shift, None), *r));
            }
            for (q, r, _) in &tr.quadratic {
                quadratic.push((shift_quad(q, off), *r));
            }
            if let (ModeKind::Contact { .. }, Some((a, b))) = (tr.kind, cut) {
                for [c, s] in tr.rotation_vars() {
                    affine.push((Affine::from_terms(vec![(c + off, a[0]), (s + off, a[1])], -b), Relation::Ge));
                }
            }
            cost.push(tr.cost.clone());
            n += tr.num_vars();
        }
        let state = |m: usize, first: bool| -> Vec<Affine> {
            let tr = modes[m];
            let k = if first { 0 } else { tr.knots - 1 };
            tr.state_exprs(k).iter().map(|e| e.remap(|i| i + offsets[m], None)).collect()
        };
        if !modes.is_empty() {
            for (e, v) in state(0, true).into_iter().zip(start) {
                affine.push((e.plus_constant(-v), Relation::Eq));
            }
            for (e, v) in state(modes.len() - 1, false).into_iter().zip(goal) {
                affine.push((e.plus_constant(-v), Relation::Eq));
            }
            for m in 1..modes.len() {
                for (a, b) in state(m - 1, false).into_iter().zip(state(m, true)) {
                    affine.push((a - b, Relation::Eq));
                }
            }
        }
        Self { num_vars: n, offsets, sizes, affine, quadratic, cost }
    }

    pub fn local<'a>(&self, x: &'a [f64], m: usize) -> &'a [f64] {
        &x[self.offsets[m]..self.offsets[m] + self.sizes[m]]
    }

    pub fn cost_value(&self, x: &[f64]) -> f64 {
        self.cost.iter().enumerate().map(|(m, atoms)| atoms.iter().map(|a| a.eval(self.local(x, m))).sum::<f64>()).sum()
    }

    pub fn affine_violation(&self, x: &[f64]) -> f64 {
        self.affine.iter().map(|(a, r)| r.violation(a.eval(x))).fold(0.0, f64::max)
    }

    pub fn quadratic_violation(&self, x: &[f64]) -> f64 {
        self.quadratic.iter().map(|(q, r)| r.violation(q.eval(x))).fold(0.0, f64::max)
    }

    fn quadratic_l1(&self, x: &[f64]) -> f64 {
        self.quadratic.iter().map(|(q, r)| r.violation(q.eval(x))).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineResult {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub quadratic_residual: f64,
    pub affine_residual: f64,
}

fn feasible(p: &PathProblem, x: &[f64], opts: &RefineOptions) -> bool {
    p.quadratic_violation(x) <= opts.quadratic_tol && p.affine_violation(x) <= opts.affine_tol
}

/// Convex subproblem around `x`; returns the step target and its model merit.
fn scp_step(
    p: &PathProblem,
    x: &[f64],
    rho: f64,
    radius: f64,
    solver: &dyn ConicSolver,
    settings: &SolveSettings,
) -> Result<(Vec<f64>, f64), RefineError> {
    let n = p.num_vars;
    let mut b = ProgramBuilder::with_vars(n);
    for (a, r) in &p.affine {
        match r {
            Relation::Eq => b.zero(a.clone()),
            Relation::Ge => b.nonneg(a.clone()),
        }
    }
    for (i, &xi) in x.iter().enumerate() {
        b.nonneg(Affine::from_terms(vec![(i, 1.0)], radius - xi));
        b.nonneg(Affine::from_terms(vec![(i, -1.0)], radius + xi));
    }
    for (m, atoms) in p.cost.iter().enumerate() {
        let map: Vec<Affine> = (0..p.sizes[m]).map(|i| Affine::var(p.offsets[m] + i)).collect();
        for a in atoms {
            let obj = a.lower(&mut b, &map);
            b.minimize(obj);
        }
    }
    for (q, r) in &p.quadratic {
        let lin = q.linearize(x);
        let s = b.add_var();
        b.nonneg(Affine::var(s));
        b.nonneg(Affine::var(s) - lin.scaled(-1.0));
        if *r == Relation::Eq {
            b.nonneg(Affine::var(s) - lin.clone());
        }
        b.minimize(Affine::term(s, rho));
    }
    let prog = b.build().expect("subproblem indices in range");
    let out = solver.solve(&prog, settings);
    match (out.status, out.primal, out.objective) {
        (SolveStatus::Optimal, Some(z), Some(obj)) => Ok((z[..n].to_vec(), obj)),
        (status, ..) => Err(RefineError::Subproblem(status)),
    }
}

/// Minimum-norm damped Gauss-Newton steps onto the equalities and the
/// inequalities that are active or violated.
fn project(p: &PathProblem, x: &mut [f64], opts: &RefineOptions) {
    let active_tol = 1e-7;
    for _ in 0..30 {
        let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        for (a, r) in &p.affine {
            let v = a.eval(x);
            if *r == Relation::Eq || v < active_tol {
                rows.push((a.terms.clone(), v));
            }
        }
        for (q, r) in &p.quadratic {
            let v = q.eval(x);
            if *r == Relation::Eq || v < active_tol {
                rows.push((q.gradient(x), v));
            }
        }
        let worst = rows.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
        if worst <= 1e-13 {
            return;
        }
        let m = rows.len();
        let mut j = DMatrix::<f64>::zeros(m, p.num_vars);
        let mut r = DVector::<f64>::zeros(m);
        for (k, (terms, v)) in rows.iter().enumerate() {
            for &(i, c) in terms {
                j[(k, i)] += c;
            }
            r[k] = -v;
        }
        let jt = j.transpose();
        let svd = (&j * &jt).svd(true, true);
        let lam = match svd.solve(&r, 1e-12 * svd.singular_values.max().max(1.0)) {
            Ok(l) => l,
            Err(_) => return,
        };
        let step = jt * lam;
        // Damping only when the linear model is far from the residual.
        let scale = if worst > 1e-4 { 1.0 / (1.0 + opts.damping) } else { 1.0 };
        for (xi, d) in x.iter_mut().zip(step.iter()) {
            *xi += scale * d;
        }
    }
}

pub fn nonconvex_refine(
    p: &PathProblem,
    guess: &[f64],
    solver: &dyn ConicSolver,
    opts: &RefineOptions,
) -> Result<RefineResult, RefineError> {
    if guess.len() != p.num_vars {
        return Err(RefineError::BadGuess { expected: p.num_vars, got: guess.len() });
    }
    let finish = |x: Vec<f64>, iterations: usize| -> Result<RefineResult, RefineError> {
        let q = p.quadratic_violation(&x);
        let a = p.affine_violation(&x);
        if q <= opts.quadratic_tol && a <= opts.affine_tol && x.iter().all(|v| v.is_finite()) {
            Ok(RefineResult { cost: p.cost_value(&x), x, iterations, quadratic_residual: q, affine_residual: a })
        } else {
            Err(RefineError::RefinementFailed { quadratic: q, affine: a })
        }
    };
    if feasible(p, guess, opts) {
        return finish(guess.to_vec(), 0);
    }
    let settings = SolveSettings::default();
    let mut x = guess.to_vec();
    let mut rho = INITIAL_PENALTY;
    let mut radius = INITIAL_RADIUS;
    let merit = |x: &[f64], rho: f64| p.cost_value(x) + rho * p.quadratic_l1(x);
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let (z, model) = match scp_step(p, &x, rho, radius, solver, &settings) {
            Ok(s) => s,
            Err(e) if iterations == 1 => return Err(e),
            Err(_) => {
                radius *= 0.5;
                continue;
            }
        };
        let current = merit(&x, rho);
        let predicted = current - model;
        let actual = current - merit(&z, rho);
        let viol_before = p.quadratic_violation(&x);
        if predicted <= 1e-9 * (1.0 + current.abs()) {
            if viol_before <= 1e-8 || radius < 1e-9 {
                break;
            }
            if viol_before > opts.quadratic_tol * 1e-2 {
                rho = (rho * 10.0).min(1e9);
            } else {
                break;
            }
            continue;
        }
        if actual >= 0.1 * predicted {
            x = z;
            if actual >= 0.75 * predicted {
                radius = (radius * 2.0).min(2.0);
            }
            let viol = p.quadratic_violation(&x);
            if viol > 0.5 * viol_before && viol > 1e-8 {
                rho = (rho * 10.0).min(1e9);
            }
            if viol <= 1e-8 && predicted <= 1e-7 * (1.0 + current.abs()) {
                break;
            }
        } else {
            radius *= 0.3;
            if radius < 1e-9 {
                break;
            }
        }
    }
    project(p, &mut x, opts);
    finish(x, iterations)
}
