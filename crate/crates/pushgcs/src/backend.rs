//! Clarabel interior-point backend for [`ConicProgram`]s.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
    SupportedConeT::{NonnegativeConeT, PSDTriangleConeT, SecondOrderConeT, ZeroConeT},
};
use pushgcs_core::conic::{Cone, ConicProgram, ConicSolver, SolveSettings, SolveStatus, SolverOutcome};
use pushgcs_core::expr::Affine;

// Keep the BLAS/LAPACK providers linked.
use blas_src as _;
use lapack_src as _;
use openblas_src as _;

/// Stateless adapter; each call builds and solves a fresh problem.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClarabelSolver;

/// Row data `s = b − A x` in Clarabel's sign convention, plus cone list.
struct Standardized {
    a: CscMatrix<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

fn standardize(p: &ConicProgram) -> Standardized {
    let mut rows: Vec<(Affine, f64)> = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    // Zero and nonnegative rows are merged into one cone each.
    let mut zero = 0;
    for c in p.constraints.iter().filter(|c| c.cone == Cone::Zero) {
        rows.extend(c.rows.iter().map(|r| (r.clone(), 1.0)));
        zero += c.rows.len();
    }
    if zero > 0 {
        cones.push(ZeroConeT(zero));
    }
    let mut nonneg = 0;
    for c in &p.constraints {
        let single_soc = c.cone == Cone::SecondOrder && c.rows.len() == 1;
        if c.cone == Cone::Nonnegative || single_soc {
            rows.extend(c.rows.iter().map(|r| (r.clone(), 1.0)));
            nonneg += c.rows.len();
        }
    }
    if nonneg > 0 {
        cones.push(NonnegativeConeT(nonneg));
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    for c in &p.constraints {
        match c.cone {
            Cone::Zero | Cone::Nonnegative => {}
            Cone::SecondOrder if c.rows.len() == 1 => {}
            Cone::SecondOrder => {
                rows.extend(c.rows.iter().map(|r| (r.clone(), 1.0)));
                cones.push(SecondOrderConeT(c.rows.len()));
            }
            Cone::RotatedSecondOrder => {
                // t·u ≥ ‖x‖² ⇔ (t + u, t − u, 2x) ∈ SOC.
                let (t, u) = (&c.rows[0], &c.rows[1]);
                rows.push((t.clone() + u.clone(), 1.0));
                rows.push((t.clone() - u.clone(), 1.0));
                rows.extend(c.rows[2..].iter().map(|r| (r.clone(), 2.0)));
                cones.push(SecondOrderConeT(c.rows.len()));
            }
            Cone::Psd { dim } => {
                for j in 0..dim {
                    for i in 0..=j {
                        let r = &c.rows[Cone::triangle_index(i, j)];
                        rows.push((r.clone(), if i == j { 1.0 } else { sqrt2 }));
                    }
                }
                cones.push(PSDTriangleConeT(dim));
            }
        }
    }
    let m = rows.len();
    let n = p.num_vars;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut b = Vec::with_capacity(m);
    for (i, (r, s)) in rows.iter().enumerate() {
        for &(j, v) in &r.terms {
            triplets.push((j, i, -v * s));
        }
        b.push(r.constant * s);
    }
    Standardized { a: csc_from_triplets(m, n, triplets), b, cones }
}

/// Column-compressed matrix from `(col, row, value)` triplets; duplicates
/// are summed and exact zeros dropped.
fn csc_from_triplets(m: usize, n: usize, mut t: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(t.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(t.len());
    let mut last: Option<(usize, usize)> = None;
    for (c, r, v) in t {
        if last == Some((c, r)) {
            *nzval.last_mut().expect("previous entry") += v;
            continue;
        }
        rowval.push(r);
        nzval.push(v);
        colptr[c + 1] += 1;
        last = Some((c, r));
    }
    // Drop entries that cancelled.
    let mut keep_rows = Vec::with_capacity(rowval.len());
    let mut keep_vals = Vec::with_capacity(nzval.len());
    let mut counts = vec![0usize; n + 1];
    let mut k = 0;
    for c in 0..n {
        for _ in 0..colptr[c + 1] {
            if nzval[k] != 0.0 {
                keep_rows.push(rowval[k]);
                keep_vals.push(nzval[k]);
                counts[c + 1] += 1;
            }
            k += 1;
        }
    }
    for c in 0..n {
        counts[c + 1] += counts[c];
    }
    CscMatrix::new(m, n, counts, keep_rows, keep_vals)
}

fn failure(status: SolveStatus, time: f64, msg: String) -> SolverOutcome {
    SolverOutcome { status, primal: None, objective: None, dual_objective: None, solve_time_s: time, reduced_accuracy: false, diagnostics: msg }
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, program: &ConicProgram, settings: &SolveSettings) -> SolverOutcome {
        let start = Instant::now();
        if let Err(e) = program.validate() {
            return failure(SolveStatus::NumericalFailure, 0.0, format!("invalid program: {e}"));
        }
        let n = program.num_vars;
        let std = standardize(program);
        if n == 0 || std.b.is_empty() {
            // Nothing for the interior-point method to do.
            let x = vec![0.0; n];
            let unbounded = program.objective.terms.iter().any(|t| t.1 != 0.0);
            let time = start.elapsed().as_secs_f64();
            if program.max_violation(&x) > settings.feasibility_tol {
                return failure(SolveStatus::Infeasible, time, "constant constraint violated".into());
            }
            if unbounded {
                return failure(SolveStatus::Unbounded, time, "unconstrained linear objective".into());
            }
            let obj = program.objective_value(&x);
            return SolverOutcome {
                status: SolveStatus::Optimal,
                primal: Some(x),
                objective: Some(obj),
                dual_objective: Some(obj),
                solve_time_s: time,
                reduced_accuracy: false,
                diagnostics: String::new(),
            };
        }
        let mut q = vec![0.0; n];
        for &(j, v) in &program.objective.terms {
            q[j] += v;
        }
        let p = CscMatrix::<f64>::zeros((n, n));
        let cfg = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_feas(settings.feasibility_tol)
            .tol_gap_abs(settings.gap_tol)
            .tol_gap_rel(settings.gap_tol)
            .max_iter(settings.max_iter)
            .build()
            .expect("valid solver settings");
        let mut solver = match DefaultSolver::new(&p, &q, &std.a, &std.b, &std.cones, cfg) {
            Ok(s) => s,
            Err(e) => {
                return failure(SolveStatus::NumericalFailure, start.elapsed().as_secs_f64(), format!("setup: {e:?}"))
            }
        };
        solver.solve();
        let sol = &solver.solution;
        let time = start.elapsed().as_secs_f64();
        let diag = format!("clarabel {:?} after {} iterations", sol.status, sol.iterations);
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            _ => SolveStatus::NumericalFailure,
        };
        if status != SolveStatus::Optimal || sol.x.iter().any(|v| !v.is_finite()) {
            let st = if status == SolveStatus::Optimal { SolveStatus::NumericalFailure } else { status };
            return failure(st, time, diag);
        }
        let x = sol.x.clone();
        let obj = program.objective_value(&x);
        SolverOutcome {
            status,
            primal: Some(x),
            objective: Some(obj),
            dual_objective: sol.obj_val_dual.is_finite().then(|| sol.obj_val_dual + program.objective.constant),
            solve_time_s: time,
            reduced_accuracy: sol.status == SolverStatus::AlmostSolved,
            diagnostics: diag,
        }
    }
}
