//! The end-to-end `plan` call.

use std::time::Instant;

use pushgcs_core::conic::{ConicSolver, SolveSettings};
use pushgcs_core::dynamics::{quasi_static_velocity, rescale_forces_to_limit_surface, SpatialForce};
use pushgcs_core::gcs::{self, build_relaxation, PathCandidate};
use pushgcs_core::math::{self, Vec2};
use pushgcs_core::modes::{evaluate_cost, KnotTrajectory, ModeKind, ModeTranscription};

use super::audit::{audit, AuditInput, AuditReport};
use super::graph::{build_mode_graph, role_label, ModeGraph};
use super::refine::{nonconvex_refine, PathProblem, RefineOptions};
use super::task::TaskSpec;
use super::PlanError;

/// Largest tolerated violation of the ordering `C_relax ≤ C_round`.
pub const BOUND_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GapError {
    #[error("rounded cost {c_round} is below the relaxation bound {c_relax}")]
    InvalidBound { c_relax: f64, c_round: f64 },
    #[error("relaxation cost {0} is not positive")]
    NonPositiveBound(f64),
}

/// Relative optimality gap `(C_round − C_relax) / C_relax`.
pub fn certify_gap(c_relax: f64, c_round: f64) -> Result<f64, GapError> {
    if !(c_relax > 0.0) {
        return Err(GapError::NonPositiveBound(c_relax));
    }
    if c_round < c_relax - BOUND_TOL {
        return Err(GapError::InvalidBound { c_relax, c_round });
    }
    Ok((c_round - c_relax) / c_relax)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanOptions {
    pub rounding_attempts: usize,
    pub flow_threshold: f64,
    pub solver: SolveSettings,
    pub refine: RefineOptions,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            rounding_attempts: gcs::DEFAULT_ROUNDING_ATTEMPTS,
            flow_threshold: gcs::DEFAULT_FLOW_THRESHOLD,
            solver: SolveSettings::default(),
            refine: RefineOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub relaxation_s: f64,
    pub rounding_s: f64,
    pub refinement_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateReport {
    pub vertices: Vec<usize>,
    pub restriction_cost: Option<f64>,
    pub refined_cost: Option<f64>,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    /// Graph vertices from source to target.
    pub vertex_path: Vec<usize>,
    pub mode_labels: Vec<String>,
    pub segments: Vec<KnotTrajectory>,
    pub c_relax: f64,
    pub c_round: f64,
    pub gap: f64,
    pub audit: AuditReport,
    pub quadratic_residual: f64,
    pub affine_residual: f64,
    /// Contact forces scaled onto the limit surface, per segment and interval.
    pub scaled_forces: Vec<Vec<Vec2>>,
    /// Trajectory cost with the rescaled forces substituted.
    pub c_round_scaled: f64,
    pub candidates: Vec<CandidateReport>,
    pub timings: Timings,
}

pub fn audit_input<'a>(task: &'a TaskSpec, graph: &'a ModeGraph) -> AuditInput<'a> {
    AuditInput {
        geometry: &task.geometry,
        pusher_radius: task.pusher.radius,
        mu_pusher: task.friction.mu_pusher,
        limit_surface: &graph.ctx.limit_surface,
        workspace_side: task.workspace_side,
        start: task.initial_state().to_array(),
        goal: task.target_state().to_array(),
    }
}

fn scaled_forces(task: &TaskSpec, graph: &ModeGraph, segments: &[KnotTrajectory]) -> Vec<Vec<Vec2>> {
    let model = &graph.ctx.limit_surface;
    segments
        .iter()
        .map(|t| match t.mode {
            ModeKind::Contact { face } => {
                let n = task.geometry.faces()[face].normal;
                let wrenches: Vec<SpatialForce> = t
                    .inputs
                    .iter()
                    .zip(&t.states)
                    .map(|(u, s)| SpatialForce::from_contact(math::sub(s.pusher_pos, math::scale(n, task.pusher.radius)), u.force))
                    .collect();
                let vels: Vec<_> = wrenches.iter().map(|w| quasi_static_velocity(model, w)).collect();
                rescale_forces_to_limit_surface(model, &wrenches, &vels).iter().map(|w| w.f).collect()
            }
            ModeKind::NonContact { .. } => t.inputs.iter().map(|u| u.force).collect(),
        })
        .collect()
}

struct Refined {
    cost: f64,
    segments: Vec<KnotTrajectory>,
    quadratic: f64,
    affine: f64,
}

fn refine_candidate(
    task: &TaskSpec,
    graph: &ModeGraph,
    path: &PathCandidate,
    solver: &dyn ConicSolver,
    opts: &PlanOptions,
    report: &mut CandidateReport,
) -> Option<Refined> {
    let restriction = match gcs::solve_restriction(&graph.gcs, path, solver, &opts.solver) {
        Ok(r) => r,
        Err(e) => {
            report.message = Some(e.to_string());
            return None;
        }
    };
    report.restriction_cost = Some(restriction.cost);
    let mut modes: Vec<&ModeTranscription> = Vec::new();
    let mut guess = Vec::new();
    for (&v, values) in path.vertices.iter().zip(&restriction.vertex_values) {
        if let (Some(tr), Some(low)) = (graph.transcription(v), graph.lowered(v)) {
            modes.push(tr);
            guess.extend(low.var_map.iter().map(|e| e.eval(values)));
        }
    }
    let problem = PathProblem::new(
        &modes,
        &task.initial_state().to_array(),
        &task.target_state().to_array(),
        task.initial_slider.rot(),
        task.target_slider.rot(),
    );
    let refined = match nonconvex_refine(&problem, &guess, solver, &opts.refine) {
        Ok(r) => r,
        Err(e) => {
            report.message = Some(e.to_string());
            return None;
        }
    };
    let segments: Result<Vec<KnotTrajectory>, _> =
        modes.iter().enumerate().map(|(m, tr)| tr.trajectory(problem.local(&refined.x, m))).collect();
    let segments = match segments {
        Ok(s) => s,
        Err(e) => {
            report.message = Some(e.to_string());
            return None;
        }
    };
    let cost: f64 = match segments.iter().map(|s| evaluate_cost(s, &graph.ctx)).sum::<Result<f64, _>>() {
        Ok(c) => c,
        Err(e) => {
            report.message = Some(e.to_string());
            return None;
        }
    };
    report.refined_cost = Some(cost);
    Some(Refined { cost, segments, quadratic: refined.quadratic_residual, affine: refined.affine_residual })
}

/// Plans with a prebuilt graph; see [`plan`].
pub fn plan_on_graph(
    task: &TaskSpec,
    graph: &ModeGraph,
    seed: u64,
    solver: &dyn ConicSolver,
    opts: &PlanOptions,
) -> Result<PlanResult, PlanError> {
    let t0 = Instant::now();
    let relaxation = build_relaxation(&graph.gcs)?;
    let flows = relaxation.solve(solver, &opts.solver)?;
    let relaxation_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let paths = gcs::round_paths(&graph.gcs, &flows.flows, opts.rounding_attempts, seed, opts.flow_threshold)?;
    let rounding_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let mut reports: Vec<CandidateReport> = paths
        .iter()
        .map(|p| CandidateReport { vertices: p.vertices.clone(), restriction_cost: None, refined_cost: None, message: None })
        .collect();
    let results: Vec<Option<Refined>> = std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .zip(reports.iter_mut())
            .map(|(p, rep)| scope.spawn(move || refine_candidate(task, graph, p, solver, opts, rep)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or(None)).collect()
    });
    let refinement_s = t2.elapsed().as_secs_f64();

    let input = audit_input(task, graph);
    let mut best: Option<(usize, Refined, AuditReport)> = None;
    for (i, r) in results.into_iter().enumerate() {
        let Some(r) = r else { continue };
        let report = audit(&r.segments, &input);
        if !report.passes(1e-6, 1e-8) {
            reports[i].message = Some(format!("audit rejected the refined trajectory: {report:?}"));
            continue;
        }
        if best.as_ref().map_or(true, |(_, b, _)| r.cost < b.cost) {
            best = Some((i, r, report));
        }
    }
    let Some((i, best, report)) = best else {
        return Err(PlanError::NoFeasiblePlan(reports));
    };
    // Each path restriction is a feasible point of the flow relaxation, so
    // its cost caps the relaxation optimum. This absorbs solves that stop at
    // reduced accuracy slightly above the true optimum.
    let c_relax = reports.iter().filter_map(|r| r.restriction_cost).fold(flows.cost, f64::min);
    let gap = certify_gap(c_relax, best.cost)?;
    let vertex_path = paths[i].vertices.clone();
    let forces = scaled_forces(task, graph, &best.segments);
    let mut rescaled = best.segments.clone();
    for (seg, fs) in rescaled.iter_mut().zip(&forces) {
        for (u, f) in seg.inputs.iter_mut().zip(fs) {
            u.force = *f;
        }
    }
    let c_round_scaled = rescaled.iter().map(|s| evaluate_cost(s, &graph.ctx)).sum::<Result<f64, _>>()?;
    Ok(PlanResult {
        mode_labels: vertex_path.iter().map(|&v| role_label(&graph.roles[v])).collect(),
        vertex_path,
        scaled_forces: forces,
        c_round_scaled,
        segments: best.segments,
        c_relax,
        c_round: best.cost,
        gap,
        audit: report,
        quadratic_residual: best.quadratic,
        affine_residual: best.affine,
        candidates: reports,
        timings: Timings { relaxation_s, rounding_s, refinement_s },
    })
}

/// Builds the mode graph, solves its relaxation, rounds, refines every
/// candidate and returns the cheapest feasible trajectory with its gap.
pub fn plan(task: &TaskSpec, seed: u64, solver: &dyn ConicSolver, opts: &PlanOptions) -> Result<PlanResult, PlanError> {
    let graph = build_mode_graph(task)?;
    plan_on_graph(task, &graph, seed, solver, opts)
}
