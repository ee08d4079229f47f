//! Graphs of convex sets: the flow/perspective relaxation of the shortest
//! path problem, flow-guided rounding, and path restrictions.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::conic::{ConicError, ConicProgram, ConicSolver, ProgramBuilder, SolveSettings, SolveStatus, SolverOutcome};
use crate::expr::Affine;

/// Flows below this are ignored by rounding.
pub const DEFAULT_FLOW_THRESHOLD: f64 = 1e-4;
/// Randomized traversals per rounding call.
pub const DEFAULT_ROUNDING_ATTEMPTS: usize = 16;

const MAX_EXPANSIONS: usize = 200_000;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GcsError {
    #[error("target is not reachable from source")]
    DisconnectedGraph,
    #[error("edge {0} joins a vertex to itself")]
    SelfEdge(usize),
    #[error("edge {0} enters the source or leaves the target")]
    InvalidEndpoint(usize),
    #[error("edge {edge} coupling has {got} variables, expected at least {expected}")]
    CouplingSize { edge: usize, expected: usize, got: usize },
    #[error("vertex {0} exit and entry state dimensions differ")]
    StateDimension(usize),
    #[error("relaxation solve failed: {0:?}")]
    RelaxationFailed(SolveStatus, String),
    #[error("no rounded path reaches the target")]
    NoPathFound,
    #[error("path is not a simple source-target walk along existing edges")]
    InvalidPath,
    #[error("restriction solve failed: {0:?}")]
    InfeasibleRestriction(SolveStatus, String),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcsVertex {
    pub label: String,
    /// Constraints define the convex set, the objective is the vertex cost.
    pub program: ConicProgram,
    /// Boundary states used by continuity couplings.
    pub entry: Vec<Affine>,
    pub exit: Vec<Affine>,
}

impl GcsVertex {
    /// Singleton vertex `{point}` with zero cost.
    pub fn point(label: impl Into<String>, point: &[f64]) -> Self {
        let mut b = ProgramBuilder::with_vars(point.len());
        for (i, &p) in point.iter().enumerate() {
            b.zero(Affine::from_terms(alloc::vec![(i, 1.0)], -p));
        }
        let state: Vec<Affine> = (0..point.len()).map(Affine::var).collect();
        Self { label: label.into(), program: b.build().expect("valid point program"), entry: state.clone(), exit: state }
    }
}

/// Edge `(from, to)`; its program's variables are the `from` copy, then the
/// `to` copy, then any auxiliary variables.
#[derive(Clone, Debug, PartialEq)]
pub struct GcsEdge {
    pub from: usize,
    pub to: usize,
    pub program: ConicProgram,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GcsGraph {
    pub vertices: Vec<GcsVertex>,
    pub edges: Vec<GcsEdge>,
    pub source: usize,
    pub target: usize,
}

impl GcsGraph {
    pub fn add_vertex(&mut self, v: GcsVertex) -> usize {
        self.vertices.push(v);
        self.vertices.len() - 1
    }

    /// Edge whose only constraint is `exit(from) = entry(to)`.
    pub fn add_continuity_edge(&mut self, from: usize, to: usize) -> usize {
        let program = continuity_program(&self.vertices[from], &self.vertices[to]);
        self.edges.push(GcsEdge { from, to, program });
        self.edges.len() - 1
    }

    pub fn add_edge(&mut self, edge: GcsEdge) -> usize {
        self.edges.push(edge);
        self.edges.len() - 1
    }

    pub fn out_edges(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().enumerate().filter(move |(_, e)| e.from == v).map(|(i, _)| i)
    }

    pub fn in_edges(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().enumerate().filter(move |(_, e)| e.to == v).map(|(i, _)| i)
    }

    fn adjacency(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let n = self.vertices.len();
        let mut out = alloc::vec![Vec::new(); n];
        let mut inc = alloc::vec![Vec::new(); n];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.from].push(i);
            inc[e.to].push(i);
        }
        (out, inc)
    }

    pub fn reachable_from_source(&self) -> Vec<bool> {
        let (out, _) = self.adjacency();
        let mut seen = alloc::vec![false; self.vertices.len()];
        let mut stack = alloc::vec![self.source];
        seen[self.source] = true;
        while let Some(u) = stack.pop() {
            for &e in &out[u] {
                let v = self.edges[e].to;
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    pub fn validate(&self) -> Result<(), GcsError> {
        for (i, e) in self.edges.iter().enumerate() {
            if e.from == e.to {
                return Err(GcsError::SelfEdge(i));
            }
            if e.to == self.source || e.from == self.target {
                return Err(GcsError::InvalidEndpoint(i));
            }
            let need = self.vertices[e.from].program.num_vars + self.vertices[e.to].program.num_vars;
            if e.program.num_vars < need {
                return Err(GcsError::CouplingSize { edge: i, expected: need, got: e.program.num_vars });
            }
        }
        if !self.reachable_from_source()[self.target] {
            return Err(GcsError::DisconnectedGraph);
        }
        Ok(())
    }
}

/// Coupling program `exit(u) − entry(v) = 0` over `(x_u, x_v)`.
pub fn continuity_program(u: &GcsVertex, v: &GcsVertex) -> ConicProgram {
    let nu = u.program.num_vars;
    let mut b = ProgramBuilder::with_vars(nu + v.program.num_vars);
    for (a, e) in u.exit.iter().zip(&v.entry) {
        b.zero(a.clone() - e.remap(|i| i + nu, None));
    }
    b.build().expect("continuity indices in range")
}

/// Variable offsets of one edge's copies inside the relaxation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeCopies {
    pub flow: usize,
    pub from_offset: usize,
    pub to_offset: usize,
    pub aux_offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowRelaxation {
    pub program: ConicProgram,
    pub copies: Vec<EdgeCopies>,
}

/// Perspective relaxation with one flow and one copy of each endpoint per
/// edge. Vertex costs are charged on incoming edges (outgoing for the source).
pub fn build_relaxation(graph: &GcsGraph) -> Result<FlowRelaxation, GcsError> {
    graph.validate()?;
    let (out, inc) = graph.adjacency();
    let mut b = ProgramBuilder::new();
    let m = graph.edges.len();
    let first_flow = b.add_vars(m);
    let mut copies = Vec::with_capacity(m);
    for (i, e) in graph.edges.iter().enumerate() {
        let y = first_flow + i;
        let nu = graph.vertices[e.from].program.num_vars;
        let nv = graph.vertices[e.to].program.num_vars;
        let from_offset = b.add_vars(nu);
        let to_offset = b.add_vars(nv);
        let aux_offset = b.add_vars(e.program.num_vars - nu - nv);
        copies.push(EdgeCopies { flow: y, from_offset, to_offset, aux_offset });
        b.nonneg(Affine::var(y));
        b.nonneg(Affine::from_terms(alloc::vec![(y, -1.0)], 1.0));
        let cu = b.embed(&graph.vertices[e.from].program, from_offset, Some(y));
        let cv = b.embed(&graph.vertices[e.to].program, to_offset, Some(y));
        if e.from == graph.source {
            b.minimize(cu);
        }
        b.minimize(cv);
        let map = |j: usize| {
            if j < nu {
                from_offset + j
            } else if j < nu + nv {
                to_offset + j - nu
            } else {
                aux_offset + j - nu - nv
            }
        };
        for c in &e.program.constraints {
            b.push(crate::conic::ConeConstraint {
                cone: c.cone,
                rows: c.rows.iter().map(|r| r.remap(map, Some(y))).collect(),
            });
        }
        b.minimize(e.program.objective.remap(map, Some(y)));
    }
    let flow_sum = |edges: &[usize]| Affine::from_terms(edges.iter().map(|&e| (first_flow + e, 1.0)).collect(), 0.0);
    for v in 0..graph.vertices.len() {
        if v == graph.source {
            b.zero(flow_sum(&out[v]).plus_constant(-1.0));
            continue;
        }
        if v == graph.target {
            b.zero(flow_sum(&inc[v]).plus_constant(-1.0));
            continue;
        }
        b.zero(flow_sum(&inc[v]) - flow_sum(&out[v]));
        b.nonneg(flow_sum(&inc[v]).scaled(-1.0).plus_constant(1.0));
        let n = graph.vertices[v].program.num_vars;
        for k in 0..n {
            let mut terms = Vec::with_capacity(inc[v].len() + out[v].len());
            terms.extend(inc[v].iter().map(|&e| (copies[e].to_offset + k, 1.0)));
            terms.extend(out[v].iter().map(|&e| (copies[e].from_offset + k, -1.0)));
            if !terms.is_empty() {
                b.zero(Affine::from_terms(terms, 0.0));
            }
        }
        // Two-cycle elimination: y_uv + y_vu ≤ in-flow(v).
        for &e in &out[v] {
            let w = graph.edges[e].to;
            if let Some(&back) = inc[v].iter().find(|&&f| graph.edges[f].from == w) {
                let rest = flow_sum(&inc[v]) - Affine::var(first_flow + e) - Affine::var(first_flow + back);
                b.nonneg(rest.clone());
                // The copy of v left after removing the visit through w must
                // satisfy v's linear constraints at the remaining flow. This
                // stops paths from swapping segments at v.
                let leftover = |k: usize| -> Vec<(usize, f64)> {
                    let mut t: Vec<(usize, f64)> =
                        inc[v].iter().filter(|&&f| f != back).map(|&f| (copies[f].to_offset + k, 1.0)).collect();
                    t.push((copies[e].from_offset + k, -1.0));
                    t
                };
                for c in &graph.vertices[v].program.constraints {
                    if !matches!(c.cone, crate::conic::Cone::Zero | crate::conic::Cone::Nonnegative) {
                        continue;
                    }
                    let rows = c
                        .rows
                        .iter()
                        .map(|r| {
                            let mut acc = rest.scaled(r.constant);
                            for &(k, coef) in &r.terms {
                                for (i, x) in leftover(k) {
                                    acc = acc.with_term(i, coef * x);
                                }
                            }
                            acc.simplified()
                        })
                        .collect();
                    b.push(crate::conic::ConeConstraint { cone: c.cone, rows });
                }
            }
        }
    }
    Ok(FlowRelaxation { program: b.build()?, copies })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSolution {
    pub cost: f64,
    pub flows: Vec<f64>,
    pub primal: Vec<f64>,
    pub outcome: SolverOutcome,
}

impl FlowRelaxation {
    pub fn solve(&self, solver: &dyn ConicSolver, settings: &SolveSettings) -> Result<FlowSolution, GcsError> {
        let outcome = solver.solve(&self.program, settings);
        match (&outcome.primal, outcome.objective) {
            (Some(x), Some(cost)) if outcome.status == SolveStatus::Optimal => Ok(FlowSolution {
                cost,
                flows: self.copies.iter().map(|c| x[c.flow]).collect(),
                primal: x.clone(),
                outcome: outcome.clone(),
            }),
            _ => Err(GcsError::RelaxationFailed(outcome.status, outcome.diagnostics.clone())),
        }
    }

    /// Copy of `edge`'s `to` vertex, divided by the edge flow.
    pub fn normalized_copy(&self, graph: &GcsGraph, sol: &FlowSolution, edge: usize) -> Vec<f64> {
        let c = self.copies[edge];
        let n = graph.vertices[graph.edges[edge].to].program.num_vars;
        let y = sol.flows[edge].max(1e-12);
        sol.primal[c.to_offset..c.to_offset + n].iter().map(|v| v / y).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PathCandidate {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

/// Picks index `i` with probability proportional to `weights[i]`.
fn weighted_pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// `attempts` randomized depth-first traversals from the source following
/// edges with probability proportional to flow. Distinct paths are returned
/// in order of discovery.
pub fn round_paths(
    graph: &GcsGraph,
    flows: &[f64],
    attempts: usize,
    seed: u64,
    threshold: f64,
) -> Result<Vec<PathCandidate>, GcsError> {
    let (out, _) = graph.adjacency();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<PathCandidate> = Vec::new();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    for _ in 0..attempts {
        if let Some(p) = random_dfs(graph, &out, flows, threshold, &mut rng) {
            if seen.insert(p.edges.clone()) {
                found.push(p);
            }
        }
    }
    if found.is_empty() {
        Err(GcsError::NoPathFound)
    } else {
        Ok(found)
    }
}

fn random_dfs(
    graph: &GcsGraph,
    out: &[Vec<usize>],
    flows: &[f64],
    threshold: f64,
    rng: &mut ChaCha8Rng,
) -> Option<PathCandidate> {
    let mut on_path = alloc::vec![false; graph.vertices.len()];
    let mut path_v = alloc::vec![graph.source];
    let mut path_e: Vec<usize> = Vec::new();
    on_path[graph.source] = true;
    let options = |u: usize, on_path: &[bool]| -> Vec<usize> {
        out[u].iter().copied().filter(|&e| flows[e] >= threshold && !on_path[graph.edges[e].to]).collect()
    };
    let mut stack: Vec<Vec<usize>> = alloc::vec![options(graph.source, &on_path)];
    let mut expansions = 0;
    while let Some(cands) = stack.last_mut() {
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return None;
        }
        if cands.is_empty() {
            stack.pop();
            if let Some(v) = path_v.pop() {
                on_path[v] = false;
            }
            path_e.pop();
            continue;
        }
        let weights: Vec<f64> = cands.iter().map(|&e| flows[e]).collect();
        let pick = weighted_pick(rng, &weights);
        let e = cands.swap_remove(pick);
        let v = graph.edges[e].to;
        if on_path[v] {
            continue;
        }
        path_v.push(v);
        path_e.push(e);
        on_path[v] = true;
        if v == graph.target {
            return Some(PathCandidate { vertices: path_v, edges: path_e });
        }
        stack.push(options(v, &on_path));
    }
    None
}

/// The convex program of a fixed path and the offset of each vertex's
/// variables in it.
pub fn restriction_program(graph: &GcsGraph, path: &PathCandidate) -> Result<(ConicProgram, Vec<usize>), GcsError> {
    let valid = path.vertices.first() == Some(&graph.source)
        && path.vertices.last() == Some(&graph.target)
        && path.edges.len() + 1 == path.vertices.len()
        && path.edges.iter().enumerate().all(|(k, &e)| {
            e < graph.edges.len() && graph.edges[e].from == path.vertices[k] && graph.edges[e].to == path.vertices[k + 1]
        })
        && path.vertices.iter().collect::<BTreeSet<_>>().len() == path.vertices.len();
    if !valid {
        return Err(GcsError::InvalidPath);
    }
    let mut b = ProgramBuilder::new();
    let mut offsets = Vec::with_capacity(path.vertices.len());
    for &v in &path.vertices {
        let off = b.add_vars(graph.vertices[v].program.num_vars);
        offsets.push(off);
        let c = b.embed(&graph.vertices[v].program, off, None);
        b.minimize(c);
    }
    for (k, &e) in path.edges.iter().enumerate() {
        let edge = &graph.edges[e];
        let nu = graph.vertices[edge.from].program.num_vars;
        let nv = graph.vertices[edge.to].program.num_vars;
        let aux = b.add_vars(edge.program.num_vars - nu - nv);
        let (fo, to) = (offsets[k], offsets[k + 1]);
        let map = |j: usize| {
            if j < nu {
                fo + j
            } else if j < nu + nv {
                to + j - nu
            } else {
                aux + j - nu - nv
            }
        };
        for c in &edge.program.constraints {
            b.push(crate::conic::ConeConstraint { cone: c.cone, rows: c.rows.iter().map(|r| r.remap(map, None)).collect() });
        }
        b.minimize(edge.program.objective.remap(map, None));
    }
    Ok((b.build()?, offsets))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestrictionSolution {
    pub cost: f64,
    /// Values of each path vertex's program variables.
    pub vertex_values: Vec<Vec<f64>>,
    pub outcome: SolverOutcome,
}

pub fn solve_restriction(
    graph: &GcsGraph,
    path: &PathCandidate,
    solver: &dyn ConicSolver,
    settings: &SolveSettings,
) -> Result<RestrictionSolution, GcsError> {
    let (program, offsets) = restriction_program(graph, path)?;
    let outcome = solver.solve(&program, settings);
    match (&outcome.primal, outcome.objective) {
        (Some(x), Some(cost)) if outcome.status == SolveStatus::Optimal => {
            let vertex_values = path
                .vertices
                .iter()
                .zip(&offsets)
                .map(|(&v, &o)| x[o..o + graph.vertices[v].program.num_vars].to_vec())
                .collect();
            Ok(RestrictionSolution { cost, vertex_values, outcome: outcome.clone() })
        }
        _ => Err(GcsError::InfeasibleRestriction(outcome.status, outcome.diagnostics.clone())),
    }
}
