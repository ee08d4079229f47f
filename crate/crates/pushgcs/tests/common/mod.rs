//! Random instance generators and independent oracles shared by the
//! integration tests and the acceptance run.
#![allow(dead_code)]

use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pushgcs::core::conic::{ConicProgram, ConicSolver, ProgramBuilder, SolveSettings};
use pushgcs::core::dynamics::simulate_step;
use pushgcs::core::expr::{Affine, QuadForm, Relation};
use pushgcs::core::gcs::{GcsGraph, GcsVertex};
use pushgcs::core::math;
use pushgcs::core::modes::{KnotInput, KnotState, KnotTrajectory, ModeContext, ModeKind, ModeTranscription};
use pushgcs::core::sdp::{add_tightening, relax, QcqpProblem, SemidefiniteRelaxation, TighteningContext};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

fn random_quad(rng: &mut ChaCha8Rng, support: &[usize]) -> QuadForm {
    let mut q = QuadForm::default();
    for (a, &i) in support.iter().enumerate() {
        q.linear.push((i, rng.gen_range(-1.0..1.0)));
        for &j in &support[a..] {
            if rng.gen_bool(0.6) {
                q.quadratic.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    q
}

/// Band QCQP over `n` variables with a known feasible point: groups are
/// windows of three consecutive variables, every quadratic lives in one
/// window, and the box `[−2, 2]ⁿ` keeps the relaxation bounded.
pub fn band_qcqp(rng: &mut ChaCha8Rng, n: usize) -> (QcqpProblem, Vec<f64>) {
    let point: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let width = 3.min(n);
    let groups: Vec<Vec<usize>> = (0..=n - width).map(|s| (s..s + width).collect()).collect();
    let mut objective = QuadForm::default();
    for g in &groups {
        objective = objective.plus(&random_quad(rng, g));
    }
    let mut quadratic = Vec::new();
    for _ in 0..rng.gen_range(1..=2 * n) {
        let g = &groups[rng.gen_range(0..groups.len())];
        let mut q = random_quad(rng, g);
        let rel = if rng.gen_bool(0.4) { Relation::Eq } else { Relation::Ge };
        let slack = if rel == Relation::Eq { 0.0 } else { rng.gen_range(0.0..0.5) };
        q.constant = slack - q.eval(&point);
        quadratic.push((q, rel));
    }
    let mut affine = Vec::new();
    for i in 0..n {
        affine.push((Affine::from_terms(vec![(i, 1.0)], 2.0), Relation::Ge));
        affine.push((Affine::from_terms(vec![(i, -1.0)], 2.0), Relation::Ge));
    }
    for _ in 0..rng.gen_range(0..=n) {
        let mut terms = Vec::new();
        for i in 0..n {
            if rng.gen_bool(0.5) {
                terms.push((i, rng.gen_range(-1.0..1.0)));
            }
        }
        let a = Affine::from_terms(terms, 0.0);
        let rel = if rng.gen_bool(0.3) { Relation::Eq } else { Relation::Ge };
        let slack = if rel == Relation::Eq { 0.0 } else { rng.gen_range(0.0..0.5) };
        let a = a.clone().plus_constant(slack - a.eval(&point));
        affine.push((a, rel));
    }
    (QcqpProblem { num_vars: n, objective, quadratic, affine, groups }, point)
}

/// Strictly convex QP `min ½ xᵀ P x + qᵀ x` s.t. `A x + c ≥ 0` posed as a
/// one-block QCQP, with its exact minimizer and the smallest eigenvalue of `P`.
pub struct ConvexQp {
    pub qcqp: QcqpProblem,
    pub minimizer: Vec<f64>,
    pub min_curvature: f64,
}

pub fn convex_qp(rng: &mut ChaCha8Rng, n: usize) -> ConvexQp {
    let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let p = &l * l.transpose() + DMatrix::identity(n, n) * 0.5;
    let q = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    let m = rng.gen_range(0..=3);
    let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
    let c = DVector::from_fn(m, |r, _| rng.gen_range(0.1..0.5) - a.row(r).dot(&x0.transpose()));
    let minimizer = active_set_qp(&p, &q, &a, &c);
    let mut objective = QuadForm::default();
    for i in 0..n {
        objective.linear.push((i, q[i]));
        objective.quadratic.push((i, i, 0.5 * p[(i, i)]));
        for j in i + 1..n {
            objective.quadratic.push((i, j, p[(i, j)]));
        }
    }
    let affine = (0..m)
        .map(|r| (Affine::from_terms((0..n).map(|col| (col, a[(r, col)])).collect(), c[r]), Relation::Ge))
        .collect();
    let min_curvature = p.symmetric_eigen().eigenvalues.min();
    let qcqp = QcqpProblem { num_vars: n, objective, quadratic: Vec::new(), affine, groups: vec![(0..n).collect()] };
    ConvexQp { qcqp, minimizer, min_curvature }
}

/// Exact minimizer by enumerating active sets: the KKT point with feasible
/// primal and nonnegative multipliers.
fn active_set_qp(p: &DMatrix<f64>, q: &DVector<f64>, a: &DMatrix<f64>, c: &DVector<f64>) -> Vec<f64> {
    let (m, n) = a.shape();
    for mask in 0u32..1 << m {
        let act: Vec<usize> = (0..m).filter(|r| mask & (1 << r) != 0).collect();
        let k = act.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(p);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-q));
        for (s, &r) in act.iter().enumerate() {
            for j in 0..n {
                kkt[(n + s, j)] = a[(r, j)];
                kkt[(j, n + s)] = -a[(r, j)];
            }
            rhs[n + s] = -c[r];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x = sol.rows(0, n);
        let primal_ok = (0..m).all(|r| a.row(r).dot(&x.transpose()) + c[r] >= -1e-12);
        let dual_ok = (0..k).all(|s| sol[n + s] >= -1e-12);
        if primal_ok && dual_ok {
            return x.iter().copied().collect();
        }
    }
    unreachable!("a strictly convex feasible QP has a KKT point")
}

/// Random digraph over state-free vertices `0 = source`, `n − 1 = target`
/// with nonnegative vertex costs; a random chain keeps the target reachable.
pub fn cost_digraph(rng: &mut ChaCha8Rng) -> (GcsGraph, Vec<f64>, Vec<(usize, usize)>) {
    let n = rng.gen_range(2..=12);
    let costs: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { rng.gen_range(0.0..10.0) }).collect();
    let mut edges = Vec::new();
    let mut chain = vec![0];
    chain.extend((1..n - 1).filter(|_| rng.gen_bool(0.3)));
    chain.push(n - 1);
    for w in chain.windows(2) {
        edges.push((w[0], w[1]));
    }
    for u in 0..n - 1 {
        for v in 1..n {
            if u != v && !edges.contains(&(u, v)) && rng.gen_bool(0.3) {
                edges.push((u, v));
            }
        }
    }
    let mut graph = GcsGraph::default();
    for (i, &c) in costs.iter().enumerate() {
        let mut v = GcsVertex::point(format!("v{i}"), &[]);
        v.program.objective = Affine::constant(c);
        graph.add_vertex(v);
    }
    graph.source = 0;
    graph.target = n - 1;
    for &(u, v) in &edges {
        graph.add_continuity_edge(u, v);
    }
    (graph, costs, edges)
}

/// Dijkstra over vertex costs charged on entry; `None` when unreachable.
pub fn dijkstra(n: usize, costs: &[f64], edges: &[(usize, usize)], s: usize, t: usize) -> Option<(f64, Vec<Vec<usize>>)> {
    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            o.0.total_cmp(&self.0)
        }
    }
    let mut dist = vec![f64::INFINITY; n];
    dist[s] = costs[s];
    let mut heap = BinaryHeap::from([Item(dist[s], s)]);
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(_, b) in edges.iter().filter(|e| e.0 == u) {
            let nd = d + costs[b];
            if nd < dist[b] {
                dist[b] = nd;
                heap.push(Item(nd, b));
            }
        }
    }
    if !dist[t].is_finite() {
        return None;
    }
    // Every optimal simple path, by walking tight edges back from t.
    let mut paths = Vec::new();
    let mut stack = vec![vec![t]];
    while let Some(p) = stack.pop() {
        let head = p[0];
        if head == s {
            paths.push(p);
            continue;
        }
        for &(a, b) in edges {
            if b == head && !p.contains(&a) && (dist[a] + costs[b] - dist[b]).abs() <= 1e-9 {
                let mut q = vec![a];
                q.extend(&p);
                stack.push(q);
            }
        }
    }
    Some((dist[t], paths))
}

/// Sticking rollout in contact with `face`, forward simulated from a
/// random pose and redrawn until it satisfies every affine row of `tr`.
pub fn sticking_rollout(rng: &mut ChaCha8Rng, ctx: &ModeContext, tr: &ModeTranscription, face: usize) -> KnotTrajectory {
    let f = &ctx.geometry.faces()[face];
    let f_max = ctx.max_normal_force();
    loop {
        let contact = f.point_at(rng.gen_range(0.1..0.9) * f.length);
        let pusher = math::add(contact, math::scale(f.normal, ctx.regions.pusher_radius));
        let theta: f64 = rng.gen_range(-3.0..3.0);
        let mut x = [rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), theta.cos(), theta.sin(), pusher[0], pusher[1]];
        let mut states = vec![KnotState::from_slice(&x)];
        let mut inputs = Vec::new();
        for _ in 0..ctx.knots - 1 {
            let ln: f64 = f_max * rng.gen_range(0.02..0.2);
            let lf = ln * ctx.mu_pusher * rng.gen_range(-1.0..1.0);
            let force = math::add(math::scale(f.normal, -ln), math::scale(f.tangent, lf));
            x = simulate_step(&x, &[force[0], force[1], 0.0, 0.0], contact, ctx.timestep, &ctx.limit_surface).unwrap();
            states.push(KnotState::from_slice(&x));
            inputs.push(KnotInput { force, pusher_vel: [0.0, 0.0] });
        }
        let traj = KnotTrajectory { mode: ModeKind::Contact { face }, timestep: ctx.timestep, states, inputs };
        let z = tr.encode(&traj).unwrap();
        let (quad, aff) = tr.violations(&z);
        if quad <= 1e-9 && aff <= 1e-12 {
            return traj;
        }
    }
}

/// Relaxation of a contact transcription with its first and last slider
/// positions pinned, optionally tightened, as a conic program.
pub fn pinned_contact_relaxation(tr: &ModeTranscription, traj: &KnotTrajectory, tighten: bool) -> (ConicProgram, SemidefiniteRelaxation) {
    let (mut qcqp, rest) = tr.qcqp();
    for k in [0, tr.knots - 1] {
        let target = traj.states[k].to_array();
        for (e, v) in tr.state_exprs(k).iter().take(2).zip(target) {
            qcqp.affine.push((e.clone().plus_constant(-v), Relation::Eq));
        }
    }
    let mut rel = relax(&qcqp).unwrap();
    if tighten {
        let ctx = TighteningContext {
            rot_start: traj.states[0].rot,
            rot_target: traj.states[tr.knots - 1].rot,
            rotation_vars: tr.rotation_vars(),
            redundant_quadratic: tr.body_frame_dynamics.clone(),
        };
        add_tightening(&mut rel, &ctx).unwrap();
    }
    let map: Vec<Affine> = (0..tr.num_vars()).map(|i| Affine::var(rel.first_moment(i))).collect();
    let mut b = ProgramBuilder::with_vars(rel.program.num_vars);
    let obj = b.embed(&rel.program, 0, None);
    b.minimize(obj);
    for atom in &rest {
        let o = atom.lower(&mut b, &map);
        b.minimize(o);
    }
    (b.build().unwrap(), rel)
}

pub fn solve(solver: &dyn ConicSolver, p: &ConicProgram) -> (f64, Vec<f64>) {
    solve_with(solver, p, &SolveSettings::default())
}

pub fn solve_with(solver: &dyn ConicSolver, p: &ConicProgram, settings: &SolveSettings) -> (f64, Vec<f64>) {
    let out = solver.solve(p, settings);
    assert!(out.is_optimal(), "{:?}: {}", out.status, out.diagnostics);
    (out.objective.unwrap(), out.primal.unwrap())
}

/// Random small conic program with every cone type, feasible and bounded.
pub fn random_conic_program(rng: &mut ChaCha8Rng) -> ConicProgram {
    let n = rng.gen_range(2..=6);
    let mut b = ProgramBuilder::with_vars(n);
    let r = |rng: &mut ChaCha8Rng| -> Affine {
        Affine::from_terms((0..n).map(|i| (i, rng.gen_range(-1.0..1.0))).collect(), 0.0)
    };
    // Bounded box around a feasible center.
    for i in 0..n {
        b.nonneg(Affine::from_terms(vec![(i, 1.0)], 3.0));
        b.nonneg(Affine::from_terms(vec![(i, -1.0)], 3.0));
    }
    if rng.gen_bool(0.5) {
        let a = r(rng);
        b.zero(a.plus_constant(rng.gen_range(-0.3..0.3)));
    }
    let t = r(rng).plus_constant(4.0);
    let xs = (0..rng.gen_range(1..=3)).map(|_| r(rng)).collect();
    b.soc(t, xs);
    let t = r(rng).plus_constant(2.0);
    let u = r(rng).plus_constant(2.0);
    b.rsoc(t, u, vec![r(rng)]);
    let dim = rng.gen_range(1..=3);
    let mut entries = Vec::new();
    for j in 0..dim {
        for i in 0..=j {
            let e = r(rng).scaled(0.3);
            entries.push(if i == j { e.plus_constant(2.0) } else { e });
        }
    }
    b.psd(dim, entries);
    b.minimize(r(rng).plus_constant(rng.gen_range(-1.0..1.0)));
    b.build().unwrap()
}

/// Mode context of a preset slider with default physics.
pub fn mode_context(geometry: pushgcs::core::SliderGeometry, knots: usize) -> ModeContext {
    use pushgcs::planner::{Pose, TaskSpec};
    let mut task = TaskSpec::new(geometry, Pose::default(), Pose::default(), [0.2, 0.0], [0.2, 0.0]);
    task.knots = knots;
    task.context().expect("preset task is valid")
}
