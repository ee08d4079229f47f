//! Per-mode transcription of the pushing problem over `N` knots: variable
//! layout, constraints, convex cost atoms, and lowering to conic programs.

use alloc::vec::Vec;

use crate::conic::{ConicError, ConicProgram, ProgramBuilder};
use crate::dynamics::LimitSurfaceModel;
use crate::expr::{Affine, QuadForm, Relation};
use crate::geometry::{Face, RegionDecomposition, SliderGeometry};
use crate::math::{self, Vec2};
use crate::sdp::{self, QcqpProblem, RelaxationError, SemidefiniteRelaxation, TighteningContext};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ModeError {
    #[error("need at least 2 knots, got {0}")]
    InvalidKnots(usize),
    #[error("timestep must be positive")]
    InvalidTimestep,
    #[error("cost weights must be positive")]
    InvalidWeights,
    #[error("face or region index {0} out of range")]
    UnknownFace(usize),
    #[error("trajectory layout does not match the mode")]
    MismatchedLayout,
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostWeights {
    pub k_pp: f64,
    pub k_ps: f64,
    pub k_vp: f64,
    pub k_vs: f64,
    pub k_f: f64,
    pub k_t: f64,
    pub k_phi: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { k_pp: 10.0, k_ps: 10.0, k_vp: 10.0, k_vs: 100.0, k_f: 10.0, k_t: 1.0, k_phi: 0.1 }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), ModeError> {
        let all = [self.k_pp, self.k_ps, self.k_vp, self.k_vs, self.k_f, self.k_t, self.k_phi];
        if all.iter().all(|w| w.is_finite() && *w > 0.0) {
            Ok(())
        } else {
            Err(ModeError::InvalidWeights)
        }
    }
}

/// Proximity cost `ψ = h k_T / (1 + φ / k_φ)` for a gap value `φ ≥ 0`.
pub fn proximity_cost(phi: f64, timestep: f64, weights: &CostWeights) -> f64 {
    timestep * weights.k_t / (1.0 + phi / weights.k_phi)
}

/// Everything a transcription needs besides the mode itself.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeContext {
    pub geometry: SliderGeometry,
    pub regions: RegionDecomposition,
    pub limit_surface: LimitSurfaceModel,
    pub mu_pusher: f64,
    pub weights: CostWeights,
    pub knots: usize,
    pub timestep: f64,
}

impl ModeContext {
    pub fn validate(&self) -> Result<(), ModeError> {
        if self.knots < 2 {
            return Err(ModeError::InvalidKnots(self.knots));
        }
        if !(self.timestep.is_finite() && self.timestep > 0.0) {
            return Err(ModeError::InvalidTimestep);
        }
        self.weights.validate()
    }

    pub fn workspace_half(&self) -> f64 {
        0.5 * self.regions.workspace_side
    }

    /// Upper bound on the normal force: enough to cross the workspace in one
    /// interval.
    pub fn max_normal_force(&self) -> f64 {
        self.regions.workspace_side * self.limit_surface.c_f / self.timestep
    }

    /// Faces whose gap is nonnegative on the whole of region `i`; the
    /// proximity cost of a non-contact knot is the largest over these.
    pub fn proximity_faces(&self, region: usize) -> Vec<usize> {
        let poly = &self.regions.regions[region].polygon;
        (0..self.regions.len())
            .filter(|&j| j == region || poly.iter().all(|p| self.regions.gap(j, *p) >= 0.0))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModeKind {
    /// Sticking contact on a face.
    Contact { face: usize },
    /// Pusher moves freely inside a region; slider at rest.
    NonContact { region: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symbol {
    SliderPos { knot: usize, axis: usize },
    Rot { knot: usize, comp: usize },
    /// Arc-length coordinate of the contact point along the face.
    ContactCoord { knot: usize },
    NormalForce { interval: usize },
    FrictionForce { interval: usize },
    PusherPos { knot: usize, axis: usize },
    PusherVel { interval: usize, axis: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadKind {
    Translation,
    Rotation,
    /// `r_k · r_{k+1} ≥ 0`: each step turns by at most a quarter turn.
    StepAngle,
    UnitNorm,
}

/// Convex cost atom over the transcription variables.
#[derive(Clone, Debug, PartialEq)]
pub enum CostAtom {
    /// `weight · ‖rows‖₂`
    Norm { weight: f64, rows: Vec<Affine> },
    /// `weight · ‖rows‖₂²`
    SquaredNorm { weight: f64, rows: Vec<Affine> },
    /// `max_j numerator / denominators_j`, each denominator positive.
    InverseAffine { numerator: f64, denominators: Vec<Affine> },
    Constant(f64),
}

impl CostAtom {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            CostAtom::Norm { weight, rows } => weight * math::sqrt(rows.iter().map(|r| { let v = r.eval(x); v * v }).sum()),
            CostAtom::SquaredNorm { weight, rows } => weight * rows.iter().map(|r| { let v = r.eval(x); v * v }).sum::<f64>(),
            CostAtom::InverseAffine { numerator, denominators } => {
                denominators.iter().map(|d| numerator / d.eval(x)).fold(f64::NEG_INFINITY, f64::max)
            }
            CostAtom::Constant(c) => *c,
        }
    }

    /// Quadratic form of a squared-norm atom.
    pub fn as_quadratic(&self) -> Option<QuadForm> {
        match self {
            CostAtom::SquaredNorm { weight, rows } => Some(
                rows.iter().fold(QuadForm::default(), |acc, r| acc.plus(&r.square())).scaled(*weight),
            ),
            _ => None,
        }
    }

    /// Adds the atom's epigraph to `b`, with transcription variable `i`
    /// replaced by `map[i]`, and returns the objective contribution.
    pub fn lower(&self, b: &mut ProgramBuilder, map: &[Affine]) -> Affine {
        let sub = |r: &Affine| -> Affine {
            r.terms.iter().fold(Affine::constant(r.constant), |acc, &(i, c)| acc + map[i].scaled(c))
        };
        match self {
            CostAtom::Norm { weight, rows } => {
                let t = b.add_var();
                b.soc(Affine::var(t), rows.iter().map(sub).collect());
                Affine::term(t, *weight)
            }
            CostAtom::SquaredNorm { weight, rows } => {
                let t = b.add_var();
                let s = math::sqrt(*weight);
                b.rsoc(Affine::var(t), Affine::constant(1.0), rows.iter().map(|r| sub(r).scaled(s)).collect());
                Affine::var(t)
            }
            CostAtom::InverseAffine { numerator, denominators } => {
                let t = b.add_var();
                for d in denominators {
                    b.rsoc(Affine::var(t), sub(d), alloc::vec![Affine::constant(math::sqrt(*numerator))]);
                }
                Affine::var(t)
            }
            CostAtom::Constant(c) => Affine::constant(*c),
        }
    }
}

/// Per-knot state in the frames used throughout: slider position in the
/// world, rotation `(cos θ, sin θ)`, pusher position in the slider frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KnotState {
    pub slider_pos: Vec2,
    pub rot: Vec2,
    pub pusher_pos: Vec2,
}

impl KnotState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.slider_pos[0], self.slider_pos[1], self.rot[0], self.rot[1], self.pusher_pos[0], self.pusher_pos[1]]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self { slider_pos: [x[0], x[1]], rot: [x[2], x[3]], pusher_pos: [x[4], x[5]] }
    }
}

/// Per-interval input: contact force (slider frame) and pusher velocity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KnotInput {
    pub force: Vec2,
    pub pusher_vel: Vec2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnotTrajectory {
    pub mode: ModeKind,
    pub timestep: f64,
    pub states: Vec<KnotState>,
    pub inputs: Vec<KnotInput>,
}

/// One mode's optimization problem over a flat variable vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTranscription {
    pub kind: ModeKind,
    pub knots: usize,
    pub timestep: f64,
    pub layout: Vec<Symbol>,
    pub affine: Vec<(Affine, Relation)>,
    pub quadratic: Vec<(QuadForm, Relation, QuadKind)>,
    /// Slider-frame translation dynamics; redundant given the world-frame
    /// rows and unit rotations, used only to tighten relaxations.
    pub body_frame_dynamics: Vec<QuadForm>,
    /// Variable groups of consecutive knot pairs.
    pub groups: Vec<Vec<usize>>,
    pub cost: Vec<CostAtom>,
    face: Option<Face>,
    pusher_radius: f64,
}

fn contact_index(n: usize, sym: Symbol) -> usize {
    match sym {
        Symbol::SliderPos { knot, axis } => 5 * knot + axis,
        Symbol::Rot { knot, comp } => 5 * knot + 2 + comp,
        Symbol::ContactCoord { knot } => 5 * knot + 4,
        Symbol::NormalForce { interval } => 5 * n + 2 * interval,
        Symbol::FrictionForce { interval } => 5 * n + 2 * interval + 1,
        _ => usize::MAX,
    }
}

fn free_index(n: usize, sym: Symbol) -> usize {
    match sym {
        Symbol::PusherPos { knot, axis } => 6 * knot + axis,
        Symbol::SliderPos { knot, axis } => 6 * knot + 2 + axis,
        Symbol::Rot { knot, comp } => 6 * knot + 4 + comp,
        Symbol::PusherVel { interval, axis } => 6 * n + 2 * interval + axis,
        _ => usize::MAX,
    }
}

impl ModeTranscription {
    pub fn num_vars(&self) -> usize {
        self.layout.len()
    }

    pub fn index(&self, sym: Symbol) -> Option<usize> {
        let i = match self.kind {
            ModeKind::Contact { .. } => contact_index(self.knots, sym),
            ModeKind::NonContact { .. } => free_index(self.knots, sym),
        };
        (i < self.layout.len() && self.layout[i] == sym).then_some(i)
    }

    fn idx(&self, sym: Symbol) -> usize {
        self.index(sym).expect("symbol present in layout")
    }

    fn var(&self, sym: Symbol) -> Affine {
        Affine::var(self.idx(sym))
    }

    pub fn face(&self) -> Option<&Face> {
        self.face.as_ref()
    }

    pub fn rotation_vars(&self) -> Vec<[usize; 2]> {
        (0..self.knots)
            .map(|k| [self.idx(Symbol::Rot { knot: k, comp: 0 }), self.idx(Symbol::Rot { knot: k, comp: 1 })])
            .collect()
    }

    /// Pusher position at knot `k` (slider frame) as an affine expression.
    pub fn pusher_expr(&self, k: usize) -> [Affine; 2] {
        match (self.kind, &self.face) {
            (ModeKind::Contact { .. }, Some(f)) => {
                let base = math::add(f.start, math::scale(f.normal, self.pusher_radius));
                let lc = self.idx(Symbol::ContactCoord { knot: k });
                [
                    Affine::from_terms(alloc::vec![(lc, f.tangent[0])], base[0]),
                    Affine::from_terms(alloc::vec![(lc, f.tangent[1])], base[1]),
                ]
            }
            _ => [self.var(Symbol::PusherPos { knot: k, axis: 0 }), self.var(Symbol::PusherPos { knot: k, axis: 1 })],
        }
    }

    /// Force at interval `k` (slider frame); zero outside contact.
    pub fn force_expr(&self, k: usize) -> [Affine; 2] {
        match &self.face {
            Some(f) => {
                let ln = self.idx(Symbol::NormalForce { interval: k });
                let lf = self.idx(Symbol::FrictionForce { interval: k });
                [
                    Affine::from_terms(alloc::vec![(ln, -f.normal[0]), (lf, f.tangent[0])], 0.0),
                    Affine::from_terms(alloc::vec![(ln, -f.normal[1]), (lf, f.tangent[1])], 0.0),
                ]
            }
            None => [Affine::zero(), Affine::zero()],
        }
    }

    /// `(p^S, r, p^P)` at knot `k`.
    pub fn state_exprs(&self, k: usize) -> [Affine; 6] {
        let [px, py] = self.pusher_expr(k);
        [
            self.var(Symbol::SliderPos { knot: k, axis: 0 }),
            self.var(Symbol::SliderPos { knot: k, axis: 1 }),
            self.var(Symbol::Rot { knot: k, comp: 0 }),
            self.var(Symbol::Rot { knot: k, comp: 1 }),
            px,
            py,
        ]
    }

    /// Largest affine and quadratic constraint violations at `x`.
    pub fn violations(&self, x: &[f64]) -> (f64, f64) {
        let a = self.affine.iter().map(|(f, r)| r.violation(f.eval(x))).fold(0.0, f64::max);
        let q = self.quadratic.iter().map(|(f, r, _)| r.violation(f.eval(x))).fold(0.0, f64::max);
        (a, q)
    }

    pub fn cost_value(&self, x: &[f64]) -> f64 {
        self.cost.iter().map(|c| c.eval(x)).sum()
    }

    pub fn trajectory(&self, x: &[f64]) -> Result<KnotTrajectory, ModeError> {
        if x.len() != self.num_vars() {
            return Err(ModeError::MismatchedLayout);
        }
        let states: Vec<KnotState> = (0..self.knots)
            .map(|k| KnotState::from_slice(&self.state_exprs(k).map(|e| e.eval(x))))
            .collect();
        let inputs = (0..self.knots - 1)
            .map(|k| {
                let force = self.force_expr(k).map(|e| e.eval(x));
                let pusher_vel = match self.kind {
                    ModeKind::Contact { .. } => math::scale(
                        math::sub(states[k + 1].pusher_pos, states[k].pusher_pos),
                        1.0 / self.timestep,
                    ),
                    ModeKind::NonContact { .. } => [
                        x[self.idx(Symbol::PusherVel { interval: k, axis: 0 })],
                        x[self.idx(Symbol::PusherVel { interval: k, axis: 1 })],
                    ],
                };
                KnotInput { force, pusher_vel }
            })
            .collect();
        Ok(KnotTrajectory { mode: self.kind, timestep: self.timestep, states, inputs })
    }

    /// Inverse of [`Self::trajectory`] for trajectories of this mode.
    pub fn encode(&self, traj: &KnotTrajectory) -> Result<Vec<f64>, ModeError> {
        if traj.mode != self.kind || traj.states.len() != self.knots || traj.inputs.len() + 1 != self.knots {
            return Err(ModeError::MismatchedLayout);
        }
        let mut x = alloc::vec![0.0; self.num_vars()];
        for (k, s) in traj.states.iter().enumerate() {
            for a in 0..2 {
                x[self.idx(Symbol::SliderPos { knot: k, axis: a })] = s.slider_pos[a];
                x[self.idx(Symbol::Rot { knot: k, comp: a })] = s.rot[a];
            }
            match &self.face {
                Some(f) => {
                    let pc = math::sub(s.pusher_pos, math::scale(f.normal, self.pusher_radius));
                    x[self.idx(Symbol::ContactCoord { knot: k })] = math::dot(math::sub(pc, f.start), f.tangent);
                }
                None => {
                    for a in 0..2 {
                        x[self.idx(Symbol::PusherPos { knot: k, axis: a })] = s.pusher_pos[a];
                    }
                }
            }
        }
        for (k, u) in traj.inputs.iter().enumerate() {
            match &self.face {
                Some(f) => {
                    x[self.idx(Symbol::NormalForce { interval: k })] = -math::dot(u.force, f.normal);
                    x[self.idx(Symbol::FrictionForce { interval: k })] = math::dot(u.force, f.tangent);
                }
                None => {
                    for a in 0..2 {
                        x[self.idx(Symbol::PusherVel { interval: k, axis: a })] = u.pusher_vel[a];
                    }
                }
            }
        }
        Ok(x)
    }

    /// The transcription as a QCQP: squared-norm atoms form the objective;
    /// the remaining atoms are returned for use on first moments.
    pub fn qcqp(&self) -> (QcqpProblem, Vec<CostAtom>) {
        let mut objective = QuadForm::default();
        let mut rest = Vec::new();
        for atom in &self.cost {
            match atom.as_quadratic() {
                Some(q) => objective = objective.plus(&q),
                None => rest.push(atom.clone()),
            }
        }
        let qcqp = QcqpProblem {
            num_vars: self.num_vars(),
            objective,
            quadratic: self.quadratic.iter().map(|(q, r, _)| (q.clone(), *r)).collect(),
            affine: self.affine.clone(),
            groups: self.groups.clone(),
        };
        (qcqp, rest)
    }
}

fn push_box(affine: &mut Vec<(Affine, Relation)>, var: usize, lo: f64, hi: f64) {
    affine.push((Affine::from_terms(alloc::vec![(var, 1.0)], -lo), Relation::Ge));
    affine.push((Affine::from_terms(alloc::vec![(var, -1.0)], hi), Relation::Ge));
}

/// World position of slider vertex `nu` at knot `k`, affine in `(p^S, r)`.
fn vertex_expr(tr: &ModeTranscription, k: usize, nu: Vec2) -> [Affine; 2] {
    let px = tr.idx(Symbol::SliderPos { knot: k, axis: 0 });
    let py = tr.idx(Symbol::SliderPos { knot: k, axis: 1 });
    let c = tr.idx(Symbol::Rot { knot: k, comp: 0 });
    let s = tr.idx(Symbol::Rot { knot: k, comp: 1 });
    [
        Affine::from_terms(alloc::vec![(px, 1.0), (c, nu[0]), (s, -nu[1])], 0.0),
        Affine::from_terms(alloc::vec![(py, 1.0), (s, nu[0]), (c, nu[1])], 0.0),
    ]
}

fn diff(a: &[Affine; 2], b: &[Affine; 2], scale: f64) -> Vec<Affine> {
    alloc::vec![(a[0].clone() - b[0].clone()).scaled(scale), (a[1].clone() - b[1].clone()).scaled(scale)]
}

/// Convex cost atoms of a transcription; see [`CostAtom`].
pub fn cost_terms(tr: &ModeTranscription, ctx: &ModeContext) -> Vec<CostAtom> {
    let w = &ctx.weights;
    let h = tr.timestep;
    let verts = ctx.geometry.vertices();
    let nv = verts.len() as f64;
    let mut atoms = Vec::new();
    let contact = matches!(tr.kind, ModeKind::Contact { .. });
    for k in 0..tr.knots - 1 {
        let p0 = tr.pusher_expr(k);
        let p1 = tr.pusher_expr(k + 1);
        atoms.push(CostAtom::Norm { weight: w.k_pp, rows: diff(&p1, &p0, 1.0) });
        let vel = if contact {
            diff(&p1, &p0, 1.0 / h)
        } else {
            alloc::vec![
                tr.var(Symbol::PusherVel { interval: k, axis: 0 }),
                tr.var(Symbol::PusherVel { interval: k, axis: 1 }),
            ]
        };
        atoms.push(CostAtom::SquaredNorm { weight: w.k_vp, rows: vel });
        if contact {
            for nu in verts {
                let a = vertex_expr(tr, k, *nu);
                let b = vertex_expr(tr, k + 1, *nu);
                atoms.push(CostAtom::Norm { weight: w.k_ps / nv, rows: diff(&b, &a, 1.0) });
                atoms.push(CostAtom::SquaredNorm { weight: w.k_vs / nv, rows: diff(&b, &a, 1.0 / h) });
            }
            atoms.push(CostAtom::SquaredNorm { weight: w.k_f * h, rows: tr.force_expr(k).to_vec() });
        }
    }
    for k in 0..tr.knots {
        match tr.kind {
            ModeKind::Contact { .. } => atoms.push(CostAtom::Constant(h * w.k_t)),
            ModeKind::NonContact { region } => {
                let p = tr.pusher_expr(k);
                let denominators = ctx
                    .proximity_faces(region)
                    .into_iter()
                    .map(|j| {
                        let g = ctx.regions.regions[j].gap;
                        let c = 1.0 / w.k_phi;
                        (p[0].scaled(g.normal[0] * c) + p[1].scaled(g.normal[1] * c))
                            .plus_constant(1.0 - c * (math::dot(g.normal, g.anchor) + g.radius))
                    })
                    .collect();
                atoms.push(CostAtom::InverseAffine { numerator: h * w.k_t, denominators });
            }
        }
    }
    atoms
}

/// Sticking contact on `face`, with the contact point parametrized along the
/// face so that the pusher touches it identically.
pub fn build_contact_mode(face: usize, ctx: &ModeContext) -> Result<ModeTranscription, ModeError> {
    ctx.validate()?;
    let f = ctx.geometry.faces().get(face).ok_or(ModeError::UnknownFace(face))?.clone();
    let n = ctx.knots;
    let h = ctx.timestep;
    let mut layout = Vec::with_capacity(7 * n);
    for k in 0..n {
        layout.push(Symbol::SliderPos { knot: k, axis: 0 });
        layout.push(Symbol::SliderPos { knot: k, axis: 1 });
        layout.push(Symbol::Rot { knot: k, comp: 0 });
        layout.push(Symbol::Rot { knot: k, comp: 1 });
        layout.push(Symbol::ContactCoord { knot: k });
    }
    for k in 0..n - 1 {
        layout.push(Symbol::NormalForce { interval: k });
        layout.push(Symbol::FrictionForce { interval: k });
    }
    let mut tr = ModeTranscription {
        kind: ModeKind::Contact { face },
        knots: n,
        timestep: h,
        layout,
        affine: Vec::new(),
        quadratic: Vec::new(),
        body_frame_dynamics: Vec::new(),
        groups: Vec::new(),
        cost: Vec::new(),
        face: Some(f.clone()),
        pusher_radius: ctx.regions.pusher_radius,
    };
    let ls = ctx.limit_surface;
    let half = ctx.workspace_half();
    let mu = ctx.mu_pusher;
    let mut affine = Vec::new();
    for k in 0..n {
        push_box(&mut affine, tr.idx(Symbol::ContactCoord { knot: k }), 0.0, f.length);
        for a in 0..2 {
            push_box(&mut affine, tr.idx(Symbol::SliderPos { knot: k, axis: a }), -half, half);
        }
        for c in 0..2 {
            push_box(&mut affine, tr.idx(Symbol::Rot { knot: k, comp: c }), -1.0, 1.0);
        }
    }
    for k in 0..n - 1 {
        let lc0 = tr.idx(Symbol::ContactCoord { knot: k });
        let lc1 = tr.idx(Symbol::ContactCoord { knot: k + 1 });
        affine.push((Affine::from_terms(alloc::vec![(lc1, 1.0), (lc0, -1.0)], 0.0), Relation::Eq));
        let ln = tr.idx(Symbol::NormalForce { interval: k });
        let lf = tr.idx(Symbol::FrictionForce { interval: k });
        push_box(&mut affine, ln, 0.0, ctx.max_normal_force());
        affine.push((Affine::from_terms(alloc::vec![(ln, mu), (lf, -1.0)], 0.0), Relation::Ge));
        affine.push((Affine::from_terms(alloc::vec![(ln, mu), (lf, 1.0)], 0.0), Relation::Ge));
    }
    let a = h / ls.c_f;
    let b = h / ls.c_tau;
    let mut quadratic = Vec::new();
    let mut body = Vec::new();
    for k in 0..n - 1 {
        let c0 = tr.var(Symbol::Rot { knot: k, comp: 0 });
        let s0 = tr.var(Symbol::Rot { knot: k, comp: 1 });
        let c1 = tr.var(Symbol::Rot { knot: k + 1, comp: 0 });
        let s1 = tr.var(Symbol::Rot { knot: k + 1, comp: 1 });
        let [fx, fy] = tr.force_expr(k);
        let dx = tr.var(Symbol::SliderPos { knot: k + 1, axis: 0 }) - tr.var(Symbol::SliderPos { knot: k, axis: 0 });
        let dy = tr.var(Symbol::SliderPos { knot: k + 1, axis: 1 }) - tr.var(Symbol::SliderPos { knot: k, axis: 1 });
        // Δp^S = h R(r_k) f / c_f
        let rfx = c0.product(&fx).plus(&s0.product(&fy).scaled(-1.0));
        let rfy = s0.product(&fx).plus(&c0.product(&fy));
        quadratic.push((dx.to_quad().plus(&rfx.scaled(-a)), Relation::Eq, QuadKind::Translation));
        quadratic.push((dy.to_quad().plus(&rfy.scaled(-a)), Relation::Eq, QuadKind::Translation));
        // c_k s_{k+1} − s_k c_{k+1} = h τ / c_τ, τ = p^c × f
        let lc = tr.idx(Symbol::ContactCoord { knot: k });
        let pcx = Affine::from_terms(alloc::vec![(lc, f.tangent[0])], f.start[0]);
        let pcy = Affine::from_terms(alloc::vec![(lc, f.tangent[1])], f.start[1]);
        let tau = pcx.product(&fy).plus(&pcy.product(&fx).scaled(-1.0));
        let sin_step = c0.product(&s1).plus(&s0.product(&c1).scaled(-1.0));
        quadratic.push((sin_step.plus(&tau.scaled(-b)), Relation::Eq, QuadKind::Rotation));
        let cos_step = c0.product(&c1).plus(&s0.product(&s1));
        quadratic.push((cos_step, Relation::Ge, QuadKind::StepAngle));
        // R(r_k)ᵀ Δp^S = h f / c_f
        body.push(c0.product(&dx).plus(&s0.product(&dy)).plus_affine(&fx.scaled(-a)));
        body.push(c0.product(&dy).plus(&s0.product(&dx).scaled(-1.0)).plus_affine(&fy.scaled(-a)));
    }
    for k in 0..n {
        let c = tr.var(Symbol::Rot { knot: k, comp: 0 });
        let s = tr.var(Symbol::Rot { knot: k, comp: 1 });
        quadratic.push((c.square().plus(&s.square()).plus(&QuadForm::constant(-1.0)), Relation::Eq, QuadKind::UnitNorm));
    }
    let groups = (0..n - 1)
        .map(|k| {
            let mut g: Vec<usize> = (5 * k..5 * k + 5).collect();
            g.push(tr.idx(Symbol::NormalForce { interval: k }));
            g.push(tr.idx(Symbol::FrictionForce { interval: k }));
            g.extend(5 * (k + 1)..5 * (k + 1) + 5);
            g
        })
        .collect();
    tr.affine = affine;
    tr.quadratic = quadratic;
    tr.body_frame_dynamics = body;
    tr.groups = groups;
    tr.cost = cost_terms(&tr, ctx);
    Ok(tr)
}

/// Free pusher motion inside region `region` with the slider at rest.
pub fn build_noncontact_mode(region: usize, ctx: &ModeContext) -> Result<ModeTranscription, ModeError> {
    ctx.validate()?;
    if region >= ctx.regions.len() {
        return Err(ModeError::UnknownFace(region));
    }
    let n = ctx.knots;
    let h = ctx.timestep;
    let mut layout = Vec::with_capacity(8 * n);
    for k in 0..n {
        layout.push(Symbol::PusherPos { knot: k, axis: 0 });
        layout.push(Symbol::PusherPos { knot: k, axis: 1 });
        layout.push(Symbol::SliderPos { knot: k, axis: 0 });
        layout.push(Symbol::SliderPos { knot: k, axis: 1 });
        layout.push(Symbol::Rot { knot: k, comp: 0 });
        layout.push(Symbol::Rot { knot: k, comp: 1 });
    }
    for k in 0..n - 1 {
        layout.push(Symbol::PusherVel { interval: k, axis: 0 });
        layout.push(Symbol::PusherVel { interval: k, axis: 1 });
    }
    let mut tr = ModeTranscription {
        kind: ModeKind::NonContact { region },
        knots: n,
        timestep: h,
        layout,
        affine: Vec::new(),
        quadratic: Vec::new(),
        body_frame_dynamics: Vec::new(),
        groups: alloc::vec![(0..8 * n - 2).collect()],
        cost: Vec::new(),
        face: None,
        pusher_radius: ctx.regions.pusher_radius,
    };
    let half = ctx.workspace_half();
    let mut affine = Vec::new();
    let hs = ctx.regions.all_halfspaces(region);
    for k in 0..n {
        let px = tr.idx(Symbol::PusherPos { knot: k, axis: 0 });
        let py = tr.idx(Symbol::PusherPos { knot: k, axis: 1 });
        for hsp in &hs {
            affine.push((Affine::from_terms(alloc::vec![(px, hsp.normal[0]), (py, hsp.normal[1])], -hsp.offset), Relation::Ge));
        }
    }
    for a in 0..2 {
        push_box(&mut affine, tr.idx(Symbol::SliderPos { knot: 0, axis: a }), -half, half);
        push_box(&mut affine, tr.idx(Symbol::Rot { knot: 0, comp: a }), -1.0, 1.0);
    }
    for k in 0..n - 1 {
        for a in 0..2 {
            let p0 = tr.idx(Symbol::PusherPos { knot: k, axis: a });
            let p1 = tr.idx(Symbol::PusherPos { knot: k + 1, axis: a });
            let v = tr.idx(Symbol::PusherVel { interval: k, axis: a });
            affine.push((Affine::from_terms(alloc::vec![(p1, 1.0), (p0, -1.0), (v, -h)], 0.0), Relation::Eq));
        }
        for sym in [
            |k, a| Symbol::SliderPos { knot: k, axis: a },
            |k, c| Symbol::Rot { knot: k, comp: c },
        ] {
            for a in 0..2 {
                let x0 = tr.idx(sym(k, a));
                let x1 = tr.idx(sym(k + 1, a));
                affine.push((Affine::from_terms(alloc::vec![(x1, 1.0), (x0, -1.0)], 0.0), Relation::Eq));
            }
        }
    }
    tr.affine = affine;
    tr.cost = cost_terms(&tr, ctx);
    Ok(tr)
}

/// Direct evaluation of the trajectory cost from physical quantities.
pub fn evaluate_cost(traj: &KnotTrajectory, ctx: &ModeContext) -> Result<f64, ModeError> {
    if traj.states.len() < 2 || traj.inputs.len() + 1 != traj.states.len() {
        return Err(ModeError::MismatchedLayout);
    }
    let w = &ctx.weights;
    let h = traj.timestep;
    let verts = ctx.geometry.vertices();
    let nv = verts.len() as f64;
    let mut total = 0.0;
    for (k, u) in traj.inputs.iter().enumerate() {
        let (a, b) = (&traj.states[k], &traj.states[k + 1]);
        total += w.k_pp * math::norm(math::sub(b.pusher_pos, a.pusher_pos));
        total += w.k_vp * math::dot(u.pusher_vel, u.pusher_vel);
        for nu in verts {
            let pa = crate::geometry::vertex_world_position(a.slider_pos, a.rot, *nu);
            let pb = crate::geometry::vertex_world_position(b.slider_pos, b.rot, *nu);
            let d = math::sub(pb, pa);
            total += w.k_ps / nv * math::norm(d);
            total += w.k_vs / nv * math::dot(d, d) / (h * h);
        }
        total += w.k_f * h * math::dot(u.force, u.force);
    }
    for s in &traj.states {
        let phi = match traj.mode {
            ModeKind::Contact { face } => {
                ctx.regions.regions.get(face).ok_or(ModeError::UnknownFace(face))?.gap.eval(s.pusher_pos)
            }
            ModeKind::NonContact { region } => {
                if region >= ctx.regions.len() {
                    return Err(ModeError::UnknownFace(region));
                }
                ctx.proximity_faces(region)
                    .into_iter()
                    .map(|j| ctx.regions.gap(j, s.pusher_pos))
                    .fold(f64::INFINITY, f64::min)
            }
        };
        total += proximity_cost(phi, h, w);
    }
    Ok(total)
}

/// A mode as a conic program with affine maps to its boundary states.
#[derive(Clone, Debug, PartialEq)]
pub struct LoweredMode {
    pub program: ConicProgram,
    /// State at the first knot, in program variables.
    pub entry_state: Vec<Affine>,
    /// State at the last knot.
    pub exit_state: Vec<Affine>,
    /// Transcription variable `i` as an expression of program variables.
    pub var_map: Vec<Affine>,
    pub relaxation: Option<SemidefiniteRelaxation>,
}

fn map_state(state: &[Affine; 6], map: &[Affine]) -> Vec<Affine> {
    state
        .iter()
        .map(|e| e.terms.iter().fold(Affine::constant(e.constant), |acc, &(i, c)| acc + map[i].scaled(c)))
        .collect()
}

/// Exact convex program of a transcription without quadratic constraints.
pub fn lower_convex(tr: &ModeTranscription) -> Result<LoweredMode, ModeError> {
    assert!(tr.quadratic.is_empty(), "lower_convex needs a transcription without quadratic constraints");
    let n = tr.num_vars();
    let mut b = ProgramBuilder::with_vars(n);
    for (a, r) in &tr.affine {
        match r {
            Relation::Eq => b.zero(a.clone()),
            Relation::Ge => b.nonneg(a.clone()),
        }
    }
    let map: Vec<Affine> = (0..n).map(Affine::var).collect();
    for atom in &tr.cost {
        let obj = atom.lower(&mut b, &map);
        b.minimize(obj);
    }
    Ok(LoweredMode {
        program: b.build()?,
        entry_state: map_state(&tr.state_exprs(0), &map),
        exit_state: map_state(&tr.state_exprs(tr.knots - 1), &map),
        var_map: map,
        relaxation: None,
    })
}

/// Semidefinite relaxation of a contact transcription, tightened with the
/// slider-frame dynamics and the geodesic cut between `rot_start` and
/// `rot_target`.
pub fn lower_relaxed(tr: &ModeTranscription, rot_start: Vec2, rot_target: Vec2) -> Result<LoweredMode, ModeError> {
    let (qcqp, rest) = tr.qcqp();
    let mut rel = sdp::relax(&qcqp)?;
    let ctx = TighteningContext {
        rot_start,
        rot_target,
        rotation_vars: tr.rotation_vars(),
        redundant_quadratic: tr.body_frame_dynamics.clone(),
    };
    sdp::add_tightening(&mut rel, &ctx)?;
    let map: Vec<Affine> = (0..tr.num_vars()).map(|i| Affine::var(rel.first_moment(i))).collect();
    let mut b = ProgramBuilder::with_vars(rel.program.num_vars);
    let obj = b.embed(&rel.program, 0, None);
    b.minimize(obj);
    for atom in &rest {
        let obj = atom.lower(&mut b, &map);
        b.minimize(obj);
    }
    Ok(LoweredMode {
        program: b.build()?,
        entry_state: map_state(&tr.state_exprs(0), &map),
        exit_state: map_state(&tr.state_exprs(tr.knots - 1), &map),
        var_map: map,
        relaxation: Some(rel),
    })
}
