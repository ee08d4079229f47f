//! The mode graph: contact vertices, per-pair copies of the non-contact
//! vertices, and source/target attachment.

use pushgcs_core::gcs::{GcsGraph, GcsVertex};
use pushgcs_core::math;
use pushgcs_core::modes::{self, LoweredMode, ModeContext, ModeKind, ModeTranscription};

use super::task::TaskSpec;
use super::PlanError;

/// Endpoint of a non-contact copy subgraph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Endpoint {
    Source,
    Target,
    Contact(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexRole {
    Source,
    Target,
    Contact { face: usize },
    NonContact { region: usize, pair: (Endpoint, Endpoint) },
}

impl VertexRole {
    pub fn mode(&self) -> Option<ModeKind> {
        match *self {
            VertexRole::Contact { face } => Some(ModeKind::Contact { face }),
            VertexRole::NonContact { region, .. } => Some(ModeKind::NonContact { region }),
            _ => None,
        }
    }

    /// Counted in the interior vertex formula `N_F + N_F·C(N_F, 2)`.
    pub fn is_interior(&self) -> bool {
        match self {
            VertexRole::Contact { .. } => true,
            VertexRole::NonContact { pair: (Endpoint::Contact(_), Endpoint::Contact(_)), .. } => true,
            _ => false,
        }
    }
}

fn endpoint_label(e: Endpoint) -> String {
    match e {
        Endpoint::Source => "s".into(),
        Endpoint::Target => "t".into(),
        Endpoint::Contact(i) => format!("C{i}"),
    }
}

pub fn role_label(r: &VertexRole) -> String {
    match r {
        VertexRole::Source => "source".into(),
        VertexRole::Target => "target".into(),
        VertexRole::Contact { face } => format!("contact_{face}"),
        VertexRole::NonContact { region, pair } => {
            format!("free_{region}[{}-{}]", endpoint_label(pair.0), endpoint_label(pair.1))
        }
    }
}

pub struct ModeGraph {
    pub gcs: GcsGraph,
    pub roles: Vec<VertexRole>,
    pub ctx: ModeContext,
    pub contact_modes: Vec<ModeTranscription>,
    pub free_modes: Vec<ModeTranscription>,
    pub contact_lowered: Vec<LoweredMode>,
    pub free_lowered: Vec<LoweredMode>,
}

impl ModeGraph {
    pub fn interior_vertex_count(&self) -> usize {
        self.roles.iter().filter(|r| r.is_interior()).count()
    }

    pub fn transcription(&self, v: usize) -> Option<&ModeTranscription> {
        match self.roles[v] {
            VertexRole::Contact { face } => Some(&self.contact_modes[face]),
            VertexRole::NonContact { region, .. } => Some(&self.free_modes[region]),
            _ => None,
        }
    }

    pub fn lowered(&self, v: usize) -> Option<&LoweredMode> {
        match self.roles[v] {
            VertexRole::Contact { face } => Some(&self.contact_lowered[face]),
            VertexRole::NonContact { region, .. } => Some(&self.free_lowered[region]),
            _ => None,
        }
    }
}

fn mode_vertex(label: String, l: &LoweredMode) -> GcsVertex {
    GcsVertex { label, program: l.program.clone(), entry: l.entry_state.clone(), exit: l.exit_state.clone() }
}

/// Face whose contact manifold holds pusher position `p`, if any.
fn touching_face(ctx: &ModeContext, p: math::Vec2) -> Option<usize> {
    ctx.geometry.faces().iter().position(|f| {
        let s = math::dot(math::sub(p, f.start), f.tangent);
        ctx.regions.gap(f.index, p).abs() <= 1e-9 && (-1e-9..=f.length + 1e-9).contains(&s)
    })
}

pub fn build_mode_graph(task: &TaskSpec) -> Result<ModeGraph, PlanError> {
    let ctx = task.context()?;
    let nf = ctx.geometry.num_faces();
    let r_s = task.initial_slider.rot();
    let r_t = task.target_slider.rot();
    let contact_modes: Vec<ModeTranscription> =
        (0..nf).map(|i| modes::build_contact_mode(i, &ctx)).collect::<Result<_, _>>()?;
    let free_modes: Vec<ModeTranscription> =
        (0..nf).map(|i| modes::build_noncontact_mode(i, &ctx)).collect::<Result<_, _>>()?;
    let contact_lowered: Vec<LoweredMode> =
        contact_modes.iter().map(|t| modes::lower_relaxed(t, r_s, r_t)).collect::<Result<_, _>>()?;
    let free_lowered: Vec<LoweredMode> = free_modes.iter().map(modes::lower_convex).collect::<Result<_, _>>()?;

    let mut g = GcsGraph::default();
    let mut roles = Vec::new();
    g.source = g.add_vertex(GcsVertex::point("source", &task.initial_state().to_array()));
    roles.push(VertexRole::Source);
    g.target = g.add_vertex(GcsVertex::point("target", &task.target_state().to_array()));
    roles.push(VertexRole::Target);
    let contact: Vec<usize> = (0..nf)
        .map(|i| {
            let role = VertexRole::Contact { face: i };
            roles.push(role);
            g.add_vertex(mode_vertex(role_label(&role), &contact_lowered[i]))
        })
        .collect();

    let mut pairs: Vec<(Endpoint, Endpoint)> = Vec::new();
    for i in 0..nf {
        for j in (i + 1)..nf {
            pairs.push((Endpoint::Contact(i), Endpoint::Contact(j)));
        }
    }
    for i in 0..nf {
        pairs.push((Endpoint::Source, Endpoint::Contact(i)));
    }
    for i in 0..nf {
        pairs.push((Endpoint::Contact(i), Endpoint::Target));
    }
    pairs.push((Endpoint::Source, Endpoint::Target));

    let start_p = task.initial_pusher;
    let goal_p = task.target_pusher;
    for pair in pairs {
        let copies: Vec<usize> = (0..nf)
            .map(|k| {
                let role = VertexRole::NonContact { region: k, pair };
                roles.push(role);
                g.add_vertex(mode_vertex(role_label(&role), &free_lowered[k]))
            })
            .collect();
        for k in 0..nf {
            for l in 0..nf {
                if k != l && ctx.regions.intersects(k, l) {
                    g.add_continuity_edge(copies[k], copies[l]);
                }
            }
        }
        // Links into and out of the subgraph. Edges that could only close a
        // cycle through the endpoint (back into a source subgraph, or out of
        // a target subgraph into a contact mode) are omitted.
        for (end, is_first) in [(pair.0, true), (pair.1, false)] {
            match end {
                Endpoint::Contact(i) => {
                    let other_is_source = pair.0 == Endpoint::Source;
                    let other_is_target = pair.1 == Endpoint::Target;
                    if !other_is_source || is_first {
                        g.add_continuity_edge(contact[i], copies[i]);
                    }
                    if !other_is_target || !is_first {
                        g.add_continuity_edge(copies[i], contact[i]);
                    }
                }
                Endpoint::Source => {
                    for k in 0..nf {
                        if ctx.regions.contains(k, start_p, 1e-12) {
                            g.add_continuity_edge(g.source, copies[k]);
                        }
                    }
                }
                Endpoint::Target => {
                    for k in 0..nf {
                        if ctx.regions.contains(k, goal_p, 1e-12) {
                            g.add_continuity_edge(copies[k], g.target);
                        }
                    }
                }
            }
        }
    }
    if let Some(i) = touching_face(&ctx, start_p) {
        g.add_continuity_edge(g.source, contact[i]);
    }
    if let Some(i) = touching_face(&ctx, goal_p) {
        g.add_continuity_edge(contact[i], g.target);
    }
    g.validate().map_err(|_| PlanError::UnreachableTarget)?;
    Ok(ModeGraph { gcs: g, roles, ctx, contact_modes, free_modes, contact_lowered, free_lowered })
}
