//! Size report for an assembled relaxation.

use serde::Serialize;

use pushgcs_core::conic::ConicProgram;
use pushgcs_core::gcs::build_relaxation;

use crate::planner::{build_mode_graph, PlanError, TaskSpec};

/// Published sizes for the box slider with three knots. Our block layout
/// differs, so these are printed for orientation only.
pub const REFERENCE_BOX_CONSTRAINTS: usize = 48_846;
pub const REFERENCE_BOX_SCALARS: usize = 8_854;
pub const REFERENCE_BOX_PSD_BLOCKS: usize = 88;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProblemStats {
    pub graph_vertices: usize,
    pub interior_vertices: usize,
    pub graph_edges: usize,
    pub num_constraints: usize,
    pub num_scalar_variables: usize,
    pub num_psd_blocks: usize,
    pub equality_rows: usize,
    pub inequality_rows: usize,
    pub second_order_cones: usize,
    pub rotated_cones: usize,
    /// `[dim, count]` pairs in increasing dimension.
    pub psd_block_sizes: Vec<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceStats>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReferenceStats {
    pub note: &'static str,
    pub num_constraints: usize,
    pub num_scalar_variables: usize,
    pub num_psd_blocks: usize,
}

impl ProblemStats {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stats serialize");
        s.push('\n');
        s
    }
}

/// Builds the mode graph and its relaxation without solving. Reference
/// values are attached when `box_preset_n3` is set.
pub fn problem_stats(task: &TaskSpec, box_preset_n3: bool) -> Result<(ProblemStats, ConicProgram), PlanError> {
    let graph = build_mode_graph(task)?;
    let relaxation = build_relaxation(&graph.gcs)?;
    let s = relaxation.program.stats();
    let mut sizes: Vec<[usize; 2]> = Vec::new();
    let mut dims = s.psd_dims.clone();
    dims.sort_unstable();
    for d in dims {
        match sizes.last_mut() {
            Some(last) if last[0] == d => last[1] += 1,
            _ => sizes.push([d, 1]),
        }
    }
    let stats = ProblemStats {
        graph_vertices: graph.gcs.vertices.len(),
        interior_vertices: graph.interior_vertex_count(),
        graph_edges: graph.gcs.edges.len(),
        num_constraints: s.num_constraints(),
        num_scalar_variables: s.num_vars,
        num_psd_blocks: s.psd_dims.len(),
        equality_rows: s.zero_rows,
        inequality_rows: s.nonnegative_rows,
        second_order_cones: s.second_order_cones,
        rotated_cones: s.rotated_cones,
        psd_block_sizes: sizes,
        reference: box_preset_n3.then_some(ReferenceStats {
            note: "published values for comparison only; block layouts differ",
            num_constraints: REFERENCE_BOX_CONSTRAINTS,
            num_scalar_variables: REFERENCE_BOX_SCALARS,
            num_psd_blocks: REFERENCE_BOX_PSD_BLOCKS,
        }),
    };
    Ok((stats, relaxation.program))
}
