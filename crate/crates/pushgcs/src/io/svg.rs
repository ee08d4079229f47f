//! SVG strip: one panel per knot with the slider outline, pusher disk and
//! applied force.

use std::fmt::Write as _;

use pushgcs_core::geometry::SliderGeometry;
use pushgcs_core::math::{self, Vec2};
use pushgcs_core::modes::KnotTrajectory;

const PANEL_PX: f64 = 160.0;
const MARGIN_PX: f64 = 8.0;
/// Arrow length in metres per newton.
const FORCE_SCALE: f64 = 0.05;

/// Draws every knot of `segments` in order. `scaled_forces` follows the
/// segment/interval layout of the plan; the last knot of each segment
/// carries no force.
pub fn render(
    geometry: &SliderGeometry,
    pusher_radius: f64,
    workspace_side: f64,
    segments: &[KnotTrajectory],
    scaled_forces: &[Vec<Vec2>],
) -> String {
    let knots: Vec<_> = segments
        .iter()
        .enumerate()
        .flat_map(|(s, seg)| {
            seg.states.iter().enumerate().map(move |(k, st)| {
                let force = scaled_forces.get(s).and_then(|f| f.get(k)).copied();
                (s, k, *st, force)
            })
        })
        .collect();
    let px = PANEL_PX / workspace_side;
    let width = MARGIN_PX + knots.len() as f64 * (PANEL_PX + MARGIN_PX);
    let height = PANEL_PX + 2.0 * MARGIN_PX;
    let half = workspace_side / 2.0;
    // World (x, y) to panel pixels, y up.
    let to_px = |p: Vec2| [(p[0] + half) * px, (half - p[1]) * px];

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}">"#
    )
    .unwrap();
    for (i, (s, k, st, force)) in knots.iter().enumerate() {
        let x0 = MARGIN_PX + i as f64 * (PANEL_PX + MARGIN_PX);
        writeln!(out, r#"  <g class="knot" data-segment="{s}" data-knot="{k}" transform="translate({x0:.2},{MARGIN_PX:.2})">"#)
            .unwrap();
        writeln!(out, r##"    <rect width="{PANEL_PX:.2}" height="{PANEL_PX:.2}" fill="none" stroke="#bbbbbb"/>"##).unwrap();
        let pts: Vec<String> = geometry
            .vertices()
            .iter()
            .map(|v| {
                let p = to_px(math::add(st.slider_pos, math::rotate(st.rot, *v)));
                format!("{:.3},{:.3}", p[0], p[1])
            })
            .collect();
        writeln!(out, r##"    <polygon points="{}" fill="#d9e4f5" stroke="#1f3b73"/>"##, pts.join(" ")).unwrap();
        let pusher = math::add(st.slider_pos, math::rotate(st.rot, st.pusher_pos));
        let c = to_px(pusher);
        writeln!(
            out,
            r##"    <circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="#c0392b"/>"##,
            c[0],
            c[1],
            (pusher_radius * px).max(1.5)
        )
        .unwrap();
        if let Some(f) = force {
            if math::norm(*f) > 0.0 {
                let tip = to_px(math::add(pusher, math::scale(math::rotate(st.rot, *f), FORCE_SCALE)));
                writeln!(
                    out,
                    r##"    <line class="force" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#27ae60" stroke-width="2"/>"##,
                    c[0],
                    c[1],
                    tip[0],
                    tip[1]
                )
                .unwrap();
            }
        }
        writeln!(out, "  </g>").unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use pushgcs_core::modes::{KnotInput, KnotState, ModeKind};

    #[test]
    fn one_group_per_knot() {
        let g = SliderGeometry::box_preset();
        let st = KnotState { slider_pos: [0.0, 0.0], rot: [1.0, 0.0], pusher_pos: [-0.16, 0.0] };
        let seg = KnotTrajectory {
            mode: ModeKind::Contact { face: 3 },
            timestep: 0.5,
            states: vec![st; 3],
            inputs: vec![KnotInput { force: [1.0, 0.0], pusher_vel: [0.0, 0.0] }; 2],
        };
        let svg = render(&g, 0.01, 0.6, &[seg.clone(), seg], &[vec![[1.0, 0.0]; 2], vec![[0.5, 0.0]; 2]]);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let groups = doc.descendants().filter(|n| n.has_tag_name("g")).count();
        assert_eq!(groups, 6);
        let arrows = doc.descendants().filter(|n| n.attribute("class") == Some("force")).count();
        assert_eq!(arrows, 4);
    }
}
