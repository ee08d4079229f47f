//! Slider polygon, faces, the collision-free region decomposition around
//! the slider, and the piecewise-linear gap functions used for contact.

use alloc::vec::Vec;

use crate::math::{self, Vec2};

/// Default side length of the square workspace, in meters.
pub const DEFAULT_WORKSPACE_SIDE: f64 = 0.6;

/// Outward offset of corner split lines beyond the pusher radius.
pub const SPLIT_MARGIN: f64 = 1e-3;

const MIN_EDGE: f64 = 1e-9;
const AREA_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(&'static str),
    #[error("pusher radius must be finite and nonnegative")]
    InvalidPusher,
    #[error("workspace side must be positive")]
    InvalidWorkspace,
    #[error("region of face {0} is empty inside the workspace")]
    EmptyRegion(usize),
    #[error("point lies in no collision-free region")]
    NoContainingRegion,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub index: usize,
    pub start: Vec2,
    pub end: Vec2,
    /// Outward unit normal.
    pub normal: Vec2,
    /// Unit direction of counter-clockwise traversal; the normal is this
    /// vector turned 90° clockwise.
    pub tangent: Vec2,
    pub length: f64,
}

impl Face {
    /// Point at arc-length `s` from `start`.
    pub fn point_at(&self, s: f64) -> Vec2 {
        math::add(self.start, math::scale(self.tangent, s))
    }

    /// Signed distance of `p` to the face's supporting line (positive outside).
    pub fn halfplane_value(&self, p: Vec2) -> f64 {
        math::dot(self.normal, math::sub(p, self.start))
    }
}

/// Polygonal slider described in its own body frame, origin at the CoM.
#[derive(Clone, Debug, PartialEq)]
pub struct SliderGeometry {
    vertices: Vec<Vec2>,
    faces: Vec<Face>,
    characteristic_radius: f64,
}

impl SliderGeometry {
    /// Validates a simple polygon. Clockwise input is reversed so faces come
    /// out counter-clockwise.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::DegeneratePolygon("fewer than 3 vertices"));
        }
        if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(GeometryError::DegeneratePolygon("non-finite vertex"));
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let faces = build_faces(&vertices)?;
        let characteristic_radius = vertices.iter().map(|v| math::norm(*v)).fold(0.0, f64::max);
        Ok(Self { vertices, faces, characteristic_radius })
    }

    /// Axis-aligned rectangle centred on the CoM.
    pub fn rectangle(width: f64, height: f64) -> Result<Self, GeometryError> {
        let (a, b) = (0.5 * width, 0.5 * height);
        Self::new(alloc::vec![[-a, -b], [a, -b], [a, b], [-a, b]])
    }

    /// 0.3 m square slider.
    pub fn box_preset() -> Self {
        Self::rectangle(0.3, 0.3).expect("box preset is valid")
    }

    /// T-shaped slider: a 0.3 × 0.1 bar on top of a 0.1 × 0.2 stem, shifted
    /// so that its area centroid is the origin.
    pub fn tee_preset() -> Self {
        let raw: Vec<Vec2> = alloc::vec![
            [-0.05, -0.15],
            [0.05, -0.15],
            [0.05, 0.05],
            [0.15, 0.05],
            [0.15, 0.15],
            [-0.15, 0.15],
            [-0.15, 0.05],
            [-0.05, 0.05],
        ];
        let c = centroid(&raw);
        Self::new(raw.into_iter().map(|v| math::sub(v, c)).collect()).expect("tee preset is valid")
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn com(&self) -> Vec2 {
        [0.0, 0.0]
    }

    pub fn characteristic_radius(&self) -> f64 {
        self.characteristic_radius
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Even-odd point-in-polygon test (boundary points may go either way).
    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[j]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Euclidean distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let t = math::dot(math::sub(p, f.start), f.tangent).clamp(0.0, f.length);
                math::norm(math::sub(p, f.point_at(t)))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from a disk of radius `radius` centred at `p` to the slider;
    /// negative when the disk centre is inside the polygon.
    pub fn disk_clearance(&self, p: Vec2, radius: f64) -> f64 {
        let d = self.boundary_distance(p);
        if self.contains(p) {
            -d - radius
        } else {
            d - radius
        }
    }
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| math::cross(v[i], v[(i + 1) % n])).sum::<f64>()
}

fn centroid(v: &[Vec2]) -> Vec2 {
    let n = v.len();
    let a = signed_area(v);
    let mut c = [0.0, 0.0];
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        let w = math::cross(p, q);
        c[0] += (p[0] + q[0]) * w;
        c[1] += (p[1] + q[1]) * w;
    }
    math::scale(c, 1.0 / (6.0 * a))
}

fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o1 = math::cross(math::sub(b, a), math::sub(c, a));
    let o2 = math::cross(math::sub(b, a), math::sub(d, a));
    let o3 = math::cross(math::sub(d, c), math::sub(a, c));
    let o4 = math::cross(math::sub(d, c), math::sub(b, c));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    let on = |p: Vec2, q: Vec2, r: Vec2, o: f64| {
        o == 0.0
            && r[0] >= p[0].min(q[0])
            && r[0] <= p[0].max(q[0])
            && r[1] >= p[1].min(q[1])
            && r[1] <= p[1].max(q[1])
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

/// Faces of a counter-clockwise simple polygon, in traversal order.
pub fn build_faces(vertices: &[Vec2]) -> Result<Vec<Face>, GeometryError> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeometryError::DegeneratePolygon("fewer than 3 vertices"));
    }
    for i in 0..n {
        if math::norm(math::sub(vertices[(i + 1) % n], vertices[i])) <= MIN_EDGE {
            return Err(GeometryError::DegeneratePolygon("repeated consecutive vertex"));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]) {
                return Err(GeometryError::DegeneratePolygon("self-intersecting boundary"));
            }
        }
    }
    if math::abs(signed_area(vertices)) <= AREA_EPS {
        return Err(GeometryError::DegeneratePolygon("zero area"));
    }
    Ok((0..n)
        .map(|i| {
            let (start, end) = (vertices[i], vertices[(i + 1) % n]);
            let d = math::sub(end, start);
            let length = math::norm(d);
            let tangent = math::scale(d, 1.0 / length);
            Face { index: i, start, end, normal: [tangent[1], -tangent[0]], tangent, length }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PusherSpec {
    pub radius: f64,
}

impl PusherSpec {
    pub fn new(radius: f64) -> Result<Self, GeometryError> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(GeometryError::InvalidPusher);
        }
        Ok(Self { radius })
    }
}

impl Default for PusherSpec {
    fn default() -> Self {
        Self { radius: 0.01 }
    }
}

/// `normal · p ≥ offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Halfspace {
    pub normal: Vec2,
    pub offset: f64,
}

impl Halfspace {
    pub fn value(&self, p: Vec2) -> f64 {
        math::dot(self.normal, p) - self.offset
    }
}

/// `φ(p) = n̂ · (p − q) − ρ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapFunction {
    pub normal: Vec2,
    pub anchor: Vec2,
    pub radius: f64,
}

impl GapFunction {
    pub fn eval(&self, p: Vec2) -> f64 {
        math::dot(self.normal, math::sub(p, self.anchor)) - self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub face: usize,
    /// Face, split and adjacent-edge halfspaces (at most three); the
    /// workspace box is stored once on the decomposition.
    pub halfspaces: Vec<Halfspace>,
    pub gap: GapFunction,
    /// Vertices of the region clipped to the workspace, counter-clockwise.
    pub polygon: Vec<Vec2>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionDecomposition {
    pub regions: Vec<Region>,
    pub pusher_radius: f64,
    pub workspace_side: f64,
    adjacency: Vec<Vec<bool>>,
}

impl RegionDecomposition {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn workspace_halfspaces(&self) -> [Halfspace; 4] {
        let w = 0.5 * self.workspace_side;
        [
            Halfspace { normal: [1.0, 0.0], offset: -w },
            Halfspace { normal: [-1.0, 0.0], offset: -w },
            Halfspace { normal: [0.0, 1.0], offset: -w },
            Halfspace { normal: [0.0, -1.0], offset: -w },
        ]
    }

    /// Region halfspaces followed by the workspace box.
    pub fn all_halfspaces(&self, region: usize) -> Vec<Halfspace> {
        let mut h = self.regions[region].halfspaces.clone();
        h.extend_from_slice(&self.workspace_halfspaces());
        h
    }

    pub fn contains(&self, region: usize, p: Vec2, tol: f64) -> bool {
        self.all_halfspaces(region).iter().all(|h| h.value(p) >= -tol)
    }

    pub fn gap(&self, region: usize, p: Vec2) -> f64 {
        self.regions[region].gap.eval(p)
    }

    /// Whether the clipped regions share a set of positive area.
    pub fn intersects(&self, a: usize, b: usize) -> bool {
        self.adjacency[a][b]
    }

    /// Smallest gap over regions that contain `p`, with its face index.
    pub fn min_gap(&self, p: Vec2) -> Result<(f64, usize), GeometryError> {
        let mut best: Option<(f64, usize)> = None;
        for (i, r) in self.regions.iter().enumerate() {
            if !self.contains(i, p, 1e-12) {
                continue;
            }
            let g = r.gap.eval(p);
            match best {
                Some((v, _)) if g >= v => {}
                _ => best = Some((g, r.face)),
            }
        }
        best.ok_or(GeometryError::NoContainingRegion)
    }
}

fn clip(poly: &[Vec2], h: &Halfspace) -> Vec<Vec2> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (va, vb) = (h.value(a), h.value(b));
        if va >= 0.0 {
            out.push(a);
        }
        if (va >= 0.0) != (vb >= 0.0) {
            let t = va / (va - vb);
            out.push(math::add(a, math::scale(math::sub(b, a), t)));
        }
    }
    out
}

fn clip_all(mut poly: Vec<Vec2>, hs: &[Halfspace]) -> Vec<Vec2> {
    for h in hs {
        if poly.is_empty() {
            break;
        }
        poly = clip(&poly, h);
    }
    poly
}

/// Halfspaces bounding face `i`'s region at the vertex it shares with face
/// `j`. `w_dir` is the face's tangent oriented away from the shared vertex.
fn corner_halfspace(faces: &[Face], i: usize, j: usize, vertex: Vec2, into_face: Vec2, rho: f64) -> Halfspace {
    let (fi, fj) = (&faces[i], &faces[j]);
    // Turn direction at the vertex when walking from the earlier face.
    let (first, second) = if fi.end == vertex { (fi, fj) } else { (fj, fi) };
    let turn = math::cross(first.tangent, second.tangent);
    if turn < -1e-12 {
        // Reflex vertex: stay on the outer side of the neighbouring face.
        Halfspace { normal: fj.normal, offset: math::dot(fj.normal, fj.start) + rho }
    } else {
        let b = math::add(fi.normal, fj.normal);
        let mut w = [-b[1], b[0]];
        let nw = math::norm(w);
        w = math::scale(w, 1.0 / nw);
        if math::dot(w, into_face) < 0.0 {
            w = math::scale(w, -1.0);
        }
        // w · (p − v) ≥ −(ρ + margin)
        Halfspace { normal: w, offset: math::dot(w, vertex) - (rho + SPLIT_MARGIN) }
    }
}

/// One region per face, each clipped to a square workspace of side
/// `workspace_side` centred on the slider frame origin.
pub fn decompose_regions(
    geometry: &SliderGeometry,
    pusher: PusherSpec,
    workspace_side: f64,
) -> Result<RegionDecomposition, GeometryError> {
    let pusher = PusherSpec::new(pusher.radius)?;
    if !(workspace_side.is_finite() && workspace_side > 0.0) {
        return Err(GeometryError::InvalidWorkspace);
    }
    let faces = geometry.faces();
    let n = faces.len();
    let rho = pusher.radius;
    let w = 0.5 * workspace_side;
    let square: Vec<Vec2> = alloc::vec![[-w, -w], [w, -w], [w, w], [-w, w]];
    let mut regions = Vec::with_capacity(n);
    for (i, f) in faces.iter().enumerate() {
        let prev = (i + n - 1) % n;
        let next = (i + 1) % n;
        let face_h = Halfspace { normal: f.normal, offset: math::dot(f.normal, f.start) + rho };
        let at_start = corner_halfspace(faces, i, prev, f.start, f.tangent, rho);
        let at_end = corner_halfspace(faces, i, next, f.end, math::scale(f.tangent, -1.0), rho);
        let halfspaces = alloc::vec![face_h, at_start, at_end];
        let polygon = clip_all(square.clone(), &halfspaces);
        if polygon.len() < 3 || signed_area(&polygon) <= AREA_EPS {
            return Err(GeometryError::EmptyRegion(i));
        }
        regions.push(Region {
            face: i,
            halfspaces,
            gap: GapFunction { normal: f.normal, anchor: f.start, radius: rho },
            polygon,
        });
    }
    let mut adjacency = alloc::vec![alloc::vec![false; n]; n];
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let inter = clip_all(regions[a].polygon.clone(), &regions[b].halfspaces);
            adjacency[a][b] = inter.len() >= 3 && signed_area(&inter) > 1e-10;
        }
    }
    Ok(RegionDecomposition { regions, pusher_radius: rho, workspace_side, adjacency })
}

/// `p^S + R(r) ν`.
pub fn vertex_world_position(slider_pos: Vec2, rot: Vec2, nu: Vec2) -> Vec2 {
    math::add(slider_pos, math::rotate(rot, nu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> SliderGeometry {
        SliderGeometry::rectangle(1.0, 1.0).unwrap()
    }

    #[test]
    fn unit_box_normals_in_edge_order() {
        let g = unit_box();
        let normals: Vec<Vec2> = g.faces().iter().map(|f| f.normal).collect();
        assert_eq!(normals, alloc::vec![[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]);
        for f in g.faces() {
            assert!((math::norm(f.normal) - 1.0).abs() < 1e-12);
            assert!(math::dot(f.normal, f.tangent).abs() < 1e-12);
            // Normal is the tangent turned clockwise.
            assert_eq!(f.normal, [f.tangent[1], -f.tangent[0]]);
        }
    }

    #[test]
    fn tee_has_eight_faces_and_centroid_origin() {
        let g = SliderGeometry::tee_preset();
        assert_eq!(g.num_faces(), 8);
        let c = centroid(g.vertices());
        assert!(math::norm(c) < 1e-12);
    }

    #[test]
    fn repeated_vertex_is_degenerate() {
        let e = SliderGeometry::new(alloc::vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(e, Err(GeometryError::DegeneratePolygon(_))));
        let e = SliderGeometry::new(alloc::vec![[0.0, 0.0], [1.0, 0.0]]);
        assert!(matches!(e, Err(GeometryError::DegeneratePolygon(_))));
    }

    #[test]
    fn bowtie_is_rejected() {
        let e = SliderGeometry::new(alloc::vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(e, Err(GeometryError::DegeneratePolygon(_))));
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let g = SliderGeometry::new(alloc::vec![[-1.0, -1.0], [-1.0, 1.0], [1.0, 1.0], [1.0, -1.0]]).unwrap();
        assert!(g.area() > 0.0);
    }

    #[test]
    fn characteristic_radius_is_max_vertex_norm() {
        let g = unit_box();
        assert!((g.characteristic_radius() - 0.5f64.hypot(0.5)).abs() < 1e-15);
    }

    #[test]
    fn right_face_gap_by_hand() {
        let g = unit_box();
        let d = decompose_regions(&g, PusherSpec::new(0.01).unwrap(), 3.0).unwrap();
        let (v, f) = d.min_gap([0.6, 0.0]).unwrap();
        assert_eq!(f, 1);
        assert!((v - 0.09).abs() < 1e-12);
    }

    #[test]
    fn min_gap_examples_unit_box() {
        let g = unit_box();
        let d = decompose_regions(&g, PusherSpec::new(0.0).unwrap(), 3.0).unwrap();
        let (v, f) = d.min_gap([0.7, 0.0]).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
        assert_eq!(f, 1);
        // Diagonal corner point lies in both the right and top regions with
        // equal gaps; the lower face index wins.
        let (v, f) = d.min_gap([0.7, 0.7]).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
        assert_eq!(f, 1);
        assert_eq!(d.min_gap([0.0, 0.0]), Err(GeometryError::NoContainingRegion));
    }

    #[test]
    fn on_face_gap_is_zero() {
        let g = unit_box();
        let d = decompose_regions(&g, PusherSpec::new(0.0).unwrap(), 3.0).unwrap();
        for f in g.faces() {
            for s in [0.1, 0.5, 0.9] {
                assert!(d.gap(f.index, f.point_at(s * f.length)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unit_box_regions_are_split_at_45_degrees() {
        let g = unit_box();
        let d = decompose_regions(&g, PusherSpec::new(0.0).unwrap(), 3.0).unwrap();
        let right = &d.regions[1];
        // Split at the lower-right corner: normal ∝ (−1, 1)/√2 rotated to face
        // the right face.
        let s = 0.5f64.sqrt();
        let corner = right.halfspaces[1];
        assert!((corner.normal[0].abs() - s).abs() < 1e-12 && (corner.normal[1].abs() - s).abs() < 1e-12);
        assert!(d.intersects(0, 1) && d.intersects(1, 2) && !d.intersects(0, 2));
    }

    #[test]
    fn tee_reflex_regions_use_edge_extensions() {
        let g = SliderGeometry::tee_preset();
        let rho = 0.01;
        let d = decompose_regions(&g, PusherSpec::new(rho).unwrap(), DEFAULT_WORKSPACE_SIDE).unwrap();
        // Face 1 is the right side of the stem; its end vertex is reflex and the
        // region must stay below the bar's underside.
        let f2 = &g.faces()[2];
        for p in &d.regions[1].polygon {
            assert!(f2.halfplane_value(*p) >= rho - 1e-12);
        }
    }

    #[test]
    fn vertex_world_position_examples() {
        assert_eq!(vertex_world_position([0.0, 0.0], [1.0, 0.0], [0.5, 0.5]), [0.5, 0.5]);
        assert_eq!(vertex_world_position([1.0, 0.0], [0.0, 1.0], [0.5, 0.0]), [1.0, 0.5]);
        assert_eq!(vertex_world_position([0.0, 0.0], [-1.0, 0.0], [0.3, -0.2]), [-0.3, 0.2]);
    }
}
