//! Property tests for the face gap functions and region decomposition.

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use pushgcs_core::geometry::{decompose_regions, vertex_world_position, PusherSpec, SliderGeometry, DEFAULT_WORKSPACE_SIDE};

/// Nearest boundary point by scanning every face segment; returns the
/// distance and whether the nearest point is a polygon vertex.
fn brute_force(g: &SliderGeometry, p: [f64; 2]) -> (f64, bool) {
    let mut best = (f64::INFINITY, false);
    let v = g.vertices();
    for i in 0..v.len() {
        let (a, b) = (v[i], v[(i + 1) % v.len()]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
        let q = [a[0] + t * d[0], a[1] + t * d[1]];
        let dist = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        let at_vertex = t <= 1e-9 || t >= 1.0 - 1e-9;
        if dist < best.0 - 1e-12 {
            best = (dist, at_vertex);
        } else if (dist - best.0).abs() <= 1e-12 {
            best.1 |= at_vertex;
        }
    }
    best
}

/// Outward clearance below which a convex right-angle corner's sliver lies
/// outside every face region: the pusher is off both face lines by less than
/// its radius yet clear of the vertex.
fn corner_sliver(rho: f64) -> f64 {
    (std::f64::consts::SQRT_2 - 1.0) * rho
}

/// Checks `min_gap` against the Euclidean distance. Returns the number of
/// exact-match cases and of corner-shadow cases.
fn check_gap(g: &SliderGeometry, rho: f64, samples: &[[f64; 2]]) -> (usize, usize) {
    let d = decompose_regions(g, PusherSpec::new(rho).unwrap(), DEFAULT_WORKSPACE_SIDE).unwrap();
    let (mut exact, mut shadow) = (0, 0);
    for &p in samples {
        if g.contains(p) {
            continue;
        }
        let (dist, at_vertex) = brute_force(g, p);
        if dist < rho {
            continue;
        }
        let (gap, _) = match d.min_gap(p) {
            Ok(v) => v,
            Err(e) => {
                assert!(dist - rho < corner_sliver(rho), "{p:?}: {e}");
                continue;
            }
        };
        // Halfplane distances never exceed the Euclidean one.
        assert!(gap <= dist - rho + 1e-8, "{p:?}: gap {gap} above distance {}", dist - rho);
        // Every containing region's face has p in its orthogonal shadow.
        let in_shadows = (0..d.len()).filter(|&i| d.contains(i, p, 1e-12)).all(|i| {
            let f = &g.faces()[d.regions[i].face];
            let t = (p[0] - f.start[0]) * f.tangent[0] + (p[1] - f.start[1]) * f.tangent[1];
            (0.0..=f.length).contains(&t)
        });
        if !at_vertex && in_shadows {
            assert!((gap - (dist - rho)).abs() <= 1e-8, "{p:?}: gap {gap} vs distance {}", dist - rho);
            exact += 1;
        } else {
            shadow += 1;
        }
    }
    (exact, shadow)
}

fn samples(n: usize, seed: u64) -> Vec<[f64; 2]> {
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    let mut runner = TestRunner::new_with_rng(Config::default(), TestRng::from_seed(RngAlgorithm::ChaCha, &[seed as u8; 32]));
    let w = DEFAULT_WORKSPACE_SIDE / 2.0;
    let s = prop::array::uniform2(-w..w);
    (0..n).map(|_| s.new_tree(&mut runner).unwrap().current()).collect()
}

#[test]
fn min_gap_matches_distance_on_box() {
    let (faces, vertices) = check_gap(&SliderGeometry::box_preset(), 0.01, &samples(10_000, 1));
    assert!(faces > 1000 && vertices > 1000, "{faces} {vertices}");
}

#[test]
fn min_gap_matches_distance_on_tee() {
    let (faces, vertices) = check_gap(&SliderGeometry::tee_preset(), 0.01, &samples(10_000, 2));
    assert!(faces > 1000 && vertices > 1000, "{faces} {vertices}");
}

#[test]
fn collision_free_positions_are_covered() {
    for (g, seed) in [(SliderGeometry::box_preset(), 3u64), (SliderGeometry::tee_preset(), 4)] {
        let rho = PusherSpec::default().radius;
        let d = decompose_regions(&g, PusherSpec::new(rho).unwrap(), DEFAULT_WORKSPACE_SIDE).unwrap();
        let mut free = 0;
        for p in samples(10_000, seed) {
            if g.disk_clearance(p, rho) >= corner_sliver(rho) {
                free += 1;
                assert!((0..d.len()).any(|i| d.contains(i, p, 1e-12)), "{p:?} uncovered");
            }
        }
        assert!(free > 5000);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn vertex_position_is_linear(
        a in prop::array::uniform4(-1.0..1.0f64),
        b in prop::array::uniform4(-1.0..1.0f64),
        nu in prop::array::uniform2(-0.2..0.2f64),
    ) {
        let f = |v: [f64; 4]| vertex_world_position([v[0], v[1]], [v[2], v[3]], nu);
        let sum = [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]];
        let (fa, fb, fs) = (f(a), f(b), f(sum));
        for i in 0..2 {
            prop_assert!((fs[i] - fa[i] - fb[i]).abs() <= 1e-12);
        }
    }
}
