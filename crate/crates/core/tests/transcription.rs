//! Structural and consistency checks on the per-mode transcriptions.

use proptest::prelude::*;
use pushgcs_core::dynamics::{euler_step_residual, limit_surface, simulate_step, FrictionParams};
use pushgcs_core::expr::Relation;
use pushgcs_core::geometry::{decompose_regions, PusherSpec, SliderGeometry, DEFAULT_WORKSPACE_SIDE};
use pushgcs_core::linalg::symmetric_eigenvalues;
use pushgcs_core::math;
use pushgcs_core::modes::{
    build_contact_mode, build_noncontact_mode, CostWeights, KnotInput, KnotState, KnotTrajectory, ModeContext, ModeKind,
    QuadKind, Symbol,
};

fn context(g: SliderGeometry, knots: usize) -> ModeContext {
    let friction = FrictionParams::default();
    ModeContext {
        regions: decompose_regions(&g, PusherSpec::default(), DEFAULT_WORKSPACE_SIDE).unwrap(),
        limit_surface: limit_surface(&friction, g.characteristic_radius()).unwrap(),
        geometry: g,
        mu_pusher: friction.mu_pusher,
        weights: CostWeights::default(),
        knots,
        timestep: 0.5,
    }
}

/// Knots touched by a layout symbol; an interval touches both its ends.
fn knots_of(sym: Symbol) -> [usize; 2] {
    match sym {
        Symbol::SliderPos { knot, .. }
        | Symbol::Rot { knot, .. }
        | Symbol::ContactCoord { knot }
        | Symbol::PusherPos { knot, .. } => [knot, knot],
        Symbol::NormalForce { interval } | Symbol::FrictionForce { interval } | Symbol::PusherVel { interval, .. } => {
            [interval, interval + 1]
        }
    }
}

#[test]
fn contact_quadratics_are_band_limited() {
    for g in [SliderGeometry::box_preset(), SliderGeometry::tee_preset()] {
        for n in [2, 3, 5] {
            let ctx = context(g.clone(), n);
            for face in 0..g.num_faces() {
                let tr = build_contact_mode(face, &ctx).unwrap();
                for (q, _, kind) in &tr.quadratic {
                    let vars = q.linear.iter().map(|t| t.0).chain(q.quadratic.iter().flat_map(|t| [t.0, t.1]));
                    let (lo, hi) = vars.fold((usize::MAX, 0), |(lo, hi), v| {
                        let [a, b] = knots_of(tr.layout[v]);
                        (lo.min(a), hi.max(b))
                    });
                    assert!(hi <= lo + 1, "{kind:?} spans knots {lo}..={hi}");
                    // Every monomial fits in one PSD block.
                    let support: Vec<usize> = q.quadratic.iter().flat_map(|t| [t.0, t.1]).collect();
                    assert!(tr.groups.iter().any(|grp| support.iter().all(|v| grp.contains(v))));
                }
            }
        }
    }
}

#[test]
fn quadratic_cost_atoms_are_convex() {
    for g in [SliderGeometry::box_preset(), SliderGeometry::tee_preset()] {
        let ctx = context(g.clone(), 3);
        let mut trs: Vec<_> = (0..g.num_faces()).map(|f| build_contact_mode(f, &ctx).unwrap()).collect();
        trs.extend((0..ctx.regions.len()).map(|r| build_noncontact_mode(r, &ctx).unwrap()));
        for tr in &trs {
            let n = tr.num_vars();
            for atom in &tr.cost {
                let Some(q) = atom.as_quadratic() else { continue };
                let mut m = vec![0.0; n * n];
                for &(i, j, c) in &q.quadratic {
                    if i == j {
                        m[i * n + i] += c;
                    } else {
                        m[i * n + j] += 0.5 * c;
                        m[j * n + i] += 0.5 * c;
                    }
                }
                let eig = symmetric_eigenvalues(&m, n);
                assert!(eig[n - 1] >= -1e-10, "{:?}: {}", tr.kind, eig[n - 1]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    /// Forward rollouts in sticking contact satisfy every quadratic equality
    /// of the transcription, and the transcription's states step with zero
    /// Euler residual.
    #[test]
    fn sticking_rollouts_satisfy_the_transcription(
        tee in any::<bool>(),
        face_pick in 0usize..8,
        along in 0.0..1.0f64,
        start in prop::array::uniform3(-1.0..1.0f64),
        forces in prop::collection::vec((0.0..1.0f64, -1.0..1.0f64), 2..=4),
    ) {
        let g = if tee { SliderGeometry::tee_preset() } else { SliderGeometry::box_preset() };
        let knots = forces.len() + 1;
        let ctx = context(g.clone(), knots);
        let face = face_pick % g.num_faces();
        let tr = build_contact_mode(face, &ctx).unwrap();
        let f = &g.faces()[face];
        let contact = f.point_at(along * f.length);
        let pusher = math::add(contact, math::scale(f.normal, ctx.regions.pusher_radius));
        let theta = start[2] * std::f64::consts::PI;
        let mut x = [0.1 * start[0], 0.1 * start[1], theta.cos(), theta.sin(), pusher[0], pusher[1]];
        let mut states = vec![KnotState::from_slice(&x)];
        let mut inputs = Vec::new();
        for &(ln, lf) in &forces {
            // Normal force up to 3 N inside the friction cone.
            let (ln, lf) = (3.0 * ln, 3.0 * ln * ctx.mu_pusher * lf);
            let force = math::add(math::scale(f.normal, -ln), math::scale(f.tangent, lf));
            let u = [force[0], force[1], 0.0, 0.0];
            let next = simulate_step(&x, &u, contact, ctx.timestep, &ctx.limit_surface).unwrap();
            prop_assert!(euler_step_residual(&x, &next, &u, contact, ctx.timestep, &ctx.limit_surface)
                .unwrap()
                .iter()
                .all(|r| r.abs() <= 1e-12));
            inputs.push(KnotInput { force, pusher_vel: [0.0, 0.0] });
            x = next;
            states.push(KnotState::from_slice(&x));
        }
        let traj = KnotTrajectory { mode: ModeKind::Contact { face }, timestep: ctx.timestep, states, inputs };
        let z = tr.encode(&traj).unwrap();
        for (q, rel, kind) in &tr.quadratic {
            let v = q.eval(&z);
            match (rel, kind) {
                (Relation::Eq, _) => prop_assert!(v.abs() <= 1e-9, "{:?} residual {}", kind, v),
                (_, QuadKind::StepAngle) => prop_assert!(v >= -1e-12),
                _ => prop_assert!(rel.violation(v) <= 1e-9),
            }
        }
        let back = tr.trajectory(&z).unwrap();
        for k in 0..knots - 1 {
            let (a, b) = (back.states[k].to_array(), back.states[k + 1].to_array());
            let u = [back.inputs[k].force[0], back.inputs[k].force[1], 0.0, 0.0];
            let r = euler_step_residual(&a, &b, &u, contact, ctx.timestep, &ctx.limit_surface).unwrap();
            prop_assert!(r.iter().all(|v| v.abs() <= 1e-9), "{:?}", r);
        }
    }
}
