//! Cross-module workflows through the public API.

use std::io::Cursor;
use std::sync::Arc;

use pseudoharmonic::conservation::{
    generalized_harmonic_check, identity_residual, morrey_estimate_ratio, noether_current, stationary_current_residual,
};
use pseudoharmonic::counterexample::{build_singular, loglog, omega_in_algebra};
use pseudoharmonic::grid::io::{read_field_csv, write_field_csv};
use pseudoharmonic::grid::{DiscGrid, Lattice, Rank};
use pseudoharmonic::hodge::{curl_potential, so11_decompose, HodgeSolver};
use pseudoharmonic::lorentz::{
    assemble_system, solve_lorentz, BetaModel, LorentzBoundary, LorentzConfig, Manifold, OmegaModel,
    StationaryTargetData,
};
use pseudoharmonic::pseudosphere::{self, BoundaryData, SolverConfig};
use pseudoharmonic::signature::QuadricSpec;

fn grid(h: f64) -> Arc<DiscGrid> {
    DiscGrid::new(h, Lattice::NodeCentered).unwrap()
}

#[test]
fn solved_cap_map_is_generalized_harmonic_with_exact_noether_currents() {
    let g = grid(1.0 / 32.0);
    let q = QuadricSpec::pseudosphere(2, 1).unwrap();
    let (u, rep) =
        pseudosphere::solve(&BoundaryData::Cap { amplitude: 0.4 }, &g, &q, &SolverConfig::default()).unwrap();
    assert!(rep.residual <= 1e-8);
    assert!(u.constraint_defect() < 1e-12);
    let (ok, div) = generalized_harmonic_check(&u, None).unwrap();
    assert!(ok, "{div:?}");
    assert!(identity_residual(&u).1.norm_max < 1e-2);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert!(noether_current(&u, i, j).unwrap().exact());
    }
    let m = morrey_estimate_ratio(&u, 4.0 / 3.0).unwrap();
    assert!(!m.degenerate && m.ratio.is_finite() && m.linear_ratio > 0.0);
}

#[test]
fn pseudohyperbolic_solve_lands_on_the_target() {
    let g = grid(1.0 / 16.0);
    let (u, _) = pseudosphere::solve_pseudohyperbolic(
        &BoundaryData::Cap { amplitude: 0.3 },
        &g,
        2,
        1,
        &SolverConfig::default(),
    )
    .unwrap();
    let target = QuadricSpec::pseudohyperbolic(2, 1).unwrap();
    assert_eq!(u.quadric(), &target);
    assert!(u.constraint_defect() < 1e-10);
}

#[test]
fn lorentz_solve_feeds_the_assembled_system() {
    let g = grid(1.0 / 32.0);
    let data = StationaryTargetData::new(
        Manifold::Circle,
        BetaModel { b0: 2.0, b1: 0.5 },
        OmegaModel { kappa: 0.3 },
    )
    .unwrap();
    let bc = LorentzBoundary {
        t_slope: [0.3, 0.1],
        phase_slope: vec![[0.4, 0.2]],
        phase_offset: vec![0.3],
    };
    let (s, rep) = solve_lorentz(&g, &bc.evaluate(&g, &data).unwrap(), &data, &LorentzConfig::default()).unwrap();
    assert!(rep.residual <= 1e-8);
    let inner = stationary_current_residual(&g, &s, &data, Some(0.75)).unwrap();
    assert!(inner.norm_max < 1e-3, "{inner:?}");
    let hodge = HodgeSolver::new(&g).unwrap();
    let sys = assemble_system(&hodge, &s, &data, 1.0).unwrap();
    assert!(sys.theta_structure_defect() < 1e-12);
    assert!(sys.route_gap(&g) < 1e-2);
    let c = curl_potential(&hodge, &sys.current[0], &sys.current[1], 1.0).unwrap();
    assert!(c.residual.is_finite());
}

#[test]
fn singular_connection_is_a_pure_gradient() {
    let g = DiscGrid::new(1.0 / 64.0, Lattice::CellCentered).unwrap();
    let sol = build_singular(&g).unwrap();
    assert!(omega_in_algebra(&sol.omega).unwrap());
    let d = so11_decompose(&HodgeSolver::new(&g).unwrap(), &sol.omega).unwrap();
    // the recovered potential is loglog(2/r) up to a constant, away from the origin
    let p = g.nearest([0.5, 0.0]);
    let r = g.nearest([0.0, -0.7]);
    let [xp, yp] = g.pos(p);
    let [xr, yr] = g.pos(r);
    let want = loglog(xp.hypot(yp)) - loglog(xr.hypot(yr));
    assert!((d.s[p] - d.s[r] - want).abs() < 5e-3, "{} vs {want}", d.s[p] - d.s[r]);
    let curl = g.l2_norm(&[&d.xi]);
    assert!(curl < 1e-2 * g.l2_norm(&[&d.s]), "{curl}");
}

#[test]
fn solved_map_round_trips_through_csv() {
    let g = grid(1.0 / 16.0);
    let q = QuadricSpec::pseudosphere(1, 1).unwrap();
    let (u, _) = pseudosphere::solve(
        &BoundaryData::S11Exact { a: 0.6, b: 0.6 },
        &g,
        &q,
        &SolverConfig::default(),
    )
    .unwrap();
    let field = u.to_field();
    let mut buf = Vec::new();
    write_field_csv(&mut buf, &field).unwrap();
    let back = read_field_csv(Cursor::new(buf), g.clone(), Rank::Tuple(2)).unwrap();
    for c in 0..2 {
        assert_eq!(back.comp(c), field.comp(c));
    }
}
