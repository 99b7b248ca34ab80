//! Conservation laws of maps into quadrics, the first-order identity
//! satisfied by every constrained map, Noether currents, the Morrey
//! estimate of `Θ`, and conservation of the stationary current.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{div, DiscGrid, Field, Rank};
use crate::lorentz::{el_residual_lorentz, LorentzState, StationaryTargetData};
use crate::norms::{morrey_norm, BallFamily};
use crate::pseudosphere::{theta, DiscMap};
use crate::report::ResidualReport;
use crate::signature::rotation_generator;

/// Pointwise tolerance of the Noether proportionality.
pub const NOETHER_TOL: f64 = 1e-13;

/// `div Θ^{ij}` for every `i < j`, each zero off the core set.
pub fn divergence_fields(theta: &Field) -> Result<Vec<((usize, usize), Vec<f64>)>> {
    let Rank::MatrixOneForm(k) = theta.rank() else {
        return Err(Error::InvalidInput(format!(
            "expected a matrix of 1-forms, got {:?}",
            theta.rank()
        )));
    };
    let g = theta.grid();
    let mut out = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let mut d = div(g, theta.entry(i, j, 0), theta.entry(i, j, 1));
            for (p, v) in d.iter_mut().enumerate() {
                if !g.is_core(p) {
                    *v = 0.0;
                }
            }
            out.push(((i, j), d));
        }
    }
    Ok(out)
}

/// Max and weighted-L¹ norms of `div Θ` over core nodes and all pairs.
pub fn divergence_residual(theta: &Field) -> Result<ResidualReport> {
    let fields = divergence_fields(theta)?;
    let comps: Vec<&[f64]> = fields.iter().map(|(_, f)| f.as_slice()).collect();
    let g = theta.grid();
    Ok(ResidualReport::measure("div_theta", g, &comps, |p| g.is_core(p)))
}

/// `∂_d u^a + c Σ_j Θ^{aj}_d ε_j u^j` with `c` the quadric level, as a
/// `Jacobian(k)` field. Vanishes in the continuum for every constrained map.
pub fn identity_residual(u: &DiscMap) -> (Field, ResidualReport) {
    let g = u.grid();
    let k = u.dim();
    let th = theta(u);
    let grads = u.gradients();
    let level = u.quadric().level;
    let sig = *u.sig();
    let mut comps = vec![vec![0.0; g.len()]; 2 * k];
    for a in 0..k {
        for d in 0..2 {
            let c = &mut comps[2 * a + d];
            for p in 0..g.len() {
                let s: f64 = (0..k).map(|j| th.entry(a, j, d)[p] * sig.eps(j) * u.comp(j)[p]).sum();
                c[p] = grads[a][d][p] + level * s;
            }
        }
    }
    let refs: Vec<&[f64]> = comps.iter().map(Vec::as_slice).collect();
    let report = ResidualReport::measure("identity", g, &refs, |p| g.is_core(p));
    let field = Field::new(g.clone(), Rank::Jacobian(k), comps).expect("shape by construction");
    (field, report)
}

#[derive(Debug, Clone)]
pub struct NoetherCurrent {
    /// `J = (∇u)ᵀ E (E_ij E) u`
    pub current: [Vec<f64>; 2],
    /// `max |J + ε_i ε_j Θ^{ij}|`
    pub defect: f64,
}

impl NoetherCurrent {
    pub fn exact(&self) -> bool {
        self.defect <= NOETHER_TOL
    }
}

/// Noether current of the infinitesimal isometry generated by `E_ij E`.
pub fn noether_current(u: &DiscMap, i: usize, j: usize) -> Result<NoetherCurrent> {
    let sig = *u.sig();
    let gen = rotation_generator(i, j, &sig)?;
    let g = u.grid();
    let k = u.dim();
    let grads = u.gradients();
    let th = theta(u);
    let sign = sig.eps(i) * sig.eps(j);
    let mut current = [vec![0.0; g.len()], vec![0.0; g.len()]];
    let mut defect = 0.0f64;
    for p in 0..g.len() {
        for d in 0..2 {
            let mut v = 0.0;
            for a in 0..k {
                for b in 0..k {
                    let m = gen[(a, b)];
                    if m != 0.0 {
                        v += grads[a][d][p] * sig.eps(a) * m * u.comp(b)[p];
                    }
                }
            }
            current[d][p] = v;
            defect = defect.max((v + sign * th.entry(i, j, d)[p]).abs());
        }
    }
    Ok(NoetherCurrent { current, defect })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorreyRatio {
    /// `‖Θ‖_{M^p_p(B_{1/2})} / ‖∇u‖²_{M^p_p(B)}`; NaN when degenerate
    pub ratio: f64,
    /// `‖Θ‖_{M^p_p(B_{1/2})} / ‖∇u‖_{M^p_p(B)}`
    pub linear_ratio: f64,
    pub theta_norm: f64,
    pub grad_norm: f64,
    pub degenerate: bool,
    pub p: f64,
}

/// Empirical constant of the Morrey estimate of `Θ` by `‖∇u‖²`.
pub fn morrey_estimate_ratio(u: &DiscMap, p: f64) -> Result<MorreyRatio> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::InvalidInput(format!(
            "Morrey exponent must lie in (1, 2), got {p}"
        )));
    }
    let g = u.grid();
    let th = theta(u);
    let half = BallFamily::dyadic(g, 0.5)?;
    let whole = BallFamily::dyadic(g, 1.0)?;
    let theta_norm = morrey_norm(g, &th.comp_refs(), p, &half)?.value;
    let gradients = u.gradients();
    let grads: Vec<&[f64]> = gradients
        .iter()
        .flat_map(|[x, y]| [x.as_slice(), y.as_slice()])
        .collect();
    let grad_norm = morrey_norm(g, &grads, p, &whole)?.value;
    // gradients below round-off are treated as zero
    let degenerate = !(grad_norm > 1e-12);
    let (ratio, linear_ratio) = if degenerate {
        (f64::NAN, f64::NAN)
    } else {
        (theta_norm / (grad_norm * grad_norm), theta_norm / grad_norm)
    };
    Ok(MorreyRatio {
        ratio,
        linear_ratio,
        theta_norm,
        grad_norm,
        degenerate,
        p,
    })
}

/// `div(β(u)(∇t + ω̃_i∇u^i))` over core nodes, restricted to
/// `|x| ≤ radius` when given.
pub fn stationary_current_residual(
    grid: &DiscGrid,
    s: &LorentzState,
    data: &StationaryTargetData,
    radius: Option<f64>,
) -> Result<ResidualReport> {
    let r = el_residual_lorentz(grid, s, data)?;
    let rad = radius.unwrap_or(f64::INFINITY);
    let keep = |p: usize| {
        let [x, y] = grid.pos(p);
        grid.is_core(p) && x.hypot(y) <= rad
    };
    Ok(ResidualReport::measure("current_conservation", grid, &[&r.t], keep))
}

/// Default tolerance of [`generalized_harmonic_check`]: `10 h`.
pub fn default_generalized_tol(h: f64) -> f64 {
    10.0 * h
}

/// Whether `u` satisfies the conservation laws to `tol` (max norm).
pub fn generalized_harmonic_check(u: &DiscMap, tol: Option<f64>) -> Result<(bool, ResidualReport)> {
    let tol = tol.unwrap_or_else(|| default_generalized_tol(u.grid().h()));
    let rep = divergence_residual(&theta(u))?;
    Ok((rep.norm_max <= tol, rep))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::grid::Lattice;
    use crate::lorentz::{solve_lorentz, BetaModel, LorentzBoundary, LorentzConfig, Manifold, OmegaModel};
    use crate::signature::QuadricSpec;

    fn grid(h: f64) -> Arc<DiscGrid> {
        DiscGrid::new(h, Lattice::NodeCentered).unwrap()
    }

    fn s11_exact(g: &Arc<DiscGrid>) -> DiscMap {
        let q = QuadricSpec::pseudosphere(1, 1).unwrap();
        DiscMap::from_fn(g.clone(), q, |x, y| {
            let s = 0.6 * x + 0.6 * y;
            vec![s.sinh(), s.cosh()]
        })
        .unwrap()
    }

    /// A smooth non-harmonic map into `S²₁`.
    fn wavy(g: &Arc<DiscGrid>, phase: f64) -> DiscMap {
        let q = QuadricSpec::pseudosphere(2, 1).unwrap();
        DiscMap::from_fn(g.clone(), q, |x, y| {
            let a = 0.4 * (3.0 * x + phase).sin() * y;
            let b = 0.3 * (2.0 * y).cos() + 0.3 * x * x;
            vec![a, b, (1.0 + a * a - b * b).sqrt()]
        })
        .unwrap()
    }

    #[test]
    fn constant_map_is_exactly_conservative() {
        let g = grid(1.0 / 32.0);
        let q = QuadricSpec::pseudosphere(2, 1).unwrap();
        let u = DiscMap::constant(g.clone(), q, &[0.5, 0.6, 0.89f64.sqrt()]).unwrap();
        assert_eq!(divergence_residual(&theta(&u)).unwrap().norm_max, 0.0);
        assert_eq!(identity_residual(&u).1.norm_max, 0.0);
        assert!(noether_current(&u, 0, 2)
            .unwrap()
            .current
            .iter()
            .flatten()
            .all(|&v| v == 0.0));
        assert!(morrey_estimate_ratio(&u, 4.0 / 3.0).unwrap().degenerate);
        assert!(generalized_harmonic_check(&u, None).unwrap().0);
    }

    #[test]
    fn exact_solution_residuals_vanish_to_round_off() {
        let (mut d, mut i) = (Vec::new(), Vec::new());
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let u = s11_exact(&grid(h));
            d.push(divergence_residual(&theta(&u)).unwrap());
            i.push(identity_residual(&u).1);
            assert!(generalized_harmonic_check(&u, None).unwrap().0);
        }
        // centred differences of (sinh s, cosh s) give a constant Θ exactly
        assert!(d.iter().all(|r| r.norm_max < 1e-10), "{d:?}");
        assert!(i.iter().all(|r| r.norm_max < 1e-12), "{i:?}");
    }

    #[test]
    fn identity_decays_for_non_harmonic_maps_but_conservation_does_not() {
        let (mut d, mut i) = (Vec::new(), Vec::new());
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let u = wavy(&grid(h), 0.3);
            d.push(divergence_residual(&theta(&u)).unwrap().norm_l1);
            i.push(identity_residual(&u).1.norm_max);
        }
        assert!(d[1] / d[0] > 0.8, "{d:?}");
        assert!(i[1] / i[0] < 0.5, "{i:?}");
        assert!(
            !generalized_harmonic_check(&wavy(&grid(1.0 / 64.0), 0.3), Some(1e-2))
                .unwrap()
                .0
        );
    }

    #[test]
    fn noether_proportionality_is_exact() {
        let g = grid(1.0 / 16.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for nu in [0, 1, 2] {
            let q = QuadricSpec::pseudosphere(2, nu).unwrap();
            let ph: f64 = rng.random_range(0.0..3.0);
            let u = DiscMap::from_fn(g.clone(), q, |x, y| {
                let mut v = vec![0.3 * (x + ph).sin(), 0.2 * (y - ph).cos(), 0.0];
                let sig = q.sig;
                let partial: f64 = (0..2).map(|k| sig.eps(k) * v[k] * v[k]).sum();
                // pick the last coordinate to land on the level set
                v[2] = ((1.0 - partial) / sig.eps(2)).abs().sqrt();
                v
            });
            let Ok(u) = u else { continue };
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let n = noether_current(&u, i, j).unwrap();
                assert!(n.exact(), "nu={nu} ({i},{j}) {}", n.defect);
            }
        }
        let u = s11_exact(&g);
        assert!(matches!(noether_current(&u, 1, 1), Err(Error::InvalidIndex { .. })));
    }

    #[test]
    fn morrey_ratio_is_stable_on_exact_solution() {
        let r: Vec<f64> = [1.0 / 32.0, 1.0 / 64.0]
            .iter()
            .map(|&h| morrey_estimate_ratio(&s11_exact(&grid(h)), 4.0 / 3.0).unwrap().ratio)
            .collect();
        assert!(r.iter().all(|v| v.is_finite()));
        assert!((r[1] / r[0] - 1.0).abs() < 0.1, "{r:?}");
        assert!(morrey_estimate_ratio(&s11_exact(&grid(1.0 / 16.0)), 2.0).is_err());
    }

    #[test]
    fn stationary_current_of_decoupled_and_constant_states() {
        let g = grid(1.0 / 32.0);
        let data = StationaryTargetData::decoupled(Manifold::Circle);
        let bc = LorentzBoundary {
            t_slope: [0.5, -0.2],
            phase_slope: vec![[0.3, 0.4]],
            phase_offset: vec![0.0],
        };
        let s = bc.evaluate(&g, &data).unwrap();
        assert!(stationary_current_residual(&g, &s, &data, None).unwrap().norm_max < 1e-12);
        let c = LorentzState {
            t: vec![2.0; g.len()],
            u: vec![vec![0.6; g.len()], vec![0.8; g.len()]],
        };
        assert_eq!(stationary_current_residual(&g, &c, &data, None).unwrap().norm_max, 0.0);
    }

    #[test]
    fn stationary_current_decays_for_coupled_solves() {
        let data =
            StationaryTargetData::new(Manifold::Circle, BetaModel { b0: 2.0, b1: 0.5 }, OmegaModel::ZERO).unwrap();
        let bc = LorentzBoundary {
            t_slope: [0.3, 0.1],
            phase_slope: vec![[0.4, 0.2]],
            phase_offset: vec![0.3],
        };
        let reps: Vec<ResidualReport> = [1.0 / 32.0, 1.0 / 64.0]
            .iter()
            .map(|&h| {
                let g = grid(h);
                let gd = bc.evaluate(&g, &data).unwrap();
                let (s, _) = solve_lorentz(&g, &gd, &data, &LorentzConfig::default()).unwrap();
                stationary_current_residual(&g, &s, &data, Some(0.75)).unwrap()
            })
            .collect();
        let r = reps[1].clone().with_order_from(&reps[0]);
        assert!(r.order_estimate.unwrap() >= 1.0, "{r:?}");
    }

    #[test]
    fn random_rotation_indices_rejected() {
        let u = s11_exact(&grid(1.0 / 16.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let i = rng.random_range(2..10);
        assert!(noether_current(&u, 0, i).is_err());
    }
}
