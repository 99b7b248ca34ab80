//! The unbounded weak solution `u₁ = u₂ = log log(2/|x|)` of
//! `−div ∇u = Ω·∇u` with `Ω = [[0, ∇s], [∇s, 0]]`, `s = u₁`, and its
//! gauge-transformed form `−div(e^{Ω₁}∇u) = e^{Ω₁} curl Ω₂·∇u`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{curl2, div, grad, laplacian, DiscGrid, Field, Lattice, Rank};
use crate::norms::{holder_exponent, HolderOptions};
use crate::report::ResidualReport;
use crate::signature::{in_algebra, SignatureMatrix};

/// `log log(2/r)`.
pub fn loglog(r: f64) -> f64 {
    (2.0 / r).ln().ln()
}

/// `∇ log log(2/|x|) = −x / (|x|² log(2/|x|))`.
pub fn loglog_grad(x: f64, y: f64) -> [f64; 2] {
    let r2 = x * x + y * y;
    let l = (2.0 / r2.sqrt()).ln();
    [-x / (r2 * l), -y / (r2 * l)]
}

/// `−Δ log log(2/r) = 1/(r² log²(2/r))`, by the radial chain rule.
pub fn minus_laplacian_oracle(r: f64) -> f64 {
    1.0 / (r * r * (2.0 / r).ln().powi(2))
}

#[derive(Debug, Clone)]
pub struct SingularSolution {
    /// `Tuple(2)`: `u₁ = u₂ = s`
    pub u: Field,
    /// `MatrixOneForm(2)` with off-diagonal entries `∇s` (analytic)
    pub omega: Field,
    pub s: Vec<f64>,
}

/// Samples the singular solution; the origin must not be a node.
pub fn build_singular(grid: &Arc<DiscGrid>) -> Result<SingularSolution> {
    let n = grid.len();
    let mut s = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    for p in 0..n {
        let [x, y] = grid.pos(p);
        if x == 0.0 && y == 0.0 {
            return Err(Error::InvalidInput(
                "the origin is a grid node; use the cell-centred lattice".into(),
            ));
        }
        s[p] = loglog(x.hypot(y));
        [gx[p], gy[p]] = loglog_grad(x, y);
    }
    let z = vec![0.0; n];
    let omega = Field::new(
        grid.clone(),
        Rank::MatrixOneForm(2),
        vec![z.clone(), z.clone(), gx.clone(), gy.clone(), gx, gy, z.clone(), z],
    )?;
    let u = Field::new(grid.clone(), Rank::Tuple(2), vec![s.clone(), s.clone()])?;
    Ok(SingularSolution { u, omega, s })
}

/// Whether `Ω` lies in `so(1,1)` at every node.
pub fn omega_in_algebra(omega: &Field) -> Result<bool> {
    let sig = SignatureMatrix::new(1, 2)?;
    for p in 0..omega.grid().len() {
        for d in 0..2 {
            let m = DMatrix::from_fn(2, 2, |i, j| omega.entry(i, j, d)[p]);
            if !in_algebra(&m, &sig, 0.0)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Smooth bump `exp(1 − 1/(1 − ρ²))`, `ρ = |x − c|/R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Bump {
    pub fn value_grad(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let r2 = self.radius * self.radius;
        let rho2 = (dx * dx + dy * dy) / r2;
        if rho2 >= 1.0 {
            return (0.0, [0.0, 0.0]);
        }
        let q = 1.0 - rho2;
        let v = (1.0 - 1.0 / q).exp();
        // d/dx of −1/q = −(2 dx / R²)/q²
        let f = -2.0 * v / (q * q * r2);
        (v, [f * dx, f * dy])
    }

    pub fn contains_origin(&self) -> bool {
        self.center[0].hypot(self.center[1]) < self.radius
    }
}

/// Nine bumps at three scales about three centres, none covering the origin.
pub fn off_origin_basis() -> Vec<Bump> {
    let centers = [[0.45, 0.0], [-0.3, 0.35], [0.1, -0.55]];
    let radii = [0.1, 0.2, 0.3];
    centers
        .iter()
        .flat_map(|&center| radii.iter().map(move |&radius| Bump { center, radius }))
        .collect()
}

/// Bumps centred at the origin, where the solution is singular.
pub fn origin_basis() -> Vec<Bump> {
    [0.25, 0.5, 0.75]
        .iter()
        .map(|&radius| Bump {
            center: [0.0, 0.0],
            radius,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    pub h: f64,
    /// `|∫∇u·∇φ − ∫(Ω·∇u)φ| / ‖∇φ‖₂` per bump
    pub per_bump: Vec<f64>,
    pub max: f64,
}

/// Weak residual of `−div ∇u = Ω·∇u` against each bump, with centred
/// gradients of `u` and nodal quadrature.
pub fn verify_weak_solution(sol: &SingularSolution, basis: &[Bump]) -> Result<WeakResidual> {
    let g = sol.u.grid();
    let gu: Vec<[Vec<f64>; 2]> = sol.u.comps().iter().map(|c| grad(g, c)).collect();
    let mut per_bump = Vec::with_capacity(basis.len());
    for b in basis {
        let mut norm2 = 0.0;
        let mut sums = [0.0f64; 2];
        for p in 0..g.len() {
            let [x, y] = g.pos(p);
            let (phi, dphi) = b.value_grad(x, y);
            if phi == 0.0 && dphi == [0.0, 0.0] {
                continue;
            }
            let w = g.weight(p);
            norm2 += w * (dphi[0] * dphi[0] + dphi[1] * dphi[1]);
            for a in 0..2 {
                let mut v = gu[a][0][p] * dphi[0] + gu[a][1][p] * dphi[1];
                for c in 0..2 {
                    let om = [sol.omega.entry(a, c, 0)[p], sol.omega.entry(a, c, 1)[p]];
                    v -= (om[0] * gu[c][0][p] + om[1] * gu[c][1][p]) * phi;
                }
                sums[a] += w * v;
            }
        }
        per_bump.push(sums[0].abs().max(sums[1].abs()) / norm2.sqrt());
    }
    let max = per_bump.iter().cloned().fold(0.0, f64::max);
    Ok(WeakResidual {
        h: g.h(),
        per_bump,
        max,
    })
}

/// `−Δ_h u₁` at the node nearest `(r, 0)` against the radial oracle;
/// returns (node radius, discrete value, oracle, relative error).
pub fn pointwise_laplacian_check(sol: &SingularSolution, r: f64) -> (f64, f64, f64, f64) {
    let g = sol.u.grid();
    let p = g.nearest([r, 0.0]);
    let [x, y] = g.pos(p);
    let rr = x.hypot(y);
    let lap = laplacian(g, sol.u.comp(0));
    let discrete = -lap[p];
    let oracle = minus_laplacian_oracle(rr);
    (rr, discrete, oracle, (discrete - oracle).abs() / oracle)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnboundednessRow {
    pub h: f64,
    /// `grid` for a built lattice, `patch` for the four nodes nearest the
    /// origin of a cell-centred lattice with this spacing
    pub kind: String,
    pub max_abs_u: f64,
    /// `‖∇_h u‖_{L²}` (grid rows only)
    pub grad_l2: Option<f64>,
    /// `‖Ω‖_{L²}` (grid rows only)
    pub omega_l2: Option<f64>,
    /// `log log(2/h)`
    pub reference: f64,
}

/// Table of `max |u|` and `‖∇u‖_{L²}`: full cell-centred grids for `grid_hs`
/// and nearest-node patches for `patch_hs` (too fine to build).
pub fn unboundedness_report(grid_hs: &[f64], patch_hs: &[f64]) -> Result<Vec<UnboundednessRow>> {
    let mut rows = Vec::new();
    for &h in grid_hs {
        let g = DiscGrid::new(h, Lattice::CellCentered)?;
        let sol = build_singular(&g)?;
        let max_abs_u = sol.s.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let grads: Vec<Vec<f64>> = sol.u.comps().iter().flat_map(|c| grad(&g, c)).collect();
        let refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        rows.push(UnboundednessRow {
            h,
            kind: "grid".into(),
            max_abs_u,
            grad_l2: Some(g.l2_norm(&refs)),
            omega_l2: Some(g.l2_norm(&sol.omega.comp_refs())),
            reference: loglog(h),
        });
    }
    for &h in patch_hs {
        // nearest nodes sit at (±h/2, ±h/2)
        let max_abs_u = loglog(h / 2f64.sqrt()).abs();
        rows.push(UnboundednessRow {
            h,
            kind: "patch".into(),
            max_abs_u,
            grad_l2: None,
            omega_l2: None,
            reference: loglog(h),
        });
    }
    Ok(rows)
}

pub fn unboundedness_csv(rows: &[UnboundednessRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.10e}"));
    let mut out = String::from("h,kind,max_abs_u,grad_l2,omega_l2,loglog_2_over_h\n");
    for r in rows {
        out.push_str(&format!(
            "{:.10e},{},{:.10e},{},{},{:.10e}\n",
            r.h,
            r.kind,
            r.max_abs_u,
            opt(r.grad_l2),
            opt(r.omega_l2),
            r.reference
        ));
    }
    out
}

/// Nodewise `e^{Ω₁} = [[cosh s, sinh s], [sinh s, cosh s]]`, row-major.
pub fn exp_so11(s: &[f64]) -> Result<Vec<[f64; 4]>> {
    s.iter()
        .map(|&v| {
            if !(v.abs() <= 700.0) {
                return Err(Error::Overflow { value: v });
            }
            let (c, sh) = (v.cosh(), v.sinh());
            Ok([c, sh, sh, c])
        })
        .collect()
}

/// Largest entry of `e^{Ω₁} e^{−Ω₁} − I` over the nodes.
pub fn exp_inverse_defect(s: &[f64]) -> Result<f64> {
    let plus = exp_so11(s)?;
    let neg: Vec<f64> = s.iter().map(|v| -v).collect();
    let minus = exp_so11(&neg)?;
    let mut worst = 0.0f64;
    for (a, b) in plus.iter().zip(&minus) {
        let prod = [
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ];
        for (v, id) in prod.iter().zip([1.0, 0.0, 0.0, 1.0]) {
            worst = worst.max((v - id).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct TransformedResidual {
    /// `−div(e^{Ω₁}∇u) − e^{Ω₁} curl Ω₂·∇u`, per component
    pub residual: [Vec<f64>; 2],
    pub report: ResidualReport,
}

/// Residual of the gauge-transformed system; `xi` is the off-diagonal
/// potential of `Ω₂` (`None` for zero). Norms are taken over core nodes
/// selected by `keep`.
pub fn transformed_residual(
    grid: &DiscGrid,
    u: &[Vec<f64>; 2],
    s: &[f64],
    xi: Option<&[f64]>,
    keep: impl Fn(usize) -> bool,
) -> Result<TransformedResidual> {
    let e = exp_so11(s)?;
    let gu = [grad(grid, &u[0]), grad(grid, &u[1])];
    let n = grid.len();
    let mut residual = [vec![0.0; n], vec![0.0; n]];
    let cxi = xi.map(|x| curl2(grid, x));
    for a in 0..2 {
        let b = 1 - a;
        let fx: Vec<f64> = (0..n)
            .map(|p| e[p][2 * a + a] * gu[a][0][p] + e[p][2 * a + b] * gu[b][0][p])
            .collect();
        let fy: Vec<f64> = (0..n)
            .map(|p| e[p][2 * a + a] * gu[a][1][p] + e[p][2 * a + b] * gu[b][1][p])
            .collect();
        let d = div(grid, &fx, &fy);
        for p in 0..n {
            let mut rhs = 0.0;
            if let Some([cx, cy]) = &cxi {
                // (e^{Ω₁} C)_{ac}·∇u_c with C = [[0, curl ξ], [curl ξ, 0]]
                let dot = |c: usize| cx[p] * gu[c][0][p] + cy[p] * gu[c][1][p];
                rhs = e[p][2 * a] * dot(1) + e[p][2 * a + 1] * dot(0);
            }
            residual[a][p] = -d[p] - rhs;
        }
    }
    let report = ResidualReport::measure("transformed_system", grid, &[&residual[0], &residual[1]], |p| {
        grid.is_core(p) && keep(p)
    });
    Ok(TransformedResidual { residual, report })
}

/// `max |∇(e^{Ω₁}) − e^{Ω₁}∇Ω₁|` over core nodes selected by `keep`.
pub fn commutation_defect(grid: &DiscGrid, s: &[f64], keep: impl Fn(usize) -> bool) -> Result<f64> {
    let e = exp_so11(s)?;
    let ch: Vec<f64> = e.iter().map(|m| m[0]).collect();
    let sh: Vec<f64> = e.iter().map(|m| m[1]).collect();
    let (gc, gs, gsig) = (grad(grid, &ch), grad(grid, &sh), grad(grid, s));
    let mut worst = 0.0f64;
    for p in (0..grid.len()).filter(|&p| grid.is_core(p) && keep(p)) {
        for d in 0..2 {
            // diagonal: ∇cosh s vs sinh s ∇s; off-diagonal: ∇sinh s vs cosh s ∇s
            worst = worst.max((gc[d][p] - sh[p] * gsig[d][p]).abs());
            worst = worst.max((gs[d][p] - ch[p] * gsig[d][p]).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub h: f64,
    pub alpha_origin: f64,
    pub alpha_off_center: f64,
}

/// Oscillation-decay Hölder exponents at the node nearest the origin and at
/// the node nearest `(0.5, 0)`.
pub fn holder_report(sol: &SingularSolution) -> Result<HolderReport> {
    let g = sol.u.grid();
    let comps = sol.u.comp_refs();
    let at = |pt: [f64; 2]| holder_exponent(g, &comps, &[g.nearest(pt)], HolderOptions::default()).map(|e| e.alpha);
    Ok(HolderReport {
        h: g.h(),
        alpha_origin: at([0.0, 0.0])?,
        alpha_off_center: at([0.5, 0.0])?,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::report::observed_order;

    fn grid(h: f64) -> Arc<DiscGrid> {
        DiscGrid::new(h, Lattice::CellCentered).unwrap()
    }

    #[test]
    fn scalar_values() {
        assert!((loglog(1.0) - (2f64.ln()).ln()).abs() < 1e-15);
        assert!((loglog(1.0) + 0.366_512_920_6).abs() < 1e-9);
        assert!(loglog(2.0 / std::f64::consts::E).abs() < 1e-15);
        // radial oracle against a fine central difference of the profile
        let r = 0.37;
        let e = 1e-4;
        let f = |r: f64| loglog(r);
        let radial = (f(r + e) - 2.0 * f(r) + f(r - e)) / (e * e) + (f(r + e) - f(r - e)) / (2.0 * e * r);
        assert!((-radial - minus_laplacian_oracle(r)).abs() / minus_laplacian_oracle(r) < 1e-6);
    }

    #[test]
    fn construction_is_so11_and_gradient_matches() {
        let g = grid(1.0 / 32.0);
        let sol = build_singular(&g).unwrap();
        assert!(omega_in_algebra(&sol.omega).unwrap());
        let p = g.nearest([0.3, 0.4]);
        let [x, y] = g.pos(p);
        let e = 1e-6;
        let fd = (loglog((x + e).hypot(y)) - loglog((x - e).hypot(y))) / (2.0 * e);
        assert!((fd - sol.omega.entry(0, 1, 0)[p]).abs() < 1e-8);
        assert!(build_singular(&DiscGrid::new(1.0 / 16.0, Lattice::NodeCentered).unwrap()).is_err());
    }

    #[test]
    fn weak_residual_decays_away_from_origin() {
        let r: Vec<WeakResidual> = [1.0 / 32.0, 1.0 / 64.0]
            .iter()
            .map(|&h| verify_weak_solution(&build_singular(&grid(h)).unwrap(), &off_origin_basis()).unwrap())
            .collect();
        assert!(off_origin_basis().iter().all(|b| !b.contains_origin()));
        assert!(observed_order(r[0].h, r[0].max, r[1].h, r[1].max) >= 0.9, "{r:?}");
    }

    #[test]
    fn bump_gradient_matches_finite_differences() {
        let b = Bump {
            center: [0.1, -0.2],
            radius: 0.4,
        };
        let (x, y, e) = (0.25, -0.05, 1e-6);
        let (_, g) = b.value_grad(x, y);
        let fx = (b.value_grad(x + e, y).0 - b.value_grad(x - e, y).0) / (2.0 * e);
        let fy = (b.value_grad(x, y + e).0 - b.value_grad(x, y - e).0) / (2.0 * e);
        assert!((fx - g[0]).abs() < 1e-7 && (fy - g[1]).abs() < 1e-7);
        assert_eq!(b.value_grad(1.0, 1.0).0, 0.0);
    }

    #[test]
    fn pointwise_laplacian_converges() {
        let (_, _, _, e1) = pointwise_laplacian_check(&build_singular(&grid(1.0 / 32.0)).unwrap(), 0.5);
        let (_, _, _, e2) = pointwise_laplacian_check(&build_singular(&grid(1.0 / 64.0)).unwrap(), 0.5);
        assert!(e2 < e1 && e2 < 1e-2, "{e1} {e2}");
    }

    #[test]
    fn unboundedness_table() {
        let rows = unboundedness_report(&[1.0 / 32.0, 1.0 / 64.0], &[1e-2, 1e-4]).unwrap();
        assert!(rows[1].max_abs_u > rows[0].max_abs_u);
        assert!((rows[2].max_abs_u - loglog(1e-2 / 2f64.sqrt())).abs() < 1e-15);
        assert!(rows[3].max_abs_u >= 2.29);
        assert!(unboundedness_csv(&rows).lines().count() == 5);
    }

    #[test]
    fn exponential_of_so11() {
        assert_eq!(exp_so11(&[0.0]).unwrap()[0], [1.0, 0.0, 0.0, 1.0]);
        let m = exp_so11(&[1.0]).unwrap()[0];
        assert!((m[0] - 1.543_080_634_815_244).abs() < 1e-14 && (m[1] - 1.175_201_193_643_801_4).abs() < 1e-14);
        let small: Vec<f64> = (0..100).map(|k| -3.0 + 0.06 * k as f64).collect();
        assert!(exp_inverse_defect(&small).unwrap() < 1e-13);
        assert!(matches!(exp_so11(&[701.0]), Err(Error::Overflow { .. })));
    }

    #[test]
    fn transformed_residual_for_constant_gauge() {
        let g = grid(1.0 / 16.0);
        let u = [g.sample(|x, y| x * x - y), g.sample(|x, y| (x + y).sin())];
        let zero = vec![0.0; g.len()];
        let t = transformed_residual(&g, &u, &zero, None, |_| true).unwrap();
        for a in 0..2 {
            let [gx, gy] = grad(&g, &u[a]);
            let d = div(&g, &gx, &gy);
            assert!((0..g.len()).all(|p| t.residual[a][p] == -d[p]));
        }
    }

    #[test]
    fn transformed_residual_decays_on_annulus() {
        let annulus = |g: &DiscGrid, p: usize| {
            let [x, y] = g.pos(p);
            (0.25..=0.75).contains(&x.hypot(y))
        };
        let r: Vec<ResidualReport> = [1.0 / 32.0, 1.0 / 64.0]
            .iter()
            .map(|&h| {
                let g = grid(h);
                let sol = build_singular(&g).unwrap();
                let u = [sol.s.clone(), sol.s.clone()];
                transformed_residual(&g, &u, &sol.s, None, |p| annulus(&g, p))
                    .unwrap()
                    .report
            })
            .collect();
        assert!(
            r[1].clone().with_order_from(&r[0]).order_estimate.unwrap() >= 0.9,
            "{r:?}"
        );
    }

    #[test]
    fn commutation_is_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b): (f64, f64) = (rng.random_range(0.5..1.5), rng.random_range(-1.0..1.0));
        let d: Vec<f64> = [1.0 / 32.0, 1.0 / 64.0]
            .iter()
            .map(|&h| {
                let g = grid(h);
                let s = g.sample(|x, y| a * (x + b * y).sin() + 0.3 * x * y);
                commutation_defect(&g, &s, |_| true).unwrap()
            })
            .collect();
        assert!(observed_order(1.0 / 32.0, d[0], 1.0 / 64.0, d[1]) > 1.8, "{d:?}");
    }
}
