//! Discrete Hodge decomposition of vector fields on the disc grid.
//!
//! `Ω = ∇Ω₁ + curl Ω₂ + h` where
//! * `∇Ω₁` is the weighted least-squares projection of `Ω` onto discrete
//!   gradients (the weak Neumann problem `GᵀWGΩ₁ = GᵀWΩ`),
//! * `curl Ω₂` is the projection of the remainder onto curls of 2-vectors
//!   supported on core nodes (a discrete zero-Dirichlet condition),
//! * `h` is what is left.
//!
//! Gradients and curls of core-supported 2-vectors are exactly orthogonal
//! (their pairing telescopes), so the three parts are orthogonal in the
//! weighted L² product up to solver precision. `h` satisfies `div h = 0`
//! and `curl h = 0` at core nodes.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::poisson::{Method, SparseSpd, SpdSolver};
use crate::grid::{curl2, deriv_stencil, div, grad, DiscGrid, Field, Rank};

/// Sparse linear map from nodal unknowns to vector-field values, fitted in
/// the weighted least-squares sense.
struct LeastSquares {
    /// `(row weight, entries)`; rows are ordered (node, component)
    rows: Vec<(f64, Vec<(usize, f64)>)>,
    /// unknown index of each node, `usize::MAX` if not an unknown
    unknown: Vec<usize>,
    nodes: Vec<usize>,
    solver: SpdSolver,
    /// unknown dropped to remove the constant null space
    pinned: Option<usize>,
}

impl LeastSquares {
    fn new(rows: Vec<(f64, Vec<(usize, f64)>)>, nodes: Vec<usize>, n_all: usize, pin: bool) -> Result<Self> {
        let mut unknown = vec![usize::MAX; n_all];
        for (k, &p) in nodes.iter().enumerate() {
            unknown[p] = k;
        }
        let pinned = pin.then_some(0);
        let shift = |k: usize| -> Option<usize> {
            match pinned {
                _ if k == usize::MAX => None,
                Some(z) if k == z => None,
                Some(z) if k > z => Some(k - 1),
                _ => Some(k),
            }
        };
        let mut trip = Vec::new();
        for (w, entries) in &rows {
            for &(a, ca) in entries {
                let Some(ia) = shift(unknown[a]) else { continue };
                for &(b, cb) in entries {
                    let Some(ib) = shift(unknown[b]) else { continue };
                    trip.push((ia, ib, w * ca * cb));
                }
            }
        }
        let dim = nodes.len() - pinned.map_or(0, |_| 1);
        let solver = SpdSolver::new(SparseSpd::from_triplets(dim, trip), Method::Direct)?;
        Ok(Self {
            rows,
            unknown,
            nodes,
            solver,
            pinned,
        })
    }

    /// Least-squares coefficients (full nodal vector, zero off the unknowns).
    fn fit(&self, target: &[f64], n_all: usize) -> Result<Vec<f64>> {
        let mut b = vec![0.0; self.nodes.len()];
        for ((w, entries), t) in self.rows.iter().zip(target) {
            for &(a, ca) in entries {
                let k = self.unknown[a];
                if k != usize::MAX {
                    b[k] += w * ca * t;
                }
            }
        }
        if let Some(z) = self.pinned {
            b.remove(z);
        }
        let mut x = self.solver.solve(&b)?;
        if let Some(z) = self.pinned {
            x.insert(z, 0.0);
        }
        let mut out = vec![0.0; n_all];
        for (k, &p) in self.nodes.iter().enumerate() {
            out[p] = x[k];
        }
        Ok(out)
    }
}

fn flatten(vx: &[f64], vy: &[f64]) -> Vec<f64> {
    vx.iter().zip(vy).flat_map(|(a, b)| [*a, *b]).collect()
}

/// Prefactored projections for one grid; reuse across many fields.
pub struct HodgeSolver {
    grid: Arc<DiscGrid>,
    gradient: LeastSquares,
    curl: LeastSquares,
}

#[derive(Debug, Clone)]
pub struct HodgeDecomposition {
    /// gradient potential, zero weighted mean
    pub omega1: Vec<f64>,
    /// 2-vector potential `ξ12`, supported on core nodes
    pub omega2: Vec<f64>,
    pub hpart: [Vec<f64>; 2],
}

impl HodgeSolver {
    pub fn new(grid: &Arc<DiscGrid>) -> Result<Self> {
        let n = grid.len();
        let mut grad_rows = Vec::with_capacity(2 * n);
        let mut curl_rows = Vec::with_capacity(2 * n);
        for p in 0..n {
            let w = grid.weight(p);
            let sx: Vec<(usize, f64)> = deriv_stencil(grid, p, 0).iter().collect();
            let sy: Vec<(usize, f64)> = deriv_stencil(grid, p, 1).iter().collect();
            curl_rows.push((w, sy.iter().map(|&(q, c)| (q, -c)).collect()));
            curl_rows.push((w, sx.clone()));
            grad_rows.push((w, sx));
            grad_rows.push((w, sy));
        }
        let core: Vec<usize> = grid.core_nodes().collect();
        Ok(Self {
            grid: grid.clone(),
            gradient: LeastSquares::new(grad_rows, (0..n).collect(), n, true)?,
            curl: LeastSquares::new(curl_rows, core, n, false)?,
        })
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    /// Least-squares gradient potential with zero weighted mean.
    pub fn gradient_potential(&self, vx: &[f64], vy: &[f64]) -> Result<Vec<f64>> {
        let g = &self.grid;
        let mut phi = self.gradient.fit(&flatten(vx, vy), g.len())?;
        let mean = g.integrate(&phi) / g.area();
        phi.iter_mut().for_each(|v| *v -= mean);
        Ok(phi)
    }

    pub fn decompose(&self, vx: &[f64], vy: &[f64]) -> Result<HodgeDecomposition> {
        let g = &self.grid;
        let n = g.len();
        if vx.len() != n || vy.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: vx.len().min(vy.len()),
            });
        }
        let omega1 = self.gradient_potential(vx, vy)?;
        let [gx, gy] = grad(g, &omega1);
        let rx: Vec<f64> = (0..n).map(|p| vx[p] - gx[p]).collect();
        let ry: Vec<f64> = (0..n).map(|p| vy[p] - gy[p]).collect();
        let omega2 = self.curl.fit(&flatten(&rx, &ry), n)?;
        let [cx, cy] = curl2(g, &omega2);
        let hpart = [
            (0..n).map(|p| rx[p] - cx[p]).collect(),
            (0..n).map(|p| ry[p] - cy[p]).collect(),
        ];
        Ok(HodgeDecomposition { omega1, omega2, hpart })
    }
}

impl HodgeDecomposition {
    pub fn grad_part(&self, grid: &DiscGrid) -> [Vec<f64>; 2] {
        grad(grid, &self.omega1)
    }

    pub fn curl_part(&self, grid: &DiscGrid) -> [Vec<f64>; 2] {
        curl2(grid, &self.omega2)
    }

    /// `‖Ω − ∇Ω₁ − curl Ω₂ − h‖` in weighted L².
    pub fn reconstruction_residual(&self, grid: &DiscGrid, vx: &[f64], vy: &[f64]) -> f64 {
        let [gx, gy] = self.grad_part(grid);
        let [cx, cy] = self.curl_part(grid);
        let ex: Vec<f64> = (0..grid.len())
            .map(|p| vx[p] - gx[p] - cx[p] - self.hpart[0][p])
            .collect();
        let ey: Vec<f64> = (0..grid.len())
            .map(|p| vy[p] - gy[p] - cy[p] - self.hpart[1][p])
            .collect();
        grid.l2_norm(&[&ex, &ey])
    }

    /// Largest pairwise `|⟨a, b⟩_w|` among the three parts, divided by `‖Ω‖²`.
    pub fn orthogonality(&self, grid: &DiscGrid, vx: &[f64], vy: &[f64]) -> f64 {
        let [gx, gy] = self.grad_part(grid);
        let [cx, cy] = self.curl_part(grid);
        let [hx, hy] = [&self.hpart[0], &self.hpart[1]];
        let scale = grid.inner(&[vx, vy], &[vx, vy]).max(f64::MIN_POSITIVE);
        let gc = grid.inner(&[&gx, &gy], &[&cx, &cy]);
        let gh = grid.inner(&[&gx, &gy], &[hx, hy]);
        let ch = grid.inner(&[&cx, &cy], &[hx, hy]);
        gc.abs().max(gh.abs()).max(ch.abs()) / scale
    }
}

/// One-shot decomposition of a vector field.
pub fn hodge_decompose(omega: &Field) -> Result<(Field, Field, Field)> {
    if omega.rank() != Rank::Vector {
        return Err(Error::InvalidInput(format!(
            "expected a vector field, got {:?}",
            omega.rank()
        )));
    }
    let g = omega.grid().clone();
    let d = HodgeSolver::new(&g)?.decompose(omega.comp(0), omega.comp(1))?;
    Ok((
        Field::scalar(g.clone(), d.omega1)?,
        Field::new(g.clone(), Rank::TwoVector, vec![d.omega2])?,
        Field::vector(g, d.hpart)?,
    ))
}

#[derive(Debug, Clone)]
pub struct CurlPotential {
    pub eta: Vec<f64>,
    /// weighted L² norm of `curl η − V`
    pub residual: f64,
    /// weighted L² norm of `div V` over core nodes
    pub divergence: f64,
}

/// Recovers `η` with `curl η = V` for a discretely divergence-free `V`.
///
/// `curl η = (−∂yη, ∂xη)`, so `η` is the gradient potential of
/// `(V_y, −V_x)`; boundary values of `η` are free.
pub fn curl_potential(solver: &HodgeSolver, vx: &[f64], vy: &[f64], tol: f64) -> Result<CurlPotential> {
    let g = solver.grid();
    let d = div(g, vx, vy);
    let divergence = g.l2_norm_on(&[&d], |p| g.is_core(p));
    if !(divergence <= tol) {
        return Err(Error::NotDivergenceFree { norm: divergence, tol });
    }
    let rx: Vec<f64> = vy.to_vec();
    let ry: Vec<f64> = vx.iter().map(|v| -v).collect();
    let eta = solver.gradient_potential(&rx, &ry)?;
    let [cx, cy] = curl2(g, &eta);
    let ex: Vec<f64> = (0..g.len()).map(|p| cx[p] - vx[p]).collect();
    let ey: Vec<f64> = (0..g.len()).map(|p| cy[p] - vy[p]).collect();
    Ok(CurlPotential {
        residual: g.l2_norm(&[&ex, &ey]),
        eta,
        divergence,
    })
}

/// Parts of an `so(1,1)`-valued 1-form `[[0, σ], [σ, 0]]`, each stored as
/// the single off-diagonal scalar.
#[derive(Debug, Clone)]
pub struct So11Decomposition {
    /// off-diagonal entry of Ω₁
    pub s: Vec<f64>,
    /// off-diagonal entry of Ω₂
    pub xi: Vec<f64>,
    /// off-diagonal entry of the harmonic remainder
    pub hpart: [Vec<f64>; 2],
    pub scalar: HodgeDecomposition,
}

impl So11Decomposition {
    /// `Ω₁` as a `Tuple(4)` field of row-major 2×2 matrices.
    pub fn omega1(&self, grid: &Arc<DiscGrid>) -> Field {
        off_diagonal(grid, &self.s)
    }

    pub fn omega2(&self, grid: &Arc<DiscGrid>) -> Field {
        off_diagonal(grid, &self.xi)
    }
}

fn off_diagonal(grid: &Arc<DiscGrid>, v: &[f64]) -> Field {
    let z = vec![0.0; grid.len()];
    Field::new(grid.clone(), Rank::Tuple(4), vec![z.clone(), v.to_vec(), v.to_vec(), z]).expect("shape")
}

/// Structural tolerance for the `so(1,1)` check.
pub const SO11_TOL: f64 = 1e-12;

/// Decomposes an `so(1,1)`-valued 1-form through its off-diagonal scalar.
pub fn so11_decompose(solver: &HodgeSolver, omega: &Field) -> Result<So11Decomposition> {
    if omega.rank() != Rank::MatrixOneForm(2) {
        return Err(Error::InvalidInput(format!(
            "expected a 2x2 matrix of 1-forms, got {:?}",
            omega.rank()
        )));
    }
    let g = omega.grid();
    for p in 0..g.len() {
        for d in 0..2 {
            let diag = omega.entry(0, 0, d)[p].abs().max(omega.entry(1, 1, d)[p].abs());
            let asym = (omega.entry(0, 1, d)[p] - omega.entry(1, 0, d)[p]).abs();
            if !(diag <= SO11_TOL && asym <= SO11_TOL) {
                return Err(Error::NotSo11 { node: p });
            }
        }
    }
    let scalar = solver.decompose(omega.entry(0, 1, 0), omega.entry(0, 1, 1))?;
    Ok(So11Decomposition {
        s: scalar.omega1.clone(),
        xi: scalar.omega2.clone(),
        hpart: scalar.hpart.clone(),
        scalar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{vorticity, Lattice};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(h: f64) -> Arc<DiscGrid> {
        DiscGrid::new(h, Lattice::NodeCentered).unwrap()
    }

    #[test]
    fn random_field_parts_are_orthogonal_and_harmonic_part_is_div_curl_free() {
        let g = grid(1.0 / 24.0);
        let s = HodgeSolver::new(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vx: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vy: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = s.decompose(&vx, &vy).unwrap();
        assert!(d.reconstruction_residual(&g, &vx, &vy) < 1e-12);
        assert!(d.orthogonality(&g, &vx, &vy) < 1e-9);
        let dh = div(&g, &d.hpart[0], &d.hpart[1]);
        let vh = vorticity(&g, &d.hpart[0], &d.hpart[1]);
        let scale = g.l2_norm(&[&vx, &vy]) / g.h();
        for p in g.core_nodes() {
            assert!(dh[p].abs() < 1e-8 * scale && vh[p].abs() < 1e-8 * scale);
        }
        assert!(g.integrate(&d.omega1).abs() < 1e-12);
        assert!((0..g.len()).all(|p| g.is_core(p) || d.omega2[p] == 0.0));
    }

    #[test]
    fn pure_gradient_and_idempotence() {
        let g = grid(1.0 / 32.0);
        let s = HodgeSolver::new(&g).unwrap();
        let f = g.sample(|x, y| (2.0 * x).sin() * y + x * x);
        let [fx, fy] = grad(&g, &f);
        let d = s.decompose(&fx, &fy).unwrap();
        let [cx, cy] = d.curl_part(&g);
        assert!(g.l2_norm(&[&cx, &cy]) < 1e-9);
        let mean = g.integrate(&f) / g.area();
        assert!((0..g.len()).all(|p| (d.omega1[p] - (f[p] - mean)).abs() < 1e-8));
        let again = s.decompose(&d.grad_part(&g)[0], &d.grad_part(&g)[1]).unwrap();
        assert!((0..g.len()).all(|p| (again.omega1[p] - d.omega1[p]).abs() < 1e-8));
    }

    #[test]
    fn pure_curl_is_recovered() {
        let g = grid(1.0 / 32.0);
        let s = HodgeSolver::new(&g).unwrap();
        let xi: Vec<f64> = (0..g.len())
            .map(|p| {
                let [x, y] = g.pos(p);
                if g.is_core(p) {
                    (1.0 - (x * x + y * y)).powi(2) * (1.0 + x)
                } else {
                    0.0
                }
            })
            .collect();
        let [vx, vy] = curl2(&g, &xi);
        let d = s.decompose(&vx, &vy).unwrap();
        let [gx, gy] = d.grad_part(&g);
        assert!(g.l2_norm(&[&gx, &gy]) < 1e-9);
        assert!((0..g.len()).all(|p| (d.omega2[p] - xi[p]).abs() < 1e-8));
    }

    #[test]
    fn curl_potential_inverts_curl() {
        let g = grid(1.0 / 32.0);
        let s = HodgeSolver::new(&g).unwrap();
        let zero = vec![0.0; g.len()];
        let c = curl_potential(&s, &zero, &zero, 1e-12).unwrap();
        assert!(c.eta.iter().all(|&v| v == 0.0));

        let xi = g.sample(|x, y| x * y + (1.5 * y).sin());
        let [vx, vy] = curl2(&g, &xi);
        let c = curl_potential(&s, &vx, &vy, 1e-9).unwrap();
        assert!(c.residual < 1e-8, "{}", c.residual);
        let shift = xi[0] - c.eta[0];
        assert!((0..g.len()).all(|p| (c.eta[p] + shift - xi[p]).abs() < 1e-8));

        let fx = g.sample(|x, _| x);
        assert!(matches!(
            curl_potential(&s, &fx, &zero, 1e-6),
            Err(Error::NotDivergenceFree { .. })
        ));
    }

    #[test]
    fn so11_checks_structure() {
        let g = grid(0.125);
        let s = HodgeSolver::new(&g).unwrap();
        let n = g.len();
        let mut comps = vec![vec![0.0; n]; 8];
        let zero = Field::new(g.clone(), Rank::MatrixOneForm(2), comps.clone()).unwrap();
        let d = so11_decompose(&s, &zero).unwrap();
        assert!(d.s.iter().chain(&d.xi).all(|&v| v == 0.0));
        comps[0][5] = 1.0; // diagonal entry
        let bad = Field::new(g.clone(), Rank::MatrixOneForm(2), comps).unwrap();
        assert!(matches!(so11_decompose(&s, &bad), Err(Error::NotSo11 { node: 5 })));
        assert_eq!(d.omega1(&g).rank(), Rank::Tuple(4));
    }
}
