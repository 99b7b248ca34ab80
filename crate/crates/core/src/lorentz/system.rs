use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::target::StationaryTargetData;
use crate::error::{Error, Result};
use crate::grid::{curl2, div, grad, laplacian, DiscGrid, Field, Rank};
use crate::hodge::{curl_potential, HodgeSolver};
use crate::norms::{morrey_norm, BallFamily};

/// A discrete map `(t, u): Ω → ℝ × M ⊂ ℝ × ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzState {
    pub t: Vec<f64>,
    pub u: Vec<Vec<f64>>,
}

impl LorentzState {
    pub fn new(grid: &DiscGrid, t: Vec<f64>, u: Vec<Vec<f64>>, data: &StationaryTargetData) -> Result<Self> {
        if u.len() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: u.len(),
            });
        }
        for c in std::iter::once(&t).chain(&u) {
            if c.len() != grid.len() {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    got: c.len(),
                });
            }
        }
        let s = Self { t, u };
        s.check_tube(data)?;
        Ok(s)
    }

    pub fn at(&self, p: usize) -> Vec<f64> {
        self.u.iter().map(|c| c[p]).collect()
    }

    pub fn check_tube(&self, data: &StationaryTargetData) -> Result<()> {
        for p in 0..self.t.len() {
            let d = data.distance_to_m(&self.at(p));
            if !(d <= data.tube) {
                return Err(Error::OutOfTube { node: p, distance: d });
            }
        }
        Ok(())
    }

    /// `(t, u)` as a `Tuple(n+1)` field.
    pub fn to_field(&self, grid: &Arc<DiscGrid>) -> Field {
        let comps: Vec<Vec<f64>> = std::iter::once(self.t.clone()).chain(self.u.iter().cloned()).collect();
        Field::new(grid.clone(), Rank::Tuple(comps.len()), comps).expect("shape checked")
    }
}

/// Nodal quantities shared by the residual and the assembly.
struct Pointwise {
    beta: Vec<f64>,
    grad_u: Vec<[Vec<f64>; 2]>,
    /// `J = ∇t + ω̃_i(u) ∇u^i`
    current: [Vec<f64>; 2],
    /// `H^j`
    h: Vec<Vec<f64>>,
    /// normal frames `ν_l^k(u)`, `[l][k]`
    normals: Vec<Vec<Vec<f64>>>,
}

fn pointwise(grid: &DiscGrid, s: &LorentzState, data: &StationaryTargetData) -> Result<Pointwise> {
    s.check_tube(data)?;
    let n = data.dim();
    let len = grid.len();
    let grad_t = grad(grid, &s.t);
    let grad_u: Vec<[Vec<f64>; 2]> = s.u.iter().map(|c| grad(grid, c)).collect();
    let mut beta = vec![0.0; len];
    let mut current = [vec![0.0; len], vec![0.0; len]];
    let mut h = vec![vec![0.0; len]; n];
    let mut normals = vec![vec![vec![0.0; len]; n]; data.manifold.blocks()];
    for p in 0..len {
        let y = s.at(p);
        let b = data.beta_at(&y);
        let w = data.omega_at(&y);
        let gb = data.grad_beta(&y);
        let dw = data.domega(&y);
        beta[p] = b;
        let mut jj = [grad_t[0][p], grad_t[1][p]];
        for i in 0..n {
            for d in 0..2 {
                jj[d] += w[i] * grad_u[i][d][p];
            }
        }
        current[0][p] = jj[0];
        current[1][p] = jj[1];
        let jsq = jj[0] * jj[0] + jj[1] * jj[1];
        // H^j = βJ·∇u^k (∂_kω_j − ∂_jω_k) − ½ ∂_jβ |J|²
        for j in 0..n {
            let mut v = -0.5 * gb[j] * jsq;
            for k in 0..n {
                let c = dw[k][j] - dw[j][k];
                if c != 0.0 {
                    v += b * (jj[0] * grad_u[k][0][p] + jj[1] * grad_u[k][1][p]) * c;
                }
            }
            h[j][p] = v;
        }
        for (l, nu) in data.normals(&y).into_iter().enumerate() {
            for k in 0..n {
                normals[l][k][p] = nu[k];
            }
        }
    }
    Ok(Pointwise {
        beta,
        grad_u,
        current,
        h,
        normals,
    })
}

/// `−½ Σ w β(u)|∇t + ω̃_i(u)∇u^i|² + ½ Σ w |∇u|²`.
pub fn lorentz_energy(grid: &DiscGrid, s: &LorentzState, data: &StationaryTargetData) -> Result<f64> {
    let pw = pointwise(grid, s, data)?;
    let density: Vec<f64> = (0..grid.len())
        .map(|p| {
            let jsq = pw.current[0][p].powi(2) + pw.current[1][p].powi(2);
            let du: f64 = pw.grad_u.iter().map(|g| g[0][p].powi(2) + g[1][p].powi(2)).sum();
            -0.5 * pw.beta[p] * jsq + 0.5 * du
        })
        .collect();
    Ok(grid.integrate(&density))
}

/// Residuals of the stationary Euler–Lagrange system, zero at boundary nodes.
#[derive(Debug, Clone)]
pub struct LorentzResidual {
    /// `div(β(u)(∇t + ω̃_i∇u^i))`
    pub t: Vec<f64>,
    /// `−Δu − ν_l ∇ν_l·∇u + H − ⟨H, ν_l⟩ν_l`
    pub u: Vec<Vec<f64>>,
    /// `H^j`
    pub h: Vec<Vec<f64>>,
}

impl LorentzResidual {
    /// Weighted L² norm over interior nodes, all components.
    pub fn l2(&self, grid: &DiscGrid) -> f64 {
        let refs: Vec<&[f64]> = std::iter::once(self.t.as_slice())
            .chain(self.u.iter().map(Vec::as_slice))
            .collect();
        grid.l2_norm_on(&refs, |p| grid.is_interior(p))
    }
}

/// Euler–Lagrange residual evaluated with centred differences.
pub fn el_residual_lorentz(grid: &DiscGrid, s: &LorentzState, data: &StationaryTargetData) -> Result<LorentzResidual> {
    let pw = pointwise(grid, s, data)?;
    Ok(residual_from(grid, s, &pw))
}

fn residual_from(grid: &DiscGrid, s: &LorentzState, pw: &Pointwise) -> LorentzResidual {
    let len = grid.len();
    let n = s.u.len();
    let bjx: Vec<f64> = (0..len).map(|p| pw.beta[p] * pw.current[0][p]).collect();
    let bjy: Vec<f64> = (0..len).map(|p| pw.beta[p] * pw.current[1][p]).collect();
    let mut rt = div(grid, &bjx, &bjy);
    let lap: Vec<Vec<f64>> = s.u.iter().map(|c| laplacian(grid, c)).collect();
    let grad_nu: Vec<Vec<[Vec<f64>; 2]>> = pw
        .normals
        .iter()
        .map(|nu| nu.iter().map(|c| grad(grid, c)).collect())
        .collect();
    let mut ru = vec![vec![0.0; len]; n];
    for p in 0..len {
        if !grid.is_interior(p) {
            rt[p] = 0.0;
            continue;
        }
        for j in 0..n {
            let mut v = -lap[j][p] + pw.h[j][p];
            for (l, nu) in pw.normals.iter().enumerate() {
                let mut dnu_du = 0.0;
                let mut h_nu = 0.0;
                for k in 0..n {
                    dnu_du += grad_nu[l][k][0][p] * pw.grad_u[k][0][p] + grad_nu[l][k][1][p] * pw.grad_u[k][1][p];
                    h_nu += pw.h[k][p] * nu[k][p];
                }
                v -= nu[j][p] * (dnu_du + h_nu);
            }
            ru[j][p] = v;
        }
    }
    LorentzResidual {
        t: rt,
        u: ru,
        h: pw.h.clone(),
    }
}

/// The Euler–Lagrange system rewritten as
/// `−div(Q ∇(t,u)) = Θ·Q∇(t,u) + F curl ζ · Q∇(t,u)`.
///
/// Matrix fields are stored as `Tuple(m²)` row-major fields with
/// `m = n + 1`; index 0 is the `t` slot.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub m: usize,
    pub theta: Field,
    pub q: Field,
    pub q_inv: Field,
    pub f: Field,
    pub zeta: Field,
    pub eta: Vec<f64>,
    /// `H^j`, `Tuple(n)`
    pub h: Field,
    /// `a_jk`, `Tuple(n²)`
    pub a: Field,
    /// `b_j`, `Tuple(n)`
    pub b: Field,
    /// conserved current `β(u)(∇t + ω̃_i∇u^i)`
    pub current: [Vec<f64>; 2],
    /// weighted L² norm of `curl η − βJ`
    pub curl_residual: f64,
    /// residual of the assembled form, `Tuple(m)`, zero at boundary nodes
    pub residual: Vec<Vec<f64>>,
    /// `(−div βJ, u-residual)` from [`el_residual_lorentz`]
    pub direct_residual: Vec<Vec<f64>>,
}

impl AssembledSystem {
    /// Largest entrywise gap between the two residual routes over core nodes.
    pub fn route_gap(&self, grid: &DiscGrid) -> f64 {
        grid.core_nodes()
            .map(|p| {
                (0..self.m)
                    .map(|c| (self.residual[c][p] - self.direct_residual[c][p]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|Θ^{jk} + Θ^{kj}|`, plus the largest entry in row/column 0.
    pub fn theta_structure_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.m {
            for j in 0..self.m {
                for d in 0..2 {
                    let a = self.theta.entry(i, j, d);
                    let b = self.theta.entry(j, i, d);
                    for p in 0..a.len() {
                        worst = worst.max((a[p] + b[p]).abs());
                        if i == 0 || j == 0 {
                            worst = worst.max(a[p].abs());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// Builds every field of the rewritten system along `(t, u)`.
///
/// `η` comes from [`curl_potential`] on the conserved current, which must
/// have core divergence norm at most `div_tol`.
pub fn assemble_system(
    hodge: &HodgeSolver,
    s: &LorentzState,
    data: &StationaryTargetData,
    div_tol: f64,
) -> Result<AssembledSystem> {
    let grid = hodge.grid();
    let g: &DiscGrid = grid;
    let n = data.dim();
    let m = n + 1;
    let len = g.len();
    let pw = pointwise(g, s, data)?;
    let direct = residual_from(g, s, &pw);

    let bjx: Vec<f64> = (0..len).map(|p| pw.beta[p] * pw.current[0][p]).collect();
    let bjy: Vec<f64> = (0..len).map(|p| pw.beta[p] * pw.current[1][p]).collect();
    let cp = curl_potential(hodge, &bjx, &bjy, div_tol)?;
    let curl_eta = curl2(g, &cp.eta);

    // Θ^{jk} = ν_l^j ∇ν_l^k − ν_l^k ∇ν_l^j, zero row/column 0
    let grad_nu: Vec<Vec<[Vec<f64>; 2]>> = pw
        .normals
        .iter()
        .map(|nu| nu.iter().map(|c| grad(g, c)).collect())
        .collect();
    let mut theta = vec![vec![0.0; len]; 2 * m * m];
    for j in 0..n {
        for k in (j + 1)..n {
            for d in 0..2 {
                let v: Vec<f64> = (0..len)
                    .map(|p| {
                        pw.normals
                            .iter()
                            .zip(&grad_nu)
                            .map(|(nu, gn)| nu[j][p] * gn[k][d][p] - nu[k][p] * gn[j][d][p])
                            .sum()
                    })
                    .collect();
                theta[2 * ((k + 1) * m + j + 1) + d] = v.iter().map(|x| -x).collect();
                theta[2 * ((j + 1) * m + k + 1) + d] = v;
            }
        }
    }

    let mut q = vec![vec![0.0; len]; m * m];
    let mut q_inv = vec![vec![0.0; len]; m * m];
    let mut f = vec![vec![0.0; len]; m * m];
    let mut a = vec![vec![0.0; len]; n * n];
    let mut b = vec![vec![0.0; len]; n];
    let mut zeta = vec![vec![0.0; len]; m * m];
    for p in 0..len {
        let y = s.at(p);
        for (dst, src) in [
            (&mut q, data.q_tilde(&y)),
            (&mut q_inv, data.q_tilde_inv(&y)),
            (&mut f, data.f_tilde(&y)),
        ] {
            for (c, v) in src.into_iter().enumerate() {
                dst[c][p] = v;
            }
        }
        let (ap, bp) = data.a_b(&y);
        for j in 0..n {
            b[j][p] = bp[j];
            for k in 0..n {
                a[j * n + k][p] = ap[j][k];
            }
        }
        for i in 0..m {
            zeta[i * m + i][p] = cp.eta[p];
        }
    }

    // assembled residual
    let lap: Vec<Vec<f64>> = s.u.iter().map(|c| laplacian(g, c)).collect();
    let mut residual = vec![vec![0.0; len]; m];
    let mut direct_residual = vec![vec![0.0; len]; m];
    for p in g.interior_nodes() {
        residual[0][p] = -direct.t[p];
        direct_residual[0][p] = -direct.t[p];
        let ce = [curl_eta[0][p], curl_eta[1][p]];
        let ce_bj = ce[0] * bjx[p] + ce[1] * bjy[p];
        for j in 0..n {
            direct_residual[j + 1][p] = direct.u[j][p];
            let mut v = -lap[j][p] - b[j][p] * ce_bj;
            for k in 0..n {
                let gu = [pw.grad_u[k][0][p], pw.grad_u[k][1][p]];
                let th = 2 * ((j + 1) * m + k + 1);
                v -= theta[th][p] * gu[0] + theta[th + 1][p] * gu[1];
                v -= a[j * n + k][p] * (ce[0] * gu[0] + ce[1] * gu[1]);
            }
            residual[j + 1][p] = v;
        }
    }

    let field =
        |rank: Rank, comps: Vec<Vec<f64>>| Field::new(grid.clone(), rank, comps).expect("shape by construction");
    Ok(AssembledSystem {
        m,
        theta: field(Rank::MatrixOneForm(m), theta),
        q: field(Rank::Tuple(m * m), q),
        q_inv: field(Rank::Tuple(m * m), q_inv),
        f: field(Rank::Tuple(m * m), f),
        zeta: field(Rank::Tuple(m * m), zeta),
        eta: cp.eta,
        h: field(Rank::Tuple(n), pw.h),
        a: field(Rank::Tuple(n * n), a),
        b: field(Rank::Tuple(n), b),
        current: [bjx, bjy],
        curl_residual: cp.residual,
        residual,
        direct_residual,
    })
}

/// Node-wise bounds of `Q`, `Q⁻¹`, `F` and Morrey ratios of the
/// coefficient fields against the energy Morrey norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub q_max: f64,
    pub q_inv_max: f64,
    /// `max_nodes (|Q| + |Q⁻¹|)`, Frobenius norms
    pub q_sum_max: f64,
    pub f_max: f64,
    /// `sup_M (|Q̃| + |Q̃⁻¹|)` over the sample of `M`
    pub q_sum_sup_m: f64,
    pub f_sup_m: f64,
    /// largest gap between the closed-form and numerical inverse
    pub inverse_error: f64,
    /// `‖(∇t, ∇u)‖_{M²₂}`
    pub energy_morrey: f64,
    pub theta_ratio: f64,
    pub grad_f_ratio: f64,
    pub grad_q_ratio: f64,
    pub curl_zeta_ratio: f64,
    pub lambda: f64,
    pub within_closed_form: bool,
}

fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(Vec::as_slice).collect()
}

fn grad_all(g: &DiscGrid, f: &Field) -> Vec<Vec<f64>> {
    f.comps()
        .iter()
        .flat_map(|c| {
            let [x, y] = grad(g, c);
            [x, y]
        })
        .collect()
}

/// Bounds on the assembled coefficient fields; `fam` is the ball family
/// for the Morrey ratios.
pub fn bound_check(
    grid: &DiscGrid,
    s: &LorentzState,
    sys: &AssembledSystem,
    data: &StationaryTargetData,
    fam: &BallFamily,
) -> Result<BoundReport> {
    let m = sys.m;
    let fro = |f: &Field, p: usize| f.comps().iter().map(|c| c[p] * c[p]).sum::<f64>().sqrt();
    let (mut q_max, mut q_inv_max, mut q_sum_max, mut f_max, mut inverse_error) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in 0..grid.len() {
        let qm = DMatrix::from_fn(m, m, |i, j| sys.q.comp(i * m + j)[p]);
        let inv = qm.try_inverse().ok_or(Error::SingularMatrix)?;
        for i in 0..m {
            for j in 0..m {
                inverse_error = inverse_error.max((inv[(i, j)] - sys.q_inv.comp(i * m + j)[p]).abs());
            }
        }
        let (a, b) = (fro(&sys.q, p), fro(&sys.q_inv, p));
        q_max = q_max.max(a);
        q_inv_max = q_inv_max.max(b);
        q_sum_max = q_sum_max.max(a + b);
        f_max = f_max.max(fro(&sys.f, p));
    }
    let (q_sum_sup_m, f_sup_m) = data.sup_bounds_on_m();

    let mut energy: Vec<Vec<f64>> = grad(grid, &s.t).into_iter().collect();
    for c in &s.u {
        energy.extend(grad(grid, c));
    }
    let energy_morrey = morrey_norm(grid, &refs(&energy), 2.0, fam)?.value;
    let ratio = |comps: &[Vec<f64>]| -> Result<f64> {
        let v = morrey_norm(grid, &refs(comps), 2.0, fam)?.value;
        Ok(if energy_morrey > 0.0 { v / energy_morrey } else { 0.0 })
    };
    let curl_zeta: Vec<Vec<f64>> = {
        let [x, y] = curl2(grid, &sys.eta);
        // ζ repeats η on the diagonal
        (0..m).flat_map(|_| [x.clone(), y.clone()]).collect()
    };
    // samples of M miss points between them; allow a relative slack of 1e-4
    let slack = 1.0 + 1e-4;
    Ok(BoundReport {
        q_max,
        q_inv_max,
        q_sum_max,
        f_max,
        q_sum_sup_m,
        f_sup_m,
        inverse_error,
        energy_morrey,
        theta_ratio: ratio(sys.theta.comps())?,
        grad_f_ratio: ratio(&grad_all(grid, &sys.f))?,
        grad_q_ratio: ratio(&grad_all(grid, &sys.q))?,
        curl_zeta_ratio: ratio(&curl_zeta)?,
        lambda: data.lambda,
        within_closed_form: q_sum_max <= q_sum_sup_m * slack && f_max <= f_sup_m * slack,
    })
}
