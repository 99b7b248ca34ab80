//! Maps from the disc into pseudospheres `S^n_ν` and pseudohyperbolic
//! spaces `H^n_ν`: energy, the Θ field, Euler–Lagrange residuals and a
//! damped projected Picard solver.
//!
//! For a constrained map `u^T E u = level` the Euler–Lagrange system is
//! `-Δu = Θ E ∇u` with `Θ^{ij} = u^i ∇u^j - u^j ∇u^i`, which in the continuum
//! equals `-Δu = λ u` with `λ = (∇u)^T E ∇u`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::poisson::{DirichletOperator, Method};
use crate::grid::{grad, laplacian, DiscGrid, Field, Rank};
use crate::signature::{
    anti_isometry, anti_isometry_inverse, project_in_place, QuadricSpec, SignatureMatrix, CONE_TOL,
};

/// Accepted distance to the quadric for maps handed to [`DiscMap::new`].
pub const INPUT_TOL: f64 = 1e-8;

/// Grid-sampled map into a quadric; component `i` is `comps[i]`.
#[derive(Debug, Clone)]
pub struct DiscMap {
    grid: Arc<DiscGrid>,
    quadric: QuadricSpec,
    comps: Vec<Vec<f64>>,
}

impl DiscMap {
    /// Wraps nodal values, checking the constraint to [`INPUT_TOL`].
    pub fn new(grid: Arc<DiscGrid>, quadric: QuadricSpec, comps: Vec<Vec<f64>>) -> Result<Self> {
        let map = Self::unchecked(grid, quadric, comps)?;
        let d = map.constraint_defect();
        if !(d <= INPUT_TOL) {
            return Err(Error::InvalidInput(format!("map is off the quadric by {d:e}")));
        }
        Ok(map)
    }

    fn unchecked(grid: Arc<DiscGrid>, quadric: QuadricSpec, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != quadric.dim() {
            return Err(Error::DimensionMismatch {
                expected: quadric.dim(),
                got: comps.len(),
            });
        }
        if let Some(c) = comps.iter().find(|c| c.len() != grid.len()) {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: c.len(),
            });
        }
        Ok(Self { grid, quadric, comps })
    }

    /// Projects arbitrary nodal values onto the quadric.
    pub fn project(grid: Arc<DiscGrid>, quadric: QuadricSpec, mut comps: Vec<Vec<f64>>) -> Result<Self> {
        let k = quadric.dim();
        if comps.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: comps.len(),
            });
        }
        let mut y = vec![0.0; k];
        for p in 0..grid.len() {
            for i in 0..k {
                y[i] = comps[i][p];
            }
            project_in_place(&mut y, &quadric, CONE_TOL)?;
            for i in 0..k {
                comps[i][p] = y[i];
            }
        }
        Self::unchecked(grid, quadric, comps)
    }

    /// Samples `f` at every node and projects.
    pub fn from_fn(grid: Arc<DiscGrid>, quadric: QuadricSpec, f: impl Fn(f64, f64) -> Vec<f64>) -> Result<Self> {
        let k = quadric.dim();
        let mut comps = vec![vec![0.0; grid.len()]; k];
        for p in 0..grid.len() {
            let [x, y] = grid.pos(p);
            let v = f(x, y);
            if v.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: v.len(),
                });
            }
            for i in 0..k {
                comps[i][p] = v[i];
            }
        }
        Self::project(grid, quadric, comps)
    }

    /// Constant map.
    pub fn constant(grid: Arc<DiscGrid>, quadric: QuadricSpec, v: &[f64]) -> Result<Self> {
        let comps = v.iter().map(|&c| vec![c; grid.len()]).collect();
        Self::new(grid, quadric, comps)
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    pub fn quadric(&self) -> &QuadricSpec {
        &self.quadric
    }

    pub fn sig(&self) -> &SignatureMatrix {
        &self.quadric.sig
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn comp(&self, i: usize) -> &[f64] {
        &self.comps[i]
    }

    pub fn into_comps(self) -> Vec<Vec<f64>> {
        self.comps
    }

    pub fn at(&self, p: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c[p]).collect()
    }

    /// Largest nodal `|u^T E u - level|`.
    pub fn constraint_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|p| self.quadric.defect(&self.at(p)))
            .fold(0.0, f64::max)
    }

    pub fn to_field(&self) -> Field {
        Field::new(self.grid.clone(), Rank::Tuple(self.dim()), self.comps.clone())
            .expect("shape checked on construction")
    }

    /// Gradients of all components, `[i][d]`.
    pub fn gradients(&self) -> Vec<[Vec<f64>; 2]> {
        self.comps.iter().map(|c| grad(&self.grid, c)).collect()
    }

    /// Image under the anti-isometry, landing in the pseudohyperbolic space
    /// of opposite signature.
    pub fn anti_isometric_image(&self) -> Result<Self> {
        let nu = self.sig().nu();
        let n = self.dim() - 1;
        let target = if self.quadric.level > 0.0 {
            QuadricSpec::pseudohyperbolic(n, n - nu)?
        } else {
            // H^n_ν (signature ν+1) is the image of S^n_{n-ν}; undo that
            QuadricSpec::pseudosphere(n, n - (nu - 1))?
        };
        let mut comps = self.comps.clone();
        if self.quadric.level > 0.0 {
            comps.rotate_left(nu);
        } else {
            comps.rotate_right(target.sig.nu());
        }
        Self::new(self.grid.clone(), target, comps)
    }
}

/// `½ Σ w (∇u)^T E ∇u`; indefinite for `ν ≥ 1`.
pub fn energy(u: &DiscMap) -> f64 {
    let g = u.grid();
    let grads = u.gradients();
    let density: Vec<f64> = (0..g.len())
        .map(|p| {
            grads
                .iter()
                .enumerate()
                .map(|(i, [gx, gy])| u.sig().eps(i) * (gx[p] * gx[p] + gy[p] * gy[p]))
                .sum()
        })
        .collect();
    0.5 * g.integrate(&density)
}

/// `Θ^{ij} = u^i ∇u^j - u^j ∇u^i` as a matrix-of-1-forms field.
pub fn theta(u: &DiscMap) -> Field {
    theta_from(u.grid(), u.comps(), &u.gradients())
}

pub(crate) fn theta_from(grid: &Arc<DiscGrid>, comps: &[Vec<f64>], grads: &[[Vec<f64>; 2]]) -> Field {
    let k = comps.len();
    let n = grid.len();
    let mut out = vec![vec![0.0; n]; 2 * k * k];
    for i in 0..k {
        for j in (i + 1)..k {
            for d in 0..2 {
                let v: Vec<f64> = (0..n)
                    .map(|p| comps[i][p] * grads[j][d][p] - comps[j][p] * grads[i][d][p])
                    .collect();
                out[2 * (j * k + i) + d] = v.iter().map(|a| -a).collect();
                out[2 * (i * k + j) + d] = v;
            }
        }
    }
    Field::new(grid.clone(), Rank::MatrixOneForm(k), out).expect("shape by construction")
}

/// Both forms of the Euler–Lagrange residual, zero on boundary nodes.
#[derive(Debug, Clone)]
pub struct ElResidual {
    /// `-Δu - Θ E ∇u`
    pub theta_form: Vec<Vec<f64>>,
    /// `-Δu - λ u`
    pub lambda_form: Vec<Vec<f64>>,
    /// `λ = (∇u)^T E ∇u`
    pub lambda: Vec<f64>,
    /// largest interior difference between the two forms
    pub discrepancy: f64,
}

impl ElResidual {
    /// Weighted L² norm of the Θ-form over interior nodes.
    pub fn l2(&self, grid: &DiscGrid) -> f64 {
        let refs: Vec<&[f64]> = self.theta_form.iter().map(Vec::as_slice).collect();
        grid.l2_norm_on(&refs, |p| grid.is_interior(p))
    }

    pub fn max(&self) -> f64 {
        self.theta_form
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn el_residual(u: &DiscMap) -> ElResidual {
    let g = u.grid();
    let k = u.dim();
    let n = g.len();
    let grads = u.gradients();
    let sig = *u.sig();
    let laps: Vec<Vec<f64>> = u.comps().iter().map(|c| laplacian(g, c)).collect();
    let lambda: Vec<f64> = (0..n)
        .map(|p| {
            (0..k)
                .map(|j| sig.eps(j) * (grads[j][0][p].powi(2) + grads[j][1][p].powi(2)))
                .sum()
        })
        .collect();
    let mut theta_form = vec![vec![0.0; n]; k];
    let mut lambda_form = vec![vec![0.0; n]; k];
    let mut discrepancy = 0.0f64;
    for p in g.interior_nodes() {
        for i in 0..k {
            let mut force = 0.0;
            for j in 0..k {
                if j == i {
                    continue;
                }
                for d in 0..2 {
                    let th = u.comps[i][p] * grads[j][d][p] - u.comps[j][p] * grads[i][d][p];
                    force += th * sig.eps(j) * grads[j][d][p];
                }
            }
            theta_form[i][p] = -laps[i][p] - force;
            lambda_form[i][p] = -laps[i][p] - lambda[p] * u.comps[i][p];
            discrepancy = discrepancy.max((theta_form[i][p] - lambda_form[i][p]).abs());
        }
    }
    ElResidual {
        theta_form,
        lambda_form,
        lambda,
        discrepancy,
    }
}

/// Component of the Θ-form residual tangent to the quadric at each node,
/// `r - (⟨r, u⟩ / ⟨u, u⟩) u`. This is what the solver drives to zero.
pub fn tangential_residual(u: &DiscMap) -> Vec<Vec<f64>> {
    let mut r = el_residual(u).theta_form;
    let sig = *u.sig();
    let level = u.quadric().level;
    for p in 0..u.grid().len() {
        let ru: f64 = (0..u.dim()).map(|i| sig.eps(i) * r[i][p] * u.comps[i][p]).sum();
        let c = ru / level;
        for i in 0..u.dim() {
            r[i][p] -= c * u.comps[i][p];
        }
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub theta: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            max_iters: 5000,
            residual_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "damping must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidInput("residual_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// number of residual evaluations
    pub iterations: usize,
    pub residual: f64,
    /// damping in effect at exit
    pub theta: f64,
    pub trace: Vec<f64>,
    /// largest constraint defect seen after any iteration
    pub max_constraint_defect: f64,
}

/// Built-in boundary data families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryData {
    /// `(sinh(ax+by), cosh(ax+by))` on `S^1_1`.
    S11Exact {
        a: f64,
        b: f64,
    },
    /// Exponential map at `(0, .., 0, 1)` of `s·(x, y, 0, ..)`.
    Cap {
        amplitude: f64,
    },
    Constant {
        value: Vec<f64>,
    },
    /// Explicit values per node (only boundary nodes are read).
    Table {
        values: Vec<Vec<f64>>,
    },
}

impl BoundaryData {
    /// Values at every node (callers read only the boundary ones).
    pub fn evaluate(&self, grid: &DiscGrid, q: &QuadricSpec) -> Result<Vec<Vec<f64>>> {
        let k = q.dim();
        let n = grid.len();
        let mut out = vec![vec![0.0; n]; k];
        match self {
            BoundaryData::Table { values } => {
                if values.len() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        got: values.len(),
                    });
                }
                for (o, v) in out.iter_mut().zip(values) {
                    if v.len() != n {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            got: v.len(),
                        });
                    }
                    o.copy_from_slice(v);
                }
            }
            _ => {
                for p in 0..n {
                    let [x, y] = grid.pos(p);
                    let v = self.point(x, y, q)?;
                    for i in 0..k {
                        out[i][p] = v[i];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Value at one point (not available for tables).
    pub fn point(&self, x: f64, y: f64, q: &QuadricSpec) -> Result<Vec<f64>> {
        let k = q.dim();
        match self {
            BoundaryData::S11Exact { a, b } => {
                if k != 2 || q.sig.nu() != 1 || q.level != 1.0 {
                    return Err(Error::InvalidInput("s11_exact needs the target S^1_1".into()));
                }
                let s = a * x + b * y;
                Ok(vec![s.sinh(), s.cosh()])
            }
            BoundaryData::Cap { amplitude } => {
                if k < 3 {
                    return Err(Error::InvalidInput("cap data needs n >= 2".into()));
                }
                Ok(cap_point(&q.sig, q.level, *amplitude, x, y))
            }
            BoundaryData::Constant { value } => {
                if value.len() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        got: value.len(),
                    });
                }
                Ok(value.clone())
            }
            BoundaryData::Table { .. } => Err(Error::InvalidInput("table data has no closed form".into())),
        }
    }
}

/// Geodesic exponential map on the quadric at the base point
/// `p = (0, .., 0, 1)` (level +1) or `p = (1, 0, .., 0)` (level -1) applied to
/// the tangent vector `s (x, y)` placed in the two slots next to the base
/// slot.
pub fn cap_point(sig: &SignatureMatrix, level: f64, s: f64, x: f64, y: f64) -> Vec<f64> {
    let k = sig.dim();
    let (base, a, b) = if level > 0.0 { (k - 1, 0, 1) } else { (0, 1, 2) };
    let mut v = vec![0.0; k];
    v[a] = s * x;
    v[b] = s * y;
    let q: f64 = (0..k).map(|i| sig.eps(i) * v[i] * v[i]).sum();
    // exp_p(v) = C p + S v with ⟨p,p⟩ = level:
    // C = cos √(q/level)…, written via the sign of q·level
    let ql = q * level;
    let (c, sn) = if ql > 1e-300 {
        let r = ql.sqrt();
        (r.cos(), r.sin() / r)
    } else if ql < -1e-300 {
        let r = (-ql).sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        (1.0, 1.0)
    };
    let mut out: Vec<f64> = v.iter().map(|vi| sn * vi).collect();
    out[base] += c;
    out
}

/// Damped projected Picard iteration
/// `u ← project(u + θ δ)`, `Δδ = r_T(u)`, `δ = 0` on the boundary,
/// starting from the projected harmonic extension of the boundary data.
///
/// `r_T` is the tangential Θ-form residual; iteration stops once its
/// weighted L² norm is at most `cfg.residual_tol`. A null-cone hit during
/// projection halves θ (at most six times).
pub fn solve(
    g: &BoundaryData,
    grid: &Arc<DiscGrid>,
    q: &QuadricSpec,
    cfg: &SolverConfig,
) -> Result<(DiscMap, ConvergenceReport)> {
    let values = g.evaluate(grid, q)?;
    solve_with_values(values, grid, q, cfg)
}

pub fn solve_with_values(
    mut values: Vec<Vec<f64>>,
    grid: &Arc<DiscGrid>,
    q: &QuadricSpec,
    cfg: &SolverConfig,
) -> Result<(DiscMap, ConvergenceReport)> {
    cfg.validate()?;
    let k = q.dim();
    if values.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: values.len(),
        });
    }
    // boundary data must already sit on the quadric
    let mut y = vec![0.0; k];
    for p in grid.boundary_nodes() {
        for i in 0..k {
            y[i] = values[i][p];
        }
        let d = q.defect(&y);
        if !(d <= INPUT_TOL) {
            return Err(Error::InvalidInput(format!(
                "boundary data off the quadric by {d:e} at node {p}"
            )));
        }
        project_in_place(&mut y, q, CONE_TOL)?;
        for i in 0..k {
            values[i][p] = y[i];
        }
    }

    let op = DirichletOperator::new(grid, None, Method::Direct)?;
    let zero = vec![0.0; grid.len()];
    let mut start = Vec::with_capacity(k);
    for c in &values {
        start.push(op.solve(&zero, c)?);
    }
    let mut u = DiscMap::project(grid.clone(), *q, start)?;

    let mut theta = cfg.theta;
    let mut halvings = 0;
    let mut trace = Vec::new();
    let mut max_defect = u.constraint_defect();
    loop {
        let r = tangential_residual(&u);
        let refs: Vec<&[f64]> = r.iter().map(Vec::as_slice).collect();
        let res = grid.l2_norm_on(&refs, |p| grid.is_interior(p));
        trace.push(res);
        let report = |trace: &Vec<f64>, theta, max_defect| ConvergenceReport {
            iterations: trace.len(),
            residual: res,
            theta,
            trace: trace.clone(),
            max_constraint_defect: max_defect,
        };
        if res <= cfg.residual_tol {
            return Ok((u, report(&trace, theta, max_defect)));
        }
        if !res.is_finite() || trace.len() >= cfg.max_iters {
            return Err(Error::NonConvergence {
                iterations: trace.len(),
                residual: res,
                trace,
            });
        }
        // -Δδ = -r
        let delta: Vec<Vec<f64>> = r
            .iter()
            .map(|ri| {
                let f: Vec<f64> = ri.iter().map(|v| -v).collect();
                op.solve(&f, &zero)
            })
            .collect::<Result<_>>()?;
        loop {
            let trial: Vec<Vec<f64>> = u
                .comps()
                .iter()
                .zip(&delta)
                .map(|(c, d)| c.iter().zip(d).map(|(a, b)| a + theta * b).collect())
                .collect();
            match DiscMap::project(grid.clone(), *q, trial) {
                Ok(next) => {
                    u = next;
                    break;
                }
                Err(e @ Error::NullConeViolation { .. }) => {
                    if halvings == 6 {
                        return Err(e);
                    }
                    halvings += 1;
                    theta *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        max_defect = max_defect.max(u.constraint_defect());
    }
}

/// Solves into `H^n_ν` by conjugating with the anti-isometry from
/// `S^n_{n-ν}`. `g` is evaluated in `H^n_ν` coordinates.
pub fn solve_pseudohyperbolic(
    g: &BoundaryData,
    grid: &Arc<DiscGrid>,
    n: usize,
    nu: usize,
    cfg: &SolverConfig,
) -> Result<(DiscMap, ConvergenceReport)> {
    let target = QuadricSpec::pseudohyperbolic(n, nu)?;
    let source = QuadricSpec::pseudosphere(n, n - nu)?;
    let values = g.evaluate(grid, &target)?;
    let shift = n - nu;
    let pulled = transpose_apply(&values, |y| anti_isometry_inverse(y, shift));
    let (v, report) = solve_with_values(pulled, grid, &source, cfg)?;
    let pushed = transpose_apply(v.comps(), |y| anti_isometry(y, shift));
    Ok((DiscMap::new(grid.clone(), target, pushed)?, report))
}

fn transpose_apply(comps: &[Vec<f64>], f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<Vec<f64>> {
    let k = comps.len();
    let n = comps.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; n]; k];
    let mut y = vec![0.0; k];
    for p in 0..n {
        for i in 0..k {
            y[i] = comps[i][p];
        }
        for (i, v) in f(&y).into_iter().enumerate() {
            out[i][p] = v;
        }
    }
    out
}
