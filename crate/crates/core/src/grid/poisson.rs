//! Sparse symmetric positive-definite solves on the disc grid.
//!
//! Three problems are assembled here:
//! * Dirichlet Poisson with the five-point stencil on interior nodes,
//! * divergence-form `-div(β ∇u)` with harmonic-mean edge coefficients,
//! * Neumann Poisson as a cut-cell finite-volume scheme.
//!
//! Factorisations use `faer`'s sparse Cholesky; a Jacobi-preconditioned
//! conjugate gradient is available as an alternative route.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Side};

use super::{DiscGrid, EAST, NONE, NORTH, SOUTH, WEST};
use crate::error::{Error, Result};

pub const SOLVER_TOL: f64 = 1e-10;

/// Symmetric sparse matrix in compressed-row form (both triangles stored).
#[derive(Debug, Clone)]
pub struct SparseSpd {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl SparseSpd {
    /// Builds from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut col = Vec::with_capacity(t.len());
        let mut val: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(c);
                val.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n, row_ptr, col, val }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[r] = s;
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .find(|&k| self.col[k] == r)
                    .map_or(0.0, |k| self.val[k])
            })
            .collect()
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut trip = Vec::with_capacity(self.val.len());
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                trip.push(Triplet::new(r, self.col[k], self.val[k]));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &trip)
            .map_err(|e| Error::InvalidInput(format!("sparse assembly: {e:?}")))
    }
}

/// How linear systems are solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Sparse Cholesky.
    Direct,
    /// Jacobi-preconditioned CG; stops when `‖r‖₂ ≤ tol · ‖b‖₂`.
    Cg { tol: f64, max_iters: usize },
}

impl Default for Method {
    fn default() -> Self {
        Method::Direct
    }
}

/// A factorised (or CG-wrapped) SPD operator, reusable across right-hand sides.
pub struct SpdSolver {
    inner: SolverKind,
}

enum SolverKind {
    Cholesky(Llt<usize, f64>),
    Cg {
        a: SparseSpd,
        inv_diag: Vec<f64>,
        tol: f64,
        max_iters: usize,
    },
}

impl SpdSolver {
    pub fn new(a: SparseSpd, method: Method) -> Result<Self> {
        let inner = match method {
            Method::Direct => {
                faer::set_global_parallelism(faer::Par::Seq);
                let m = a.to_faer()?;
                let sym = SymbolicLlt::try_new(m.symbolic(), Side::Lower)
                    .map_err(|e| Error::InvalidInput(format!("symbolic factorisation: {e:?}")))?;
                let llt =
                    Llt::try_new_with_symbolic(sym, m.as_ref(), Side::Lower).map_err(|_| Error::SingularMatrix)?;
                SolverKind::Cholesky(llt)
            }
            Method::Cg { tol, max_iters } => {
                let inv_diag = a.diag().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
                SolverKind::Cg {
                    a,
                    inv_diag,
                    tol,
                    max_iters,
                }
            }
        };
        Ok(Self { inner })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match &self.inner {
            SolverKind::Cholesky(llt) => {
                let mut x = Mat::from_fn(b.len(), 1, |i, _| b[i]);
                llt.solve_in_place_with_conj(Conj::No, x.as_mut());
                Ok((0..b.len()).map(|i| x[(i, 0)]).collect())
            }
            SolverKind::Cg {
                a,
                inv_diag,
                tol,
                max_iters,
            } => pcg(a, inv_diag, b, *tol, *max_iters),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pcg(a: &SparseSpd, inv_diag: &[f64], b: &[f64], tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut trace = Vec::new();
    for it in 0..max_iters {
        a.matvec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        if it % 50 == 0 {
            trace.push(rel);
        }
        if rel <= tol {
            return Ok(x);
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        residual: dot(&r, &r).sqrt() / bnorm,
        trace,
    })
}

/// Boundary condition for [`poisson_solve`]. Vectors are indexed by node;
/// only the entries at boundary nodes are read.
#[derive(Debug, Clone)]
pub enum Bc {
    /// Prescribed values.
    Dirichlet(Vec<f64>),
    /// Prescribed outward normal derivative.
    Neumann(Vec<f64>),
}

/// Solves `Δu = rhs` on the disc with the given boundary condition.
///
/// Dirichlet: five-point stencil at interior nodes, boundary nodes fixed.
/// Neumann: cut-cell finite volumes; an incompatible right-hand side is
/// projected onto the compatible subspace and the solution has zero
/// weighted mean.
pub fn poisson_solve(grid: &DiscGrid, rhs: &[f64], bc: &Bc) -> Result<Vec<f64>> {
    poisson_solve_with(grid, rhs, bc, Method::Direct)
}

pub fn poisson_solve_with(grid: &DiscGrid, rhs: &[f64], bc: &Bc, method: Method) -> Result<Vec<f64>> {
    check_len(grid, rhs)?;
    match bc {
        Bc::Dirichlet(g) => {
            check_len(grid, g)?;
            let op = DirichletOperator::new(grid, None, method)?;
            // Δu = rhs  <=>  -div(1·∇u) = -rhs
            let f: Vec<f64> = rhs.iter().map(|v| -v).collect();
            op.solve(&f, g)
        }
        Bc::Neumann(g) => {
            check_len(grid, g)?;
            NeumannOperator::new(grid, method)?.solve(rhs, g)
        }
    }
}

fn check_len(grid: &DiscGrid, v: &[f64]) -> Result<()> {
    if v.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Harmonic mean used for edge coefficients.
#[inline]
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// `-div(β ∇u) = f` at interior nodes with Dirichlet values at boundary
/// nodes, five-point flux form with harmonic-mean edge coefficients.
/// With `β = None` this is `-Δ`.
pub struct DirichletOperator<'g> {
    grid: &'g DiscGrid,
    /// unknown number of each node (`NONE` at boundary nodes)
    slot: Vec<u32>,
    unknowns: Vec<usize>,
    beta: Option<Vec<f64>>,
    solver: SpdSolver,
}

impl<'g> DirichletOperator<'g> {
    pub fn new(grid: &'g DiscGrid, beta: Option<&[f64]>, method: Method) -> Result<Self> {
        if let Some(b) = beta {
            check_len(grid, b)?;
            if let Some(p) = b.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "coefficient must be positive, got {} at node {p}",
                    b[p]
                )));
            }
        }
        let mut slot = vec![NONE; grid.len()];
        let unknowns: Vec<usize> = grid.interior_nodes().collect();
        for (k, &p) in unknowns.iter().enumerate() {
            slot[p] = k as u32;
        }
        let ih2 = 1.0 / (grid.h() * grid.h());
        let coef = |p: usize, q: usize| beta.map_or(1.0, |b| harmonic_mean(b[p], b[q]));
        let mut trip = Vec::with_capacity(5 * unknowns.len());
        for (k, &p) in unknowns.iter().enumerate() {
            let mut d = 0.0;
            for s in [EAST, WEST, NORTH, SOUTH] {
                let q = grid.neighbor(p, s).expect("interior node");
                let c = coef(p, q) * ih2;
                d += c;
                if slot[q] != NONE {
                    trip.push((k, slot[q] as usize, -c));
                }
            }
            trip.push((k, k, d));
        }
        let a = SparseSpd::from_triplets(unknowns.len(), trip);
        Ok(Self {
            grid,
            slot,
            unknowns,
            beta: beta.map(<[f64]>::to_vec),
            solver: SpdSolver::new(a, method)?,
        })
    }

    fn coef(&self, p: usize, q: usize) -> f64 {
        self.beta.as_ref().map_or(1.0, |b| harmonic_mean(b[p], b[q]))
    }

    /// Solves with source `f` (read at interior nodes) and boundary values
    /// `g` (read at boundary nodes). Returns the full nodal field.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let ih2 = 1.0 / (self.grid.h() * self.grid.h());
        let b: Vec<f64> = self
            .unknowns
            .iter()
            .map(|&p| {
                let mut v = f[p];
                for s in [EAST, WEST, NORTH, SOUTH] {
                    let q = self.grid.neighbor(p, s).unwrap();
                    if self.slot[q] == NONE {
                        v += self.coef(p, q) * ih2 * g[q];
                    }
                }
                v
            })
            .collect();
        let x = self.solver.solve(&b)?;
        let mut u = g.to_vec();
        for (k, &p) in self.unknowns.iter().enumerate() {
            u[p] = x[k];
        }
        Ok(u)
    }

    /// Applies `-div(β ∇·)` at interior nodes (zero at boundary nodes).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let ih2 = 1.0 / (self.grid.h() * self.grid.h());
        (0..self.grid.len())
            .map(|p| {
                if self.slot[p] == NONE {
                    return 0.0;
                }
                [EAST, WEST, NORTH, SOUTH]
                    .iter()
                    .map(|&s| {
                        let q = self.grid.neighbor(p, s).unwrap();
                        self.coef(p, q) * ih2 * (u[p] - u[q])
                    })
                    .sum()
            })
            .collect()
    }
}

/// Cut-cell finite-volume Neumann Laplacian.
pub struct NeumannOperator<'g> {
    grid: &'g DiscGrid,
    /// boundary arc length attributed to each node
    arc: Vec<f64>,
    solver: SpdSolver,
}

/// Fraction of an axis-aligned segment `a → b` inside the closed unit disc.
fn segment_fraction(a: [f64; 2], b: [f64; 2]) -> f64 {
    // along x = const (vertical) or y = const (horizontal)
    let (fixed, lo, hi) = if a[0] == b[0] {
        (a[0], a[1].min(b[1]), a[1].max(b[1]))
    } else {
        (a[1], a[0].min(b[0]), a[0].max(b[0]))
    };
    let half = (1.0 - fixed * fixed).max(0.0).sqrt();
    let len = (hi.min(half) - lo.max(-half)).max(0.0);
    len / (hi - lo)
}

impl<'g> NeumannOperator<'g> {
    pub fn new(grid: &'g DiscGrid, method: Method) -> Result<Self> {
        let n = grid.len();
        let h = grid.h();
        let mut trip = Vec::with_capacity(5 * n);
        for p in 0..n {
            let [x, y] = grid.pos(p);
            for s in [EAST, NORTH] {
                let Some(q) = grid.neighbor(p, s) else { continue };
                let (a, b) = if s == EAST {
                    ([x + 0.5 * h, y - 0.5 * h], [x + 0.5 * h, y + 0.5 * h])
                } else {
                    ([x - 0.5 * h, y + 0.5 * h], [x + 0.5 * h, y + 0.5 * h])
                };
                // face length / h  times  1/h from the difference quotient
                let c = segment_fraction(a, b);
                trip.push((p, p, c));
                trip.push((q, q, c));
                trip.push((p, q, -c));
                trip.push((q, p, -c));
            }
        }
        // pin node 0 to remove the constant null space
        let trip: Vec<_> = trip
            .into_iter()
            .filter(|&(r, c, _)| r != 0 && c != 0)
            .map(|(r, c, v)| (r - 1, c - 1, v))
            .collect();
        let a = SparseSpd::from_triplets(n - 1, trip);

        // boundary arc attributed to the nearest node
        let samples = ((64.0 / h) as usize).max(512);
        let dl = 2.0 * std::f64::consts::PI / samples as f64;
        let mut arc = vec![0.0; n];
        for k in 0..samples {
            let t = (k as f64 + 0.5) * dl;
            let pt = [t.cos(), t.sin()];
            arc[nearest_node(grid, pt)] += dl;
        }
        Ok(Self {
            grid,
            arc,
            solver: SpdSolver::new(a, method)?,
        })
    }

    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc
    }

    /// Solves `Δu = rhs`, `∂u/∂n = g`; result has zero weighted mean.
    pub fn solve(&self, rhs: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let grid = self.grid;
        // cell balance: Σ_faces (u_p - u_q)·len/h = ∮ g - ∫ rhs
        let mut b: Vec<f64> = (0..grid.len())
            .map(|p| {
                // g is only read where boundary arc is attributed
                let flux = if self.arc[p] > 0.0 { self.arc[p] * g[p] } else { 0.0 };
                flux - grid.weight(p) * rhs[p]
            })
            .collect();
        // compatibility: Σ b = 0; project along the quadrature weights
        let mismatch: f64 = b.iter().sum();
        let wsum = grid.area();
        for (p, v) in b.iter_mut().enumerate() {
            *v -= mismatch * grid.weight(p) / wsum;
        }
        let x = self.solver.solve(&b[1..])?;
        let mut u = Vec::with_capacity(grid.len());
        u.push(0.0);
        u.extend(x);
        let mean = grid.integrate(&u) / wsum;
        u.iter_mut().for_each(|v| *v -= mean);
        Ok(u)
    }
}

fn nearest_node(grid: &DiscGrid, pt: [f64; 2]) -> usize {
    let h = grid.h();
    let i = grid.column_floor(pt[0] + 0.5 * h);
    let j = grid.column_floor(pt[1] + 0.5 * h);
    let side = grid.side as i64;
    let mut best = (f64::INFINITY, usize::MAX);
    for dj in -2..=2 {
        for di in -2..=2 {
            let (a, b) = (i + di, j + dj);
            if a < 0 || b < 0 || a >= side || b >= side {
                continue;
            }
            let q = grid.index[(b * side + a) as usize];
            if q == NONE {
                continue;
            }
            let [x, y] = grid.pos(q as usize);
            let d = (x - pt[0]).powi(2) + (y - pt[1]).powi(2);
            if d < best.0 {
                best = (d, q as usize);
            }
        }
    }
    if best.1 == usize::MAX {
        grid.nearest(pt)
    } else {
        best.1
    }
}
