use serde::{Deserialize, Serialize};

use super::system::{el_residual_lorentz, LorentzState};
use super::target::StationaryTargetData;
use crate::error::{Error, Result};
use crate::grid::poisson::{harmonic_mean, DirichletOperator, Method};
use crate::grid::{DiscGrid, EAST, NORTH, SOUTH, WEST};
use crate::pseudosphere::ConvergenceReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzConfig {
    pub theta: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
}

impl Default for LorentzConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            max_iters: 2000,
            residual_tol: 1e-8,
        }
    }
}

/// Boundary data `t_g = a·x`, and `u_g` with circle factor `b` equal to
/// `(cos φ_b, sin φ_b)`, `φ_b = k_b·x + φ0_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzBoundary {
    pub t_slope: [f64; 2],
    /// one wave vector per circle factor
    pub phase_slope: Vec<[f64; 2]>,
    pub phase_offset: Vec<f64>,
}

impl LorentzBoundary {
    pub fn phase(&self, b: usize, x: f64, y: f64) -> f64 {
        let k = self.phase_slope[b];
        k[0] * x + k[1] * y + self.phase_offset[b]
    }

    /// `(t, u)` at a point.
    pub fn point(&self, x: f64, y: f64) -> (f64, Vec<f64>) {
        let t = self.t_slope[0] * x + self.t_slope[1] * y;
        let u = (0..self.phase_slope.len())
            .flat_map(|b| {
                let ph = self.phase(b, x, y);
                [ph.cos(), ph.sin()]
            })
            .collect();
        (t, u)
    }

    /// Nodal values everywhere (only boundary nodes are used by the solver).
    pub fn evaluate(&self, grid: &DiscGrid, data: &StationaryTargetData) -> Result<LorentzState> {
        if self.phase_slope.len() != data.manifold.blocks() || self.phase_offset.len() != data.manifold.blocks() {
            return Err(Error::DimensionMismatch {
                expected: data.manifold.blocks(),
                got: self.phase_slope.len(),
            });
        }
        let mut t = vec![0.0; grid.len()];
        let mut u = vec![vec![0.0; grid.len()]; data.dim()];
        for p in 0..grid.len() {
            let [x, y] = grid.pos(p);
            let (tv, uv) = self.point(x, y);
            t[p] = tv;
            for (k, v) in uv.into_iter().enumerate() {
                u[k][p] = v;
            }
        }
        Ok(LorentzState { t, u })
    }
}

/// Interior flux-form residual of the `t` equation,
/// `Σ_edges β_e [(t_q − t_p) + ω̄_e·(u_q − u_p)] / h²`.
pub fn current_flux_residual(grid: &DiscGrid, s: &LorentzState, data: &StationaryTargetData) -> Vec<f64> {
    let (beta, omega) = coefficients(grid, s, data);
    let ih2 = 1.0 / (grid.h() * grid.h());
    (0..grid.len())
        .map(|p| {
            if !grid.is_interior(p) {
                return 0.0;
            }
            edges(grid, p)
                .map(|q| {
                    let mut jump = s.t[q] - s.t[p];
                    for (i, w) in omega.iter().enumerate() {
                        jump += 0.5 * (w[p] + w[q]) * (s.u[i][q] - s.u[i][p]);
                    }
                    harmonic_mean(beta[p], beta[q]) * jump * ih2
                })
                .sum()
        })
        .collect()
}

fn edges(grid: &DiscGrid, p: usize) -> impl Iterator<Item = usize> + '_ {
    [EAST, WEST, NORTH, SOUTH]
        .into_iter()
        .map(move |s| grid.neighbor(p, s).expect("interior node"))
}

fn coefficients(grid: &DiscGrid, s: &LorentzState, data: &StationaryTargetData) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut beta = vec![0.0; grid.len()];
    let mut omega = vec![vec![0.0; grid.len()]; data.dim()];
    for p in 0..grid.len() {
        let y = s.at(p);
        beta[p] = data.beta_at(&y);
        for (i, w) in data.omega_at(&y).into_iter().enumerate() {
            omega[i][p] = w;
        }
    }
    (beta, omega)
}

/// Solves the flux-form `t` equation exactly for fixed `u`.
fn solve_t(grid: &DiscGrid, s: &LorentzState, data: &StationaryTargetData) -> Result<Vec<f64>> {
    let (beta, omega) = coefficients(grid, s, data);
    let op = DirichletOperator::new(grid, Some(&beta), Method::Direct)?;
    let ih2 = 1.0 / (grid.h() * grid.h());
    let f: Vec<f64> = (0..grid.len())
        .map(|p| {
            if !grid.is_interior(p) {
                return 0.0;
            }
            edges(grid, p)
                .map(|q| {
                    let jump: f64 = omega
                        .iter()
                        .enumerate()
                        .map(|(i, w)| 0.5 * (w[p] + w[q]) * (s.u[i][q] - s.u[i][p]))
                        .sum();
                    harmonic_mean(beta[p], beta[q]) * jump * ih2
                })
                .sum()
        })
        .collect();
    op.solve(&f, &s.t)
}

fn tangential(data: &StationaryTargetData, s: &LorentzState, r: &mut [Vec<f64>], p: usize) {
    for nu in data.normals(&s.at(p)) {
        let dot: f64 = (0..r.len()).map(|k| r[k][p] * nu[k]).sum();
        for k in 0..r.len() {
            r[k][p] -= dot * nu[k];
        }
    }
}

/// Damped Picard iteration: an exact variable-coefficient solve for `t`,
/// then a projected correction `u ← Π(u + θδ)` with `Δδ = r_u`.
///
/// Boundary values are read from `g` at boundary nodes; `iterations`
/// counts residual evaluations.
pub fn solve_lorentz(
    grid: &DiscGrid,
    g: &LorentzState,
    data: &StationaryTargetData,
    cfg: &LorentzConfig,
) -> Result<(LorentzState, ConvergenceReport)> {
    if !(cfg.theta > 0.0 && cfg.theta <= 1.0) || !(cfg.residual_tol > 0.0) {
        return Err(Error::InvalidInput(format!("invalid solver config {cfg:?}")));
    }
    if g.u.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: g.u.len(),
        });
    }
    for p in grid.boundary_nodes() {
        let d = data.distance_to_m(&g.at(p));
        if !(d <= crate::pseudosphere::INPUT_TOL) {
            return Err(Error::InvalidInput(format!("boundary data off M by {d:e} at node {p}")));
        }
    }
    let lap = DirichletOperator::new(grid, None, Method::Direct)?;
    let zero = vec![0.0; grid.len()];
    let u0: Vec<Vec<f64>> = g.u.iter().map(|c| lap.solve(&zero, c)).collect::<Result<_>>()?;
    let mut s = LorentzState { t: g.t.clone(), u: u0 };
    project_all(grid, &mut s, data)?;
    s.t = solve_t(grid, &s, data)?;

    let mut theta = cfg.theta;
    let mut halvings = 0;
    let mut trace = Vec::new();
    let mut max_defect = 0.0f64;
    loop {
        let mut r = el_residual_lorentz(grid, &s, data)?.u;
        for p in grid.interior_nodes() {
            tangential(data, &s, &mut r, p);
        }
        let rt = current_flux_residual(grid, &s, data);
        let mut refs: Vec<&[f64]> = r.iter().map(Vec::as_slice).collect();
        refs.push(&rt);
        let res = grid.l2_norm_on(&refs, |p| grid.is_interior(p));
        trace.push(res);
        if res <= cfg.residual_tol {
            let report = ConvergenceReport {
                iterations: trace.len(),
                residual: res,
                theta,
                trace,
                max_constraint_defect: max_defect,
            };
            return Ok((s, report));
        }
        if !res.is_finite() || trace.len() >= cfg.max_iters {
            return Err(Error::NonConvergence {
                iterations: trace.len(),
                residual: res,
                trace,
            });
        }
        let delta: Vec<Vec<f64>> = r
            .iter()
            .map(|ri| {
                let f: Vec<f64> = ri.iter().map(|v| -v).collect();
                lap.solve(&f, &zero)
            })
            .collect::<Result<_>>()?;
        loop {
            let mut trial = LorentzState {
                t: s.t.clone(),
                u: s.u
                    .iter()
                    .zip(&delta)
                    .map(|(c, d)| c.iter().zip(d).map(|(a, b)| a + theta * b).collect())
                    .collect(),
            };
            match project_all(grid, &mut trial, data) {
                Ok(defect) => {
                    max_defect = max_defect.max(defect);
                    s = trial;
                    break;
                }
                Err(e @ Error::OutOfTube { .. }) => {
                    if halvings == 6 {
                        return Err(e);
                    }
                    halvings += 1;
                    theta *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        s.t = solve_t(grid, &s, data)?;
    }
}

/// Projects every node onto `M`; returns the largest pre-projection distance.
fn project_all(grid: &DiscGrid, s: &mut LorentzState, data: &StationaryTargetData) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in 0..grid.len() {
        let y = s.at(p);
        let d = data.distance_to_m(&y);
        if !(d <= data.tube) {
            return Err(Error::OutOfTube { node: p, distance: d });
        }
        worst = worst.max(d);
        for (k, v) in data.project(&y).into_iter().enumerate() {
            s.u[k][p] = v;
        }
    }
    Ok(worst)
}
