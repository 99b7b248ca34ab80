use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Embedded Riemannian factor `M` of the target `ℝ × M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    /// unit circle in `ℝ²`
    Circle,
    /// product of two unit circles in `ℝ⁴`
    Torus,
}

impl Manifold {
    pub fn ambient_dim(self) -> usize {
        match self {
            Manifold::Circle => 2,
            Manifold::Torus => 4,
        }
    }

    pub fn blocks(self) -> usize {
        self.ambient_dim() / 2
    }

    pub fn default_tube(self) -> f64 {
        match self {
            Manifold::Circle => 0.5,
            Manifold::Torus => 0.35,
        }
    }
}

/// `β(y) = b0 + b1 y¹` on the ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaModel {
    pub b0: f64,
    pub b1: f64,
}

impl BetaModel {
    pub const ONE: Self = Self { b0: 1.0, b1: 0.0 };
}

/// `ω = κ (−y² dy¹ + y¹ dy²)` on the ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaModel {
    pub kappa: f64,
}

impl OmegaModel {
    pub const ZERO: Self = Self { kappa: 0.0 };
}

/// Target data of a standard stationary Lorentzian manifold
/// `(ℝ × M, −β(dt + ω)² + g_M)`, with `β` and `ω` pulled back to the
/// tubular neighbourhood of `M` through the nearest-point projection `Π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryTargetData {
    pub manifold: Manifold,
    pub beta: BetaModel,
    pub omega: OmegaModel,
    /// tube radius δ
    pub tube: f64,
    /// bound on β, 1/β and derivatives of β, ω on `M` (sampled)
    pub lambda: f64,
}

/// Samples per circle when taking suprema over `M`.
const M_SAMPLES: usize = 720;

impl StationaryTargetData {
    pub fn new(manifold: Manifold, beta: BetaModel, omega: OmegaModel) -> Result<Self> {
        let tube = manifold.default_tube();
        // β must stay positive on the whole tube
        if !(beta.b0 - beta.b1.abs() * (1.0 + tube) > 0.0) {
            return Err(Error::InvalidInput(format!(
                "beta = {} + {} y1 is not positive on the tube",
                beta.b0, beta.b1
            )));
        }
        let mut data = Self {
            manifold,
            beta,
            omega,
            tube,
            lambda: 0.0,
        };
        data.lambda = data.sampled_lambda();
        Ok(data)
    }

    /// `β ≡ 1`, `ω ≡ 0`: the decoupled case.
    pub fn decoupled(manifold: Manifold) -> Self {
        Self::new(manifold, BetaModel::ONE, OmegaModel::ZERO).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.manifold.ambient_dim()
    }

    /// Largest `| |y_b| − 1 |` over circle blocks.
    pub fn distance_to_m(&self, y: &[f64]) -> f64 {
        (0..self.manifold.blocks())
            .map(|b| (y[2 * b].hypot(y[2 * b + 1]) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn in_tube(&self, y: &[f64]) -> bool {
        self.distance_to_m(y) <= self.tube
    }

    /// `Π(y)`: blockwise normalisation.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        for b in 0..self.manifold.blocks() {
            let r = y[2 * b].hypot(y[2 * b + 1]);
            out[2 * b] /= r;
            out[2 * b + 1] /= r;
        }
        out
    }

    /// Unit normals `ν_l` of `M` at `Π(y)`, one per circle block.
    pub fn normals(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let p = self.project(y);
        (0..self.manifold.blocks())
            .map(|b| {
                let mut v = vec![0.0; self.dim()];
                v[2 * b] = p[2 * b];
                v[2 * b + 1] = p[2 * b + 1];
                v
            })
            .collect()
    }

    /// `∂_i Π^k`, indexed `[i][k]`.
    pub fn dpi(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for b in 0..self.manifold.blocks() {
            let r = y[2 * b].hypot(y[2 * b + 1]);
            let r3 = r * r * r;
            for i in 2 * b..2 * b + 2 {
                for k in 2 * b..2 * b + 2 {
                    let delta = if i == k { 1.0 } else { 0.0 };
                    d[i][k] = delta / r - y[i] * y[k] / r3;
                }
            }
        }
        d
    }

    /// `∂_j ∂_i Π^k`, indexed `[j][i][k]`.
    pub fn ddpi(&self, y: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let n = self.dim();
        let mut d = vec![vec![vec![0.0; n]; n]; n];
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for b in 0..self.manifold.blocks() {
            let r = y[2 * b].hypot(y[2 * b + 1]);
            let r3 = r.powi(3);
            let r5 = r.powi(5);
            let idx = 2 * b..2 * b + 2;
            for j in idx.clone() {
                for i in idx.clone() {
                    for k in idx.clone() {
                        d[j][i][k] = -(delta(i, k) * y[j] + delta(j, k) * y[i] + delta(i, j) * y[k]) / r3
                            + 3.0 * y[i] * y[j] * y[k] / r5;
                    }
                }
            }
        }
        d
    }

    fn beta_raw(&self, z: &[f64]) -> f64 {
        self.beta.b0 + self.beta.b1 * z[0]
    }

    fn omega_raw(&self, z: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        w[0] = -self.omega.kappa * z[1];
        w[1] = self.omega.kappa * z[0];
        w
    }

    /// `∂_l ω_k` of the ambient form (constant), `[l][k]`.
    fn domega_raw(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.dim()]; self.dim()];
        d[0][1] = self.omega.kappa;
        d[1][0] = -self.omega.kappa;
        d
    }

    /// `β̃(y) = β(Π y)`.
    pub fn beta_at(&self, y: &[f64]) -> f64 {
        self.beta_raw(&self.project(y))
    }

    /// `∂_j β̃(y)`.
    pub fn grad_beta(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dpi(y);
        (0..self.dim()).map(|j| self.beta.b1 * d[j][0]).collect()
    }

    /// `ω̃_i(y) = ω_k(Π y) ∂_i Π^k(y)`.
    pub fn omega_at(&self, y: &[f64]) -> Vec<f64> {
        let w = self.omega_raw(&self.project(y));
        let d = self.dpi(y);
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|k| w[k] * d[i][k]).sum())
            .collect()
    }

    /// `∂_j ω̃_i(y)`, indexed `[j][i]`.
    pub fn domega(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let w = self.omega_raw(&self.project(y));
        let dw = self.domega_raw();
        let d = self.dpi(y);
        let dd = self.ddpi(y);
        let mut out = vec![vec![0.0; n]; n];
        for j in 0..n {
            for i in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += w[k] * dd[j][i][k];
                    for l in 0..n {
                        s += dw[l][k] * d[j][l] * d[i][k];
                    }
                }
                out[j][i] = s;
            }
        }
        out
    }

    /// Coefficients `a_jk` and `b_j` of the assembled system at `y`:
    /// `a_jk = −(∂_kω_j − ∂_jω_k) + Σ_l (∂_kω_i − ∂_iω_k) ν_l^i ν_l^j`,
    /// `b_j = (∂_jβ − Σ_l ∂_iβ ν_l^i ν_l^j) / (2β²)`.
    pub fn a_b(&self, y: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = self.dim();
        let dw = self.domega(y);
        let nus = self.normals(y);
        let beta = self.beta_at(y);
        let gb = self.grad_beta(y);
        // curl of ω: c[k][j] = ∂_kω_j − ∂_jω_k
        let c = |k: usize, j: usize| dw[k][j] - dw[j][k];
        let mut a = vec![vec![0.0; n]; n];
        for j in 0..n {
            for k in 0..n {
                let mut v = -c(k, j);
                for nu in &nus {
                    for i in 0..n {
                        v += c(k, i) * nu[i] * nu[j];
                    }
                }
                a[j][k] = v;
            }
        }
        let b = (0..n)
            .map(|j| {
                let mut v = gb[j];
                for nu in &nus {
                    v -= (0..n).map(|i| gb[i] * nu[i]).sum::<f64>() * nu[j];
                }
                v / (2.0 * beta * beta)
            })
            .collect();
        (a, b)
    }

    /// `Q̃(y) = [[β, β ω̃], [0, I]]`, row-major `(n+1)²`.
    pub fn q_tilde(&self, y: &[f64]) -> Vec<f64> {
        let m = self.dim() + 1;
        let beta = self.beta_at(y);
        let w = self.omega_at(y);
        let mut q = vec![0.0; m * m];
        q[0] = beta;
        for k in 0..self.dim() {
            q[k + 1] = beta * w[k];
            q[(k + 1) * m + k + 1] = 1.0;
        }
        q
    }

    /// Closed-form inverse `[[1/β, −ω̃], [0, I]]`.
    pub fn q_tilde_inv(&self, y: &[f64]) -> Vec<f64> {
        let m = self.dim() + 1;
        let beta = self.beta_at(y);
        let w = self.omega_at(y);
        let mut q = vec![0.0; m * m];
        q[0] = 1.0 / beta;
        for k in 0..self.dim() {
            q[k + 1] = -w[k];
            q[(k + 1) * m + k + 1] = 1.0;
        }
        q
    }

    /// `F̃(y)`: row 0 zero, `F[j+1][0] = b_j`, `F[j+1][k+1] = a_jk`.
    pub fn f_tilde(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let m = n + 1;
        let (a, b) = self.a_b(y);
        let mut f = vec![0.0; m * m];
        for j in 0..n {
            f[(j + 1) * m] = b[j];
            for k in 0..n {
                f[(j + 1) * m + k + 1] = a[j][k];
            }
        }
        f
    }

    /// Points sampled on `M` (a `M_SAMPLES` grid per circle factor).
    pub fn sample_m(&self) -> Vec<Vec<f64>> {
        let angle = |k: usize| 2.0 * std::f64::consts::PI * k as f64 / M_SAMPLES as f64;
        match self.manifold {
            Manifold::Circle => (0..M_SAMPLES).map(|k| vec![angle(k).cos(), angle(k).sin()]).collect(),
            Manifold::Torus => {
                let step = 8;
                let mut pts = Vec::new();
                for a in (0..M_SAMPLES).step_by(step) {
                    for b in (0..M_SAMPLES).step_by(step) {
                        pts.push(vec![angle(a).cos(), angle(a).sin(), angle(b).cos(), angle(b).sin()]);
                    }
                }
                pts
            }
        }
    }

    /// `sup_M (|Q̃|_F + |Q̃⁻¹|_F)` and `sup_M |F̃|_F` over the sample.
    pub fn sup_bounds_on_m(&self) -> (f64, f64) {
        let fro = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut q = 0.0f64;
        let mut f = 0.0f64;
        for y in self.sample_m() {
            q = q.max(fro(&self.q_tilde(&y)) + fro(&self.q_tilde_inv(&y)));
            f = f.max(fro(&self.f_tilde(&y)));
        }
        (q, f)
    }

    fn sampled_lambda(&self) -> f64 {
        let n = self.dim();
        let eps = 1e-5;
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut lam = 0.0f64;
        for y in self.sample_m() {
            let beta = self.beta_at(&y);
            let gb = self.grad_beta(&y);
            let w = self.omega_at(&y);
            let dw = self.domega(&y);
            let (mut hb, mut hw) = (0.0, 0.0);
            for j in 0..n {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[j] += eps;
                ym[j] -= eps;
                let gp = self.grad_beta(&yp);
                let gm = self.grad_beta(&ym);
                hb += (0..n).map(|i| ((gp[i] - gm[i]) / (2.0 * eps)).powi(2)).sum::<f64>();
                let wp = self.domega(&yp);
                let wm = self.domega(&ym);
                for a in 0..n {
                    for b in 0..n {
                        hw += ((wp[a][b] - wm[a][b]) / (2.0 * eps)).powi(2);
                    }
                }
            }
            let dwn = dw.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            lam = lam
                .max(beta)
                .max(1.0 / beta)
                .max(norm(&gb))
                .max(hb.sqrt())
                .max(norm(&w))
                .max(dwn)
                .max(hw.sqrt());
        }
        lam
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coupled() -> StationaryTargetData {
        StationaryTargetData::new(
            Manifold::Circle,
            BetaModel { b0: 2.0, b1: 0.5 },
            OmegaModel { kappa: 0.3 },
        )
        .unwrap()
    }

    #[test]
    fn projection_is_idempotent_and_normals_orthonormal() {
        for data in [coupled(), StationaryTargetData::decoupled(Manifold::Torus)] {
            let y: Vec<f64> = (0..data.dim())
                .map(|k| 0.9 + 0.1 * k as f64 * if k % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let p = data.project(&y);
            let pp = data.project(&p);
            assert!(p.iter().zip(&pp).all(|(a, b)| (a - b).abs() < 1e-15));
            let nus = data.normals(&y);
            for (a, na) in nus.iter().enumerate() {
                for (b, nb) in nus.iter().enumerate() {
                    let d: f64 = na.iter().zip(nb).map(|(x, y)| x * y).sum();
                    assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn projection_derivatives_match_finite_differences() {
        let data = StationaryTargetData::decoupled(Manifold::Torus);
        let y = vec![0.8, 0.5, -0.7, 0.9];
        let eps = 1e-6;
        let d = data.dpi(&y);
        let dd = data.ddpi(&y);
        for j in 0..4 {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += eps;
            ym[j] -= eps;
            let (pp, pm) = (data.project(&yp), data.project(&ym));
            let (dp, dm) = (data.dpi(&yp), data.dpi(&ym));
            for k in 0..4 {
                assert!(((pp[k] - pm[k]) / (2.0 * eps) - d[j][k]).abs() < 1e-8);
                for i in 0..4 {
                    assert!(((dp[i][k] - dm[i][k]) / (2.0 * eps) - dd[j][i][k]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn pulled_back_derivatives_match_finite_differences() {
        let data = coupled();
        let y = vec![0.95, -0.4];
        let eps = 1e-6;
        let dw = data.domega(&y);
        let gb = data.grad_beta(&y);
        for j in 0..2 {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += eps;
            ym[j] -= eps;
            assert!(((data.beta_at(&yp) - data.beta_at(&ym)) / (2.0 * eps) - gb[j]).abs() < 1e-8);
            let (wp, wm) = (data.omega_at(&yp), data.omega_at(&ym));
            for i in 0..2 {
                assert!(((wp[i] - wm[i]) / (2.0 * eps) - dw[j][i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn decoupled_coefficients_vanish() {
        let data = StationaryTargetData::decoupled(Manifold::Circle);
        let y = vec![0.6, 0.8];
        let (a, b) = data.a_b(&y);
        assert!(a.iter().flatten().chain(&b).all(|&v| v == 0.0));
        assert_eq!(data.q_tilde(&y), vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(data.f_tilde(&y).iter().all(|&v| v == 0.0));
        assert_eq!(data.lambda, 1.0);
    }

    #[test]
    fn beta_must_be_positive_on_tube() {
        assert!(StationaryTargetData::new(Manifold::Circle, BetaModel { b0: 0.5, b1: 0.5 }, OmegaModel::ZERO).is_err());
        assert!(coupled().lambda >= 2.0);
    }
}
