//! Finite-difference operators on a [`DiscGrid`].
//!
//! First derivatives are centred where both axis neighbours exist and
//! one-sided second order (three points) otherwise, dropping to a two-point
//! difference when the mask is only one node deep. The Laplacian is the
//! compact five-point stencil at interior nodes.
//!
//! Orientation of the 2-vector curl: for `ξ = ξ12 ∂x ∧ ∂y` with
//! `ξ21 = -ξ12`, `curl ξ = (Σ_i ∂_i ξ_ij) ∂_j = (-∂y ξ12, ∂x ξ12)`, and
//! `div ∘ curl2` vanishes at core nodes up to rounding.

use super::{DiscGrid, Field, Rank, EAST, NORTH, SOUTH, WEST};
use crate::error::{Error, Result};

/// Difference stencil of one first derivative at one node.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stencil {
    pub center: usize,
    pub nodes: [usize; 3],
    pub coefs: [f64; 3],
    pub len: usize,
}

impl Stencil {
    fn push(&mut self, node: usize, coef: f64) {
        self.nodes[self.len] = node;
        self.coefs[self.len] = coef;
        self.len += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(|k| (self.nodes[k], self.coefs[k]))
    }

    /// Evaluated in difference form (coefficients sum to zero), so
    /// constants are annihilated exactly.
    #[inline]
    pub fn apply(&self, f: &[f64]) -> f64 {
        let f0 = f[self.center];
        let mut s = 0.0;
        for k in 0..self.len {
            s += self.coefs[k] * (f[self.nodes[k]] - f0);
        }
        s
    }
}

/// Stencil of `∂/∂x_axis` at node `p`.
pub fn deriv_stencil(grid: &DiscGrid, p: usize, axis: usize) -> Stencil {
    let (plus, minus) = if axis == 0 { (EAST, WEST) } else { (NORTH, SOUTH) };
    let h = grid.h();
    let mut st = Stencil {
        center: p,
        ..Stencil::default()
    };
    match (grid.neighbor(p, plus), grid.neighbor(p, minus)) {
        (Some(a), Some(b)) => {
            st.push(a, 0.5 / h);
            st.push(b, -0.5 / h);
        }
        (Some(a), None) => match grid.neighbor(a, plus) {
            Some(a2) => {
                st.push(p, -1.5 / h);
                st.push(a, 2.0 / h);
                st.push(a2, -0.5 / h);
            }
            None => {
                st.push(p, -1.0 / h);
                st.push(a, 1.0 / h);
            }
        },
        (None, Some(b)) => match grid.neighbor(b, minus) {
            Some(b2) => {
                st.push(p, 1.5 / h);
                st.push(b, -2.0 / h);
                st.push(b2, 0.5 / h);
            }
            None => {
                st.push(p, 1.0 / h);
                st.push(b, -1.0 / h);
            }
        },
        (None, None) => {}
    }
    st
}

/// `∂f/∂x_axis` at every node.
pub fn deriv(grid: &DiscGrid, f: &[f64], axis: usize) -> Vec<f64> {
    (0..grid.len()).map(|p| deriv_stencil(grid, p, axis).apply(f)).collect()
}

pub fn grad(grid: &DiscGrid, f: &[f64]) -> [Vec<f64>; 2] {
    [deriv(grid, f, 0), deriv(grid, f, 1)]
}

pub fn div(grid: &DiscGrid, vx: &[f64], vy: &[f64]) -> Vec<f64> {
    (0..grid.len())
        .map(|p| deriv_stencil(grid, p, 0).apply(vx) + deriv_stencil(grid, p, 1).apply(vy))
        .collect()
}

/// `curl ξ12 = (-∂y ξ12, ∂x ξ12)`.
pub fn curl2(grid: &DiscGrid, xi: &[f64]) -> [Vec<f64>; 2] {
    let dy = deriv(grid, xi, 1);
    let dx = deriv(grid, xi, 0);
    [dy.into_iter().map(|v| -v).collect(), dx]
}

/// Scalar vorticity `∂x V_y - ∂y V_x`.
pub fn vorticity(grid: &DiscGrid, vx: &[f64], vy: &[f64]) -> Vec<f64> {
    (0..grid.len())
        .map(|p| deriv_stencil(grid, p, 0).apply(vy) - deriv_stencil(grid, p, 1).apply(vx))
        .collect()
}

/// Five-point Laplacian at interior nodes, zero on boundary nodes.
pub fn laplacian(grid: &DiscGrid, f: &[f64]) -> Vec<f64> {
    let ih2 = 1.0 / (grid.h() * grid.h());
    (0..grid.len())
        .map(|p| {
            if !grid.is_interior(p) {
                return 0.0;
            }
            let mut s = 0.0;
            for slot in 0..4 {
                // interior nodes always have all four neighbours
                s += f[grid.neighbor(p, slot).unwrap()] - f[p];
            }
            s * ih2
        })
        .collect()
}

/// Discrete integration-by-parts defect `|<grad f, V>_w + <f, div V>_w|`.
///
/// Vanishes up to rounding when `f` is zero off the core nodes; otherwise the
/// returned value is the discrete boundary term.
pub fn summation_by_parts_check(grid: &DiscGrid, f: &[f64], vx: &[f64], vy: &[f64]) -> f64 {
    let [gx, gy] = grad(grid, f);
    let dv = div(grid, vx, vy);
    let a = grid.inner(&[&gx, &gy], &[vx, vy]);
    let b = grid.inner(&[f], &[&dv]);
    (a + b).abs()
}

fn expect_rank(f: &Field, want: &[Rank]) -> Result<()> {
    if want.contains(&f.rank()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "operator expects one of {want:?}, got {:?}",
            f.rank()
        )))
    }
}

impl Field {
    /// Gradient: scalar -> vector, `Tuple(k)` -> `Jacobian(k)`.
    pub fn grad(&self) -> Result<Field> {
        let g = self.grid().clone();
        match self.rank() {
            Rank::Scalar => Field::vector(g.clone(), grad(&g, self.comp(0))),
            Rank::Tuple(k) => {
                let comps = self.comps().iter().flat_map(|c| grad(&g, c)).collect();
                Field::new(g, Rank::Jacobian(k), comps)
            }
            other => Err(Error::InvalidInput(format!("grad of a {other:?} field"))),
        }
    }

    pub fn div(&self) -> Result<Field> {
        expect_rank(self, &[Rank::Vector])?;
        let g = self.grid().clone();
        Field::scalar(g.clone(), div(&g, self.comp(0), self.comp(1)))
    }

    pub fn curl2(&self) -> Result<Field> {
        expect_rank(self, &[Rank::TwoVector])?;
        let g = self.grid().clone();
        Field::vector(g.clone(), curl2(&g, self.comp(0)))
    }

    pub fn laplacian(&self) -> Result<Field> {
        expect_rank(self, &[Rank::Scalar, Rank::TwoVector]).or_else(|_| match self.rank() {
            Rank::Tuple(_) => Ok(()),
            r => Err(Error::InvalidInput(format!("laplacian of a {r:?} field"))),
        })?;
        let g = self.grid().clone();
        let comps = self.comps().iter().map(|c| laplacian(&g, c)).collect();
        Field::new(g, self.rank(), comps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DiscGrid, Lattice};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(h: f64) -> std::sync::Arc<DiscGrid> {
        DiscGrid::new(h, Lattice::NodeCentered).unwrap()
    }

    fn random_field(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn grad_annihilates_constants_and_is_exact_on_affine() {
        let g = grid(1.0 / 20.0);
        let c = vec![3.7; g.len()];
        let [gx, gy] = grad(&g, &c);
        assert!(gx.iter().chain(&gy).all(|v| v.abs() < 1e-12));
        let f = g.sample(|x, y| 0.3 * x - 1.7 * y + 2.0);
        let [gx, gy] = grad(&g, &f);
        // one-sided three-point closures are exact on affine functions too
        for p in 0..g.len() {
            if deriv_stencil(&g, p, 0).len == 0 || deriv_stencil(&g, p, 1).len == 0 {
                continue;
            }
            assert!((gx[p] - 0.3).abs() < 1e-11 && (gy[p] + 1.7).abs() < 1e-11);
        }
    }

    #[test]
    fn grad_second_order_on_smooth_function() {
        // error ratio under halving tends to 4 at interior nodes
        let errs: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
            .iter()
            .map(|&h| {
                let g = grid(h);
                let f = g.sample(|x, y| x.sin() * y.cos());
                let [gx, gy] = grad(&g, &f);
                g.interior_nodes()
                    .map(|p| {
                        let [x, y] = g.pos(p);
                        (gx[p] - x.cos() * y.cos()).abs().max((gy[p] + x.sin() * y.sin()).abs())
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let c = errs[2] / (1.0f64 / 64.0).powi(2);
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
        assert!(c < 0.2, "measured constant {c}");
    }

    #[test]
    fn div_curl_vanishes_on_core() {
        let g = grid(1.0 / 24.0);
        let xi = random_field(g.len(), 7);
        let [vx, vy] = curl2(&g, &xi);
        let d = div(&g, &vx, &vy);
        for p in g.core_nodes() {
            assert!(d[p].abs() < 1e-13 * 24.0 * 24.0, "node {p}: {}", d[p]);
        }
        let c = vec![2.5; g.len()];
        let [cx, cy] = curl2(&g, &c);
        assert!(cx.iter().chain(&cy).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let g = grid(1.0 / 16.0);
        let f = g.sample(|x, y| x * x + y * y);
        let l = laplacian(&g, &f);
        for p in g.interior_nodes() {
            assert!((l[p] - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn laplacian_agrees_with_div_grad_to_second_order() {
        let mut prev = f64::NAN;
        for &h in &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
            let g = grid(h);
            let f = g.sample(|x, y| (1.3 * x).sin() * (0.7 * y).cosh());
            let l = laplacian(&g, &f);
            let [gx, gy] = grad(&g, &f);
            let dg = div(&g, &gx, &gy);
            let e = g.core_nodes().map(|p| (l[p] - dg[p]).abs()).fold(0.0, f64::max);
            if prev.is_finite() {
                assert!(prev / e > 3.5, "ratio {}", prev / e);
            }
            prev = e;
        }
    }

    #[test]
    fn summation_by_parts() {
        let g = grid(1.0 / 24.0);
        assert_eq!(
            summation_by_parts_check(&g, &vec![0.0; g.len()], &vec![1.0; g.len()], &vec![1.0; g.len()]),
            0.0
        );
        let mut f = random_field(g.len(), 11);
        for p in 0..g.len() {
            if !g.is_core(p) {
                f[p] = 0.0;
            }
        }
        let vx = random_field(g.len(), 12);
        let vy = random_field(g.len(), 13);
        let scale = g.l2_norm(&[&f]) * g.l2_norm(&[&vx, &vy]) / g.h();
        assert!(summation_by_parts_check(&g, &f, &vx, &vy) <= 1e-12 * scale);

        // f = 1 everywhere, V = (x, 0): boundary term is the flux ∮ x n_x ≈ π
        let ones = vec![1.0; g.len()];
        let vx = g.sample(|x, _| x);
        let zero = vec![0.0; g.len()];
        let b = summation_by_parts_check(&g, &ones, &vx, &zero);
        // explicit boundary sum: <1, div V> = Σ w over nodes carrying an x-stencil
        let expected: f64 = (0..g.len())
            .filter(|&p| deriv_stencil(&g, p, 0).len > 0)
            .map(|p| g.weight(p))
            .sum();
        assert!(b > 3.0 && (b - expected).abs() < 1e-12, "{b} {expected}");
    }

    #[test]
    fn field_rank_checks() {
        let g = grid(0.25);
        let f = Field::scalar(g.clone(), vec![1.0; g.len()]).unwrap();
        assert!(f.div().is_err());
        assert_eq!(f.grad().unwrap().rank(), Rank::Vector);
        let t = Field::new(g.clone(), Rank::Tuple(3), vec![vec![0.0; g.len()]; 3]).unwrap();
        assert_eq!(t.grad().unwrap().rank(), Rank::Jacobian(3));
        assert!(Field::new(g.clone(), Rank::Vector, vec![vec![0.0; g.len()]]).is_err());
    }
}
