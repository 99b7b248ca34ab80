use std::sync::Arc;

use super::DiscGrid;
use crate::error::{Error, Result};

/// Shape of the per-node value carried by a [`Field`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Scalar,
    /// 1-form / vector field, components `(x, y)`.
    Vector,
    /// 2-vector `ξ12 ∂x ∧ ∂y`; one component in the plane.
    TwoVector,
    /// `k` scalar components, e.g. a map into `R^k`.
    Tuple(usize),
    /// `k` vector fields (the Jacobian of a `Tuple(k)` map), component
    /// `2 a + d` is `∂_d u^a`.
    Jacobian(usize),
    /// `k x k` matrix of 1-forms; component `2 (i k + j) + d`.
    MatrixOneForm(usize),
}

impl Rank {
    pub fn components(&self) -> usize {
        match *self {
            Rank::Scalar | Rank::TwoVector => 1,
            Rank::Vector => 2,
            Rank::Tuple(k) => k,
            Rank::Jacobian(k) => 2 * k,
            Rank::MatrixOneForm(k) => 2 * k * k,
        }
    }
}

/// Grid-sampled field with a rank tag; all components share one grid.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<DiscGrid>,
    rank: Rank,
    comps: Vec<Vec<f64>>,
}

impl Field {
    pub fn new(grid: Arc<DiscGrid>, rank: Rank, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != rank.components() {
            return Err(Error::DimensionMismatch {
                expected: rank.components(),
                got: comps.len(),
            });
        }
        if let Some(bad) = comps.iter().find(|c| c.len() != grid.len()) {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: bad.len(),
            });
        }
        Ok(Self { grid, rank, comps })
    }

    pub fn zeros(grid: Arc<DiscGrid>, rank: Rank) -> Self {
        let comps = vec![vec![0.0; grid.len()]; rank.components()];
        Self { grid, rank, comps }
    }

    pub fn scalar(grid: Arc<DiscGrid>, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, Rank::Scalar, vec![values])
    }

    pub fn vector(grid: Arc<DiscGrid>, [vx, vy]: [Vec<f64>; 2]) -> Result<Self> {
        Self::new(grid, Rank::Vector, vec![vx, vy])
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn comps_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.comps
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn into_comps(self) -> Vec<Vec<f64>> {
        self.comps
    }

    pub fn comp_refs(&self) -> Vec<&[f64]> {
        self.comps.iter().map(Vec::as_slice).collect()
    }

    /// Component of a matrix-of-1-forms field.
    pub fn entry(&self, i: usize, j: usize, d: usize) -> &[f64] {
        match self.rank {
            Rank::MatrixOneForm(k) => &self.comps[2 * (i * k + j) + d],
            _ => panic!("entry() on a {:?} field", self.rank),
        }
    }

    /// Pointwise Euclidean (Frobenius) magnitude over all components.
    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|p| self.comps.iter().map(|c| c[p] * c[p]).sum::<f64>().sqrt())
            .collect()
    }
}
