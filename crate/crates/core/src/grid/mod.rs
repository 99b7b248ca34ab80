//! Masked Cartesian discretisation of the closed unit disc.
//!
//! Nodes are lattice points of `[-1, 1]^2` with `|x| <= 1`, stored row-major
//! (rows of constant `y`, increasing `x`). Because the disc is convex, the
//! nodes of one row form a contiguous id range, which the ball queries in
//! [`crate::norms`] rely on.
//!
//! Node classes:
//! * interior: all four lattice neighbours are in the mask;
//! * boundary: at least one neighbour is missing;
//! * core: interior nodes whose lattice neighbours at distance one and two
//!   along both axes are interior. No one-sided boundary stencil reaches a
//!   core node, so the exact discrete identities (`div ∘ curl2 = 0`,
//!   summation by parts, orthogonality of gradients and curls) hold for
//!   fields supported there.

mod field;
pub mod io;
mod ops;
pub mod poisson;

use std::sync::Arc;

pub use field::{Field, Rank};
pub use ops::*;

/// Where lattice points sit relative to the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lattice {
    /// Nodes at `(i h, j h)`; the origin is a node.
    NodeCentered,
    /// Nodes at `((i + 1/2) h, (j + 1/2) h)`; the origin is never a node.
    CellCentered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
}

/// Neighbour slots, in the order east, west, north, south.
pub const EAST: usize = 0;
pub const WEST: usize = 1;
pub const NORTH: usize = 2;
pub const SOUTH: usize = 3;

const NONE: u32 = u32::MAX;
const MASK_EPS: f64 = 1e-12;

#[derive(Debug)]
pub struct DiscGrid {
    h: f64,
    lattice: Lattice,
    /// lattice points per axis
    side: usize,
    index: Vec<u32>,
    ij: Vec<(u32, u32)>,
    x: Vec<f64>,
    y: Vec<f64>,
    kind: Vec<NodeKind>,
    core: Vec<bool>,
    weight: Vec<f64>,
    nbr: Vec<[u32; 4]>,
    rows: Vec<Row>,
}

/// Contiguous run of nodes sharing one lattice row.
#[derive(Debug, Clone, Copy)]
pub struct Row {
    pub y: f64,
    /// lattice column of the first node
    pub i0: u32,
    /// id of the first node
    pub start: usize,
    pub len: usize,
}

impl DiscGrid {
    /// Builds the grid; `h` must lie in `(0, 0.5]`.
    pub fn new(h: f64, lattice: Lattice) -> crate::Result<Arc<Self>> {
        if !(h > 0.0 && h <= 0.5) {
            return Err(crate::Error::InvalidInput(format!(
                "grid spacing must lie in (0, 0.5], got {h}"
            )));
        }
        Ok(Arc::new(Self::build(h, lattice)))
    }

    fn build(h: f64, lattice: Lattice) -> Self {
        let (side, origin_offset) = match lattice {
            Lattice::NodeCentered => {
                let m = (1.0 / h + 1e-9).floor() as usize;
                (2 * m + 1, -(m as f64))
            }
            Lattice::CellCentered => {
                let m = (1.0 / h - 0.5 + 1e-9).floor() as usize + 1;
                (2 * m, -(m as f64) + 0.5)
            }
        };
        let coord = |k: usize| (k as f64 + origin_offset) * h;
        let inside = |x: f64, y: f64| x * x + y * y <= 1.0 + MASK_EPS;

        let mut index = vec![NONE; side * side];
        let (mut ij, mut xs, mut ys) = (Vec::new(), Vec::new(), Vec::new());
        let mut rows = Vec::new();
        for j in 0..side {
            let y = coord(j);
            let mut row: Option<Row> = None;
            for i in 0..side {
                let x = coord(i);
                if !inside(x, y) {
                    continue;
                }
                let id = xs.len();
                index[j * side + i] = id as u32;
                ij.push((i as u32, j as u32));
                xs.push(x);
                ys.push(y);
                match row.as_mut() {
                    Some(r) => r.len += 1,
                    None => {
                        row = Some(Row {
                            y,
                            i0: i as u32,
                            start: id,
                            len: 1,
                        })
                    }
                }
            }
            if let Some(r) = row {
                rows.push(r);
            }
        }

        let n = xs.len();
        let lookup = |i: i64, j: i64| -> u32 {
            if i < 0 || j < 0 || i >= side as i64 || j >= side as i64 {
                NONE
            } else {
                index[j as usize * side + i as usize]
            }
        };
        let nbr: Vec<[u32; 4]> = ij
            .iter()
            .map(|&(i, j)| {
                let (i, j) = (i as i64, j as i64);
                [lookup(i + 1, j), lookup(i - 1, j), lookup(i, j + 1), lookup(i, j - 1)]
            })
            .collect();
        let kind: Vec<NodeKind> = nbr
            .iter()
            .map(|nb| {
                if nb.iter().all(|&q| q != NONE) {
                    NodeKind::Interior
                } else {
                    NodeKind::Boundary
                }
            })
            .collect();
        let interior_at = |p: usize, di: i64, dj: i64| {
            let (i, j) = ij[p];
            let q = lookup(i as i64 + di, j as i64 + dj);
            q != NONE && kind[q as usize] == NodeKind::Interior
        };
        let core = (0..n)
            .map(|p| {
                kind[p] == NodeKind::Interior
                    && [(1, 0), (-1, 0), (0, 1), (0, -1), (2, 0), (-2, 0), (0, 2), (0, -2)]
                        .iter()
                        .all(|&(di, dj)| interior_at(p, di, dj))
            })
            .collect();

        // covered fraction of each cell from 4x4 sub-samples
        let weight = (0..n)
            .map(|p| {
                let mut hits = 0;
                for a in 0..4 {
                    for b in 0..4 {
                        let sx = xs[p] + (a as f64 - 1.5) * h / 4.0;
                        let sy = ys[p] + (b as f64 - 1.5) * h / 4.0;
                        if sx * sx + sy * sy <= 1.0 {
                            hits += 1;
                        }
                    }
                }
                h * h * hits as f64 / 16.0
            })
            .collect();

        Self {
            h,
            lattice,
            side,
            index,
            ij,
            x: xs,
            y: ys,
            kind,
            core,
            weight,
            nbr,
            rows,
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    #[inline]
    pub fn pos(&self, p: usize) -> [f64; 2] {
        [self.x[p], self.y[p]]
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn kind(&self, p: usize) -> NodeKind {
        self.kind[p]
    }

    #[inline]
    pub fn is_interior(&self, p: usize) -> bool {
        self.kind[p] == NodeKind::Interior
    }

    #[inline]
    pub fn is_core(&self, p: usize) -> bool {
        self.core[p]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    #[inline]
    pub fn weight(&self, p: usize) -> f64 {
        self.weight[p]
    }

    #[inline]
    pub fn neighbor(&self, p: usize, slot: usize) -> Option<usize> {
        let q = self.nbr[p][slot];
        (q != NONE).then_some(q as usize)
    }

    /// Node at lattice offset `(di, dj)` from `p`, if it is in the mask.
    pub fn offset(&self, p: usize, di: i64, dj: i64) -> Option<usize> {
        let (i, j) = self.ij[p];
        let (i, j) = (i as i64 + di, j as i64 + dj);
        if i < 0 || j < 0 || i >= self.side as i64 || j >= self.side as i64 {
            return None;
        }
        let q = self.index[j as usize * self.side + i as usize];
        (q != NONE).then_some(q as usize)
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Lattice coordinate of column `i`.
    pub fn column_x(&self, i: i64) -> f64 {
        let off = match self.lattice {
            Lattice::NodeCentered => -(((self.side - 1) / 2) as f64),
            Lattice::CellCentered => -((self.side / 2) as f64) + 0.5,
        };
        (i as f64 + off) * self.h
    }

    /// Column index whose coordinate is the largest not exceeding `x`.
    pub fn column_floor(&self, x: f64) -> i64 {
        let off = match self.lattice {
            Lattice::NodeCentered => -(((self.side - 1) / 2) as f64),
            Lattice::CellCentered => -((self.side / 2) as f64) + 0.5,
        };
        (x / self.h - off + 1e-9).floor() as i64
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&p| self.is_interior(p))
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&p| !self.is_interior(p))
    }

    pub fn core_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&p| self.core[p])
    }

    /// Nearest node to a point.
    pub fn nearest(&self, pt: [f64; 2]) -> usize {
        (0..self.len())
            .min_by(|&a, &b| {
                let da = (self.x[a] - pt[0]).powi(2) + (self.y[a] - pt[1]).powi(2);
                let db = (self.x[b] - pt[0]).powi(2) + (self.y[b] - pt[1]).powi(2);
                da.total_cmp(&db)
            })
            .unwrap_or(0)
    }

    /// Samples a function at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.x.iter().zip(&self.y).map(|(&x, &y)| f(x, y)).collect()
    }

    /// Total quadrature weight (area estimate of the disc).
    pub fn area(&self) -> f64 {
        self.weight.iter().sum()
    }

    /// `Σ w f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weight).map(|(a, w)| a * w).sum()
    }

    /// Weighted L² norm of a multi-component field over all nodes.
    pub fn l2_norm(&self, comps: &[&[f64]]) -> f64 {
        self.l2_norm_on(comps, |_| true)
    }

    pub fn l2_norm_on(&self, comps: &[&[f64]], keep: impl Fn(usize) -> bool) -> f64 {
        (0..self.len())
            .filter(|&p| keep(p))
            .map(|p| self.weight[p] * comps.iter().map(|c| c[p] * c[p]).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Weighted inner product of two multi-component fields.
    pub fn inner(&self, a: &[&[f64]], b: &[&[f64]]) -> f64 {
        (0..self.len())
            .map(|p| self.weight[p] * a.iter().zip(b).map(|(u, v)| u[p] * v[p]).sum::<f64>())
            .sum()
    }

    /// Metadata document written next to field CSVs.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "h": self.h,
            "mask": "unit_disc",
            "lattice": self.lattice,
            "nodes": self.len(),
        })
    }
}
