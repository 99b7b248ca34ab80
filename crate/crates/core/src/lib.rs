//! Numerical laboratory for weakly harmonic maps from the unit disc into
//! pseudo-Riemannian targets: pseudospheres, pseudohyperbolic spaces and
//! standard stationary Lorentzian manifolds.
//!
//! Modules, bottom-up:
//! * [`signature`]: indefinite inner products, quadrics, `so(ν, n+1-ν)`;
//! * [`grid`]: masked Cartesian grid, difference operators, Poisson solves;
//! * [`pseudosphere`]: energy, Θ field, Euler–Lagrange residual, solver;
//! * [`conservation`]: conservation laws, Θ identity, Noether currents;
//! * [`norms`]: Morrey, Lorentz `L^{2,∞}`, Hölder probes;
//! * [`hodge`]: discrete Hodge decomposition and curl potentials;
//! * [`lorentz`]: stationary Lorentzian targets `ℝ × M`;
//! * [`counterexample`]: the unbounded `so(1,1)` weak solution;
//! * [`experiments`]: seeded experiment drivers producing checks and tables.

pub mod conservation;
pub mod counterexample;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod hodge;
pub mod lorentz;
pub mod norms;
pub mod pseudosphere;
pub mod report;
pub mod signature;

pub use error::{Error, Result};
