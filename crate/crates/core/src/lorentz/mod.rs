//! Stationary Lorentzian targets `ℝ × M` with metric `−β(dt + ω)² + g_M`:
//! target data, Euler–Lagrange residuals, the rewritten elliptic system with
//! its bounds, and a coupled solver for `(t, u)`.

mod solver;
mod system;
mod target;

pub use solver::{current_flux_residual, solve_lorentz, LorentzBoundary, LorentzConfig};
pub use system::{
    assemble_system, bound_check, el_residual_lorentz, lorentz_energy, AssembledSystem, BoundReport, LorentzResidual,
    LorentzState,
};
pub use target::{BetaModel, Manifold, OmegaModel, StationaryTargetData};
