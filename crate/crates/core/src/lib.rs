//! Numerical viability theory: flows, set oracles, viability kernels and
//! capture basins, epigraphical value functions and the method of
//! characteristics for first-order systems.
//!
//! Every routine works with the single RK4-computed solution of an ODE; the
//! infima and suprema over solution sets that appear in the theory collapse
//! to evaluation along that solution.

pub mod characteristics;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod epi_hj;
pub mod error;
pub mod fields;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod sets;
pub mod viable_euler;

pub use dynamics::{flow, integrate, reach_set, Trajectory, VectorField};
pub use error::{Error, Result};
pub use grid::{GridField, GridSpec, TimeField};
pub use sets::{PointCloud, SetOracle};

/// Sentinel standing for `+∞` in times and values; larger than any horizon.
pub const INF: f64 = 1e18;

/// True for the `+∞` sentinel (and anything beyond it).
#[inline]
pub fn is_inf(v: f64) -> bool {
    v >= INF
}
