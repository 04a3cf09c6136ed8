//! The stochastic layer: Brownian paths, Euler-Maruyama integration, the
//! pullback construction of the stationary segment, its moments, and the
//! synchronization of solutions.

pub mod contraction;
pub mod em;
pub mod moments;
pub mod wiener;

pub use contraction::{contraction_rate, synchronize, ContractionFit};
pub use em::{
    em_solve, equilibrium_residual, pullback, stationary_segment, StationarySegment,
};
pub use moments::{mc_moments, moment_bounds, variance_quadrature, McMoments, MomentBounds};
pub use wiener::{sample_path, WienerPath};
