//! Toolkit for stochastic functional differential equations with bounded
//! delay and additive noise: fundamental-solution tables, spectral stability
//! certificates, Euler-Maruyama simulation with exact shift/cocycle algebra
//! on the grid, pullback construction of the stationary segment, and moment
//! diagnostics.

pub mod error;
pub mod expr;
pub mod measure;
pub mod resolvent;
pub mod rng;
pub mod spectral;
pub mod stochastic;

pub use error::{CoreError, Result};
pub use expr::NonlinearitySpec;
pub use measure::{Atom, DelayMeasure, DensityGrid, Segment, SystemSpec};
pub use resolvent::{
    compute_resolvent, decay_check, homogeneous_formula, integral_residual, integrate_linear,
    DecayCheck, ResolventTable, Trajectory,
};
pub use spectral::{
    certify, decay_rate_root, estimate_c_alpha, root_count, spectral_abscissa,
    StabilityCertificate,
};
pub use stochastic::{
    contraction_rate, em_solve, equilibrium_residual, mc_moments, moment_bounds, pullback,
    sample_path, stationary_segment, synchronize, variance_quadrature, ContractionFit, McMoments,
    MomentBounds, StationarySegment, WienerPath,
};
