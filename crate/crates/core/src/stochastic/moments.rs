//! Moment identities and bounds for the stationary segment: exact quadrature
//! of the variance, closed-form a-priori bounds, and Monte Carlo estimates.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::measure::{require_grid_index, DelayMeasure, SystemSpec};
use crate::resolvent::ResolventTable;
use crate::rng::replica_seed;
use crate::spectral::StabilityCertificate;
use crate::stochastic::em::stationary_segment;
use crate::stochastic::wiener::sample_path;

/// Stationary variance E|U(s)|^2 = int_0^inf ||r(u) Sigma||_F^2 du by
/// trapezoid quadrature over the table horizon. The value does not depend
/// on s (validated to lie in [-tau, 0] on the grid). The flag reports low
/// confidence when the truncated tail looks non-negligible.
pub fn variance_quadrature(
    table: &ResolventTable,
    sigma: &DMatrix<f64>,
    s: f64,
) -> Result<(f64, bool)> {
    if sigma.nrows() != table.dim() {
        return Err(CoreError::Shape(format!(
            "noise matrix has {} rows, state dimension is {}",
            sigma.nrows(),
            table.dim()
        )));
    }
    if s > 1e-12 || s < -table.tau() - 1e-12 {
        return Err(CoreError::Range(format!(
            "evaluation point {s} lies outside [-tau, 0]"
        )));
    }
    require_grid_index(s, table.h(), "evaluation point")?;
    let h = table.h();
    let k = table.n_fwd();
    let g: Vec<f64> = (0..=k)
        .map(|i| (table.fwd(i) * sigma).norm_squared())
        .collect();
    let mut value = 0.0;
    for (i, gi) in g.iter().enumerate() {
        let w = if i == 0 || i == k { 0.5 } else { 1.0 };
        value += w * gi;
    }
    value *= h;
    // Tail estimate from the decay observed over the last half of the table.
    let g_mid = g[k / 2].max(f64::MIN_POSITIVE);
    let g_end = g[k];
    let low_confidence = if g_end <= 0.0 {
        false
    } else {
        let rate = (g_mid / g_end).ln() / (k as f64 / 2.0 * h);
        let tail = if rate > 0.0 { g_end / rate } else { f64::INFINITY };
        tail > 1e-8 * value.max(f64::MIN_POSITIVE)
    };
    Ok((value, low_confidence))
}

/// Closed-form a-priori bounds on the stationary segment, in order:
/// the variance of U(s), its root, E sup |U|, and E sup |U|^2.
#[derive(Debug, Clone, Serialize)]
pub struct MomentBounds {
    pub variance: f64,
    pub std_dev: f64,
    pub sup_mean: f64,
    pub sup_second_moment: f64,
}

pub fn moment_bounds(
    m: &DelayMeasure,
    sigma: &DMatrix<f64>,
    alpha: f64,
    c_alpha: f64,
    path_dim: usize,
) -> Result<MomentBounds> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(CoreError::Precondition(format!(
            "decay exponent must be positive, got {alpha}"
        )));
    }
    if !(c_alpha >= 1.0) {
        return Err(CoreError::Precondition(format!(
            "decay constant must be >= 1, got {c_alpha}"
        )));
    }
    let tau = m.tau();
    let sn = sigma.norm();
    let md = path_dim as f64;
    let j = m.exp_weighted_variation(alpha);
    let gamma_3_2 = std::f64::consts::PI.sqrt() / 2.0;
    let variance = c_alpha * c_alpha * sn * sn / (2.0 * alpha);
    let std_dev = c_alpha * sn / (2.0 * alpha).sqrt();
    let sup_mean = 2.0 * md * tau.sqrt() * sn
        + (2.0 / (std::f64::consts::PI * alpha.powi(3))).sqrt()
            * md
            * (alpha * tau).exp()
            * c_alpha
            * sn
            * gamma_3_2
            * j;
    let sup_second_moment = 8.0 * md * tau * sn * sn
        + (2.0 * md / alpha.powi(3)) * (2.0 * alpha * tau).exp() * c_alpha * c_alpha * sn * sn * j * j;
    Ok(MomentBounds { variance, std_dev, sup_mean, sup_second_moment })
}

/// Monte Carlo estimates of the stationary-segment moments with standard
/// errors. Aggregation order is fixed by replica index, so results do not
/// depend on how the thread pool schedules the work.
#[derive(Debug, Clone, Serialize)]
pub struct McMoments {
    pub replicas: usize,
    pub master_seed: u64,
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub second_moment: f64,
    pub second_moment_se: f64,
    pub sup_mean: f64,
    pub sup_mean_se: f64,
    pub sup_sq_mean: f64,
    pub sup_sq_mean_se: f64,
}

pub fn mc_moments(
    sys: &SystemSpec,
    cert: &StabilityCertificate,
    replicas: usize,
    master_seed: u64,
    h: f64,
    t_trunc: f64,
) -> Result<McMoments> {
    if replicas < 2 {
        return Err(CoreError::Statistics(format!(
            "standard errors need at least 2 replicas, got {replicas}"
        )));
    }
    let n = sys.measure.dim();
    let m_dim = sys.noise_dim();
    let samples: Vec<(DVector<f64>, f64)> = (0..replicas)
        .into_par_iter()
        .map(|i| -> Result<(DVector<f64>, f64)> {
            let path = sample_path(replica_seed(master_seed, i as u64), h, -t_trunc, 0.0, m_dim)?;
            let st = stationary_segment(sys, &path, t_trunc, cert)?;
            let u0 = st.segment.value(0.0)?.clone();
            Ok((u0, st.segment.sup_norm()))
        })
        .collect::<Result<Vec<_>>>()?;

    let nf = replicas as f64;
    let mut sum = DVector::zeros(n);
    let mut sum_sq = DVector::zeros(n);
    let (mut s2, mut s4, mut sup, mut sup2, mut sup4) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (u0, s) in &samples {
        let q = u0.norm_squared();
        sum += u0;
        sum_sq += u0.component_mul(u0);
        s2 += q;
        s4 += q * q;
        sup += s;
        sup2 += s * s;
        sup4 += s * s * s * s;
    }
    let se = |mean: f64, mean_of_sq: f64| ((mean_of_sq - mean * mean).max(0.0) / (nf - 1.0)).sqrt();
    let mean = sum / nf;
    let mean_se: Vec<f64> = (0..n)
        .map(|c| se(mean[c], sum_sq[c] / nf))
        .collect();
    Ok(McMoments {
        replicas,
        master_seed,
        mean: mean.as_slice().to_vec(),
        mean_se,
        second_moment: s2 / nf,
        second_moment_se: se(s2 / nf, s4 / nf),
        sup_mean: sup / nf,
        sup_mean_se: se(sup / nf, sup2 / nf),
        sup_sq_mean: sup2 / nf,
        sup_sq_mean_se: se(sup2 / nf, sup4 / nf),
    })
}
