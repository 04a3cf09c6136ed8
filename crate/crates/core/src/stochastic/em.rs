//! Euler-Maruyama integration, pullback trajectories, and the stationary
//! segment of the generalized Ornstein-Uhlenbeck process.

use nalgebra::DVector;

use crate::error::{CoreError, Result};
use crate::measure::{require_grid_index, DelayMeasure, Segment, SystemSpec, GRID_EPS};
use crate::resolvent::{compute_resolvent, homogeneous_formula, Trajectory};
use crate::spectral::StabilityCertificate;
use crate::stochastic::wiener::WienerPath;

/// A truncated approximation of the stationary segment U (affine) or V
/// (nonlinear), with the certificate-based estimate of the truncation error.
#[derive(Debug, Clone)]
pub struct StationarySegment {
    pub segment: Segment,
    pub t_trunc: f64,
    pub tail_bound: f64,
}

/// Delayed-term stencil on flat state storage: (lag in steps, n x n
/// row-major weight). Density nodes carry their trapezoid weights.
fn build_stencil(m: &DelayMeasure, h: f64) -> Result<Vec<(usize, Vec<f64>)>> {
    let n = m.dim();
    let flat = |w: &nalgebra::DMatrix<f64>, scale: f64| {
        let mut v = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                v[r * n + c] = w[(r, c)] * scale;
            }
        }
        v
    };
    let mut out = Vec::new();
    for a in m.atoms() {
        let off = require_grid_index(a.location, h, "atom location")?;
        out.push(((-off) as usize, flat(&a.weight, 1.0)));
    }
    if let Some(d) = m.density() {
        let ratio = require_grid_index(d.step, h, "density step")?;
        if ratio < 1 {
            return Err(CoreError::Alignment(
                "density step is finer than the integration step".into(),
            ));
        }
        let n_tau = require_grid_index(m.tau(), h, "delay horizon")?;
        let last = d.values.len() - 1;
        for (i, v) in d.values.iter().enumerate() {
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            out.push(((n_tau - i as i64 * ratio) as usize, flat(v, w * d.step)));
        }
    }
    Ok(out)
}

/// Euler-Maruyama solution of dx = [L(x_t) + f(x_t)] dt + Sigma dB over
/// [t0, t0 + t_span], with history xi. The integration step is xi.h; the
/// path step must divide it (coarse runs on a fine path consume aggregated
/// increments, so refinement studies share one Brownian path). Returns the
/// trajectory (history included) and the terminal segment.
pub fn em_solve(
    sys: &SystemSpec,
    path: &WienerPath,
    xi: &Segment,
    t0: f64,
    t_span: f64,
) -> Result<(Trajectory, Segment)> {
    let m = &sys.measure;
    let n = m.dim();
    if xi.dim() != n {
        return Err(CoreError::Shape(format!(
            "history dimension {} does not match state dimension {n}",
            xi.dim()
        )));
    }
    if (xi.tau - m.tau()).abs() > GRID_EPS * (1.0 + m.tau()) {
        return Err(CoreError::Shape(format!(
            "history horizon {} does not match delay horizon {}",
            xi.tau,
            m.tau()
        )));
    }
    let m_dim = path.dim();
    if sys.noise_dim() != m_dim {
        return Err(CoreError::Shape(format!(
            "noise matrix has {} columns, path dimension is {m_dim}",
            sys.noise_dim()
        )));
    }
    let h = xi.h;
    let ratio = require_grid_index(h, path.h(), "integration step")?;
    if ratio < 1 {
        return Err(CoreError::Alignment(
            "path step must not exceed the integration step".into(),
        ));
    }
    if t_span < -GRID_EPS {
        return Err(CoreError::Precondition(format!(
            "integration span must be nonnegative, got {t_span}"
        )));
    }
    let n_tau = require_grid_index(m.tau(), h, "delay horizon")? as usize;
    let n_steps = require_grid_index(t_span, h, "integration span")? as usize;
    let k0 = require_grid_index(t0, path.h(), "start time")?;
    path.check_cover(k0, k0 + (n_steps as i64) * ratio)?;

    let stencil = build_stencil(m, h)?;
    let nl = sys.nonlinearity.as_ref();
    if let Some(nl) = nl {
        for &lag in nl.delays() {
            require_grid_index(lag, h, "nonlinearity lag")?;
        }
    }
    let mut sigma = vec![0.0; n * m_dim];
    for r in 0..n {
        for c in 0..m_dim {
            sigma[r * m_dim + c] = sys.sigma[(r, c)];
        }
    }

    let total = n_tau + n_steps + 1;
    let mut x = vec![0.0f64; total * n];
    for (j, v) in xi.values.iter().enumerate() {
        x[j * n..(j + 1) * n].copy_from_slice(v.as_slice());
    }

    let mut drift = vec![0.0f64; n];
    for j in 0..n_steps {
        let p = n_tau + j;
        drift.fill(0.0);
        for (lag, w) in &stencil {
            let src = (p - lag) * n;
            for r in 0..n {
                let mut acc = 0.0;
                for c in 0..n {
                    acc += w[r * n + c] * x[src + c];
                }
                drift[r] += acc;
            }
        }
        if let Some(nl) = nl {
            let f = nl.eval_flat(h, &|comp, lag| x[(p - lag) * n + comp]);
            for r in 0..n {
                drift[r] += f[r];
            }
        }
        let a0 = k0 + (j as i64) * ratio;
        let a1 = a0 + ratio;
        for r in 0..n {
            let mut v = x[p * n + r] + h * drift[r];
            for c in 0..m_dim {
                v += sigma[r * m_dim + c] * (path.cum_at(a1, c) - path.cum_at(a0, c));
            }
            if !v.is_finite() {
                return Err(CoreError::Overflow {
                    node: t0 + (j + 1) as f64 * h,
                    message: "Euler-Maruyama step produced a non-finite value".into(),
                });
            }
            x[(p + 1) * n + r] = v;
        }
    }

    let values: Vec<DVector<f64>> = x
        .chunks_exact(n)
        .map(DVector::from_row_slice)
        .collect();
    let terminal = Segment::new(m.tau(), h, values[n_steps..].to_vec())?;
    Ok((Trajectory { t0: t0 - m.tau(), h, values }, terminal))
}

/// The pullback state phi(t, theta_{-t} omega, xi): integrate over [-t, 0]
/// on the given path and report the segment at time 0.
pub fn pullback(sys: &SystemSpec, path: &WienerPath, xi: &Segment, t: f64) -> Result<Segment> {
    if require_grid_index(t, xi.h, "pullback time")? == 0 {
        return Ok(xi.clone());
    }
    if t < 0.0 {
        return Err(CoreError::Precondition(format!(
            "pullback time must be nonnegative, got {t}"
        )));
    }
    em_solve(sys, path, xi, -t, t).map(|(_, seg)| seg)
}

/// Approximate the stationary segment by pullback from the zero segment over
/// [-t_trunc, 0]; the pullback limit does not depend on the initial segment,
/// and the certificate's contraction rate bounds the truncation error.
pub fn stationary_segment(
    sys: &SystemSpec,
    path: &WienerPath,
    t_trunc: f64,
    cert: &StabilityCertificate,
) -> Result<StationarySegment> {
    if !(t_trunc > 0.0) {
        return Err(CoreError::Precondition(format!(
            "truncation horizon must be positive, got {t_trunc}"
        )));
    }
    if cert.alpha0_est >= 0.0 {
        return Err(CoreError::Certification(
            "the linear part is not exponentially stable; no stationary segment exists".into(),
        ));
    }
    if sys.nonlinearity.is_some() && !cert.certified {
        return Err(CoreError::Certification(
            "nonlinear system without a granted certificate; refusing to construct the stationary segment"
                .into(),
        ));
    }
    let zero = Segment::zero(sys.measure.tau(), path.h(), sys.measure.dim())?;
    let segment = pullback(sys, path, &zero, t_trunc)?;
    let tail_bound = cert.k_const * (cert.rate * t_trunc).exp() * segment.sup_norm();
    Ok(StationarySegment { segment, t_trunc, tail_bound })
}

/// Invariance residual of the (approximate) stationary segment: the solution
/// started from it is advanced to time t both by the Euler-Maruyama scheme
/// and by the variation-of-constants reconstruction
/// x(T) = y(T, U) + int_0^T r(T-v) f(x_v) dv + int_0^T r(T-v) Sigma dB(v)
/// (trapezoid kernel quadrature), and the sup distance of the two segments
/// at time t is returned. Shrinks proportionally to the step size.
pub fn equilibrium_residual(
    sys: &SystemSpec,
    path: &WienerPath,
    u: &StationarySegment,
    t: f64,
) -> Result<f64> {
    let m = &sys.measure;
    let n = m.dim();
    let tau = m.tau();
    let h = u.segment.h;
    if !(t > 0.0) {
        return Err(CoreError::Precondition(format!(
            "evaluation time must be positive, got {t}"
        )));
    }
    let (traj, _) = em_solve(sys, path, &u.segment, 0.0, t)?;
    let table = compute_resolvent(m, h, t + tau)?;
    let n_t = require_grid_index(t, h, "evaluation time")? as usize;
    let n_tau = require_grid_index(tau, h, "delay horizon")? as usize;

    // f along the Euler-Maruyama solution, once per node.
    let fvals: Option<Vec<Vec<f64>>> = match sys.nonlinearity.as_ref() {
        None => None,
        Some(nl) => {
            let mut out = Vec::with_capacity(n_t + 1);
            for i in 0..=n_t {
                out.push(nl.eval_flat(h, &|comp, lag| traj.values[n_tau + i - lag][comp]));
            }
            Some(out)
        }
    };
    // Noise increments Sigma * (B(v_{i+1}) - B(v_i)) per integration cell.
    let ratio = require_grid_index(h, path.h(), "integration step")?;
    let sdb: Vec<DVector<f64>> = (0..n_t)
        .map(|i| {
            let (a0, a1) = ((i as i64) * ratio, (i as i64 + 1) * ratio);
            let db =
                DVector::from_fn(path.dim(), |c, _| path.cum_at(a1, c) - path.cum_at(a0, c));
            &sys.sigma * db
        })
        .collect();

    let mut worst = 0.0f64;
    for j in 0..=n_tau {
        let k_signed = n_t as i64 - n_tau as i64 + j as i64;
        if k_signed < 0 {
            // Still inside the initial segment; the scheme copies it verbatim.
            continue;
        }
        let k = k_signed as usize;
        let ts = k as f64 * h;
        let mut recon = homogeneous_formula(&table, &u.segment, ts)?;
        if let Some(fv) = &fvals {
            let mut acc = DVector::zeros(n);
            for (i, f) in fv.iter().take(k + 1).enumerate() {
                let w = if i == 0 || i == k { 0.5 } else { 1.0 };
                acc += table.fwd(k - i) * DVector::from_row_slice(f) * w;
            }
            recon += acc * h;
        }
        for (i, s) in sdb.iter().take(k).enumerate() {
            recon += (table.fwd(k - i) + table.fwd(k - i - 1)) * s * 0.5;
        }
        let em = &traj.values[n_tau + k];
        worst = worst.max((em - recon).norm());
    }
    Ok(worst)
}
