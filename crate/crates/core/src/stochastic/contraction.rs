//! Synchronization of solutions from different initial segments on one
//! noise path, and the fitted contraction rate of their distance.

use crate::error::{CoreError, Result};
use crate::measure::{require_grid_index, Segment, SystemSpec};
use crate::resolvent::Trajectory;
use crate::stochastic::em::em_solve;
use crate::stochastic::wiener::WienerPath;

#[derive(Debug, Clone)]
pub struct ContractionFit {
    pub slope: f64,
    /// (t, sup-norm segment distance) at the sampled times.
    pub distances: Vec<(f64, f64)>,
    /// Set when the distance underflowed to zero before the fit window;
    /// the solutions have already synchronized to working precision.
    pub early_convergence: bool,
}

fn co_simulate(
    sys: &SystemSpec,
    path: &WienerPath,
    xi: &Segment,
    eta: &Segment,
    t_span: f64,
) -> Result<(Trajectory, Trajectory)> {
    if xi.h != eta.h {
        return Err(CoreError::Alignment(
            "the two initial segments use different steps".into(),
        ));
    }
    let (a, _) = em_solve(sys, path, xi, 0.0, t_span)?;
    let (b, _) = em_solve(sys, path, eta, 0.0, t_span)?;
    Ok((a, b))
}

/// Run both solutions forward on the same path, record the segment distance
/// d(t) at multiples of tau (of 1 when tau = 0), and least-squares fit
/// log d(t) over `fit_window`. Zero distances are left out of the fit; if
/// fewer than two positive samples remain, the solutions coalesced and the
/// slope is reported as negative infinity with the early-convergence flag.
pub fn contraction_rate(
    sys: &SystemSpec,
    path: &WienerPath,
    xi: &Segment,
    eta: &Segment,
    t_span: f64,
    fit_window: (f64, f64),
) -> Result<ContractionFit> {
    let (lo, hi) = fit_window;
    if !(lo >= 0.0 && hi > lo && hi <= t_span + 1e-12) {
        return Err(CoreError::Range(format!(
            "fit window [{lo}, {hi}] must be increasing and inside [0, {t_span}]"
        )));
    }
    let (a, b) = co_simulate(sys, path, xi, eta, t_span)?;
    let tau = sys.measure.tau();
    let stride = if tau > 0.0 { tau } else { 1.0 };
    let mut distances = Vec::new();
    let mut t = 0.0;
    while t <= t_span + 1e-12 {
        let t_c = t.min(t_span);
        let d = a
            .segment(tau, t_c)?
            .sup_distance(&b.segment(tau, t_c)?)?;
        distances.push((t_c, d));
        t += stride;
    }
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .filter(|&&(t, d)| t >= lo - 1e-12 && t <= hi + 1e-12 && d > 0.0)
        .map(|&(t, d)| (t, d.ln()))
        .collect();
    let early_convergence = distances
        .iter()
        .any(|&(t, d)| t <= hi + 1e-12 && d == 0.0);
    if pts.len() < 2 {
        return Ok(ContractionFit { slope: f64::NEG_INFINITY, distances, early_convergence });
    }
    let n = pts.len() as f64;
    let (st, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (tm, ym) = (st / n, sy / n);
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, y) in &pts {
        num += (t - tm) * (y - ym);
        den += (t - tm) * (t - tm);
    }
    Ok(ContractionFit { slope: num / den, distances, early_convergence })
}

/// The synchronization experiment: both trajectories plus the pointwise
/// segment distance at every node of the common horizon, history included.
pub fn synchronize(
    sys: &SystemSpec,
    path: &WienerPath,
    xi: &Segment,
    eta: &Segment,
    t_span: f64,
) -> Result<(Trajectory, Trajectory, Vec<(f64, f64)>)> {
    let (a, b) = co_simulate(sys, path, xi, eta, t_span)?;
    require_grid_index(t_span, xi.h, "horizon")?;
    let mut series = Vec::with_capacity(a.values.len());
    for (i, (va, vb)) in a.values.iter().zip(&b.values).enumerate() {
        series.push((a.t0 + i as f64 * a.h, (va - vb).norm()));
    }
    Ok((a, b, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, DelayMeasure};
    use crate::stochastic::wiener::sample_path;
    use nalgebra::{dvector, DMatrix};

    const H: f64 = 1.0 / 256.0;

    fn affine(sigma: f64) -> SystemSpec {
        let atoms = vec![
            Atom { location: 0.0, weight: DMatrix::from_element(1, 1, -2.0) },
            Atom { location: -1.0, weight: DMatrix::from_element(1, 1, 1.0) },
        ];
        let m = DelayMeasure::new(1.0, 1, atoms, None).unwrap();
        SystemSpec::new(m, DMatrix::from_element(1, 1, sigma), None).unwrap()
    }

    fn fig_segments() -> (Segment, Segment) {
        let xi = Segment::from_fn(1.0, H, 1, |u| dvector![u.sin()]).unwrap();
        let eta = Segment::from_fn(1.0, H, 1, |u| dvector![2.0 * u.cos()]).unwrap();
        (xi, eta)
    }

    #[test]
    fn identical_segments_stay_identical() {
        let sys = affine(1.0);
        let path = sample_path(4, H, 0.0, 10.0, 1).unwrap();
        let (xi, _) = fig_segments();
        let fit = contraction_rate(&sys, &path, &xi, &xi.clone(), 10.0, (2.0, 10.0)).unwrap();
        assert!(fit.distances.iter().all(|&(_, d)| d == 0.0));
        assert!(fit.early_convergence);
        assert_eq!(fit.slope, f64::NEG_INFINITY);
    }

    #[test]
    fn affine_distance_contracts_at_the_expected_rate() {
        let sys = affine(1.0);
        let path = sample_path(6, H, 0.0, 30.0, 1).unwrap();
        let (xi, eta) = fig_segments();
        let fit = contraction_rate(&sys, &path, &xi, &eta, 30.0, (5.0, 30.0)).unwrap();
        assert!(fit.slope <= -0.35, "slope {}", fit.slope);
        assert!((fit.distances[0].1 - 5.0f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn affine_distances_ignore_the_noise() {
        let (xi, eta) = fig_segments();
        let noisy = contraction_rate(
            &affine(1.0),
            &sample_path(8, H, 0.0, 10.0, 1).unwrap(),
            &xi,
            &eta,
            10.0,
            (2.0, 10.0),
        )
        .unwrap();
        let silent = contraction_rate(
            &affine(0.0),
            &sample_path(1234, H, 0.0, 10.0, 1).unwrap(),
            &xi,
            &eta,
            10.0,
            (2.0, 10.0),
        )
        .unwrap();
        for (a, b) in noisy.distances.iter().zip(&silent.distances) {
            assert!((a.1 - b.1).abs() <= 1e-12 * (1.0 + b.1));
        }
    }

    #[test]
    fn synchronize_reports_the_initial_gap() {
        let sys = affine(1.0);
        let path = sample_path(10, H, 0.0, 5.0, 1).unwrap();
        let (xi, eta) = fig_segments();
        let (a, b, series) = synchronize(&sys, &path, &xi, &eta, 5.0).unwrap();
        assert_eq!(a.t0, -1.0);
        assert_eq!(series.len(), a.values.len());
        assert_eq!(series.len(), b.values.len());
        let init = series
            .iter()
            .filter(|&&(t, _)| t <= 1e-12)
            .fold(0.0f64, |m, &(_, d)| m.max(d));
        assert!(init > 2.2355 && init <= 5.0f64.sqrt() + 1e-12, "initial gap {init}");
        let last = series.last().unwrap().1;
        assert!(last < init);
    }
}
