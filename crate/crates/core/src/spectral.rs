//! Characteristic roots and the stability certificate.
//!
//! The characteristic function is det(lambda I - int e^{lambda s} mu(ds)).
//! Roots to the right of a vertical line are counted with the argument
//! principle on a rectangle, tracking the phase of the determinant along the
//! contour with adaptive subdivision; the spectral abscissa is then located
//! by bisection on the line's position.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::measure::DelayMeasure;
use crate::resolvent::ResolventTable;

const EXP_LIMIT: f64 = 700.0;

fn char_matrix(m: &DelayMeasure, lambda: Complex64) -> Result<DMatrix<Complex64>> {
    let n = m.dim();
    let mut mat = DMatrix::from_diagonal_element(n, n, lambda);
    let mut accumulate = |loc: f64, weight: &DMatrix<f64>, scale: f64| -> Result<()> {
        let e = lambda * loc;
        if e.re > EXP_LIMIT {
            return Err(CoreError::Evaluation(format!(
                "characteristic function overflow: Re(lambda*s) = {} at lambda = {lambda}",
                e.re
            )));
        }
        let factor = e.exp() * scale;
        for i in 0..n {
            for j in 0..n {
                mat[(i, j)] -= factor * weight[(i, j)];
            }
        }
        Ok(())
    };
    for atom in m.atoms() {
        accumulate(atom.location, &atom.weight, 1.0)?;
    }
    if let Some(d) = m.density() {
        let last = d.values.len() - 1;
        for (i, v) in d.values.iter().enumerate() {
            let u = -m.tau() + i as f64 * d.step;
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            accumulate(u, v, w * d.step)?;
        }
    }
    Ok(mat)
}

/// det(lambda I - int e^{lambda s} mu(ds)), by LU with partial pivoting.
pub fn char_det(m: &DelayMeasure, lambda: Complex64) -> Result<Complex64> {
    Ok(char_matrix(m, lambda)?.lu().determinant())
}

/// Accumulated phase change of the determinant along the segment [a, b].
///
/// Subdivides until each piece turns by at most pi/2 and its magnitude ratio
/// stays moderate, so the principal branch tracks the true phase. A piece
/// that cannot be resolved within the depth budget indicates a root on (or
/// numerically on) the contour.
fn phase_change(
    m: &DelayMeasure,
    a: Complex64,
    f_a: Complex64,
    b: Complex64,
    f_b: Complex64,
    depth: u32,
    beta: f64,
) -> Result<f64> {
    if !f_a.is_finite() || !f_b.is_finite() || f_a.norm() == 0.0 || f_b.norm() == 0.0 {
        return Err(CoreError::RootOnContour { beta });
    }
    let ratio = f_b / f_a;
    let turn = ratio.arg();
    let mag = ratio.norm();
    if turn.abs() <= std::f64::consts::FRAC_PI_2 && (0.25..=4.0).contains(&mag) {
        return Ok(turn);
    }
    if depth == 0 {
        return Err(CoreError::RootOnContour { beta });
    }
    let mid = (a + b) * 0.5;
    let f_mid = char_det(m, mid)?;
    Ok(phase_change(m, a, f_a, mid, f_mid, depth - 1, beta)?
        + phase_change(m, mid, f_mid, b, f_b, depth - 1, beta)?)
}

/// Number of characteristic roots with Re(lambda) > beta, with multiplicity.
///
/// All such roots lie in the rectangle [beta, TV + 1] x [-Omega, Omega] with
/// Omega = TV e^{max(0, -beta) tau} + 1, since any root satisfies
/// |lambda| <= |mu|([-tau,0]) e^{-min(0, Re lambda) tau}.
pub fn root_count(m: &DelayMeasure, beta: f64) -> Result<usize> {
    let tv = m.total_variation();
    let margin = 1.0;
    let beta_max = tv + margin;
    if beta >= beta_max {
        return Ok(0);
    }
    let omega = tv * ((-beta).max(0.0) * m.tau()).exp() + margin;
    let corners = [
        Complex64::new(beta, -omega),
        Complex64::new(beta_max, -omega),
        Complex64::new(beta_max, omega),
        Complex64::new(beta, omega),
        Complex64::new(beta, -omega),
    ];
    let mut total = 0.0;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[e + 1]);
        let pieces = 32;
        let mut prev_pt = a;
        let mut prev_val = char_det(m, prev_pt)?;
        for k in 1..=pieces {
            let pt = a + (b - a) * (k as f64 / pieces as f64);
            let val = char_det(m, pt)?;
            total += phase_change(m, prev_pt, prev_val, pt, val, 60, beta)?;
            prev_pt = pt;
            prev_val = val;
        }
    }
    let winding = total / (2.0 * std::f64::consts::PI);
    let count = winding.round();
    if (winding - count).abs() > 0.25 || count < -0.5 {
        return Err(CoreError::NonConvergence(format!(
            "winding number {winding} is not a nonnegative integer"
        )));
    }
    Ok(count.max(0.0) as usize)
}

/// root_count with small perturbations of beta when the contour grazes a root.
fn root_count_robust(m: &DelayMeasure, beta: f64, tol: f64) -> Result<usize> {
    let mut last_err = None;
    for delta in [0.0, 0.1 * tol, -0.1 * tol, 0.37 * tol, -0.37 * tol] {
        match root_count(m, beta + delta) {
            Ok(c) => return Ok(c),
            Err(e @ (CoreError::RootOnContour { .. } | CoreError::NonConvergence(_))) => {
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

/// The spectral abscissa (supremum of root real parts), within +-tol.
pub fn spectral_abscissa(m: &DelayMeasure, tol: f64) -> Result<f64> {
    if tol <= 0.0 || !tol.is_finite() {
        return Err(CoreError::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let tv = m.total_variation();
    let mut hi = tv + 1.0;
    let mut lo = -tv - 1.0;
    if root_count_robust(m, hi, tol)? != 0 {
        return Err(CoreError::NonConvergence(
            "root found to the right of the a-priori bound".into(),
        ));
    }
    let mut expansions = 0;
    while root_count_robust(m, lo, tol)? == 0 {
        lo = 2.0 * lo - 1.0;
        expansions += 1;
        if expansions > 6 {
            return Err(CoreError::NonConvergence(format!(
                "no characteristic root found with Re(lambda) > {lo}"
            )));
        }
    }
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if root_count_robust(m, mid, tol)? >= 1 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 200 {
            return Err(CoreError::NonConvergence("abscissa bisection stalled".into()));
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The scalar decay-rate root: for 0 < |b| < a, the unique mu in (|b|, a)
/// with mu e^{-a+mu} = |b|, giving the bound |r(t)| <= e^{(-a+mu)t}.
/// Returns 0 when b = 0 (the bound degenerates to e^{-at}).
pub fn decay_rate_root(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(CoreError::Precondition(format!("a must be positive, got {a}")));
    }
    if b.abs() >= a {
        return Err(CoreError::Precondition(format!(
            "|b| = {} must be smaller than a = {a}",
            b.abs()
        )));
    }
    if b == 0.0 {
        return Ok(0.0);
    }
    let target = b.abs();
    let g = |mu: f64| mu * (mu - a).exp() - target;
    let (mut lo, mut hi) = (target, a);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    if g(root).abs() > 1e-10 {
        return Err(CoreError::NonConvergence(format!(
            "decay-rate bisection residual {} exceeds 1e-10",
            g(root).abs()
        )));
    }
    Ok(root)
}

///// Empirical estimate of C_alpha: safety * max(1, max_t ||r(t)||_F e^{alpha t}).
/// The second return value flags low confidence when the table horizon is
/// short (T * alpha < 5).
pub fn estimate_c_alpha(table: &ResolventTable, alpha: f64, safety: f64) -> Result<(f64, bool)> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(CoreError::Precondition(format!("alpha must be positive, got {alpha}")));
    }
    if !(safety >= 1.0) {
        return Err(CoreError::Precondition(format!("safety factor must be >= 1, got {safety}")));
    }
    let mut peak = 0.0f64;
    for (t, r) in table.nodes() {
        if t >= 0.0 {
            peak = peak.max(r.norm() * (alpha * t).exp());
        }
    }
    Ok((safety * peak.max(1.0), table.t_max() * alpha < 5.0))
}

/// The exponential-stability certificate for the nonlinear system.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StabilityCertificate {
    pub alpha0_est: f64,
    pub alpha_star: f64,
    pub c_alpha: f64,
    pub lipschitz: f64,
    pub k_const: f64,
    pub rate: f64,
    pub certified: bool,
}

/// Build the certificate: for each candidate alpha compute C_alpha and the
/// contraction rate L e^{alpha tau} C_alpha - alpha, and keep the best.
///
/// `alpha0` is the spectral abscissa (from `spectral_abscissa`); an empty
/// `alpha_grid` selects a default 32-point geometric grid inside (0, -alpha0).
/// Returns the certificate plus human-readable diagnostics.
pub fn certify(
    m: &DelayMeasure,
    lipschitz: f64,
    alpha0: f64,
    alpha_grid: &[f64],
    safety: f64,
    table: &ResolventTable,
) -> Result<(StabilityCertificate, Vec<String>)> {
    if lipschitz < 0.0 || !lipschitz.is_finite() {
        return Err(CoreError::Precondition(format!(
            "Lipschitz constant must be nonnegative, got {lipschitz}"
        )));
    }
    if alpha0 >= 0.0 {
        return Err(CoreError::Certification(format!(
            "linear part unstable: spectral abscissa {alpha0} is not negative"
        )));
    }
    let grid: Vec<f64> = if alpha_grid.is_empty() {
        let (a, b) = (0.05 * -alpha0, 0.95 * -alpha0);
        (0..32).map(|i| a * (b / a).powf(i as f64 / 31.0)).collect()
    } else {
        for &alpha in alpha_grid {
            if !(alpha > 0.0 && alpha < -alpha0) {
                return Err(CoreError::Precondition(format!(
                    "alpha = {alpha} lies outside (0, {})",
                    -alpha0
                )));
            }
        }
        alpha_grid.to_vec()
    };
    let tau = m.tau();
    let tv = m.total_variation();
    let mut diagnostics = Vec::new();
    let mut best: Option<(f64, f64, f64)> = None; // (rate, alpha, c_alpha)
    for &alpha in &grid {
        let (c, low) = estimate_c_alpha(table, alpha, safety)?;
        if low {
            diagnostics.push(format!(
                "alpha = {alpha}: table horizon {} is short (T*alpha < 5), C_alpha has low confidence",
                table.t_max()
            ));
        }
        let rate = lipschitz * (alpha * tau).exp() * c - alpha;
        if best.map_or(true, |(r, _, _)| rate < r) {
            best = Some((rate, alpha, c));
        }
    }
    let (rate, alpha_star, c_alpha) = best.unwrap();
    let k_const = (alpha_star * tau).exp() * c_alpha
        + tau * (2.0 * alpha_star * tau).exp() * c_alpha * tv;
    let certified = rate < 0.0;
    if !certified {
        diagnostics.push(
            "no candidate alpha achieves a negative contraction rate; the certificate is not granted"
                .into(),
        );
    }
    Ok((
        StabilityCertificate {
            alpha0_est: alpha0,
            alpha_star,
            c_alpha,
            lipschitz,
            k_const,
            rate,
            certified,
        },
        diagnostics,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use crate::resolvent::compute_resolvent;

    fn scalar_measure(tau: f64, entries: &[(f64, f64)]) -> DelayMeasure {
        let atoms = entries
            .iter()
            .map(|&(s, w)| Atom { location: s, weight: DMatrix::from_element(1, 1, w) })
            .collect();
        DelayMeasure::new(tau, 1, atoms, None).unwrap()
    }

    fn mixed() -> DelayMeasure {
        scalar_measure(1.0, &[(0.0, -2.0), (-1.0, 1.0)])
    }

    /// Rightmost root of lambda + 2 = e^{-lambda}, by real bisection.
    fn rightmost_root_oracle() -> f64 {
        let g = |x: f64| x + 2.0 - (-x).exp();
        let (mut lo, mut hi) = (-1.0, 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn char_det_examples() {
        let m = mixed();
        let d = char_det(&m, Complex64::new(0.0, 0.0)).unwrap();
        assert!((d - Complex64::new(1.0, 0.0)).norm() < 1e-12);

        let root = rightmost_root_oracle();
        assert!(char_det(&m, Complex64::new(root, 0.0)).unwrap().norm() < 1e-10);

        let ode = scalar_measure(0.0, &[(0.0, -1.5)]);
        assert!(char_det(&ode, Complex64::new(-1.5, 0.0)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn char_det_is_analytic() {
        let m = mixed();
        let f = |l: Complex64| char_det(&m, l).unwrap();
        for &(re, im) in &[(0.3, 0.7), (-0.2, 1.9), (1.1, -0.4)] {
            let l = Complex64::new(re, im);
            let h = 1e-5;
            let dx = (f(l + Complex64::new(h, 0.0)) - f(l - Complex64::new(h, 0.0)))
                / Complex64::new(2.0 * h, 0.0);
            let dy = (f(l + Complex64::new(0.0, h)) - f(l - Complex64::new(0.0, h)))
                / Complex64::new(0.0, 2.0 * h);
            assert!((dx - dy).norm() <= 1e-6 * (1.0 + dx.norm()), "at {l}: {dx} vs {dy}");
        }
    }

    #[test]
    fn char_det_overflow_is_reported() {
        let m = mixed();
        let err = char_det(&m, Complex64::new(-2000.0, 0.0)).unwrap_err();
        assert!(matches!(err, CoreError::Evaluation(_)));
    }

    #[test]
    fn root_count_examples() {
        let m = mixed();
        assert_eq!(root_count(&m, 0.0).unwrap(), 0);
        assert_eq!(root_count(&m, -0.5).unwrap(), 1);
        let unstable = scalar_measure(0.0, &[(0.0, 1.0)]);
        assert_eq!(root_count(&unstable, 0.0).unwrap(), 1);
    }

    #[test]
    fn root_count_is_monotone() {
        let m = mixed();
        let mut prev = usize::MAX;
        for beta in [-1.2, -0.8, -0.44, -0.1, 0.5] {
            let c = root_count_robust(&m, beta, 1e-6).unwrap();
            assert!(c <= prev, "count jumped up at beta = {beta}");
            prev = c;
        }
    }

    #[test]
    fn abscissa_matches_the_scalar_oracle() {
        let a0 = spectral_abscissa(&mixed(), 1e-4).unwrap();
        assert!((a0 - rightmost_root_oracle()).abs() < 2e-4, "got {a0}");
    }

    #[test]
    fn abscissa_for_ode_is_the_eigenvalue() {
        let a0 = spectral_abscissa(&scalar_measure(0.0, &[(0.0, -2.0)]), 1e-5).unwrap();
        assert!((a0 + 2.0).abs() < 1e-5);
    }

    #[test]
    fn abscissa_for_matrix_ode_matches_eigenvalues() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -1.0]);
        let m = DelayMeasure::new(0.0, 2, vec![Atom { location: 0.0, weight: a.clone() }], None)
            .unwrap();
        let oracle = a
            .complex_eigenvalues()
            .iter()
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let got = spectral_abscissa(&m, 1e-5).unwrap();
        assert!((got - oracle).abs() < 1e-4, "{got} vs {oracle}");
    }

    #[test]
    fn abscissa_handles_roots_on_the_axis() {
        let m = scalar_measure(1.0, &[(-1.0, -std::f64::consts::FRAC_PI_2)]);
        let a0 = spectral_abscissa(&m, 1e-4).unwrap();
        assert!(a0.abs() < 2e-4, "got {a0}");
    }

    #[test]
    fn decay_rate_root_examples() {
        let mu = decay_rate_root(2.0, 1.0).unwrap();
        assert!((mu * (mu - 2.0).exp() - 1.0).abs() <= 1e-10);
        assert!((mu - 1.55786).abs() < 2e-2);
        assert_eq!(decay_rate_root(1.0, 0.0).unwrap(), 0.0);
        assert!(decay_rate_root(1.0, 1.0).is_err());
    }

    #[test]
    fn scalar_abscissa_agrees_with_the_decay_rate_root() {
        let tol = 1e-5;
        let a0 = spectral_abscissa(&mixed(), tol).unwrap();
        let mu = decay_rate_root(2.0, 1.0).unwrap();
        assert!((a0 - (mu - 2.0)).abs() < 2.0 * tol + 1e-3, "{a0} vs {}", mu - 2.0);
    }

    #[test]
    fn c_alpha_estimates() {
        let h = 1.0 / 256.0;
        let ode = compute_resolvent(&scalar_measure(0.0, &[(0.0, -2.0)]), h, 5.0).unwrap();
        let (c, low) = estimate_c_alpha(&ode, 2.0, 1.0).unwrap();
        assert!((c - 1.0).abs() < 1e-3);
        assert!(!low);

        let pure = compute_resolvent(&scalar_measure(1.0, &[(-1.0, -1.0)]), h, 2.0).unwrap();
        let (c, low) = estimate_c_alpha(&pure, 0.3, 1.0).unwrap();
        assert!((c - (0.3f64).exp()).abs() < 1e-6, "got {c}");
        assert!(low);
    }

    #[test]
    fn certify_reproduces_the_example_rate() {
        let m = mixed();
        let table = compute_resolvent(&m, 1.0 / 256.0, 25.0).unwrap();
        let alpha0 = spectral_abscissa(&m, 1e-6).unwrap();
        let (cert, _) = certify(&m, 0.25, alpha0, &[0.4], 1.0, &table).unwrap();
        let expect = (0.4f64).exp() / 4.0 - 0.4;
        assert!((cert.rate - expect).abs() < 1e-6, "rate {}", cert.rate);
        assert!(cert.certified);
        assert!((cert.c_alpha - 1.0).abs() < 1e-9);
        assert!(cert.k_const >= cert.c_alpha && cert.c_alpha >= 1.0);

        let (affine, _) = certify(&m, 0.0, alpha0, &[0.4], 1.0, &table).unwrap();
        assert!(affine.certified);
        assert!((affine.rate + 0.4).abs() < 1e-9);

        let (bad, diags) = certify(&m, 1.0, alpha0, &[0.4], 1.0, &table).unwrap();
        assert!(!bad.certified);
        assert!((bad.rate - ((0.4f64).exp() - 0.4)).abs() < 1e-6);
        assert!(!diags.is_empty());
    }

    #[test]
    fn certify_rejects_an_unstable_linear_part() {
        let m = scalar_measure(0.0, &[(0.0, 1.0)]);
        let table = compute_resolvent(&m, 1.0 / 64.0, 1.0).unwrap();
        let err = certify(&m, 0.0, 1.0, &[], 1.0, &table).unwrap_err();
        assert!(matches!(err, CoreError::Certification(_)));
    }
}
