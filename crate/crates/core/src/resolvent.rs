//! The fundamental solution r(t) and deterministic linear solutions.
//!
//! r solves r'(t) = int mu(du) r(t+u) with r(0) = I and r = 0 on [-tau, 0);
//! it is integrated by the method of steps with Heun's method (explicit
//! trapezoid predictor-corrector), globally O(h^2) when delays are
//! grid-aligned. The jump of r at 0 is handled with one-sided limits per
//! integration cell, so piecewise-polynomial regimes are reproduced exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::measure::{require_grid_index, DelayMeasure, Segment, GRID_EPS};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Limit {
    FromRight,
    FromLeft,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

/// Delayed-term stencil on the integration grid: lags in steps plus matrix
/// weights; density nodes carry their trapezoid weights.
struct DelayedOps {
    n: usize,
    atoms: Vec<(i64, DMatrix<f64>)>,
    density: Vec<(i64, DMatrix<f64>)>,
}

impl DelayedOps {
    fn build(m: &DelayMeasure, h: f64) -> Result<Self> {
        let n_tau = require_grid_index(m.tau(), h, "delay horizon")?;
        let mut atoms = Vec::with_capacity(m.atoms().len());
        for a in m.atoms() {
            let off = require_grid_index(a.location, h, "atom location")?;
            atoms.push((off.clamp(-n_tau, 0), a.weight.clone()));
        }
        let mut density = Vec::new();
        if let Some(d) = m.density() {
            let ratio = require_grid_index(d.step, h, "density step")?;
            if ratio < 1 {
                return Err(CoreError::Alignment(
                    "density step is finer than the integration step".into(),
                ));
            }
            let last = d.values.len() - 1;
            for (i, v) in d.values.iter().enumerate() {
                let w = if i == 0 || i == last { 0.5 } else { 1.0 };
                density.push((i as i64 * ratio - n_tau, v * (w * d.step)));
            }
        }
        Ok(Self { n: m.dim(), atoms, density })
    }

    /// r'(t) at time index `i` (t = i*h), as the one-sided limit selected by
    /// `limit`. `pred` supplies the not-yet-stored value at the newest node.
    fn deriv(
        &self,
        values: &[DMatrix<f64>],
        n_tau: usize,
        i: i64,
        limit: Limit,
        pred: Option<&DMatrix<f64>>,
    ) -> DMatrix<f64> {
        let len = values.len() as i64;
        let mut out = DMatrix::zeros(self.n, self.n);
        for (off, w) in &self.atoms {
            let arg = i + off;
            if arg < 0 {
                continue;
            }
            if arg == 0 && limit == Limit::FromLeft {
                continue;
            }
            let idx = n_tau as i64 + arg;
            if idx < len {
                out += w * &values[idx as usize];
            } else {
                out += w * pred.expect("predictor value required at the newest node");
            }
        }
        for (off, w) in &self.density {
            let arg = i + off;
            if arg < 0 {
                continue;
            }
            if arg == 0 {
                // r's jump at 0 contributes its two-sided average here; this
                // makes the node quadrature equivalent to splitting the cell.
                out += w * 0.5;
                continue;
            }
            let idx = n_tau as i64 + arg;
            if idx < len {
                out += w * &values[idx as usize];
            } else {
                out += w * pred.expect("predictor value required at the newest node");
            }
        }
        out
    }
}

/// The fundamental solution tabulated on [-tau, T].
#[derive(Debug, Clone)]
pub struct ResolventTable {
    measure: DelayMeasure,
    h: f64,
    n_tau: usize,
    values: Vec<DMatrix<f64>>,
}

impl ResolventTable {
    pub fn measure(&self) -> &DelayMeasure {
        &self.measure
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    pub fn tau(&self) -> f64 {
        self.measure.tau()
    }

    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1 - self.n_tau) as f64 * self.h
    }

    /// Nodes (t, r(t)) from -tau to T.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, &DMatrix<f64>)> {
        let (h, n_tau) = (self.h, self.n_tau as i64);
        self.values
            .iter()
            .enumerate()
            .map(move |(k, v)| ((k as i64 - n_tau) as f64 * h, v))
    }

    pub fn value(&self, t: f64) -> Result<&DMatrix<f64>> {
        let k = require_grid_index(t, self.h, "resolvent query")?;
        let idx = k + self.n_tau as i64;
        if idx < 0 || idx as usize >= self.values.len() {
            return Err(CoreError::Range(format!(
                "resolvent query {t} outside [-{}, {}]",
                self.tau(),
                self.t_max()
            )));
        }
        Ok(&self.values[idx as usize])
    }

    /// r at forward time index k (t = k*h, k >= 0).
    pub(crate) fn fwd(&self, k: usize) -> &DMatrix<f64> {
        &self.values[self.n_tau + k]
    }

    pub(crate) fn n_fwd(&self) -> usize {
        self.values.len() - 1 - self.n_tau
    }
}

fn check_finite_matrix(v: &DMatrix<f64>, t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(CoreError::Overflow {
            node: t,
            message: "resolvent integration produced a non-finite value".into(),
        })
    }
}

/// Integrate r'(t) = int mu(du) r(t+u) from r(0) = I with zero history.
pub fn compute_resolvent(m: &DelayMeasure, h: f64, t_horizon: f64) -> Result<ResolventTable> {
    if h <= 0.0 || !h.is_finite() {
        return Err(CoreError::Precondition(format!("step must be positive, got {h}")));
    }
    if t_horizon < m.tau() - GRID_EPS {
        return Err(CoreError::Precondition(format!(
            "horizon {t_horizon} is shorter than the delay horizon {}",
            m.tau()
        )));
    }
    let n_tau = require_grid_index(m.tau(), h, "delay horizon")? as usize;
    let n_fwd = require_grid_index(t_horizon, h, "horizon")? as usize;
    let ops = DelayedOps::build(m, h)?;
    let n = m.dim();
    let mut values = Vec::with_capacity(n_tau + n_fwd + 1);
    for _ in 0..n_tau {
        values.push(DMatrix::zeros(n, n));
    }
    values.push(DMatrix::identity(n, n));
    for j in 0..n_fwd {
        let f0 = ops.deriv(&values, n_tau, j as i64, Limit::FromRight, None);
        let pred = &values[n_tau + j] + &f0 * h;
        let f1 = ops.deriv(&values, n_tau, j as i64 + 1, Limit::FromLeft, Some(&pred));
        let next = &values[n_tau + j] + (f0 + f1) * (0.5 * h);
        check_finite_matrix(&next, (j + 1) as f64 * h)?;
        values.push(next);
    }
    Ok(ResolventTable { measure: m.clone(), h, n_tau, values })
}

/// A grid trajectory; `t0` is the first stored node (the integrators store
/// the history segment, so t0 is the start time minus tau).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t0: f64,
    pub h: f64,
    pub values: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        self.t0 + (self.values.len() - 1) as f64 * self.h
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, &DVector<f64>)> {
        let (t0, h) = (self.t0, self.h);
        self.values.iter().enumerate().map(move |(k, v)| (t0 + k as f64 * h, v))
    }

    pub fn value(&self, t: f64) -> Result<&DVector<f64>> {
        let idx = require_grid_index(t - self.t0, self.h, "trajectory query")?;
        if idx < 0 || idx as usize >= self.values.len() {
            return Err(CoreError::Range(format!(
                "trajectory query {t} outside [{}, {}]",
                self.t0,
                self.t_end()
            )));
        }
        Ok(&self.values[idx as usize])
    }

    /// The segment over [t - tau, t] as an element of the segment space.
    pub fn segment(&self, tau: f64, t: f64) -> Result<Segment> {
        let span = require_grid_index(tau, self.h, "segment span")?;
        let end = require_grid_index(t - self.t0, self.h, "segment anchor")?;
        let start = end - span;
        if start < 0 || end as usize >= self.values.len() {
            return Err(CoreError::Range(format!(
                "segment [{}, {t}] outside the stored trajectory",
                t - tau
            )));
        }
        Segment::new(
            tau,
            self.h,
            self.values[start as usize..=end as usize].to_vec(),
        )
    }
}

/// Heun integration of y'(t) = int mu(ds) y(t+s) with history xi on [-tau,0].
pub fn integrate_linear(m: &DelayMeasure, xi: &Segment, t_span: f64) -> Result<Trajectory> {
    if xi.dim() != m.dim() {
        return Err(CoreError::Shape(format!(
            "history dimension {} does not match measure dimension {}",
            xi.dim(),
            m.dim()
        )));
    }
    if (xi.tau - m.tau()).abs() > GRID_EPS * (1.0 + m.tau()) {
        return Err(CoreError::Shape(format!(
            "history horizon {} does not match delay horizon {}",
            xi.tau,
            m.tau()
        )));
    }
    let h = xi.h;
    let n_tau = require_grid_index(m.tau(), h, "delay horizon")? as usize;
    let n_fwd = require_grid_index(t_span, h, "horizon")? as usize;
    let ops = DelayedOps::build(m, h)?;
    let n = m.dim();

    let drift = |values: &[DVector<f64>], i: usize, pred: Option<&DVector<f64>>| {
        let mut out = DVector::zeros(n);
        for (off, w) in ops.atoms.iter().chain(ops.density.iter()) {
            let idx = i as i64 + off;
            debug_assert!(idx >= 0);
            if (idx as usize) < values.len() {
                out += w * &values[idx as usize];
            } else {
                out += w * pred.expect("predictor value required at the newest node");
            }
        }
        out
    };

    let mut values = xi.values.clone();
    values.reserve(n_fwd);
    for j in 0..n_fwd {
        let i = n_tau + j;
        let f0 = drift(&values, i, None);
        let pred = &values[i] + &f0 * h;
        let f1 = drift(&values, i + 1, Some(&pred));
        let next = &values[i] + (f0 + f1) * (0.5 * h);
        if !next.iter().all(|x| x.is_finite()) {
            return Err(CoreError::Overflow {
                node: (j + 1) as f64 * h,
                message: "linear integration produced a non-finite value".into(),
            });
        }
        values.push(next);
    }
    Ok(Trajectory { t0: -m.tau(), h, values })
}

/// Evaluate the closed solution formula
/// y(t) = r(t) xi(0) + int_{-tau}^0 (int_{s<u} r(t+s-u) mu(ds)) xi(u) du
/// with trapezoid quadrature in u and exact atom sums in s. Interior nodes of
/// the u-quadrature use the average of the one-sided kernel limits, which is
/// equivalent to splitting each cell at the kernel's jumps.
pub fn homogeneous_formula(table: &ResolventTable, xi: &Segment, t: f64) -> Result<DVector<f64>> {
    let m = &table.measure;
    let n = m.dim();
    if xi.dim() != n {
        return Err(CoreError::Shape(format!(
            "history dimension {} does not match measure dimension {n}",
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
    if (xi.h - table.h).abs() > GRID_EPS * table.h {
        return Err(CoreError::Alignment(format!(
            "history step {} does not match table step {}",
            xi.h, table.h
        )));
    }
    let h = table.h;
    let k_t = require_grid_index(t, h, "evaluation time")?;
    if k_t < 0 {
        return Err(CoreError::Range(format!("evaluation time {t} is negative")));
    }
    if t + m.tau() > table.t_max() + GRID_EPS * (1.0 + table.t_max()) {
        return Err(CoreError::Range(format!(
            "evaluation time {t} needs table horizon {} but only {} is stored",
            t + m.tau(),
            table.t_max()
        )));
    }
    let n_tau = table.n_tau;
    let atoms: Vec<(i64, &DMatrix<f64>)> = {
        let mut v = Vec::with_capacity(m.atoms().len());
        for a in m.atoms() {
            v.push((require_grid_index(a.location, h, "atom location")?, &a.weight));
        }
        v
    };
    // Density resampled onto the integration grid (it is piecewise linear).
    let dens: Option<Vec<DMatrix<f64>>> = match m.density() {
        None => None,
        Some(d) => {
            let ratio = require_grid_index(d.step, h, "density step")? as usize;
            let mut out = Vec::with_capacity(n_tau + 1);
            for i in 0..=n_tau {
                let (q, rem) = (i / ratio, i % ratio);
                if rem == 0 {
                    out.push(d.values[q].clone());
                } else {
                    let frac = rem as f64 / ratio as f64;
                    out.push(&d.values[q] * (1.0 - frac) + &d.values[q + 1] * frac);
                }
            }
            Some(out)
        }
    };

    let inner = |j: usize, side: Side| -> DMatrix<f64> {
        let u_off = j as i64 - n_tau as i64;
        let mut k = DMatrix::zeros(n, n);
        for (off, a) in &atoms {
            let include = match side {
                Side::Left => *off < u_off,
                Side::Right => *off <= u_off,
            };
            if !include {
                continue;
            }
            let arg = k_t + off - u_off;
            if arg < 0 {
                continue;
            }
            if arg == 0 {
                // r(0+) = I from the left limit in u; r(0-) = 0 from the right.
                if side == Side::Left {
                    k += *a;
                }
                continue;
            }
            k += table.fwd(arg as usize) * *a;
        }
        if j > 0 {
            if let Some(dv) = &dens {
                for (i, d) in dv.iter().take(j + 1).enumerate() {
                    let w = if i == 0 || i == j { 0.5 } else { 1.0 };
                    let arg = k_t + i as i64 - n_tau as i64 - u_off;
                    if arg < 0 {
                        continue;
                    }
                    let term = if arg == 0 {
                        d * 0.5
                    } else {
                        table.fwd(arg as usize) * d
                    };
                    k += term * (w * h);
                }
            }
        }
        k
    };

    let mut out = table.fwd(k_t as usize) * &xi.values[n_tau];
    if n_tau > 0 {
        for j in 0..=n_tau {
            let kern = if j == 0 {
                inner(0, Side::Right)
            } else if j == n_tau {
                inner(n_tau, Side::Left)
            } else {
                (inner(j, Side::Left) + inner(j, Side::Right)) * 0.5
            };
            let w = if j == 0 || j == n_tau { 0.5 } else { 1.0 };
            out += kern * &xi.values[j] * (w * h);
        }
    }
    Ok(out)
}

/// Outcome of checking the exponential bound ||r(t)|| <= c e^{-alpha t}.
#[derive(Debug, Clone, Copy)]
pub struct DecayCheck {
    pub ok: bool,
    pub worst_t: f64,
    pub worst_ratio: f64,
}

/// Check ||r(t)||_F <= c e^{-alpha t} at every node; reports the node with
/// the largest ratio to the bound.
pub fn decay_check(table: &ResolventTable, alpha: f64, c: f64) -> DecayCheck {
    let mut out = DecayCheck { ok: true, worst_t: 0.0, worst_ratio: 0.0 };
    for (t, r) in table.nodes() {
        let norm = r.norm();
        let bound = c * (-alpha * t).exp();
        let ratio = if norm == 0.0 {
            0.0
        } else if bound > 0.0 {
            norm / bound
        } else {
            f64::INFINITY
        };
        if !(norm <= bound) {
            out.ok = false;
        }
        if ratio > out.worst_ratio || (out.worst_ratio == 0.0 && t == 0.0) {
            out.worst_ratio = ratio;
            out.worst_t = t;
        }
    }
    out
}

/// Maximum norm over nodes of the residual of the integrated equation
/// r(t) - I - int_0^t r'(v) dv, with the integral taken by the trapezoid
/// rule on per-cell one-sided derivative limits. An a-posteriori error
/// indicator that scales like the scheme's O(h^2) global error.
pub fn integral_residual(table: &ResolventTable) -> Result<f64> {
    let m = &table.measure;
    let n_tau = table.n_tau;
    let ops = DelayedOps::build(m, table.h)?;
    let eye = DMatrix::<f64>::identity(m.dim(), m.dim());
    let mut acc = DMatrix::<f64>::zeros(m.dim(), m.dim());
    let mut worst = 0.0f64;
    let mut prev_right = ops.deriv(&table.values, n_tau, 0, Limit::FromRight, None);
    for j in 1..=table.n_fwd() {
        let left = ops.deriv(&table.values, n_tau, j as i64, Limit::FromLeft, None);
        acc += (&prev_right + &left) * (0.5 * table.h);
        let res = (table.fwd(j) - &eye - &acc).norm();
        worst = worst.max(res);
        prev_right = ops.deriv(&table.values, n_tau, j as i64, Limit::FromRight, None);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use nalgebra::dvector;

    fn scalar_measure(tau: f64, entries: &[(f64, f64)]) -> DelayMeasure {
        let atoms = entries
            .iter()
            .map(|&(s, w)| Atom { location: s, weight: DMatrix::from_element(1, 1, w) })
            .collect();
        DelayMeasure::new(tau, 1, atoms, None).unwrap()
    }

    fn pure_delay() -> DelayMeasure {
        scalar_measure(1.0, &[(-1.0, -1.0)])
    }

    fn mixed() -> DelayMeasure {
        scalar_measure(1.0, &[(0.0, -2.0), (-1.0, 1.0)])
    }

    const H: f64 = 1.0 / 256.0;

    #[test]
    fn pure_delay_hand_values_are_exact() {
        let table = compute_resolvent(&pure_delay(), H, 2.0).unwrap();
        assert_eq!(table.value(-H).unwrap()[(0, 0)], 0.0);
        assert_eq!(table.value(0.0).unwrap()[(0, 0)], 1.0);
        assert!((table.value(1.0).unwrap()[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((table.value(1.5).unwrap()[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scalar_ode_matches_exponential_at_second_order() {
        let err = |h: f64| {
            let table = compute_resolvent(&scalar_measure(0.0, &[(0.0, -2.0)]), h, 1.0).unwrap();
            (table.value(1.0).unwrap()[(0, 0)] - (-2.0f64).exp()).abs()
        };
        let (e1, e2) = (err(H), err(H / 2.0));
        assert!(e1 < 1e-4);
        let ratio = e1 / e2;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn unstable_long_run_reports_overflow() {
        let err = compute_resolvent(&scalar_measure(0.0, &[(0.0, 3.0)]), 0.01, 500.0).unwrap_err();
        match err {
            CoreError::Overflow { node, .. } => assert!(node > 0.0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn integrate_linear_examples() {
        let zero = Segment::zero(1.0, H, 1).unwrap();
        let traj = integrate_linear(&pure_delay(), &zero, 2.0).unwrap();
        assert!(traj.values.iter().all(|v| v[0] == 0.0));

        let ones = Segment::from_fn(1.0, H, 1, |_| dvector![1.0]).unwrap();
        let traj = integrate_linear(&pure_delay(), &ones, 1.0).unwrap();
        assert!((traj.value(0.5).unwrap()[0] - 0.5).abs() < 1e-12);

        let err = |h: f64| {
            let ones = Segment::from_fn(1.0, h, 1, |_| dvector![1.0]).unwrap();
            let traj = integrate_linear(&mixed(), &ones, 1.0).unwrap();
            let exact = (1.0 + (-2.0f64).exp()) / 2.0;
            (traj.value(1.0).unwrap()[0] - exact).abs()
        };
        let (e1, e2) = (err(H), err(H / 2.0));
        assert!(e1 < 1e-4);
        let ratio = e1 / e2;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn integrate_linear_is_linear_to_machine_precision() {
        let xi = Segment::from_fn(1.0, H, 1, |u| dvector![u.sin()]).unwrap();
        let eta = Segment::from_fn(1.0, H, 1, |u| dvector![(2.0 * u).cos()]).unwrap();
        let (a, b) = (0.3, -1.2);
        let combo = Segment::from_fn(1.0, H, 1, |u| {
            dvector![a * u.sin() + b * (2.0 * u).cos()]
        })
        .unwrap();
        let ta = integrate_linear(&mixed(), &xi, 3.0).unwrap();
        let tb = integrate_linear(&mixed(), &eta, 3.0).unwrap();
        let tc = integrate_linear(&mixed(), &combo, 3.0).unwrap();
        for ((va, vb), vc) in ta.values.iter().zip(&tb.values).zip(&tc.values) {
            let expect = a * va[0] + b * vb[0];
            assert!((vc[0] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn formula_reproduces_the_hand_value() {
        let table = compute_resolvent(&pure_delay(), H, 2.0).unwrap();
        let zero = Segment::zero(1.0, H, 1).unwrap();
        assert_eq!(homogeneous_formula(&table, &zero, 0.5).unwrap()[0], 0.0);
        let ones = Segment::from_fn(1.0, H, 1, |_| dvector![1.0]).unwrap();
        let y = homogeneous_formula(&table, &ones, 0.5).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-9, "got {}", y[0]);
    }

    #[test]
    fn formula_matches_the_direct_integrator() {
        let err = |h: f64| {
            let table = compute_resolvent(&mixed(), h, 5.0).unwrap();
            let xi = Segment::from_fn(1.0, h, 1, |u| dvector![u.sin() - 0.4 * u]).unwrap();
            let traj = integrate_linear(&mixed(), &xi, 4.0).unwrap();
            let mut worst = 0.0f64;
            for t in [1.0, 2.0, 4.0] {
                let y = homogeneous_formula(&table, &xi, t).unwrap();
                worst = worst.max((y[0] - traj.value(t).unwrap()[0]).abs());
            }
            worst
        };
        let (e1, e2) = (err(1.0 / 64.0), err(1.0 / 128.0));
        assert!(e1 < 1e-3, "error {e1}");
        assert!(e2 < e1);
    }

    #[test]
    fn formula_handles_a_density_part() {
        use crate::measure::DensityGrid;
        let step = 1.0 / 16.0;
        let values = (0..=16)
            .map(|i| {
                let u = -1.0 + i as f64 * step;
                DMatrix::from_element(1, 1, -0.5 + 0.25 * u)
            })
            .collect();
        let m = DelayMeasure::new(
            1.0,
            1,
            vec![Atom { location: 0.0, weight: DMatrix::from_element(1, 1, -1.0) }],
            Some(DensityGrid { step, values }),
        )
        .unwrap();
        let h = 1.0 / 128.0;
        let table = compute_resolvent(&m, h, 4.0).unwrap();
        let xi = Segment::from_fn(1.0, h, 1, |u| dvector![1.0 + u * u]).unwrap();
        let traj = integrate_linear(&m, &xi, 3.0).unwrap();
        for t in [1.0, 3.0] {
            let y = homogeneous_formula(&table, &xi, t).unwrap();
            let x = traj.value(t).unwrap()[0];
            assert!((y[0] - x).abs() < 1e-3, "t={t}: {} vs {x}", y[0]);
        }
    }

    #[test]
    fn residual_indicator_shrinks_at_second_order() {
        let res = |h: f64| {
            let table = compute_resolvent(&mixed(), h, 8.0).unwrap();
            integral_residual(&table).unwrap()
        };
        let (r1, r2) = (res(H), res(H / 2.0));
        assert!(r1 > 0.0);
        let ratio = r1 / r2;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn decay_check_examples() {
        let table = compute_resolvent(&mixed(), H, 20.0).unwrap();
        assert!(decay_check(&table, 0.4, 1.0 + 1e-3).ok);

        let bad = decay_check(&table, 0.4, 0.0);
        assert!(!bad.ok);
        assert_eq!(bad.worst_t, 0.0);
        assert!(bad.worst_ratio.is_infinite());

        let ode = compute_resolvent(&scalar_measure(0.0, &[(0.0, -2.0)]), H, 5.0).unwrap();
        let check = decay_check(&ode, 2.0, 1.0);
        assert!(check.worst_ratio <= 1.0 + 2e-4, "ratio {}", check.worst_ratio);
    }
}
