//! Delay measures and state segments.
//!
//! A bounded linear functional `L` on the segment space is represented by a
//! matrix-valued measure on `[-tau, 0]`: a finite list of atoms plus an
//! optional piecewise-linear density. Segments are grid functions on
//! `[-tau, 0]` with a uniform step.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::expr::NonlinearitySpec;

pub(crate) const GRID_EPS: f64 = 1e-9;

/// Index of `x` on the grid with step `h`, or `None` if `x` is not a node.
pub(crate) fn grid_index(x: f64, h: f64) -> Option<i64> {
    let r = x / h;
    let i = r.round();
    if (r - i).abs() <= GRID_EPS * (1.0 + r.abs()) {
        Some(i as i64)
    } else {
        None
    }
}

pub(crate) fn require_grid_index(x: f64, h: f64, what: &str) -> Result<i64> {
    grid_index(x, h).ok_or_else(|| {
        CoreError::Alignment(format!("{what} {x} is not an integer multiple of the step {h}"))
    })
}

/// One point mass of a delay measure: weight `A` at location `s` in `[-tau, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: DMatrix<f64>,
}

/// Matrix-valued density tabulated on a uniform grid spanning `[-tau, 0]`,
/// interpreted as piecewise linear between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub step: f64,
    /// Values at nodes `-tau, -tau + step, ..., 0`.
    pub values: Vec<DMatrix<f64>>,
}

/// The matrix-valued measure on `[-tau, 0]` defining the linear functional.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayMeasure {
    tau: f64,
    dim: usize,
    atoms: Vec<Atom>,
    density: Option<DensityGrid>,
}

impl DelayMeasure {
    pub fn new(
        tau: f64,
        dim: usize,
        atoms: Vec<Atom>,
        density: Option<DensityGrid>,
    ) -> Result<Self> {
        if tau < 0.0 || !tau.is_finite() {
            return Err(CoreError::Precondition(format!(
                "delay horizon tau must be a nonnegative real, got {tau}"
            )));
        }
        if dim == 0 {
            return Err(CoreError::Shape("state dimension must be positive".into()));
        }
        for atom in &atoms {
            if atom.location < -tau - GRID_EPS || atom.location > GRID_EPS {
                return Err(CoreError::Precondition(format!(
                    "atom location {} lies outside [-{tau}, 0]",
                    atom.location
                )));
            }
            if atom.weight.nrows() != dim || atom.weight.ncols() != dim {
                return Err(CoreError::Shape(format!(
                    "atom weight is {}x{}, expected {dim}x{dim}",
                    atom.weight.nrows(),
                    atom.weight.ncols()
                )));
            }
        }
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                if (atoms[i].location - atoms[j].location).abs() <= GRID_EPS {
                    return Err(CoreError::Precondition(format!(
                        "duplicate atom location {}",
                        atoms[i].location
                    )));
                }
            }
        }
        if let Some(d) = &density {
            if tau == 0.0 {
                return Err(CoreError::Precondition(
                    "tau = 0 admits no density part".into(),
                ));
            }
            let n_nodes = require_grid_index(tau, d.step, "density span")? as usize + 1;
            if d.values.len() != n_nodes {
                return Err(CoreError::Shape(format!(
                    "density grid has {} nodes, expected {} to span [-{tau}, 0] with step {}",
                    d.values.len(),
                    n_nodes,
                    d.step
                )));
            }
            for v in &d.values {
                if v.nrows() != dim || v.ncols() != dim {
                    return Err(CoreError::Shape("density value dimension mismatch".into()));
                }
            }
        }
        if tau == 0.0 {
            for atom in &atoms {
                if atom.location.abs() > GRID_EPS {
                    return Err(CoreError::Precondition(
                        "tau = 0 admits atoms only at location 0".into(),
                    ));
                }
            }
        }
        Ok(Self { tau, dim, atoms, density })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&DensityGrid> {
        self.density.as_ref()
    }

    /// `|mu|([-tau, 0])`: atom magnitudes plus the integrated density
    /// magnitude, in the entrywise (Frobenius) matrix norm.
    pub fn total_variation(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.weight.norm()).sum();
        atoms + self.density_quadrature(|m| m.norm())
    }

    /// `int_{-tau}^0 e^{-alpha u} |mu|(du)`, the exponentially weighted total
    /// variation entering the segment-norm moment bounds.
    pub fn exp_weighted_variation(&self, alpha: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .map(|a| a.weight.norm() * (-alpha * a.location).exp())
            .sum();
        atoms
            + self.density_weighted_quadrature(|m, u| m.norm() * (-alpha * u).exp())
    }

    fn density_quadrature(&self, f: impl Fn(&DMatrix<f64>) -> f64) -> f64 {
        self.density_weighted_quadrature(|m, _| f(m))
    }

    fn density_weighted_quadrature(&self, f: impl Fn(&DMatrix<f64>, f64) -> f64) -> f64 {
        match &self.density {
            None => 0.0,
            Some(d) => {
                let n = d.values.len();
                let mut acc = 0.0;
                for (i, v) in d.values.iter().enumerate() {
                    let u = -self.tau + i as f64 * d.step;
                    let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    acc += w * f(v, u);
                }
                acc * d.step
            }
        }
    }

    /// Evaluate `L(s) = sum_k A_k s(s_k) + int density(u) s(u) du`.
    ///
    /// Atom locations must be nodes of the segment grid; the density part is
    /// integrated by the trapezoid rule on the shared grid.
    pub fn apply(&self, s: &Segment) -> Result<DVector<f64>> {
        if (s.tau - self.tau).abs() > GRID_EPS * (1.0 + self.tau) {
            return Err(CoreError::Shape(format!(
                "segment horizon {} does not match measure horizon {}",
                s.tau, self.tau
            )));
        }
        if s.dim() != self.dim {
            return Err(CoreError::Shape(format!(
                "segment dimension {} does not match measure dimension {}",
                s.dim(),
                self.dim
            )));
        }
        let last = s.values.len() - 1;
        let mut out = DVector::zeros(self.dim);
        for atom in &self.atoms {
            let off = require_grid_index(atom.location, s.h, "atom location")?;
            let idx = last as i64 + off;
            debug_assert!(idx >= 0);
            out += &atom.weight * &s.values[idx as usize];
        }
        if let Some(d) = &self.density {
            let ratio = require_grid_index(d.step, s.h, "density step")?;
            if ratio < 1 {
                return Err(CoreError::Alignment(
                    "density step is finer than the segment grid".into(),
                ));
            }
            let n = d.values.len();
            for (i, v) in d.values.iter().enumerate() {
                let idx = i as i64 * ratio;
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                out += (v * &s.values[idx as usize]) * (w * d.step);
            }
        }
        Ok(out)
    }

    /// Scale every atom and density value by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { location: a.location, weight: &a.weight * c })
            .collect();
        let density = self.density.as_ref().map(|d| DensityGrid {
            step: d.step,
            values: d.values.iter().map(|v| v * c).collect(),
        });
        Self { tau: self.tau, dim: self.dim, atoms, density }
    }
}

/// A grid function on `[-tau, 0]`: an element of the segment space.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub tau: f64,
    pub h: f64,
    /// Values at nodes `-tau, -tau + h, ..., 0`.
    pub values: Vec<DVector<f64>>,
}

impl Segment {
    pub fn new(tau: f64, h: f64, values: Vec<DVector<f64>>) -> Result<Self> {
        if h <= 0.0 || !h.is_finite() {
            return Err(CoreError::Precondition(format!("step must be positive, got {h}")));
        }
        let n_nodes = require_grid_index(tau, h, "segment horizon")? as usize + 1;
        if values.len() != n_nodes {
            return Err(CoreError::Shape(format!(
                "segment has {} nodes, expected {n_nodes} for tau = {tau}, h = {h}",
                values.len()
            )));
        }
        let dim = values[0].len();
        for v in &values {
            if v.len() != dim {
                return Err(CoreError::Shape("segment values have mixed dimensions".into()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(CoreError::Evaluation("segment contains a non-finite value".into()));
            }
        }
        Ok(Self { tau, h, values })
    }

    /// Segment sampled from a function of the node coordinate `u in [-tau, 0]`.
    pub fn from_fn(
        tau: f64,
        h: f64,
        dim: usize,
        f: impl Fn(f64) -> DVector<f64>,
    ) -> Result<Self> {
        let n_nodes = require_grid_index(tau, h, "segment horizon")? as usize + 1;
        let values = (0..n_nodes).map(|i| f(-tau + i as f64 * h)).collect::<Vec<_>>();
        for v in &values {
            if v.len() != dim {
                return Err(CoreError::Shape("segment sample has wrong dimension".into()));
            }
        }
        Segment::new(tau, h, values)
    }

    pub fn zero(tau: f64, h: f64, dim: usize) -> Result<Self> {
        Segment::from_fn(tau, h, dim, |_| DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Value at node `u` (must be a grid node in `[-tau, 0]`).
    pub fn value(&self, u: f64) -> Result<&DVector<f64>> {
        let idx = require_grid_index(u + self.tau, self.h, "segment query")?;
        self.values
            .get(idx as usize)
            .filter(|_| idx >= 0)
            .ok_or_else(|| CoreError::Range(format!("segment query {u} outside [-{}, 0]", self.tau)))
    }

    /// Max over grid nodes of the Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Node-wise difference; the segments must share the grid.
    pub fn sub(&self, other: &Segment) -> Result<Segment> {
        if self.values.len() != other.values.len() || self.dim() != other.dim() {
            return Err(CoreError::Shape("segment grids differ".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Segment::new(self.tau, self.h, values)
    }

    /// Sup-norm distance without the finiteness validation of `sub`.
    pub fn sup_distance(&self, other: &Segment) -> Result<f64> {
        if self.values.len() != other.values.len() || self.dim() != other.dim() {
            return Err(CoreError::Shape("segment grids differ".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

/// A full system: linear part, noise matrix, optional nonlinearity.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub measure: DelayMeasure,
    /// Noise matrix, `n x m`.
    pub sigma: DMatrix<f64>,
    pub nonlinearity: Option<NonlinearitySpec>,
}

impl SystemSpec {
    pub fn new(
        measure: DelayMeasure,
        sigma: DMatrix<f64>,
        nonlinearity: Option<NonlinearitySpec>,
    ) -> Result<Self> {
        if sigma.nrows() != measure.dim() {
            return Err(CoreError::Shape(format!(
                "noise matrix has {} rows, state dimension is {}",
                sigma.nrows(),
                measure.dim()
            )));
        }
        if let Some(nl) = &nonlinearity {
            if nl.dim() != measure.dim() {
                return Err(CoreError::Shape(format!(
                    "nonlinearity has {} components, state dimension is {}",
                    nl.dim(),
                    measure.dim()
                )));
            }
            for &lag in nl.delays() {
                if lag > measure.tau() + GRID_EPS {
                    return Err(CoreError::Precondition(format!(
                        "nonlinearity lag {lag} exceeds the delay horizon {}",
                        measure.tau()
                    )));
                }
            }
        }
        Ok(Self { measure, sigma, nonlinearity })
    }

    pub fn noise_dim(&self) -> usize {
        self.sigma.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    const H: f64 = 1.0 / 256.0;

    fn scalar(tau: f64, entries: &[(f64, f64)]) -> DelayMeasure {
        let atoms = entries
            .iter()
            .map(|&(s, w)| Atom { location: s, weight: DMatrix::from_element(1, 1, w) })
            .collect();
        DelayMeasure::new(tau, 1, atoms, None).unwrap()
    }

    #[test]
    fn apply_reproduces_hand_values() {
        let ones = Segment::from_fn(1.0, H, 1, |_| dvector![1.0]).unwrap();
        let m = scalar(1.0, &[(0.0, -2.0), (-1.0, 1.0)]);
        assert_eq!(m.apply(&ones).unwrap()[0], -1.0);
        let pure = scalar(1.0, &[(-1.0, -1.0)]);
        assert_eq!(pure.apply(&ones).unwrap()[0], -1.0);
        for c in [-3.0, 0.5, 2.0] {
            let seg = Segment::from_fn(1.0, H, 1, |_| dvector![c]).unwrap();
            assert!((pure.apply(&seg).unwrap()[0] + c).abs() < 1e-14);
        }
    }

    #[test]
    fn apply_is_linear_and_bounded() {
        let m = scalar(1.0, &[(0.0, -2.0), (-1.0, 1.0)]);
        let a = Segment::from_fn(1.0, H, 1, |u| dvector![u.sin()]).unwrap();
        let b = Segment::from_fn(1.0, H, 1, |u| dvector![u * u - 0.3]).unwrap();
        let combo = Segment::from_fn(1.0, H, 1, |u| {
            dvector![2.0 * u.sin() - 0.5 * (u * u - 0.3)]
        })
        .unwrap();
        let lhs = m.apply(&combo).unwrap();
        let rhs = m.apply(&a).unwrap() * 2.0 - m.apply(&b).unwrap() * 0.5;
        assert!((lhs - rhs).norm() < 1e-12);
        assert!(m.apply(&a).unwrap().norm() <= m.total_variation() * a.sup_norm() + 1e-12);
    }

    #[test]
    fn total_variation_values() {
        assert_eq!(scalar(1.0, &[(0.0, -2.0), (-1.0, 1.0)]).total_variation(), 3.0);
        assert_eq!(DelayMeasure::new(1.0, 2, vec![], None).unwrap().total_variation(), 0.0);
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let m = DelayMeasure::new(1.0, 2, vec![Atom { location: -0.5, weight: w }], None).unwrap();
        assert!((m.total_variation() - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exp_weighted_variation_example() {
        let m = scalar(1.0, &[(0.0, -2.0), (-1.0, 1.0)]);
        assert!((m.exp_weighted_variation(0.4) - (2.0 + 0.4f64.exp())).abs() < 1e-12);
        assert_eq!(m.exp_weighted_variation(0.0), m.total_variation());
    }

    #[test]
    fn scaling_scales_the_variation() {
        let m = scalar(1.0, &[(0.0, -2.0), (-1.0, 1.0)]);
        assert!((m.scaled(-0.5).total_variation() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn segment_sup_norm_of_the_figure_difference() {
        let seg = Segment::from_fn(1.0, H, 1, |u| dvector![u.sin() - 2.0 * u.cos()]).unwrap();
        let s = seg.sup_norm();
        assert!(s > 2.2355 && s <= 5.0f64.sqrt(), "sup {s}");
        let d = seg.sup_distance(&Segment::zero(1.0, H, 1).unwrap()).unwrap();
        assert_eq!(d, s);
    }

    #[test]
    fn validation_failures() {
        assert!(Segment::new(1.0, H, vec![dvector![1.0]; 5]).is_err());
        assert!(DelayMeasure::new(
            1.0,
            1,
            vec![Atom { location: 0.3, weight: DMatrix::identity(1, 1) }],
            None
        )
        .is_err());
        assert!(DelayMeasure::new(
            1.0,
            1,
            vec![Atom { location: -2.0, weight: DMatrix::identity(1, 1) }],
            None
        )
        .is_err());
        assert!(require_grid_index(0.1, H, "lag").is_err());
    }
}
