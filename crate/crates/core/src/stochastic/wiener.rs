//! Two-sided grid-sampled Brownian paths with the time shift.
//!
//! Increments are a pure function of (seed, node index, component), so any
//! sub-range regenerates identically and the shift is an index offset into
//! one shared cumulative array; the shift-flow identity is exact in bits.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{CoreError, Result};
use crate::measure::require_grid_index;
use crate::rng;

#[derive(Debug, Clone)]
pub struct WienerPath {
    seed: u64,
    h: f64,
    dim: usize,
    i_min: i64,
    i_max: i64,
    /// Grid offset implementing the shift; node 0 of the view is this
    /// absolute node. Always within [i_min, i_max].
    offset: i64,
    /// Cumulative sums at absolute nodes i_min..=i_max, anchored at node 0.
    cum: Arc<Vec<f64>>,
}

/// Sample a two-sided path on [t_min, t_max] (which must contain 0).
pub fn sample_path(seed: u64, h: f64, t_min: f64, t_max: f64, dim: usize) -> Result<WienerPath> {
    if h <= 0.0 || !h.is_finite() {
        return Err(CoreError::Precondition(format!("step must be positive, got {h}")));
    }
    if dim == 0 {
        return Err(CoreError::Shape("path dimension must be positive".into()));
    }
    let i_min = require_grid_index(t_min, h, "path start")?;
    let i_max = require_grid_index(t_max, h, "path end")?;
    if i_min > 0 || i_max < 0 {
        return Err(CoreError::Range(format!(
            "path range [{t_min}, {t_max}] must contain 0"
        )));
    }
    if i_min == i_max {
        return Err(CoreError::Range("path range is empty".into()));
    }
    let n_nodes = (i_max - i_min + 1) as usize;
    let mut cum = vec![0.0f64; n_nodes * dim];
    let sqrt_h = h.sqrt();
    let pos = |i: i64| ((i - i_min) as usize) * dim;
    for i in 0..i_max {
        let (a, b) = (pos(i), pos(i + 1));
        for c in 0..dim {
            cum[b + c] = cum[a + c] + sqrt_h * rng::gauss(seed, i, c as u64);
        }
    }
    for i in (i_min..0).rev() {
        let (a, b) = (pos(i), pos(i + 1));
        for c in 0..dim {
            cum[a + c] = cum[b + c] - sqrt_h * rng::gauss(seed, i, c as u64);
        }
    }
    Ok(WienerPath { seed, h, dim, i_min, i_max, offset: 0, cum: Arc::new(cum) })
}

impl WienerPath {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_min(&self) -> f64 {
        (self.i_min - self.offset) as f64 * self.h
    }

    pub fn t_max(&self) -> f64 {
        (self.i_max - self.offset) as f64 * self.h
    }

    /// Cumulative value of component `c` at view node index `rel`
    /// (not anchored; take differences). `rel` must be covered.
    pub(crate) fn cum_at(&self, rel: i64, c: usize) -> f64 {
        let abs = self.offset + rel;
        self.cum[((abs - self.i_min) as usize) * self.dim + c]
    }

    /// Check that view node indices lo..=hi are stored.
    pub(crate) fn check_cover(&self, lo: i64, hi: i64) -> Result<()> {
        if self.offset + lo < self.i_min || self.offset + hi > self.i_max {
            return Err(CoreError::Range(format!(
                "queries [{}, {}] exceed the path range [{}, {}]",
                lo as f64 * self.h,
                hi as f64 * self.h,
                self.t_min(),
                self.t_max()
            )));
        }
        Ok(())
    }

    /// B(t) for grid t, anchored so that B(0) = 0.
    pub fn value(&self, t: f64) -> Result<DVector<f64>> {
        let rel = require_grid_index(t, self.h, "path query")?;
        self.check_cover(rel.min(0), rel.max(0))?;
        Ok(DVector::from_fn(self.dim, |c, _| {
            self.cum_at(rel, c) - self.cum_at(0, c)
        }))
    }

    /// The shifted path: value(s) = self.value(t+s) - self.value(t), as a
    /// view over the same data (no resampling).
    pub fn shift(&self, t: f64) -> Result<WienerPath> {
        let rel = require_grid_index(t, self.h, "shift amount")?;
        let offset = self.offset + rel;
        if offset < self.i_min || offset > self.i_max {
            return Err(CoreError::Range(format!(
                "shift by {t} moves the origin outside the sampled range"
            )));
        }
        Ok(WienerPath {
            seed: self.seed,
            h: self.h,
            dim: self.dim,
            i_min: self.i_min,
            i_max: self.i_max,
            offset,
            cum: Arc::clone(&self.cum),
        })
    }
}
