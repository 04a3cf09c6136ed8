//! JSON run configuration and its translation into core types.

use nalgebra::DMatrix;
use serde::Deserialize;
use sfde_core::{Atom, CoreError, DelayMeasure, DensityGrid, NonlinearitySpec, SystemSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemCfg,
    pub numerics: NumericsCfg,
    pub rng: RngCfg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemCfg {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub atoms: Vec<AtomCfg>,
    #[serde(default)]
    pub density: Option<DensityCfg>,
    pub sigma: Vec<Vec<f64>>,
    #[serde(default)]
    pub nonlinearity: Option<NonlinearityCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomCfg {
    pub s: f64,
    #[serde(rename = "A")]
    pub weight: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityCfg {
    pub step: f64,
    pub values: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityCfg {
    pub exprs: Vec<String>,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsCfg {
    pub h: f64,
    #[serde(rename = "T_trunc", default)]
    pub t_trunc: Option<f64>,
    #[serde(default)]
    pub alpha_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub safety: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngCfg {
    pub master_seed: u64,
    #[serde(default)]
    pub replicas: Option<usize>,
}

fn matrix(rows: &[Vec<f64>], nr: usize, nc: usize, what: &str) -> Result<DMatrix<f64>, CoreError> {
    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
        return Err(CoreError::Shape(format!("{what} must be a {nr}x{nc} matrix")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn check_aligned(x: f64, h: f64, what: &str) -> Result<(), CoreError> {
    let k = (x / h).round();
    if (x - k * h).abs() > 1e-9 * (1.0 + x.abs()) {
        return Err(CoreError::Alignment(format!(
            "{what} {x} is not a multiple of the step {h}"
        )));
    }
    Ok(())
}

impl RunConfig {
    /// Build the validated system; returns any parser warnings alongside.
    pub fn build_system(&self) -> Result<(SystemSpec, Vec<String>), CoreError> {
        let s = &self.system;
        let h = self.numerics.h;
        if !(h > 0.0) || !h.is_finite() {
            return Err(CoreError::Precondition(format!(
                "step h must be positive, got {h}"
            )));
        }
        check_aligned(s.tau, h, "delay horizon")?;
        let mut atoms = Vec::with_capacity(s.atoms.len());
        for a in &s.atoms {
            check_aligned(a.s, h, "atom lag")?;
            atoms.push(Atom { location: a.s, weight: matrix(&a.weight, s.n, s.n, "atom weight")? });
        }
        let density = match &s.density {
            None => None,
            Some(d) => {
                check_aligned(d.step, h, "density step")?;
                let values = d
                    .values
                    .iter()
                    .map(|v| matrix(v, s.n, s.n, "density value"))
                    .collect::<Result<Vec<_>, _>>()?;
                Some(DensityGrid { step: d.step, values })
            }
        };
        let measure = DelayMeasure::new(s.tau, s.n, atoms, density)?;
        let sigma = matrix(&s.sigma, s.n, s.m, "sigma")?;
        let (nonlinearity, warnings) = match &s.nonlinearity {
            None => (None, Vec::new()),
            Some(nl) => {
                let (spec, warnings) =
                    NonlinearitySpec::parse(&nl.exprs, s.n, s.tau, nl.lipschitz)?;
                for &lag in spec.delays() {
                    check_aligned(lag, h, "nonlinearity lag")?;
                }
                (Some(spec), warnings)
            }
        };
        Ok((SystemSpec::new(measure, sigma, nonlinearity)?, warnings))
    }

    pub fn safety(&self) -> f64 {
        self.numerics.safety.unwrap_or(1.01)
    }
}
