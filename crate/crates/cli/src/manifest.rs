//! The `manifest.json` written next to solution artifacts. It embeds the
//! discrete system so downstream commands (`realize`, `track`, `simulate`,
//! `verify`) can run from the solution directory alone.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use sparsefb_core::error::Error;
use sparsefb_core::model::{LtiSystem, OutputBounds, SynthesisSpec, Variant};
use sparsefb_core::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemMatrices {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub dynamics: f64,
    pub init: f64,
    pub bound_violation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub input: String,
    pub name: Option<String>,
    pub variant: String,
    pub tolerances: Tolerances,
    pub dims: Dims,
    /// Discrete-time plant (after any zero-order-hold discretization).
    pub system: SystemMatrices,
    pub bounds: Option<Vec<Option<f64>>>,
    pub objective: f64,
    pub residuals: ResidualRecord,
    pub reachability_rank: usize,
    pub artifacts: Vec<String>,
    pub wall_seconds: f64,
    pub x0: Option<Vec<f64>>,
    pub r: Option<Vec<f64>>,
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(nr, nc, |r, c| rows[r][c])
}

impl Manifest {
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Parse(format!(
                "cannot read manifest {}: {} (run `synthesize` first)",
                path.as_ref().display(),
                e
            ))
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn system(&self) -> Result<LtiSystem> {
        LtiSystem::new(
            rows_to_matrix(&self.system.a),
            rows_to_matrix(&self.system.b),
            rows_to_matrix(&self.system.c),
            rows_to_matrix(&self.system.d),
        )
    }

    pub fn synthesis_spec(&self) -> Result<SynthesisSpec> {
        let variant = match self.variant.as_str() {
            "sparse" => Variant::Sparse,
            "minimum-attention" => Variant::MinimumAttention,
            other => return Err(Error::Parse(format!("unknown variant {other:?}"))),
        };
        let bounds = match &self.bounds {
            None => OutputBounds::unbounded(self.dims.p),
            Some(limits) => OutputBounds::from_limits(limits.clone())?,
        };
        SynthesisSpec::new(self.dims.horizon, bounds, variant)
    }
}
