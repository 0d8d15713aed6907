//! System definition files.
//!
//! A single JSON document describes the plant, the synthesis horizon and
//! constraints, plus optional demo data (initial state, reference):
//!
//! ```json
//! {
//!   "A": [[0.0, 1.0], [1.0, 0.0]],
//!   "B": [[-2.0], [1.0]],
//!   "C": [[0.0, 1.0]],
//!   "D": [[0.0]],
//!   "continuous": true,
//!   "dt": 0.2,
//!   "N": 4,
//!   "s": null,
//!   "variant": "minimum-attention",
//!   "x0": [0.5, -0.5],
//!   "r": [1.0]
//! }
//! ```
//!
//! With `"continuous": true` the matrices `A`/`B` are continuous-time and
//! are discretized by zero-order hold with period `dt`. `"s"` is either
//! `null` (no output constraints) or a per-channel array whose entries are
//! positive limits or `null`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{zoh_discretize, LtiSystem, OutputBounds, SynthesisSpec, Variant};
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    /// When true, `A`/`B` are continuous-time and `dt` must be present.
    #[serde(default)]
    pub continuous: bool,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(rename = "N")]
    pub horizon: usize,
    /// Output bounds: `null` for none, otherwise one entry per channel.
    #[serde(default)]
    pub s: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub variant: Option<String>,
    /// Optional demo initial state for simulation commands.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Optional demo step-reference value.
    #[serde(default)]
    pub r: Option<Vec<f64>>,
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::Parse(format!("{what}: matrix must be non-empty")));
    }
    let nc = rows[0].len();
    if nc == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Parse(format!(
            "{what}: rows must be non-empty and of equal length"
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), nc, |r, c| rows[r][c]))
}

impl SystemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Parse(format!("cannot read {}: {}", path.as_ref().display(), e))
        })?;
        Self::from_json(&text)
    }

    pub fn variant(&self) -> Result<Variant> {
        match self.variant.as_deref() {
            None | Some("sparse") => Ok(Variant::Sparse),
            Some("minimum-attention") => Ok(Variant::MinimumAttention),
            Some(other) => Err(Error::Parse(format!(
                "unknown variant {other:?} (expected \"sparse\" or \"minimum-attention\")"
            ))),
        }
    }

    /// The discrete plant: parses matrices and applies zero-order hold when
    /// the config is continuous-time.
    pub fn system(&self) -> Result<LtiSystem> {
        let a = to_matrix(&self.a, "A")?;
        let b = to_matrix(&self.b, "B")?;
        let c = to_matrix(&self.c, "C")?;
        let d = to_matrix(&self.d, "D")?;
        let (a, b) = if self.continuous {
            let dt = self.dt.ok_or_else(|| {
                Error::Parse("continuous config requires a \"dt\" sampling period".into())
            })?;
            zoh_discretize(&a, &b, dt)?
        } else {
            (a, b)
        };
        LtiSystem::new(a, b, c, d)
    }

    pub fn synthesis_spec(&self) -> Result<SynthesisSpec> {
        let sys = self.system()?;
        let bounds = match &self.s {
            None => OutputBounds::unbounded(sys.p()),
            Some(limits) => {
                if limits.len() != sys.p() {
                    return Err(Error::Parse(format!(
                        "\"s\" has {} entries but the system has {} outputs",
                        limits.len(),
                        sys.p()
                    )));
                }
                OutputBounds::from_limits(limits.clone())?
            }
        };
        SynthesisSpec::new(self.horizon, bounds, self.variant()?)
    }

    pub fn x0_vector(&self, n: usize) -> Result<Option<DVector<f64>>> {
        match &self.x0 {
            None => Ok(None),
            Some(v) if v.len() == n => Ok(Some(DVector::from_vec(v.clone()))),
            Some(v) => Err(Error::Parse(format!(
                "\"x0\" has {} entries but the state dimension is {}",
                v.len(),
                n
            ))),
        }
    }

    pub fn reference_vector(&self, m: usize) -> Result<Option<DVector<f64>>> {
        match &self.r {
            None => Ok(None),
            Some(v) if v.len() == m => Ok(Some(DVector::from_vec(v.clone()))),
            Some(v) => Err(Error::Parse(format!(
                "\"r\" has {} entries but the input dimension is {}",
                v.len(),
                m
            ))),
        }
    }
}
