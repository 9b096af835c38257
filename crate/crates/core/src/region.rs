//! Security regions of the isotropic symmetric family on a `(λ, c)` grid.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::security::{analyze, collective_boundary};
use crate::state::{symmetric_state_unchecked, BipartiteSplit, SymmetricStateParams};

/// `steps` evenly spaced values from `min` to `max` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridRange {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        let r = Self { min, max, steps };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::InvalidParameter(format!("a grid needs at least 2 steps, got {}", self.steps)));
        }
        if !(self.min >= 0.0 && self.max > self.min && self.max.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid range {}:{}", self.min, self.max)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.steps - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.steps).map(|i| if i + 1 == self.steps { self.max } else { self.min + h * i as f64 }).collect()
    }
}

impl FromStr for GridRange {
    type Err = Error;

    /// Parses `min:max:steps`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidParameter(format!("expected min:max:steps, got `{s}`")));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("`{t}` is not a number")));
        let steps = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidParameter(format!("`{}` is not a step count", parts[2])))?;
        Self::new(num(parts[0])?, num(parts[1])?, steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub lambda_range: GridRange,
    pub c_range: GridRange,
    pub x0: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.lambda_range.validate()?;
        self.c_range.validate()?;
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(Error::InvalidParameter(format!("X0 must be positive, got {}", self.x0)));
        }
        Ok(())
    }
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            lambda_range: GridRange { min: 1.0, max: 3.0, steps: 200 },
            c_range: GridRange { min: 0.0, max: 3.0, steps: 200 },
            x0: 1.0,
        }
    }
}

/// Classification of one grid point. Unphysical points are negative on
/// every other column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub c: f64,
    pub physical: bool,
    pub nppt: bool,
    pub individual: bool,
    pub collective: bool,
}

pub fn classify(lambda: f64, c: f64, x0: f64) -> Result<SweepCell> {
    let params = SymmetricStateParams::isotropic(lambda, c);
    let s = symmetric_state_unchecked(&params);
    let mut cell = SweepCell { lambda, c, physical: false, nppt: false, individual: false, collective: false };
    if !s.is_physical() {
        return Ok(cell);
    }
    cell.physical = true;
    let report = analyze(&s, BipartiteSplit::one_by_one(), None, x0, None)?;
    cell.nppt = report.nppt;
    cell.individual = report.individual_secure;
    cell.collective = report.collective_secure;
    Ok(cell)
}

/// Classifies every grid point, `λ` major and `c` minor.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    spec.validate()?;
    let cs = spec.c_range.values();
    let points: Vec<(f64, f64)> = spec
        .lambda_range
        .values()
        .into_iter()
        .flat_map(|l| cs.iter().map(move |&c| (l, c)))
        .collect();
    points.into_par_iter().map(|(l, c)| classify(l, c, spec.x0)).collect()
}

pub const CSV_HEADER: &str = "lambda,c,physical,nppt,individual,collective";

pub fn to_csv(cells: &[SweepCell]) -> String {
    let mut out = String::with_capacity(40 * (cells.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    let b = |x: bool| if x { '1' } else { '0' };
    for cell in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            cell.lambda,
            cell.c,
            b(cell.physical),
            b(cell.nppt),
            b(cell.individual),
            b(cell.collective)
        ));
    }
    out
}

/// Analytic boundaries on the isotropic family.
pub fn physical_boundary(lambda: f64) -> f64 {
    (lambda * lambda - 1.0).max(0.0).sqrt()
}

pub fn entanglement_boundary(lambda: f64) -> f64 {
    lambda - 1.0
}

/// Collective-security boundary; `None` where the family has no entangled
/// members (`λ ≤ 1`).
pub fn collective_boundary_curve(lambda: f64) -> Option<f64> {
    collective_boundary(lambda, None).ok()
}

/// Cells violating `collective ⊆ individual ⊆ nppt ⊆ physical`.
pub fn nesting_violations(cells: &[SweepCell]) -> usize {
    cells
        .iter()
        .filter(|c| (c.collective && !c.individual) || (c.individual && !c.nppt) || (c.nppt && !c.physical))
        .count()
}
