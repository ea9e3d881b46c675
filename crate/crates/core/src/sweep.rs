//! Exhaustive grid search over compensation offsets.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};
use crate::modification::{CompensationSpec, ModificationStack};
use crate::report::Prepared;
use crate::stability::Verdict;

pub const MAX_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub joints: Vec<usize>,
    /// Offset grid per joint, rad, ascending.
    pub grids: Vec<Vec<f64>>,
    /// Combinations with any |offset| above this are skipped, rad.
    pub budget: Option<f64>,
}

impl SweepSpec {
    /// Same grid for every joint.
    pub fn shared(joints: Vec<usize>, grid: Vec<f64>, budget: Option<f64>) -> Self {
        let grids = vec![grid; joints.len()];
        Self {
            joints,
            grids,
            budget,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GaitError::Config(m));
        if self.joints.is_empty() {
            return bad("sweep needs at least one joint".into());
        }
        if self.grids.len() != self.joints.len() {
            return bad(format!(
                "{} grids for {} joints",
                self.grids.len(),
                self.joints.len()
            ));
        }
        let mut seen = self.joints.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.joints.len() {
            return bad("sweep joints must be distinct".into());
        }
        let mut total = 1usize;
        for g in &self.grids {
            if g.is_empty() {
                return bad("offset grid is empty".into());
            }
            if !g.iter().all(|v| v.is_finite()) || g.windows(2).any(|w| w[0] >= w[1]) {
                return bad("offset grid must be finite and strictly ascending".into());
            }
            total = total.saturating_mul(g.len());
        }
        if total > MAX_GRID_POINTS {
            return bad(format!("{total} grid points exceed {MAX_GRID_POINTS}"));
        }
        CompensationSpec::new(self.joints.iter().map(|&j| (j, 0.0))).validate()
    }

    /// Every grid combination within the budget, in row-major order.
    pub fn combinations(&self) -> Vec<Vec<f64>> {
        let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
        for g in &self.grids {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    g.iter().map(move |&v| {
                        let mut next = c.clone();
                        next.push(v);
                        next
                    })
                })
                .collect();
        }
        match self.budget {
            Some(b) => combos
                .into_iter()
                .filter(|c| c.iter().all(|v| v.abs() <= b + 1e-12))
                .collect(),
            None => combos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Offsets in the order of `SweepSpec::joints`, rad.
    pub offsets: Vec<f64>,
    pub min_margin: f64,
    pub fraction_inside: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub joints: Vec<usize>,
    pub rows: Vec<SweepRow>,
    pub best: usize,
}

impl SweepTable {
    pub fn best_row(&self) -> &SweepRow {
        &self.rows[self.best]
    }
}

fn total_abs(offsets: &[f64]) -> f64 {
    offsets.iter().map(|v| v.abs()).sum()
}

/// Orders rows so the best compares greatest: larger min margin, then
/// smaller total |offset|, then lexicographically smaller offsets.
fn rank(a: &SweepRow, b: &SweepRow) -> Ordering {
    a.min_margin
        .total_cmp(&b.min_margin)
        .then_with(|| total_abs(&b.offsets).total_cmp(&total_abs(&a.offsets)))
        .then_with(|| {
            b.offsets
                .iter()
                .zip(&a.offsets)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Evaluates every offset combination on top of `base` (offsets on the
/// swept joints replace any configured ones). Rows keep grid order.
pub fn sweep_compensation(
    prepared: &Prepared,
    base: &ModificationStack,
    n_steps: usize,
    spec: &SweepSpec,
) -> Result<SweepTable> {
    spec.validate()?;
    let combos = spec.combinations();
    if combos.is_empty() {
        return Err(GaitError::Config("no grid point lies within the budget".into()));
    }
    let rows = combos
        .into_par_iter()
        .map(|offsets| {
            let mut stack = base.clone();
            let mut comp = stack.compensation.take().unwrap_or_default();
            for (&j, &v) in spec.joints.iter().zip(&offsets) {
                comp.offsets.insert(j, v);
            }
            stack.compensation = Some(comp);
            let sim = prepared.simulate(&stack, n_steps)?;
            Ok(SweepRow {
                offsets,
                min_margin: sim.report.min_margin,
                fraction_inside: sim.report.fraction_inside,
                verdict: sim.report.verdict,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = (0..rows.len())
        .max_by(|&a, &b| rank(&rows[a], &rows[b]).then(b.cmp(&a)))
        .expect("non-empty");
    Ok(SweepTable {
        joints: spec.joints.clone(),
        rows,
        best,
    })
}

/// Parses `start:step:end` (inclusive) or a comma list, in degrees, into
/// an ascending grid in radians.
pub fn parse_grid_deg(text: &str) -> Result<Vec<f64>> {
    let bad = || GaitError::Config(format!("bad grid {text:?}: use start:step:end or a,b,c"));
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let mut deg = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, step, end] = parts.as_slice() else {
            return Err(bad());
        };
        let (start, step, end) = (parse(start)?, parse(step)?, parse(end)?);
        if !(step > 0.0) || !(end >= start) || !start.is_finite() || !end.is_finite() {
            return Err(bad());
        }
        let count = ((end - start) / step + 1e-9).floor() as usize;
        if count >= MAX_GRID_POINTS {
            return Err(bad());
        }
        (0..=count).map(|k| start + k as f64 * step).collect::<Vec<_>>()
    } else {
        text.split(',').map(parse).collect::<Result<Vec<_>>>()?
    };
    deg.sort_by(f64::total_cmp);
    deg.dedup();
    Ok(deg.into_iter().map(f64::to_radians).collect())
}
