//! Iterative proportional fitting (raking) of weights to control margins.
//!
//! Each margin dimension partitions the records by the integer codes of
//! one covariate and pins the weighted count of every category to an
//! external control total. One cycle scales the weights of each dimension
//! in turn by `control / current_sum`; cycles repeat until every category
//! is within a relative tolerance of its control or a cycle cap is hit.
//! Replicate weight columns are raked independently with the same margins,
//! so calibration variance flows into the replicate spread.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::Frame;
use crate::replicate::ReplicateSet;

/// Control totals for raking: one entry per (dimension, category).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMargins {
    pub dimensions: Vec<MarginDimension>,
}

/// One raking dimension: a covariate name and its category controls.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginDimension {
    pub variable: String,
    pub categories: Vec<MarginCategory>,
}

/// One category of a dimension: the integer code records carry in the
/// covariate column, and the control total its weighted count must hit.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginCategory {
    pub code: i64,
    pub control: f64,
}

/// Raking loop settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RakingConfig {
    /// Relative tolerance on every category total.
    pub tolerance: f64,
    /// Cap on full cycles before giving up.
    pub max_cycles: usize,
}

impl Default for RakingConfig {
    fn default() -> Self {
        RakingConfig {
            tolerance: 1e-8,
            max_cycles: 500,
        }
    }
}

#[derive(Debug, Error)]
pub enum RakingError {
    #[error("margin dimension '{name}' is not a covariate of the frame")]
    UnknownDimension { name: String },
    #[error(
        "person {person_id}: covariate {dimension} = {value} matches no margin category"
    )]
    UnresolvedCategory {
        person_id: u64,
        dimension: String,
        value: f64,
    },
    #[error(
        "margin {dimension}/{code} has control {control} but no records; the margin is infeasible"
    )]
    EmptyCategory {
        dimension: String,
        code: i64,
        control: f64,
    },
}

/// Margins resolved against a frame: per dimension, the category index of
/// every record plus the control vector.
#[derive(Debug, Clone)]
pub struct ResolvedMargins {
    dims: Vec<ResolvedDimension>,
}

#[derive(Debug, Clone)]
struct ResolvedDimension {
    variable: String,
    controls: Vec<f64>,
    category_of: Vec<u32>,
}

impl ResolvedMargins {
    /// Maps every record to its category on every dimension, verifying
    /// that no category with a positive control is structurally empty.
    pub fn resolve(frame: &Frame, margins: &ControlMargins) -> Result<Self, RakingError> {
        let mut dims = Vec::with_capacity(margins.dimensions.len());
        for dim in &margins.dimensions {
            let col = frame
                .covariate_index(&dim.variable)
                .ok_or_else(|| RakingError::UnknownDimension {
                    name: dim.variable.clone(),
                })?;
            let mut category_of = Vec::with_capacity(frame.len());
            let mut occupancy = vec![0usize; dim.categories.len()];
            for rec in frame.records() {
                let value = rec.covariates[col];
                let cat = dim
                    .categories
                    .iter()
                    .position(|c| c.code as f64 == value)
                    .ok_or_else(|| RakingError::UnresolvedCategory {
                        person_id: rec.person_id,
                        dimension: dim.variable.clone(),
                        value,
                    })?;
                occupancy[cat] += 1;
                category_of.push(cat as u32);
            }
            for (cat, &count) in occupancy.iter().enumerate() {
                let control = dim.categories[cat].control;
                if count == 0 && control > 0.0 {
                    return Err(RakingError::EmptyCategory {
                        dimension: dim.variable.clone(),
                        code: dim.categories[cat].code,
                        control,
                    });
                }
            }
            dims.push(ResolvedDimension {
                variable: dim.variable.clone(),
                controls: dim.categories.iter().map(|c| c.control).collect(),
                category_of,
            });
        }
        Ok(ResolvedMargins { dims })
    }

    pub fn dimension_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dimension_name(&self, d: usize) -> &str {
        &self.dims[d].variable
    }

    pub fn controls(&self, d: usize) -> &[f64] {
        &self.dims[d].controls
    }

    pub fn category_of(&self, d: usize) -> &[u32] {
        &self.dims[d].category_of
    }

    /// Weighted category totals of one dimension.
    pub fn category_totals(&self, d: usize, weights: &[f64]) -> Vec<f64> {
        let dim = &self.dims[d];
        let mut sums = vec![0.0; dim.controls.len()];
        for (idx, &cat) in dim.category_of.iter().enumerate() {
            sums[cat as usize] += weights[idx];
        }
        sums
    }

    /// Worst relative margin error over all dimensions and categories.
    fn max_rel_error(&self, weights: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for d in 0..self.dims.len() {
            let sums = self.category_totals(d, weights);
            for (cat, &control) in self.dims[d].controls.iter().enumerate() {
                let err = if control > 0.0 {
                    (sums[cat] - control).abs() / control
                } else {
                    sums[cat].abs()
                };
                worst = worst.max(err);
            }
        }
        worst
    }
}

/// Outcome of one raking run. Non-convergence is reported, not raised:
/// the caller decides whether a stalled margin is fatal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RakeStatus {
    pub converged: bool,
    pub cycles: usize,
    pub max_rel_error: f64,
}

/// Rakes a weight vector in place. Weights already within tolerance come
/// back untouched with `cycles = 0`.
pub fn rake(weights: &mut [f64], margins: &ResolvedMargins, config: &RakingConfig) -> RakeStatus {
    let mut err = margins.max_rel_error(weights);
    if err <= config.tolerance {
        return RakeStatus {
            converged: true,
            cycles: 0,
            max_rel_error: err,
        };
    }
    for cycle in 1..=config.max_cycles {
        for dim in &margins.dims {
            let mut sums = vec![0.0; dim.controls.len()];
            for (idx, &cat) in dim.category_of.iter().enumerate() {
                sums[cat as usize] += weights[idx];
            }
            let factors: Vec<f64> = dim
                .controls
                .iter()
                .zip(&sums)
                .map(|(&control, &sum)| if sum > 0.0 { control / sum } else { 1.0 })
                .collect();
            for (idx, &cat) in dim.category_of.iter().enumerate() {
                weights[idx] *= factors[cat as usize];
            }
        }
        err = margins.max_rel_error(weights);
        if err <= config.tolerance {
            return RakeStatus {
                converged: true,
                cycles: cycle,
                max_rel_error: err,
            };
        }
    }
    RakeStatus {
        converged: false,
        cycles: config.max_cycles,
        max_rel_error: err,
    }
}

/// Rakes every replicate weight column independently. Returns the
/// materialized columns and their statuses; large frames should instead
/// stream columns through [`rake`] one replicate at a time.
pub fn rake_replicates(
    base: &[f64],
    reps: &ReplicateSet,
    margins: &ResolvedMargins,
    config: &RakingConfig,
) -> (Vec<Vec<f64>>, Vec<RakeStatus>) {
    let mut columns = Vec::with_capacity(reps.len());
    let mut statuses = Vec::with_capacity(reps.len());
    for k in 0..reps.len() {
        let mut column = reps.weight_column(k, base);
        statuses.push(rake(&mut column, margins, config));
        columns.push(column);
    }
    (columns, statuses)
}
