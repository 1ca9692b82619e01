//! Jackknife replication: factor schemes, replicate weight columns, and
//! the variance combination rule.
//!
//! Two schemes are provided. The grouped scheme deletes one variance group
//! per replicate and rescales every member of the affected stratum with a
//! weight-dependent factor: a deleted member of initial weight `w0` gets
//!
//! ```text
//! delta = 1 - sqrt((1 - 1/w0) * (G-1)/G)
//! ```
//!
//! and a retained member of the same stratum gets `1 + (1 - delta)/(G-1)`,
//! which both preserves the stratum's weighted total and makes the sum of
//! squared replicate deviations of a weight reproduce `w0^2 - w0` exactly —
//! the quantity the imputation-variance identities are built around. Its
//! combination coefficients are `c_k = 1`.
//!
//! The delete-one scheme is the classical jackknife over elements (factor
//! `n/(n-1)` on survivors, `0` on the deleted element, `c_k = (n-1)/n`),
//! used for small closed-form checks and single-deletion studies.

pub mod adjust;
pub mod groups;

pub use adjust::{
    adjust_fractions, co_donation_components, donor_loads, AdjustDiagnostics, ClusterSolution,
    DonorLoads, FractionAdjustment, SolveFlag,
};
pub use groups::{assign_variance_groups, GroupDesign, GroupError, VarianceGroups};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::Frame;

/// Which jackknife factor scheme a [`ReplicateSet`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplicateScheme {
    /// Grouped deletion with weight-dependent factors; `c_k = 1`.
    DeltaGrouped,
    /// Delete one element per replicate; `c_k = (n-1)/n`.
    DeleteOne,
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplicateError {
    #[error("person {person_id} has initial weight {weight}; grouped factors need w0 >= 1")]
    WeightBelowOne { person_id: u64, weight: f64 },
    #[error("delete-one replication needs at least 2 records, found {found}")]
    TooFewRecords { found: usize },
}

/// A fully materialized set of replicate factor columns, stored sparsely:
/// per replicate, only the records whose factor differs from 1.
#[derive(Debug, Clone)]
pub struct ReplicateSet {
    scheme: ReplicateScheme,
    c: Vec<f64>,
    /// Per replicate, `(record, factor)` for factors != 1.
    touched: Vec<Vec<(u32, f64)>>,
    /// Deletion structure shared with the fraction adjuster: the group each
    /// record belongs to, and the group deleted by each replicate.
    group_of: Vec<u32>,
    deleted_group: Vec<u32>,
}

impl ReplicateSet {
    /// Builds grouped-deletion factors from a variance group assignment.
    /// Factors depend on each member's initial weight, so the frame's
    /// `initial_weight` column must be at least 1 everywhere.
    pub fn delta_grouped(frame: &Frame, groups: &VarianceGroups) -> Result<Self, ReplicateError> {
        let g = groups.design.groups_per_stratum as f64;
        let l = groups.replicate_count();
        let mut touched: Vec<Vec<(u32, f64)>> = vec![Vec::new(); l];

        // Bucket records per stratum once; every replicate of a stratum
        // touches exactly its members.
        let mut stratum_members: Vec<Vec<u32>> = vec![Vec::new(); groups.design.strata];
        for idx in 0..frame.len() {
            stratum_members[groups.stratum_of[idx] as usize].push(idx as u32);
        }

        for k in 0..l {
            let stratum = groups.stratum_of_replicate(k) as usize;
            for &idx in &stratum_members[stratum] {
                let rec = frame.record(idx as usize);
                let w0 = rec.initial_weight;
                if w0 < 1.0 {
                    return Err(ReplicateError::WeightBelowOne {
                        person_id: rec.person_id,
                        weight: w0,
                    });
                }
                let delta = 1.0 - ((1.0 - 1.0 / w0) * (g - 1.0) / g).sqrt();
                let factor = if groups.group_of[idx as usize] as usize == k {
                    delta
                } else {
                    1.0 + (1.0 - delta) / (g - 1.0)
                };
                if factor != 1.0 {
                    touched[k].push((idx, factor));
                }
            }
        }

        Ok(ReplicateSet {
            scheme: ReplicateScheme::DeltaGrouped,
            c: vec![1.0; l],
            touched,
            group_of: groups.group_of.clone(),
            deleted_group: (0..l as u32).collect(),
        })
    }

    /// Classical delete-one jackknife over records: replicate `k` zeroes
    /// record `k` and rescales the rest by `n/(n-1)`. Each record is its
    /// own group.
    pub fn delete_one(frame: &Frame) -> Result<Self, ReplicateError> {
        let n = frame.len();
        if n < 2 {
            return Err(ReplicateError::TooFewRecords { found: n });
        }
        let lift = n as f64 / (n - 1) as f64;
        let touched = (0..n)
            .map(|k| {
                (0..n as u32)
                    .map(|i| (i, if i as usize == k { 0.0 } else { lift }))
                    .collect()
            })
            .collect();
        Ok(ReplicateSet {
            scheme: ReplicateScheme::DeleteOne,
            c: vec![(n - 1) as f64 / n as f64; n],
            touched,
            group_of: (0..n as u32).collect(),
            deleted_group: (0..n as u32).collect(),
        })
    }

    pub fn scheme(&self) -> ReplicateScheme {
        self.scheme
    }

    /// Number of replicates.
    pub fn len(&self) -> usize {
        self.touched.len()
    }

    pub fn is_empty(&self) -> bool {
        self.touched.is_empty()
    }

    /// Combination coefficient of replicate `k`.
    pub fn c(&self, k: usize) -> f64 {
        self.c[k]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// Group label of a record (its deletion unit).
    pub fn group_of(&self, record: usize) -> u32 {
        self.group_of[record]
    }

    /// Group deleted by replicate `k`.
    pub fn deleted_group(&self, k: usize) -> u32 {
        self.deleted_group[k]
    }

    /// True when replicate `k` deletes `record`'s group.
    pub fn deletes(&self, k: usize, record: usize) -> bool {
        self.group_of[record] == self.deleted_group[k]
    }

    /// `(record, factor)` pairs with factor != 1 in replicate `k`.
    pub fn touched(&self, k: usize) -> &[(u32, f64)] {
        &self.touched[k]
    }

    /// Materializes the replicate-`k` weight column from base weights.
    pub fn weight_column(&self, k: usize, base: &[f64]) -> Vec<f64> {
        let mut column = base.to_vec();
        for &(idx, factor) in &self.touched[k] {
            column[idx as usize] = base[idx as usize] * factor;
        }
        column
    }
}

/// Reference point the squared replicate deviations are taken from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Center {
    /// Deviations from the full-sample estimate.
    Estimate(f64),
    /// Deviations from the mean of the replicate estimates.
    ReplicateMean,
}

/// Combines replicate estimates into a variance:
/// `sum_k c_k (theta_k - center)^2`.
pub fn jackknife_variance(replicate_estimates: &[f64], c: &[f64], center: Center) -> f64 {
    assert_eq!(
        replicate_estimates.len(),
        c.len(),
        "one combination coefficient per replicate"
    );
    let center = match center {
        Center::Estimate(theta) => theta,
        Center::ReplicateMean => {
            replicate_estimates.iter().sum::<f64>() / replicate_estimates.len() as f64
        }
    };
    replicate_estimates
        .iter()
        .zip(c)
        .map(|(&est, &ck)| ck * (est - center) * (est - center))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::PersonRecord;

    fn uniform_frame(n: u64, w0: f64) -> Frame {
        let records = (1..=n)
            .map(|id| PersonRecord {
                person_id: id,
                family_id: id,
                household_id: id,
                is_householder: true,
                age: 40,
                stratum_id: 0,
                county_id: 0,
                initial_weight: w0,
                final_weight: w0,
                covariates: vec![],
                incomes: vec![Some(id as f64)],
            })
            .collect();
        Frame::new(records, vec![], 1)
    }

    #[test]
    fn delta_factor_hand_values() {
        // w0 = 2, G = 2: delta = 1 - sqrt((1 - 1/2)/2) = 1/2, retained 3/2.
        let frame = uniform_frame(4, 2.0);
        let groups = assign_variance_groups(
            &frame,
            GroupDesign {
                strata: 1,
                groups_per_stratum: 2,
            },
        )
        .unwrap();
        let reps = ReplicateSet::delta_grouped(&frame, &groups).unwrap();
        assert_eq!(reps.len(), 2);
        let col = reps.weight_column(0, &frame.final_weights());
        for idx in 0..4 {
            let expected = if reps.deletes(0, idx) { 1.0 } else { 3.0 };
            assert!((col[idx] - expected).abs() < 1e-15, "record {idx}");
        }
    }

    #[test]
    fn delta_deviations_reproduce_w_squared_minus_w() {
        // For any w0 >= 1 the squared deviations of a member's weight over
        // all replicates sum to w0^2 - w0 under c_k = 1.
        for &w0 in &[1.0, 1.7, 2.0, 5.0, 12.3] {
            let frame = uniform_frame(6, w0);
            let groups = assign_variance_groups(
                &frame,
                GroupDesign {
                    strata: 1,
                    groups_per_stratum: 2,
                },
            )
            .unwrap();
            let reps = ReplicateSet::delta_grouped(&frame, &groups).unwrap();
            let base = frame.final_weights();
            let idx = 0usize;
            let sum: f64 = (0..reps.len())
                .map(|k| {
                    let col = reps.weight_column(k, &base);
                    reps.c(k) * (col[idx] - base[idx]).powi(2)
                })
                .sum();
            let expected = w0 * w0 - w0;
            assert!(
                (sum - expected).abs() <= 1e-12 * expected.max(1.0),
                "w0 = {w0}: {sum} vs {expected}"
            );
        }
    }

    #[test]
    fn delta_preserves_stratum_totals() {
        let frame = uniform_frame(8, 3.0);
        let groups = assign_variance_groups(
            &frame,
            GroupDesign {
                strata: 2,
                groups_per_stratum: 2,
            },
        )
        .unwrap();
        let reps = ReplicateSet::delta_grouped(&frame, &groups).unwrap();
        let base = frame.final_weights();
        let total: f64 = base.iter().sum();
        for k in 0..reps.len() {
            let col = reps.weight_column(k, &base);
            let rep_total: f64 = col.iter().sum();
            assert!((rep_total - total).abs() < 1e-12 * total);
        }
    }

    #[test]
    fn weight_one_member_is_untouched() {
        // w0 = 1 gives delta = 1: a self-representing record contributes no
        // replicate variation.
        let frame = uniform_frame(4, 1.0);
        let groups = assign_variance_groups(
            &frame,
            GroupDesign {
                strata: 1,
                groups_per_stratum: 2,
            },
        )
        .unwrap();
        let reps = ReplicateSet::delta_grouped(&frame, &groups).unwrap();
        for k in 0..reps.len() {
            assert!(reps.touched(k).is_empty());
        }
    }

    #[test]
    fn grouped_factors_reject_weights_below_one() {
        let frame = uniform_frame(4, 0.5);
        let groups = assign_variance_groups(
            &frame,
            GroupDesign {
                strata: 1,
                groups_per_stratum: 2,
            },
        )
        .unwrap();
        let err = ReplicateSet::delta_grouped(&frame, &groups).unwrap_err();
        assert!(matches!(err, ReplicateError::WeightBelowOne { .. }));
    }

    #[test]
    fn delete_one_mean_of_four_matches_closed_form() {
        // Delete-one jackknife variance of the mean of {1,2,3,4} with
        // c_k = (n-1)/n is 5/12.
        let frame = uniform_frame(4, 1.0);
        let reps = ReplicateSet::delete_one(&frame).unwrap();
        let values = [1.0, 2.0, 3.0, 4.0];
        let estimates: Vec<f64> = (0..reps.len())
            .map(|k| {
                let kept: Vec<f64> = (0..4).filter(|&i| i != k).map(|i| values[i]).collect();
                kept.iter().sum::<f64>() / kept.len() as f64
            })
            .collect();
        let v = jackknife_variance(&estimates, reps.coefficients(), Center::Estimate(2.5));
        assert!((v - 5.0 / 12.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn replicate_mean_center_matches_direct_computation() {
        let estimates = [1.0, 2.0, 4.0];
        let c = [0.5, 0.5, 0.5];
        let mean = 7.0 / 3.0;
        let direct: f64 = estimates.iter().map(|e| 0.5 * (e - mean) * (e - mean)).sum();
        let v = jackknife_variance(&estimates, &c, Center::ReplicateMean);
        assert!((v - direct).abs() < 1e-12);
    }
}
