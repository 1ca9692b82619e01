//! Variance group construction for the grouped jackknife.
//!
//! Households are ordered by household id, split into `strata` contiguous
//! blocks as evenly as possible, and, inside each block, dealt out to
//! `groups_per_stratum` groups systematically along a serpentine ordering
//! (first half ascending, second half descending). The serpentine pass
//! keeps each group's households spread across the whole block rather than
//! clustered at one end. All members of a household share its group, so
//! deleting a group never splits a household.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::Frame;

/// Grouped jackknife shape: `strata` blocks, each split into
/// `groups_per_stratum` delete-groups, giving
/// `strata * groups_per_stratum` replicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDesign {
    pub strata: usize,
    pub groups_per_stratum: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum GroupError {
    #[error("need at least {needed} households for {strata} strata x {groups} groups, found {found}")]
    NotEnoughHouseholds {
        needed: usize,
        strata: usize,
        groups: usize,
        found: usize,
    },
    #[error("group design must have at least 1 stratum and 2 groups per stratum")]
    DegenerateDesign,
}

/// Per-record variance stratum and group labels. Groups carry global ids
/// `stratum * groups_per_stratum + group`, so the id doubles as the
/// replicate index that deletes the group.
#[derive(Debug, Clone)]
pub struct VarianceGroups {
    pub design: GroupDesign,
    /// Variance stratum per record.
    pub stratum_of: Vec<u32>,
    /// Global group id per record.
    pub group_of: Vec<u32>,
}

impl VarianceGroups {
    pub fn replicate_count(&self) -> usize {
        self.design.strata * self.design.groups_per_stratum
    }

    /// Stratum that replicate `k` perturbs.
    pub fn stratum_of_replicate(&self, k: usize) -> u32 {
        (k / self.design.groups_per_stratum) as u32
    }
}

/// Assigns every record of the frame to a variance stratum and group.
pub fn assign_variance_groups(
    frame: &Frame,
    design: GroupDesign,
) -> Result<VarianceGroups, GroupError> {
    if design.strata == 0 || design.groups_per_stratum < 2 {
        return Err(GroupError::DegenerateDesign);
    }
    let households: Vec<(u64, &[usize])> = frame.households().collect();
    let needed = design.strata * design.groups_per_stratum;
    if households.len() < needed {
        return Err(GroupError::NotEnoughHouseholds {
            needed,
            strata: design.strata,
            groups: design.groups_per_stratum,
            found: households.len(),
        });
    }

    let mut stratum_of = vec![0u32; frame.len()];
    let mut group_of = vec![0u32; frame.len()];

    let base = households.len() / design.strata;
    let extra = households.len() % design.strata;
    let mut start = 0usize;
    for h in 0..design.strata {
        // The first `extra` strata absorb the remainder household each.
        let size = base + usize::from(h < extra);
        let block = &households[start..start + size];
        start += size;

        // Serpentine ordering of the block: ascending over the first half,
        // then descending over the rest.
        let front = size.div_ceil(2);
        let order = (0..front).chain((front..size).rev());
        for (pos, b) in order.enumerate() {
            let g = (pos % design.groups_per_stratum) as u32;
            let global = h as u32 * design.groups_per_stratum as u32 + g;
            for &member in block[b].1 {
                stratum_of[member] = h as u32;
                group_of[member] = global;
            }
        }
    }

    Ok(VarianceGroups {
        design,
        stratum_of,
        group_of,
    })
}
