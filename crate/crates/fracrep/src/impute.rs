//! Deterministic nearest-neighbour donor search and the fractionally
//! weighted completed-data estimator.
//!
//! Each missing item of a recipient is matched to its `variance_donors`
//! (`M2`) nearest respondents under a blocking + scaled-L1 metric. The
//! first `point_donors` (`M1`) of them carry the point-estimation
//! fractions `1/M1`; all `M2` carry the variance fractions `1/M2`. With
//! the production setting `M1 = 1, M2 = 2`, point estimates use the single
//! nearest donor while the variance machinery sees both donors.
//!
//! The search is fully deterministic: candidates are ranked by distance
//! and ties break on the smaller person id, so re-running an identical
//! frame reproduces the same assignment bit for bit.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Frame, RecordIndex};

/// Donor-distance specification. `blocking` covariates must match exactly
/// (a recipient only considers donors in its own cell); `numeric`
/// covariates contribute `scale * |x_donor - x_recipient|` to the distance.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricConfig {
    #[serde(default)]
    pub blocking: Vec<String>,
    #[serde(default)]
    pub numeric: Vec<NumericComponent>,
}

/// One scaled numeric distance component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumericComponent {
    pub name: String,
    pub scale: f64,
}

/// Donor-search settings: the metric plus the two donor counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImputeConfig {
    pub metric: MetricConfig,
    /// Donors used for point estimation (`M1`).
    pub point_donors: usize,
    /// Donors used for variance estimation (`M2 >= M1`).
    pub variance_donors: usize,
}

#[derive(Debug, Error)]
pub enum ImputeError {
    #[error("metric names unknown covariate '{name}'")]
    UnknownCovariate { name: String },
    #[error("numeric metric component '{name}' has scale {scale}, must be finite and nonnegative")]
    BadScale { name: String, scale: f64 },
    #[error("donor counts point={point} variance={variance} invalid: need 1 <= point <= variance")]
    BadDonorCounts { point: usize, variance: usize },
    #[error(
        "item {item}: recipient person {person_id} has only {available} respondent(s) in its \
         blocking cell, need {needed}"
    )]
    ThinCell {
        item: usize,
        person_id: u64,
        available: usize,
        needed: usize,
    },
}

/// Metric resolved to covariate column indexes.
struct ResolvedMetric {
    block: Vec<usize>,
    numeric: Vec<(usize, f64)>,
}

impl ResolvedMetric {
    fn resolve(frame: &Frame, metric: &MetricConfig) -> Result<Self, ImputeError> {
        let lookup = |name: &str| {
            frame
                .covariate_index(name)
                .ok_or_else(|| ImputeError::UnknownCovariate {
                    name: name.to_string(),
                })
        };
        let block = metric
            .blocking
            .iter()
            .map(|n| lookup(n))
            .collect::<Result<Vec<_>, _>>()?;
        let numeric = metric
            .numeric
            .iter()
            .map(|c| {
                if !(c.scale.is_finite() && c.scale >= 0.0) {
                    return Err(ImputeError::BadScale {
                        name: c.name.clone(),
                        scale: c.scale,
                    });
                }
                lookup(&c.name).map(|idx| (idx, c.scale))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ResolvedMetric { block, numeric })
    }

    /// Blocking cell key; bit patterns are fine because validation rejects
    /// non-finite covariates.
    fn cell_key(&self, frame: &Frame, idx: RecordIndex) -> Vec<u64> {
        let rec = frame.record(idx);
        self.block.iter().map(|&c| rec.covariates[c].to_bits()).collect()
    }

    fn distance(&self, frame: &Frame, a: RecordIndex, b: RecordIndex) -> f64 {
        let ra = frame.record(a);
        let rb = frame.record(b);
        self.numeric
            .iter()
            .map(|&(c, scale)| scale * (ra.covariates[c] - rb.covariates[c]).abs())
            .sum()
    }
}

/// Donor lists for the missing records of one item. Donor lists are stored
/// flat (`variance_donors` entries per recipient, nearest first).
#[derive(Debug, Clone)]
pub struct ItemAssignment {
    item: usize,
    recipients: Vec<u32>,
    donors: Vec<u32>,
    variance_donors: usize,
}

impl ItemAssignment {
    pub fn item(&self) -> usize {
        self.item
    }

    pub fn recipient_count(&self) -> usize {
        self.recipients.len()
    }

    /// Recipient record indexes, ascending.
    pub fn recipients(&self) -> &[u32] {
        &self.recipients
    }

    pub fn recipient(&self, slot: usize) -> RecordIndex {
        self.recipients[slot] as RecordIndex
    }

    /// Donors of the `slot`-th recipient, nearest first.
    pub fn donors(&self, slot: usize) -> &[u32] {
        &self.donors[slot * self.variance_donors..(slot + 1) * self.variance_donors]
    }

    /// Iterates `(slot, recipient record index, donor record indexes)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, RecordIndex, &[u32])> {
        self.recipients
            .iter()
            .enumerate()
            .map(move |(slot, &r)| (slot, r as RecordIndex, self.donors(slot)))
    }
}

/// Complete donor assignment across items, with the shared fraction
/// patterns implied by the two donor counts.
#[derive(Debug, Clone)]
pub struct DonorAssignment {
    point_donors: usize,
    variance_donors: usize,
    items: Vec<ItemAssignment>,
    point_fractions: Vec<f64>,
    variance_fractions: Vec<f64>,
}

/// Which fraction system to weight donors with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FractionSystem {
    /// `1/M1` on the first `M1` donors, zero on the rest.
    Point,
    /// `1/M2` on all `M2` donors.
    Variance,
}

impl DonorAssignment {
    pub fn point_donors(&self) -> usize {
        self.point_donors
    }

    pub fn variance_donors(&self) -> usize {
        self.variance_donors
    }

    pub fn items(&self) -> &[ItemAssignment] {
        &self.items
    }

    pub fn item(&self, item: usize) -> &ItemAssignment {
        &self.items[item]
    }

    /// The base fraction pattern of the requested system, aligned with each
    /// recipient's donor list.
    pub fn fractions(&self, system: FractionSystem) -> &[f64] {
        match system {
            FractionSystem::Point => &self.point_fractions,
            FractionSystem::Variance => &self.variance_fractions,
        }
    }

    /// Imputed value of one recipient under a fraction pattern.
    pub fn blended_value(&self, frame: &Frame, item: usize, slot: usize, fractions: &[f64]) -> f64 {
        let assignment = &self.items[item];
        assignment
            .donors(slot)
            .iter()
            .zip(fractions)
            .map(|(&d, &f)| {
                f * frame.record(d as RecordIndex).incomes[item]
                    .expect("donors are respondents")
            })
            .sum()
    }
}

/// Runs the nearest-neighbour search for every item of the frame.
pub fn find_donors(frame: &Frame, config: &ImputeConfig) -> Result<DonorAssignment, ImputeError> {
    if config.point_donors == 0 || config.point_donors > config.variance_donors {
        return Err(ImputeError::BadDonorCounts {
            point: config.point_donors,
            variance: config.variance_donors,
        });
    }
    let metric = ResolvedMetric::resolve(frame, &config.metric)?;
    let m2 = config.variance_donors;

    let mut items = Vec::with_capacity(frame.item_count());
    for item in 0..frame.item_count() {
        let respondents = frame.respondents(item);
        let recipients = frame.nonrespondents(item);

        // Group respondents by blocking cell once per item.
        let mut cells: HashMap<Vec<u64>, Vec<u32>> = HashMap::new();
        for &r in &respondents {
            cells.entry(metric.cell_key(frame, r)).or_default().push(r as u32);
        }

        // With a single numeric component the cell can be pre-sorted by
        // value, turning each search into a binary search plus an outward
        // walk; otherwise distances are scored candidate by candidate.
        let sorted_cells: Option<HashMap<Vec<u64>, Vec<(f64, u64, u32)>>> =
            (metric.numeric.len() == 1).then(|| {
                let (col, _) = metric.numeric[0];
                cells
                    .iter()
                    .map(|(key, members)| {
                        let mut v: Vec<(f64, u64, u32)> = members
                            .iter()
                            .map(|&i| {
                                let rec = frame.record(i as RecordIndex);
                                (rec.covariates[col], rec.person_id, i)
                            })
                            .collect();
                        v.sort_unstable_by(|a, b| {
                            a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
                        });
                        (key.clone(), v)
                    })
                    .collect()
            });

        let mut donors = Vec::with_capacity(recipients.len() * m2);
        let mut scored: Vec<(f64, u64, u32)> = Vec::new();
        for &j in &recipients {
            let key = metric.cell_key(frame, j);
            let available = cells.get(&key).map_or(0, Vec::len);
            if available < m2 {
                return Err(ImputeError::ThinCell {
                    item,
                    person_id: frame.record(j).person_id,
                    available,
                    needed: m2,
                });
            }
            scored.clear();
            if let Some(sorted) = &sorted_cells {
                let (col, scale) = metric.numeric[0];
                let target = frame.record(j).covariates[col];
                nearest_in_sorted(&sorted[&key], target, scale, m2, &mut scored);
            } else {
                for &cand in &cells[&key] {
                    let d = metric.distance(frame, cand as RecordIndex, j);
                    scored.push((d, frame.record(cand as RecordIndex).person_id, cand));
                }
            }
            scored.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            donors.extend(scored[..m2].iter().map(|&(_, _, idx)| idx));
        }
        items.push(ItemAssignment {
            item,
            recipients: recipients.iter().map(|&r| r as u32).collect(),
            donors,
            variance_donors: m2,
        });
    }

    let m1 = config.point_donors;
    let mut point_fractions = vec![0.0; m2];
    for f in point_fractions.iter_mut().take(m1) {
        *f = 1.0 / m1 as f64;
    }
    Ok(DonorAssignment {
        point_donors: m1,
        variance_donors: m2,
        items,
        point_fractions,
        variance_fractions: vec![1.0 / m2 as f64; m2],
    })
}

/// Pushes into `out` the `m` nearest entries of a `(value, person_id, idx)`
/// list sorted by `(value, person_id)`, plus every entry tied with the
/// m-th distance so the caller's `(distance, person_id)` sort settles ties.
fn nearest_in_sorted(
    sorted: &[(f64, u64, u32)],
    target: f64,
    scale: f64,
    m: usize,
    out: &mut Vec<(f64, u64, u32)>,
) {
    let start = sorted.partition_point(|&(v, _, _)| v < target);
    let mut left = start; // next candidate to the left is left-1
    let mut right = start;
    let dist = |i: usize| scale * (sorted[i].0 - target).abs();
    let mut max_taken = 0.0_f64;
    loop {
        let need_more = out.len() < m;
        let dl = (left > 0).then(|| dist(left - 1));
        let dr = (right < sorted.len()).then(|| dist(right));
        let take_left = match (dl, dr) {
            (Some(a), Some(b)) => a <= b,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        let d = if take_left { dl.unwrap() } else { dr.unwrap() };
        if !need_more && d > max_taken {
            break;
        }
        let entry = if take_left {
            left -= 1;
            sorted[left]
        } else {
            right += 1;
            sorted[right - 1]
        };
        out.push((d, entry.1, entry.2));
        max_taken = max_taken.max(d);
    }
}

/// A fractionally completed total and its donor-side re-expression.
#[derive(Debug, Clone)]
pub struct ImputedTotal {
    /// The estimate computed recipient-side: `sum_j w_j * y_completed_j`.
    pub total: f64,
    /// The same quantity accumulated donor-side as `sum_i load_i * y_i`;
    /// agreement of the two routes is a correctness check on the fractions.
    pub donor_side_total: f64,
    /// Completed value per record (observed value, or the donor blend).
    pub completed: Vec<f64>,
    /// Total weight each respondent's observed value carries: its own
    /// weight plus the fractional inflow from recipients it donates to.
    /// Zero for nonrespondents.
    pub donor_load: Vec<f64>,
}

/// Evaluates the fractionally weighted total for one item. `weights` is
/// any weight vector aligned with record order (production or replicate).
pub fn imputed_total(
    frame: &Frame,
    assignment: &DonorAssignment,
    item: usize,
    weights: &[f64],
    system: FractionSystem,
) -> ImputedTotal {
    assert_eq!(weights.len(), frame.len(), "weight vector arity mismatch");
    let fractions = assignment.fractions(system);
    let mut completed = vec![0.0; frame.len()];
    let mut donor_load = vec![0.0; frame.len()];

    for (idx, rec) in frame.records().iter().enumerate() {
        if let Some(y) = rec.incomes[item] {
            completed[idx] = y;
            donor_load[idx] = weights[idx];
        }
    }
    for (_, recipient, donors) in assignment.item(item).iter() {
        let mut blend = 0.0;
        for (&d, &f) in donors.iter().zip(fractions) {
            let di = d as RecordIndex;
            blend += f * frame.record(di).incomes[item].expect("donors are respondents");
            donor_load[di] += f * weights[recipient];
        }
        completed[recipient] = blend;
    }

    let total = completed
        .iter()
        .zip(weights)
        .map(|(y, w)| w * y)
        .sum();
    let donor_side_total = frame
        .records()
        .iter()
        .enumerate()
        .map(|(idx, rec)| match rec.incomes[item] {
            Some(y) => donor_load[idx] * y,
            None => 0.0,
        })
        .sum();
    ImputedTotal {
        total,
        donor_side_total,
        completed,
        donor_load,
    }
}
