//! Replicate adjustment of donor fractions.
//!
//! Deleting a variance group removes weight from every estimate that
//! leaned on the group's members, but a deleted *donor* keeps feeding its
//! observed value into recipients through the base fractions. Left alone,
//! that understates the imputation component of variance. The fix: in the
//! replicate that deletes donor `i`, shrink `i`'s fractions on its
//! recipients by a factor `(1 - b)` and hand the lost mass to each
//! recipient's retained donors in proportion to their variance fractions,
//! choosing `b` so that the squared replicate deviations of the donor
//! loads reproduce what the deleted donors' loads require:
//!
//! ```text
//! sum_k c_k (load_i(k) - load_i)^2  =  load_i^2 - load_i
//! ```
//!
//! accumulated over each co-donation component. Writing the adjusted
//! deviation of an affected element `x` in replicate `k` as
//! `dev1_x + s_x * b` (naive deviation plus a slope times the shift), the
//! requirement becomes one quadratic per replicate and component:
//!
//! ```text
//! (c_k * sum_x s_x^2) b^2 + (2 c_k * sum_x dev1_x s_x) b = sum_i target_i
//! ```
//!
//! with `target_i = load_i^2 - load_i - naive_sq_dev_i` summed over the
//! component's deleted donors. The root of smaller magnitude is used.
//! Components are connected components of the co-donation graph (donors
//! that ever share a recipient), the finest partition on which the
//! requirement can close: a shift on one donor spills onto every co-donor
//! of its recipients, so all of them must be balanced jointly.
//!
//! Degenerate cases are flagged rather than papered over: a deleted donor
//! whose recipients all sit in its own group has nothing to shift
//! (*stranded*); a recipient whose variance donors are all deleted keeps
//! its base fractions (*shielded*); a negative discriminant clamps the
//! shift at the quadratic's extremum; a cluster with no usable slope but a
//! nonzero target is unadjustable.

use std::collections::BTreeMap;

use crate::frame::Frame;
use crate::impute::{DonorAssignment, FractionSystem};

use super::ReplicateSet;

/// Map from records to co-donation components for one item. Donors that
/// ever appear in the same donor list share a component.
#[derive(Debug, Clone)]
pub struct ComponentMap {
    comp_of: Vec<u32>,
    count: usize,
}

const NO_COMPONENT: u32 = u32::MAX;

impl ComponentMap {
    /// Component of a record, when it appears in some donor list.
    pub fn component_of(&self, record: usize) -> Option<u32> {
        match self.comp_of[record] {
            NO_COMPONENT => None,
            c => Some(c),
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Record indexes per component, each ascending.
    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.count];
        for (record, &c) in self.comp_of.iter().enumerate() {
            if c != NO_COMPONENT {
                out[c as usize].push(record as u32);
            }
        }
        out
    }
}

/// Builds the co-donation components of one item's donor lists.
pub fn co_donation_components(frame: &Frame, assignment: &DonorAssignment, item: usize) -> ComponentMap {
    let n = frame.len();
    let mut parent: Vec<u32> = (0..n as u32).collect();

    fn find(parent: &mut [u32], x: u32) -> u32 {
        let mut root = x;
        while parent[root as usize] != root {
            root = parent[root as usize];
        }
        let mut cur = x;
        while parent[cur as usize] != root {
            let next = parent[cur as usize];
            parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    let mut in_graph = vec![false; n];
    for (_, _, donors) in assignment.item(item).iter() {
        for &d in donors {
            in_graph[d as usize] = true;
        }
        for pair in donors.windows(2) {
            let a = find(&mut parent, pair[0]);
            let b = find(&mut parent, pair[1]);
            if a != b {
                parent[a as usize] = b;
            }
        }
    }

    // Dense component ids in order of first appearance.
    let mut comp_of = vec![NO_COMPONENT; n];
    let mut next = 0u32;
    let mut root_to_comp: BTreeMap<u32, u32> = BTreeMap::new();
    for record in 0..n {
        if in_graph[record] {
            let root = find(&mut parent, record as u32);
            let comp = *root_to_comp.entry(root).or_insert_with(|| {
                let c = next;
                next += 1;
                c
            });
            comp_of[record] = comp;
        }
    }
    ComponentMap {
        comp_of,
        count: next as usize,
    }
}

/// Full-sample donor loads and their naive squared replicate deviations
/// for one item, in the point-fraction system.
///
/// The *load* of a respondent is the total weight its observed value
/// carries in the estimator: its own weight plus the weighted fractions
/// flowing in from recipients it point-donates to.
#[derive(Debug, Clone)]
pub struct DonorLoads {
    pub item: usize,
    /// Load per record; zero for records outside the item's donor lists.
    pub full: Vec<f64>,
    /// `sum_k c_k (load^(k) - load)^2` per record, with base fractions in
    /// every replicate.
    pub naive_sq_dev: Vec<f64>,
    /// Records appearing in some variance-donor list, ascending.
    pub tracked: Vec<u32>,
}

/// Incidence lists: for each record `e`, the `(donor, point_fraction)`
/// pairs through which `e`'s weight enters a donor load — the donor's own
/// self term plus the recipients it point-donates to.
struct TouchMap {
    lists: Vec<Vec<(u32, f64)>>,
}

fn build_touch_map(frame: &Frame, assignment: &DonorAssignment, item: usize) -> (TouchMap, Vec<u32>) {
    let n = frame.len();
    let mut tracked_flag = vec![false; n];
    for (_, _, donors) in assignment.item(item).iter() {
        for &d in donors {
            tracked_flag[d as usize] = true;
        }
    }
    let mut lists: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (record, &flag) in tracked_flag.iter().enumerate() {
        if flag {
            lists[record].push((record as u32, 1.0));
        }
    }
    let point = assignment.fractions(FractionSystem::Point);
    for (_, recipient, donors) in assignment.item(item).iter() {
        for (&d, &f) in donors.iter().zip(point) {
            if f > 0.0 {
                lists[recipient].push((d, f));
            }
        }
    }
    let tracked = tracked_flag
        .iter()
        .enumerate()
        .filter_map(|(i, &t)| t.then_some(i as u32))
        .collect();
    (TouchMap { lists }, tracked)
}

/// Sparse per-replicate deviation sweep shared by the load computation and
/// the adjustment solver.
struct DevScratch {
    dev: Vec<f64>,
    seen: Vec<bool>,
    stack: Vec<u32>,
}

impl DevScratch {
    fn new(n: usize) -> Self {
        DevScratch {
            dev: vec![0.0; n],
            seen: vec![false; n],
            stack: Vec::new(),
        }
    }

    /// Accumulates the naive load deviations of replicate `k` into `dev`
    /// for every donor the replicate touches.
    fn sweep(&mut self, touch: &TouchMap, reps: &ReplicateSet, weights: &[f64], k: usize) {
        for &(e, factor) in reps.touched(k) {
            let dw = (factor - 1.0) * weights[e as usize];
            for &(donor, fraction) in &touch.lists[e as usize] {
                if !self.seen[donor as usize] {
                    self.seen[donor as usize] = true;
                    self.stack.push(donor);
                }
                self.dev[donor as usize] += dw * fraction;
            }
        }
    }

    fn reset(&mut self) {
        for &d in &self.stack {
            self.dev[d as usize] = 0.0;
            self.seen[d as usize] = false;
        }
        self.stack.clear();
    }
}

/// Computes donor loads and their naive squared replicate deviations.
pub fn donor_loads(
    frame: &Frame,
    assignment: &DonorAssignment,
    item: usize,
    weights: &[f64],
    reps: &ReplicateSet,
) -> DonorLoads {
    let (touch, tracked) = build_touch_map(frame, assignment, item);
    let n = frame.len();

    let mut full = vec![0.0; n];
    for &d in &tracked {
        full[d as usize] = weights[d as usize];
    }
    let point = assignment.fractions(FractionSystem::Point);
    for (_, recipient, donors) in assignment.item(item).iter() {
        for (&d, &f) in donors.iter().zip(point) {
            full[d as usize] += f * weights[recipient];
        }
    }

    let mut naive_sq_dev = vec![0.0; n];
    let mut scratch = DevScratch::new(n);
    for k in 0..reps.len() {
        scratch.sweep(&touch, reps, weights, k);
        let ck = reps.c(k);
        for &d in &scratch.stack {
            let dev = scratch.dev[d as usize];
            naive_sq_dev[d as usize] += ck * dev * dev;
        }
        scratch.reset();
    }

    DonorLoads {
        item,
        full,
        naive_sq_dev,
        tracked,
    }
}

/// Why a cluster's quadratic could not be solved exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveFlag {
    /// Discriminant was negative; the shift sits at the quadratic's
    /// extremum and part of the target is left on the table.
    ClampedNegativeDiscriminant,
    /// No recipient offered any usable slope while the target was nonzero.
    Unadjustable,
}

/// One solved (replicate, component) cluster.
#[derive(Debug, Clone)]
pub struct ClusterSolution {
    pub replicate: u32,
    pub component: u32,
    /// Deleted donors whose targets this cluster transfers, ascending.
    pub donors: Vec<u32>,
    /// The fraction shift `b`.
    pub shift: f64,
    /// Quadratic coefficient `c_k * sum_x s_x^2`.
    pub quad: f64,
    /// Linear coefficient `2 c_k * sum_x dev1_x s_x`.
    pub lin: f64,
    /// Target `sum_i (load_i^2 - load_i - naive_sq_dev_i)`.
    pub target: f64,
    pub flag: Option<SolveFlag>,
    /// `|quad * b^2 + lin * b - target|` at the returned shift.
    pub residual: f64,
}

/// Structural exceptions encountered while adjusting.
#[derive(Debug, Clone, Default)]
pub struct AdjustDiagnostics {
    /// Point donors whose recipients all share the donor's own variance
    /// group; their deletion replicate has nowhere to move fraction mass.
    pub stranded_donors: Vec<u32>,
    /// `(replicate, recipient slot)` pairs left at base fractions because
    /// every variance donor of the recipient sits in the deleted group.
    pub shielded_recipients: Vec<(u32, u32)>,
    pub clamped_clusters: usize,
    pub unadjustable_clusters: usize,
    /// Largest quadratic residual over unflagged clusters (float noise).
    pub max_solve_residual: f64,
}

/// Adjusted fraction rows for one replicate, sorted by recipient slot.
#[derive(Debug, Clone, Default)]
struct ReplicateOverrides {
    slots: Vec<u32>,
    rows: Vec<f64>,
}

/// Per-replicate donor fraction overrides for one item, plus the solve
/// audit trail. Recipients without an override use the base point
/// fractions in every replicate.
#[derive(Debug, Clone)]
pub struct FractionAdjustment {
    item: usize,
    row_len: usize,
    overrides: Vec<ReplicateOverrides>,
    pub solutions: Vec<ClusterSolution>,
    pub diagnostics: AdjustDiagnostics,
}

impl FractionAdjustment {
    pub fn item(&self) -> usize {
        self.item
    }

    /// The adjusted fraction row of a recipient in replicate `k`, if any.
    pub fn fractions_for(&self, k: usize, slot: usize) -> Option<&[f64]> {
        let ovr = &self.overrides[k];
        ovr.slots
            .binary_search(&(slot as u32))
            .ok()
            .map(|pos| &ovr.rows[pos * self.row_len..(pos + 1) * self.row_len])
    }

    /// Iterates `(recipient slot, fraction row)` overrides of replicate `k`.
    pub fn overrides(&self, k: usize) -> impl Iterator<Item = (usize, &[f64])> {
        let ovr = &self.overrides[k];
        ovr.slots
            .iter()
            .enumerate()
            .map(move |(pos, &slot)| (slot as usize, &ovr.rows[pos * self.row_len..(pos + 1) * self.row_len]))
    }

    pub fn override_count(&self, k: usize) -> usize {
        self.overrides[k].slots.len()
    }
}

/// Solves the per-replicate quadratic `quad * b^2 + lin * b = target` for
/// the shift of smallest magnitude, flagging degenerate cases.
fn solve_shift(quad: f64, lin: f64, target: f64) -> (f64, Option<SolveFlag>, f64) {
    let residual_at = |b: f64| (quad * b * b + lin * b - target).abs();
    if quad == 0.0 {
        if lin == 0.0 {
            return if target.abs() == 0.0 {
                (0.0, None, 0.0)
            } else {
                (0.0, Some(SolveFlag::Unadjustable), target.abs())
            };
        }
        let b = target / lin;
        return (b, None, residual_at(b));
    }
    let disc = lin * lin + 4.0 * quad * target;
    if disc < 0.0 {
        let b = -lin / (2.0 * quad);
        return (b, Some(SolveFlag::ClampedNegativeDiscriminant), residual_at(b));
    }
    // Stable root pair: q = -(lin + sign(lin) sqrt(disc)) / 2, roots q/quad
    // and -target/q. With lin = 0 either sign works.
    let sign = if lin >= 0.0 { 1.0 } else { -1.0 };
    let q = -(lin + sign * disc.sqrt()) / 2.0;
    let candidates = if q == 0.0 {
        // lin = 0 and quad * target <= 0; the roots are symmetric.
        let r = (disc).sqrt() / (2.0 * quad);
        [r, -r]
    } else {
        [q / quad, -target / q]
    };
    let b = if candidates[0].abs() <= candidates[1].abs() {
        candidates[0]
    } else {
        candidates[1]
    };
    (b, None, residual_at(b))
}

/// Runs the full adjustment for one item: identifies the deleted donors of
/// every replicate, solves each (replicate, component) cluster, and
/// materializes the adjusted fraction rows.
///
/// `weights` is the weight vector the replicate columns scale from (the
/// production weights at this stage of the pipeline).
pub fn adjust_fractions(
    frame: &Frame,
    assignment: &DonorAssignment,
    item: usize,
    weights: &[f64],
    reps: &ReplicateSet,
) -> FractionAdjustment {
    let n = frame.len();
    let m2 = assignment.variance_donors();
    let item_assignment = assignment.item(item);
    let point = assignment.fractions(FractionSystem::Point);
    let variance = assignment.fractions(FractionSystem::Variance);

    let loads = donor_loads(frame, assignment, item, weights, reps);
    let components = co_donation_components(frame, assignment, item);
    let (touch, _) = build_touch_map(frame, assignment, item);

    // Point-donor incidence: recipient slots each donor feeds, and donor
    // lists bucketed by variance group for per-replicate candidate lookup.
    let mut point_slots: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (slot, _, donors) in item_assignment.iter() {
        for (&d, &f) in donors.iter().zip(point) {
            if f > 0.0 {
                point_slots[d as usize].push(slot as u32);
            }
        }
    }
    let mut donors_by_group: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for record in 0..n {
        if !point_slots[record].is_empty() {
            donors_by_group
                .entry(reps.group_of(record))
                .or_default()
                .push(record as u32);
        }
    }

    let mut scratch = DevScratch::new(n);
    let mut factor = vec![1.0; n];
    let mut in_deleted_p = vec![false; n];
    let mut slope = vec![0.0; n];
    let mut slope_seen = vec![false; n];
    let mut slot_seen = vec![false; item_assignment.recipient_count()];

    let mut overrides: Vec<ReplicateOverrides> = vec![ReplicateOverrides::default(); reps.len()];
    let mut solutions = Vec::new();
    let mut diagnostics = AdjustDiagnostics::default();

    for k in 0..reps.len() {
        let deleted_group = reps.deleted_group(k);
        let Some(candidates) = donors_by_group.get(&deleted_group) else {
            continue;
        };

        // Deleted donors qualify only with at least one recipient outside
        // the deleted group; the rest are stranded (their own group's
        // deletion already removes the recipient along with them).
        let mut deleted_donors: Vec<u32> = Vec::new();
        for &i in candidates {
            let cross = point_slots[i as usize].iter().any(|&slot| {
                reps.group_of(item_assignment.recipient(slot as usize)) != deleted_group
            });
            if cross {
                in_deleted_p[i as usize] = true;
                deleted_donors.push(i);
            } else {
                diagnostics.stranded_donors.push(i);
            }
        }
        if deleted_donors.is_empty() {
            continue;
        }

        for &(e, f) in reps.touched(k) {
            factor[e as usize] = f;
        }
        scratch.sweep(&touch, reps, weights, k);

        // Group the affected recipients into (component) clusters. Every
        // deleted donor of a recipient shares the recipient's component, so
        // each recipient lands in exactly one cluster.
        struct AdjRecipient {
            slot: u32,
            replicate_weight: f64,
            /// Deleted fraction mass divided by retained variance mass:
            /// the per-unit-shift compensation each retained donor gets.
            compensation: f64,
        }
        struct Cluster {
            donors: Vec<u32>,
            recipients: Vec<AdjRecipient>,
        }
        let mut clusters: BTreeMap<u32, Cluster> = BTreeMap::new();
        for &i in &deleted_donors {
            let comp = components
                .component_of(i as usize)
                .expect("point donors are in the co-donation graph");
            let cluster = clusters.entry(comp).or_insert_with(|| Cluster {
                donors: Vec::new(),
                recipients: Vec::new(),
            });
            cluster.donors.push(i);
            for &slot in &point_slots[i as usize] {
                if slot_seen[slot as usize] {
                    continue;
                }
                slot_seen[slot as usize] = true;
                let donors = item_assignment.donors(slot as usize);
                let mut reduce_mass = 0.0;
                let mut retained_mass = 0.0;
                for (pos, &d) in donors.iter().enumerate() {
                    if in_deleted_p[d as usize] {
                        reduce_mass += point[pos];
                    }
                    if reps.group_of(d as usize) != deleted_group {
                        retained_mass += variance[pos];
                    }
                }
                if retained_mass == 0.0 {
                    diagnostics.shielded_recipients.push((k as u32, slot));
                    continue;
                }
                let recipient = item_assignment.recipient(slot as usize);
                cluster.recipients.push(AdjRecipient {
                    slot,
                    replicate_weight: factor[recipient] * weights[recipient],
                    compensation: reduce_mass / retained_mass,
                });
            }
        }

        for (comp, cluster) in &clusters {
            // Slopes: d(load_x)/d(shift) over the cluster's recipients.
            let mut slope_stack: Vec<u32> = Vec::new();
            for adj in &cluster.recipients {
                let donors = item_assignment.donors(adj.slot as usize);
                for (pos, &d) in donors.iter().enumerate() {
                    let s = if in_deleted_p[d as usize] {
                        -point[pos]
                    } else if reps.group_of(d as usize) != deleted_group {
                        adj.compensation * variance[pos]
                    } else {
                        continue;
                    };
                    if s != 0.0 {
                        if !slope_seen[d as usize] {
                            slope_seen[d as usize] = true;
                            slope_stack.push(d);
                        }
                        slope[d as usize] += adj.replicate_weight * s;
                    }
                }
            }

            let ck = reps.c(k);
            let mut quad = 0.0;
            let mut lin = 0.0;
            for &d in &slope_stack {
                let s = slope[d as usize];
                quad += ck * s * s;
                lin += 2.0 * ck * scratch.dev[d as usize] * s;
            }
            let target: f64 = cluster
                .donors
                .iter()
                .map(|&i| {
                    let load = loads.full[i as usize];
                    load * load - load - loads.naive_sq_dev[i as usize]
                })
                .sum();

            let (shift, flag, residual) = solve_shift(quad, lin, target);
            match flag {
                Some(SolveFlag::ClampedNegativeDiscriminant) => diagnostics.clamped_clusters += 1,
                Some(SolveFlag::Unadjustable) => diagnostics.unadjustable_clusters += 1,
                None => {
                    diagnostics.max_solve_residual = diagnostics.max_solve_residual.max(residual);
                }
            }

            // Materialize the adjusted rows of this cluster's recipients.
            let out = &mut overrides[k];
            for adj in &cluster.recipients {
                let donors = item_assignment.donors(adj.slot as usize);
                out.slots.push(adj.slot);
                for (pos, &d) in donors.iter().enumerate() {
                    let f = if in_deleted_p[d as usize] {
                        point[pos] * (1.0 - shift)
                    } else if reps.group_of(d as usize) != deleted_group {
                        point[pos] + shift * adj.compensation * variance[pos]
                    } else {
                        point[pos]
                    };
                    out.rows.push(f);
                }
            }

            solutions.push(ClusterSolution {
                replicate: k as u32,
                component: *comp,
                donors: cluster.donors.clone(),
                shift,
                quad,
                lin,
                target,
                flag,
                residual,
            });

            for d in slope_stack {
                slope[d as usize] = 0.0;
                slope_seen[d as usize] = false;
            }
        }

        // Reset per-replicate scratch.
        for &(e, _) in reps.touched(k) {
            factor[e as usize] = 1.0;
        }
        for &i in &deleted_donors {
            in_deleted_p[i as usize] = false;
        }
        for (_, cluster) in clusters {
            for adj in cluster.recipients {
                slot_seen[adj.slot as usize] = false;
            }
        }
        scratch.reset();
    }

    // Slots were pushed cluster by cluster; order them for binary search.
    for ovr in &mut overrides {
        let mut order: Vec<usize> = (0..ovr.slots.len()).collect();
        order.sort_unstable_by_key(|&pos| ovr.slots[pos]);
        let slots = order.iter().map(|&pos| ovr.slots[pos]).collect();
        let mut rows = Vec::with_capacity(ovr.rows.len());
        for &pos in &order {
            rows.extend_from_slice(&ovr.rows[pos * m2..(pos + 1) * m2]);
        }
        ovr.slots = slots;
        ovr.rows = rows;
    }
    diagnostics.stranded_donors.sort_unstable();
    diagnostics.stranded_donors.dedup();

    FractionAdjustment {
        item,
        row_len: m2,
        overrides,
        solutions,
        diagnostics,
    }
}
