//! Survey microdata frame: person records, household and family structure,
//! poverty thresholds, and the structural validation that runs before any
//! estimation stage.
//!
//! The frame is immutable once built. Weight vectors produced by later
//! stages (calibration, replication) live outside the frame and are indexed
//! by record position, so concurrent stages can share a `&Frame` freely.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Position of a record inside [`Frame::records`].
pub type RecordIndex = usize;

/// One person row of the microdata.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonRecord {
    pub person_id: u64,
    pub family_id: u64,
    pub household_id: u64,
    /// Exactly one member of each household is its reference person.
    pub is_householder: bool,
    pub age: u32,
    /// Sampling stratum label carried through from the design.
    pub stratum_id: u32,
    /// Domain label used for domain (small-area) estimates.
    pub county_id: u32,
    /// Initial design weight, before any calibration.
    pub initial_weight: f64,
    /// Production weight used in estimation; equals `initial_weight` until
    /// a calibration stage replaces it.
    pub final_weight: f64,
    /// Auxiliary variables available to the donor-distance metric and to
    /// calibration; order matches [`Frame::covariate_names`].
    pub covariates: Vec<f64>,
    /// Income items; `None` marks an item nonresponse awaiting imputation.
    pub incomes: Vec<Option<f64>>,
}

impl PersonRecord {
    /// True when item `item` needs a donor.
    pub fn is_missing(&self, item: usize) -> bool {
        self.incomes[item].is_none()
    }
}

/// An immutable collection of person records plus the household/family
/// indexes derived from them.
#[derive(Debug, Clone)]
pub struct Frame {
    records: Vec<PersonRecord>,
    covariate_names: Vec<String>,
    item_count: usize,
    /// household id -> member record indexes, in input order.
    households: BTreeMap<u64, Vec<RecordIndex>>,
    /// family id -> member record indexes, in input order.
    families: BTreeMap<u64, Vec<RecordIndex>>,
    /// household id -> index of its reference person, when unique.
    householders: BTreeMap<u64, RecordIndex>,
}

impl Frame {
    /// Builds a frame and its structural indexes. Construction itself never
    /// fails on substantive grounds; run [`Frame::validate`] to collect
    /// violations before estimating.
    ///
    /// # Panics
    ///
    /// Panics if a record's covariate or income vector length disagrees
    /// with `covariate_names` / `item_count`; that is a programming error,
    /// not a data error.
    pub fn new(
        records: Vec<PersonRecord>,
        covariate_names: Vec<String>,
        item_count: usize,
    ) -> Self {
        let mut households: BTreeMap<u64, Vec<RecordIndex>> = BTreeMap::new();
        let mut families: BTreeMap<u64, Vec<RecordIndex>> = BTreeMap::new();
        let mut householders = BTreeMap::new();
        for (idx, rec) in records.iter().enumerate() {
            assert_eq!(
                rec.covariates.len(),
                covariate_names.len(),
                "record {} covariate arity mismatch",
                rec.person_id
            );
            assert_eq!(
                rec.incomes.len(),
                item_count,
                "record {} income arity mismatch",
                rec.person_id
            );
            households.entry(rec.household_id).or_default().push(idx);
            families.entry(rec.family_id).or_default().push(idx);
            if rec.is_householder {
                // First one wins; validation reports duplicates.
                householders.entry(rec.household_id).or_insert(idx);
            }
        }
        Frame {
            records,
            covariate_names,
            item_count,
            households,
            families,
            householders,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PersonRecord] {
        &self.records
    }

    pub fn record(&self, idx: RecordIndex) -> &PersonRecord {
        &self.records[idx]
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Index of a covariate column by name.
    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    /// Households in ascending household-id order.
    pub fn households(&self) -> impl Iterator<Item = (u64, &[RecordIndex])> {
        self.households.iter().map(|(id, v)| (*id, v.as_slice()))
    }

    pub fn household_count(&self) -> usize {
        self.households.len()
    }

    pub fn household_members(&self, household_id: u64) -> &[RecordIndex] {
        self.households
            .get(&household_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Families in ascending family-id order.
    pub fn families(&self) -> impl Iterator<Item = (u64, &[RecordIndex])> {
        self.families.iter().map(|(id, v)| (*id, v.as_slice()))
    }

    pub fn family_count(&self) -> usize {
        self.families.len()
    }

    /// The reference person of a household, when the household has exactly
    /// one (guaranteed after a clean [`Frame::validate`]).
    pub fn householder(&self, household_id: u64) -> Option<RecordIndex> {
        self.householders.get(&household_id).copied()
    }

    /// Record indexes of respondents to `item`, in record order.
    pub fn respondents(&self, item: usize) -> Vec<RecordIndex> {
        (0..self.records.len())
            .filter(|&i| self.records[i].incomes[item].is_some())
            .collect()
    }

    /// Record indexes of nonrespondents to `item`, in record order.
    pub fn nonrespondents(&self, item: usize) -> Vec<RecordIndex> {
        (0..self.records.len())
            .filter(|&i| self.records[i].incomes[item].is_none())
            .collect()
    }

    /// Production weights as a dense vector aligned with record order.
    pub fn final_weights(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.final_weight).collect()
    }

    /// Initial design weights as a dense vector aligned with record order.
    pub fn initial_weights(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.initial_weight).collect()
    }

    /// Structural checks every stage relies on. Returns all violations
    /// found rather than stopping at the first, so a data fix can be done
    /// in one pass.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();

        let mut seen_ids: BTreeMap<u64, RecordIndex> = BTreeMap::new();
        for (idx, rec) in self.records.iter().enumerate() {
            if let Some(&first) = seen_ids.get(&rec.person_id) {
                violations.push(Violation::DuplicatePersonId {
                    person_id: rec.person_id,
                    first,
                    second: idx,
                });
            } else {
                seen_ids.insert(rec.person_id, idx);
            }
            if !(rec.initial_weight.is_finite() && rec.initial_weight > 0.0) {
                violations.push(Violation::BadWeight {
                    person_id: rec.person_id,
                    column: "w0",
                    value: rec.initial_weight,
                });
            }
            if !(rec.final_weight.is_finite() && rec.final_weight > 0.0) {
                violations.push(Violation::BadWeight {
                    person_id: rec.person_id,
                    column: "w",
                    value: rec.final_weight,
                });
            }
            for (c, &v) in rec.covariates.iter().enumerate() {
                if !v.is_finite() {
                    violations.push(Violation::BadCovariate {
                        person_id: rec.person_id,
                        name: self.covariate_names[c].clone(),
                    });
                }
            }
            for (s, inc) in rec.incomes.iter().enumerate() {
                if let Some(v) = inc {
                    if !v.is_finite() {
                        violations.push(Violation::BadIncome {
                            person_id: rec.person_id,
                            item: s,
                        });
                    }
                }
            }
        }

        for (&hh, members) in &self.households {
            let n_ref = members
                .iter()
                .filter(|&&i| self.records[i].is_householder)
                .count();
            if n_ref != 1 {
                violations.push(Violation::HouseholderCount {
                    household_id: hh,
                    count: n_ref,
                });
            }
        }

        // Families are assumed to nest inside households; poverty thresholds
        // key off the household reference person, so a family spanning two
        // households has no well-defined threshold.
        for (&fam, members) in &self.families {
            let first_hh = self.records[members[0]].household_id;
            if members
                .iter()
                .any(|&i| self.records[i].household_id != first_hh)
            {
                violations.push(Violation::FamilySpansHouseholds { family_id: fam });
            }
        }

        ValidationReport { violations }
    }
}

/// A single structural defect found by [`Frame::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicatePersonId {
        person_id: u64,
        first: RecordIndex,
        second: RecordIndex,
    },
    HouseholderCount {
        household_id: u64,
        count: usize,
    },
    BadWeight {
        person_id: u64,
        column: &'static str,
        value: f64,
    },
    BadCovariate {
        person_id: u64,
        name: String,
    },
    BadIncome {
        person_id: u64,
        item: usize,
    },
    FamilySpansHouseholds {
        family_id: u64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicatePersonId {
                person_id,
                first,
                second,
            } => write!(
                f,
                "person id {person_id} appears at rows {first} and {second}"
            ),
            Violation::HouseholderCount {
                household_id,
                count,
            } => write!(
                f,
                "household {household_id} has {count} reference persons (expected 1)"
            ),
            Violation::BadWeight {
                person_id,
                column,
                value,
            } => write!(
                f,
                "person {person_id}: weight column {column} is {value}, must be finite and positive"
            ),
            Violation::BadCovariate { person_id, name } => {
                write!(f, "person {person_id}: covariate {name} is not finite")
            }
            Violation::BadIncome { person_id, item } => {
                write!(
                    f,
                    "person {person_id}: income item {} is not finite",
                    item + 1
                )
            }
            Violation::FamilySpansHouseholds { family_id } => {
                write!(f, "family {family_id} spans multiple households")
            }
        }
    }
}

/// Outcome of [`Frame::validate`].
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "frame OK")
        } else {
            writeln!(f, "{} violation(s):", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  - {v}")?;
            }
            Ok(())
        }
    }
}

/// Age bracket of the household reference person used in the poverty
/// threshold key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AgeClass {
    /// Reference person younger than 65.
    Under65,
    /// Reference person 65 or older.
    Senior,
}

impl AgeClass {
    pub fn of_age(age: u32) -> Self {
        if age >= 65 {
            AgeClass::Senior
        } else {
            AgeClass::Under65
        }
    }

    /// Numeric code used in the thresholds file: 0 = under 65, 1 = 65+.
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(AgeClass::Under65),
            1 => Some(AgeClass::Senior),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            AgeClass::Under65 => 0,
            AgeClass::Senior => 1,
        }
    }
}

/// Poverty thresholds keyed by (related children under 18, family size,
/// age class of the household reference person).
#[derive(Debug, Clone, Default)]
pub struct ThresholdTable {
    entries: BTreeMap<(u32, u32, AgeClass), f64>,
}

/// Lookup failure for a family's poverty threshold.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("no poverty threshold for children={children}, size={size}, age_class={age_class}")]
pub struct ThresholdMissing {
    pub children: u32,
    pub size: u32,
    pub age_class: u8,
}

impl ThresholdTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, children: u32, size: u32, age_class: AgeClass, threshold: f64) {
        self.entries.insert((children, size, age_class), threshold);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending `(children, size, age_class)` order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, AgeClass, f64)> + '_ {
        self.entries
            .iter()
            .map(|(&(children, size, age_class), &threshold)| (children, size, age_class, threshold))
    }

    pub fn lookup(
        &self,
        children: u32,
        size: u32,
        age_class: AgeClass,
    ) -> Result<f64, ThresholdMissing> {
        self.entries
            .get(&(children, size, age_class))
            .copied()
            .ok_or(ThresholdMissing {
                children,
                size,
                age_class: age_class.code(),
            })
    }

    /// Threshold for a concrete family: counts members under 18, takes the
    /// family size, and brackets the age of the household reference person
    /// (falling back to the eldest member if the reference person sits in a
    /// different family of the household).
    pub fn family_threshold(
        &self,
        frame: &Frame,
        members: &[RecordIndex],
    ) -> Result<f64, ThresholdMissing> {
        let children = members
            .iter()
            .filter(|&&i| frame.record(i).age < 18)
            .count() as u32;
        let size = members.len() as u32;
        let hh = frame.record(members[0]).household_id;
        let ref_age = frame
            .householder(hh)
            .filter(|idx| members.contains(idx))
            .map(|idx| frame.record(idx).age)
            .unwrap_or_else(|| {
                members
                    .iter()
                    .map(|&i| frame.record(i).age)
                    .max()
                    .expect("family has at least one member")
            });
        self.lookup(children, size, AgeClass::of_age(ref_age))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn person(
        person_id: u64,
        household_id: u64,
        is_householder: bool,
        incomes: Vec<Option<f64>>,
    ) -> PersonRecord {
        PersonRecord {
            person_id,
            family_id: household_id,
            household_id,
            is_householder,
            age: 40,
            stratum_id: 0,
            county_id: 0,
            initial_weight: 2.0,
            final_weight: 2.0,
            covariates: vec![],
            incomes,
        }
    }

    #[test]
    fn indexes_group_by_household_and_family() {
        let frame = Frame::new(
            vec![
                person(1, 10, true, vec![Some(1.0)]),
                person(2, 10, false, vec![None]),
                person(3, 11, true, vec![Some(2.0)]),
            ],
            vec![],
            1,
        );
        assert_eq!(frame.household_count(), 2);
        assert_eq!(frame.household_members(10), &[0, 1]);
        assert_eq!(frame.householder(10), Some(0));
        assert_eq!(frame.householder(11), Some(2));
        assert_eq!(frame.respondents(0), vec![0, 2]);
        assert_eq!(frame.nonrespondents(0), vec![1]);
    }

    #[test]
    fn validate_reports_structural_defects() {
        let mut bad_weight = person(2, 11, true, vec![Some(1.0)]);
        bad_weight.final_weight = 0.0;
        let frame = Frame::new(
            vec![
                person(1, 10, false, vec![Some(1.0)]), // no householder in 10
                bad_weight,
                person(1, 12, true, vec![Some(1.0)]), // duplicate id
            ],
            vec![],
            1,
        );
        let report = frame.validate();
        assert!(!report.is_clean());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicatePersonId { person_id: 1, .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::HouseholderCount { household_id: 10, count: 0 })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::BadWeight { person_id: 2, column: "w", .. })));
    }

    #[test]
    fn validate_accepts_clean_frame() {
        let frame = Frame::new(
            vec![
                person(1, 10, true, vec![Some(1.0)]),
                person(2, 10, false, vec![None]),
            ],
            vec![],
            1,
        );
        assert!(frame.validate().is_clean());
    }

    #[test]
    fn threshold_lookup_uses_children_size_and_age_class() {
        let mut table = ThresholdTable::new();
        table.insert(0, 2, AgeClass::Under65, 15_000.0);
        table.insert(0, 2, AgeClass::Senior, 13_500.0);
        assert_eq!(table.lookup(0, 2, AgeClass::Under65), Ok(15_000.0));
        assert_eq!(table.lookup(0, 2, AgeClass::Senior), Ok(13_500.0));
        let missing = table.lookup(1, 3, AgeClass::Under65).unwrap_err();
        assert_eq!(missing.children, 1);
        assert_eq!(missing.size, 3);
    }

    #[test]
    fn family_threshold_brackets_householder_age() {
        let mut old = person(1, 10, true, vec![Some(1.0)]);
        old.age = 70;
        let mut young = person(2, 10, false, vec![Some(1.0)]);
        young.age = 30;
        let frame = Frame::new(vec![old, young], vec![], 1);
        let mut table = ThresholdTable::new();
        table.insert(0, 2, AgeClass::Senior, 13_500.0);
        let members: Vec<RecordIndex> = vec![0, 1];
        assert_eq!(table.family_threshold(&frame, &members), Ok(13_500.0));
    }
}
