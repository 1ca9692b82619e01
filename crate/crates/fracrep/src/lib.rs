//! Fractional nearest-neighbour hot-deck imputation for survey microdata,
//! with replication variance estimation that accounts for the imputation
//! step and for weight calibration.
//!
//! The crate is organised as a pipeline over an immutable person [`Frame`]:
//!
//! 1. [`frame`] / [`io`] — load and validate microdata, poverty thresholds,
//!    and calibration control totals.
//! 2. [`impute`] — deterministic nearest-neighbour donor search and the
//!    fractionally weighted completed estimator.
//! 3. [`replicate`] — variance groups, jackknife factor schemes, and the
//!    donor-fraction adjustment that restores the imputation component of
//!    variance to the replicate spread.
//! 4. [`raking`] — iterative proportional fitting of full-sample and
//!    replicate weights to control margins.
//! 5. [`estimators`] — income totals, poverty counts, and the median with
//!    its test-inversion variance, all evaluated per replicate.
//! 6. [`mc`] — a Monte Carlo laboratory that generates synthetic
//!    populations, runs the pipeline repeatedly, and audits the internal
//!    weight identities by brute force.
//! 7. [`pipeline`] / [`report`] — staged end-to-end runs and report output.
//!
//! Everything is deterministic: donor ties break on person id, random
//! number streams are seeded explicitly, and parallel loops reduce in a
//! fixed order, so a given input and seed always reproduce byte-identical
//! output.

pub mod estimators;
pub mod frame;
pub mod impute;
pub mod io;
pub mod mc;
pub mod pipeline;
pub mod raking;
pub mod replicate;
pub mod report;

pub use frame::{Frame, PersonRecord, ThresholdTable, ValidationReport};
pub use impute::{DonorAssignment, MetricConfig};
pub use replicate::{ReplicateScheme, ReplicateSet};
