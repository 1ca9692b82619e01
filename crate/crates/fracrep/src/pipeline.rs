//! Batch pipeline: ingest → impute → replicate → rake → estimate.
//!
//! A TOML run configuration names the inputs (person CSV or a synthetic
//! scenario), the imputation metric and donor counts, the replication
//! design, optional raking controls, and the estimator list. Stages run
//! in order up to the requested one and leave artifacts in the output
//! directory as they complete: donor lists, variance groups, fraction
//! overrides, raked weights, and finally a CSV/text report pair.
//!
//! Everything downstream of ingestion is deterministic, so a rerun with
//! the same config and inputs reproduces every artifact byte for byte.
//! Replicate weight columns are processed one at a time — built from the
//! base weights, raked independently against the same controls as the
//! production weights, fed to every estimator, then dropped — so memory
//! stays flat in the number of replicates. With `dump_replicates` the
//! raked columns are also cached on disk (little-endian f64 per record,
//! one file per replicate) and a later estimate run picks the cache up
//! instead of re-raking.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::estimators::{
    CompletedIncomes, LinearTotal, MedianEstimator, PovertyEstimator, ReplicateContext,
};
use crate::impute::{find_donors, ImputeConfig, MetricConfig};
use crate::io::{read_margins_csv, read_persons_csv, read_thresholds_csv};
use crate::mc::{generate_scenario, EstimandKind, ScenarioConfig};
use crate::raking::{rake, RakeStatus, RakingConfig, ResolvedMargins};
use crate::replicate::{
    adjust_fractions, assign_variance_groups, jackknife_variance, Center, FractionAdjustment,
    GroupDesign, ReplicateScheme, ReplicateSet,
};
use crate::report::{render_reports_csv, render_reports_text, EstimateReport, ItemDiagnostics};

/// Where the input frame comes from.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputConfig {
    /// Read persons (and optionally poverty thresholds) from CSV files.
    Files {
        persons: PathBuf,
        #[serde(default)]
        thresholds: Option<PathBuf>,
    },
    /// Generate a synthetic frame; thresholds come from the scenario.
    Synthetic { scenario: ScenarioConfig },
}

#[derive(Debug, Clone, Deserialize)]
pub struct ImputationSection {
    pub point_donors: usize,
    pub variance_donors: usize,
    pub metric: MetricConfig,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ReplicationSection {
    #[serde(default)]
    pub strata: usize,
    #[serde(default)]
    pub groups_per_stratum: usize,
    pub scheme: ReplicateScheme,
}

fn default_tolerance() -> f64 {
    1e-8
}

fn default_max_cycles() -> usize {
    500
}

#[derive(Debug, Clone, Deserialize)]
pub struct RakingSection {
    pub margins: PathBuf,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct OutputSection {
    pub dir: PathBuf,
}

/// Full run configuration, the shape of the TOML config file.
#[derive(Debug, Clone, Deserialize)]
pub struct RunConfig {
    pub input: InputConfig,
    pub imputation: ImputationSection,
    pub replication: ReplicationSection,
    #[serde(default)]
    pub raking: Option<RakingSection>,
    pub estimators: Vec<EstimandKind>,
    pub output: OutputSection,
}

/// How far to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Impute,
    Replicate,
    Rake,
    Estimate,
    All,
}

impl Stage {
    fn rank(self) -> u8 {
        match self {
            Stage::Impute => 0,
            Stage::Replicate => 1,
            Stage::Rake => 2,
            Stage::Estimate | Stage::All => 3,
        }
    }

    fn includes(self, other: Stage) -> bool {
        self.rank() >= other.rank()
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "impute" => Ok(Stage::Impute),
            "replicate" => Ok(Stage::Replicate),
            "rake" => Ok(Stage::Rake),
            "estimate" => Ok(Stage::Estimate),
            "all" => Ok(Stage::All),
            other => Err(format!(
                "unknown stage {other:?}; expected impute, replicate, rake, estimate, or all"
            )),
        }
    }
}

/// Execution switches that ride alongside the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct PipelineOptions {
    pub stage: Option<Stage>,
    /// Cache raked replicate weight columns on disk.
    pub dump_replicates: bool,
    /// Replaces the synthetic scenario's seed.
    pub seed_override: Option<u64>,
}

/// What a finished (or partially run) pipeline hands back.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub records: usize,
    pub replicates: usize,
    pub reports: Vec<EstimateReport>,
    pub production_rake: Option<RakeStatus>,
    /// Worst relative control error over all raked replicate columns.
    pub replicate_rake_max_error: Option<f64>,
    pub diagnostics: Vec<ItemDiagnostics>,
    pub written: Vec<PathBuf>,
}

#[derive(Debug, Error)]
#[error("stage {stage}: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl PipelineError {
    fn new(
        stage: &'static str,
        source: impl std::error::Error + Send + Sync + 'static,
    ) -> Self {
        PipelineError {
            stage,
            source: Box::new(source),
        }
    }

    fn msg(stage: &'static str, message: impl Into<String>) -> Self {
        PipelineError {
            stage,
            source: Box::new(Message(message.into())),
        }
    }
}

#[derive(Debug, Error)]
#[error("{0}")]
struct Message(String);

/// Parses a TOML run configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, PipelineError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::msg("config", format!("{}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| PipelineError::msg("config", format!("{}: {e}", path.display())))
}

/// Runs the pipeline up to the requested stage. On error every file
/// written by this run is removed, so the output directory never holds a
/// partial stage.
pub fn run_pipeline(
    config: &RunConfig,
    options: &PipelineOptions,
) -> Result<PipelineOutcome, PipelineError> {
    let mut written = Vec::new();
    let result = run_stages(config, options, &mut written);
    if result.is_err() {
        for path in &written {
            let _ = fs::remove_file(path);
        }
    }
    result
}

fn write_artifact(
    stage: &'static str,
    dir: &Path,
    name: &str,
    content: &[u8],
    written: &mut Vec<PathBuf>,
) -> Result<PathBuf, PipelineError> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| PipelineError::msg(stage, format!("{}: {e}", parent.display())))?;
    }
    fs::write(&path, content)
        .map_err(|e| PipelineError::msg(stage, format!("{}: {e}", path.display())))?;
    written.push(path.clone());
    Ok(path)
}

fn replicate_cache_name(k: usize) -> String {
    format!("replicates/replicate_{k:05}.f64")
}

fn run_stages(
    config: &RunConfig,
    options: &PipelineOptions,
    written: &mut Vec<PathBuf>,
) -> Result<PipelineOutcome, PipelineError> {
    let stage = options.stage.unwrap_or(Stage::All);
    let out_dir = &config.output.dir;

    // Ingest. Every referenced input file must exist before any work
    // starts, including files that later stages read.
    let mut referenced: Vec<&Path> = Vec::new();
    if let InputConfig::Files {
        persons,
        thresholds,
    } = &config.input
    {
        referenced.push(persons);
        if let Some(t) = thresholds {
            referenced.push(t);
        }
    }
    if let Some(section) = &config.raking {
        referenced.push(&section.margins);
    }
    for path in referenced {
        if !path.exists() {
            return Err(PipelineError::msg(
                "ingest",
                format!("input file not found: {}", path.display()),
            ));
        }
    }
    let (frame, mut thresholds) = match &config.input {
        InputConfig::Files {
            persons,
            thresholds,
        } => {
            let frame = read_persons_csv(persons).map_err(|e| PipelineError::new("ingest", e))?;
            let table = match thresholds {
                Some(path) => {
                    Some(read_thresholds_csv(path).map_err(|e| PipelineError::new("ingest", e))?)
                }
                None => None,
            };
            (frame, table)
        }
        InputConfig::Synthetic { scenario } => {
            let mut scenario = scenario.clone();
            if let Some(seed) = options.seed_override {
                scenario.seed = seed;
            }
            let (frame, _) =
                generate_scenario(&scenario).map_err(|e| PipelineError::new("ingest", e))?;
            (frame, Some(scenario.threshold_table()))
        }
    };
    let validation = frame.validate();
    if !validation.is_clean() {
        let mut lines: Vec<String> = validation
            .violations
            .iter()
            .take(5)
            .map(|v| v.to_string())
            .collect();
        if validation.violations.len() > lines.len() {
            lines.push(format!(
                "... and {} more",
                validation.violations.len() - lines.len()
            ));
        }
        return Err(PipelineError::msg(
            "ingest",
            format!("frame failed validation: {}", lines.join("; ")),
        ));
    }
    if config.estimators.is_empty() {
        return Err(PipelineError::msg("config", "estimator list is empty"));
    }

    // Impute.
    let assignment = find_donors(
        &frame,
        &ImputeConfig {
            metric: config.imputation.metric.clone(),
            point_donors: config.imputation.point_donors,
            variance_donors: config.imputation.variance_donors,
        },
    )
    .map_err(|e| PipelineError::new("impute", e))?;
    let m2 = config.imputation.variance_donors;
    {
        let mut csv = String::from("item,slot,recipient");
        for pos in 0..m2 {
            csv.push_str(&format!(",donor_{pos}"));
        }
        csv.push('\n');
        for (item, item_assignment) in assignment.items().iter().enumerate() {
            for (slot, recipient, donors) in item_assignment.iter() {
                csv.push_str(&format!(
                    "{item},{slot},{}",
                    frame.record(recipient).person_id
                ));
                for &d in donors {
                    csv.push_str(&format!(",{}", frame.record(d as usize).person_id));
                }
                csv.push('\n');
            }
        }
        write_artifact("impute", out_dir, "donors.csv", csv.as_bytes(), written)?;
    }
    if !stage.includes(Stage::Replicate) {
        return Ok(PipelineOutcome {
            records: frame.len(),
            replicates: 0,
            reports: Vec::new(),
            production_rake: None,
            replicate_rake_max_error: None,
            diagnostics: Vec::new(),
            written: written.clone(),
        });
    }

    // Replicate.
    let reps = match config.replication.scheme {
        ReplicateScheme::DeltaGrouped => {
            let groups = assign_variance_groups(
                &frame,
                GroupDesign {
                    strata: config.replication.strata,
                    groups_per_stratum: config.replication.groups_per_stratum,
                },
            )
            .map_err(|e| PipelineError::new("replicate", e))?;
            let mut csv = String::from("person_id,stratum,group\n");
            for (idx, rec) in frame.records().iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    rec.person_id, groups.stratum_of[idx], groups.group_of[idx]
                ));
            }
            write_artifact("replicate", out_dir, "groups.csv", csv.as_bytes(), written)?;
            ReplicateSet::delta_grouped(&frame, &groups)
                .map_err(|e| PipelineError::new("replicate", e))?
        }
        ReplicateScheme::DeleteOne => {
            ReplicateSet::delete_one(&frame).map_err(|e| PipelineError::new("replicate", e))?
        }
    };
    let base_weights = frame.final_weights();
    let adjustments: Vec<FractionAdjustment> = (0..frame.item_count())
        .map(|item| adjust_fractions(&frame, &assignment, item, &base_weights, &reps))
        .collect();
    let diagnostics: Vec<ItemDiagnostics> = adjustments
        .iter()
        .enumerate()
        .map(|(item, adj)| ItemDiagnostics {
            item,
            stranded_donors: adj.diagnostics.stranded_donors.len(),
            shielded_recipients: adj.diagnostics.shielded_recipients.len(),
            clamped_clusters: adj.diagnostics.clamped_clusters,
            unadjustable_clusters: adj.diagnostics.unadjustable_clusters,
            max_solve_residual: adj.diagnostics.max_solve_residual,
        })
        .collect();
    {
        let mut csv = String::from("item,replicate,recipient,");
        csv.push_str(
            &(0..m2)
                .map(|p| format!("f_{p}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        csv.push('\n');
        for (item, adj) in adjustments.iter().enumerate() {
            let item_assignment = assignment.item(item);
            for k in 0..reps.len() {
                for (slot, row) in adj.overrides(k) {
                    let recipient = item_assignment.recipient(slot);
                    csv.push_str(&format!(
                        "{item},{k},{}",
                        frame.record(recipient).person_id
                    ));
                    for &f in row {
                        csv.push_str(&format!(",{f}"));
                    }
                    csv.push('\n');
                }
            }
        }
        write_artifact(
            "replicate",
            out_dir,
            "overrides.csv",
            csv.as_bytes(),
            written,
        )?;
        let mut diag = String::from(
            "item,stranded_donors,shielded_recipients,clamped_clusters,unadjustable_clusters,max_solve_residual\n",
        );
        for d in &diagnostics {
            diag.push_str(&format!(
                "{},{},{},{},{},{}\n",
                d.item,
                d.stranded_donors,
                d.shielded_recipients,
                d.clamped_clusters,
                d.unadjustable_clusters,
                d.max_solve_residual
            ));
        }
        write_artifact(
            "replicate",
            out_dir,
            "diagnostics.csv",
            diag.as_bytes(),
            written,
        )?;
    }
    if !stage.includes(Stage::Rake) {
        return Ok(PipelineOutcome {
            records: frame.len(),
            replicates: reps.len(),
            reports: Vec::new(),
            production_rake: None,
            replicate_rake_max_error: None,
            diagnostics,
            written: written.clone(),
        });
    }

    // Rake production weights.
    let raking = match &config.raking {
        Some(section) => {
            let margins =
                read_margins_csv(&section.margins).map_err(|e| PipelineError::new("rake", e))?;
            let resolved = ResolvedMargins::resolve(&frame, &margins)
                .map_err(|e| PipelineError::new("rake", e))?;
            let raking_config = RakingConfig {
                tolerance: section.tolerance,
                max_cycles: section.max_cycles,
            };
            Some((resolved, raking_config))
        }
        None => {
            if stage == Stage::Rake {
                return Err(PipelineError::msg(
                    "rake",
                    "stage 'rake' requested but the config has no [raking] section",
                ));
            }
            None
        }
    };
    let mut production_weights = base_weights.clone();
    let mut production_rake = None;
    if let Some((resolved, raking_config)) = &raking {
        let status = rake(&mut production_weights, resolved, raking_config);
        production_rake = Some(status);
        let mut csv = String::from("person_id,weight\n");
        for (idx, rec) in frame.records().iter().enumerate() {
            csv.push_str(&format!("{},{}\n", rec.person_id, production_weights[idx]));
        }
        write_artifact(
            "rake",
            out_dir,
            "raked_production.csv",
            csv.as_bytes(),
            written,
        )?;
    }

    // Replicate columns: optionally rake and cache them now.
    let mut replicate_rake_max_error = raking.as_ref().map(|_| 0.0f64);
    if options.dump_replicates {
        if let Some((resolved, raking_config)) = &raking {
            let mut worst = 0.0f64;
            for k in 0..reps.len() {
                let mut column = reps.weight_column(k, &base_weights);
                let status = rake(&mut column, resolved, raking_config);
                worst = worst.max(status.max_rel_error);
                let bytes: Vec<u8> = column.iter().flat_map(|w| w.to_le_bytes()).collect();
                write_artifact("rake", out_dir, &replicate_cache_name(k), &bytes, written)?;
            }
            replicate_rake_max_error = Some(worst);
        }
    }
    if !stage.includes(Stage::Estimate) {
        return Ok(PipelineOutcome {
            records: frame.len(),
            replicates: reps.len(),
            reports: Vec::new(),
            production_rake,
            replicate_rake_max_error,
            diagnostics,
            written: written.clone(),
        });
    }

    // Estimate: stream replicate columns through every estimator.
    if config
        .estimators
        .iter()
        .any(|e| matches!(e, EstimandKind::PovertyCount))
        && thresholds.is_none()
    {
        return Err(PipelineError::msg(
            "estimate",
            "poverty estimator requested but no threshold table is configured",
        ));
    }
    let incomes =
        CompletedIncomes::build(&frame, &assignment).map_err(|e| PipelineError::new("estimate", e))?;
    let ctx = ReplicateContext {
        frame: &frame,
        assignment: &assignment,
        adjustments: &adjustments,
        incomes: &incomes,
    };
    let poverty = if config
        .estimators
        .iter()
        .any(|e| matches!(e, EstimandKind::PovertyCount))
    {
        let table = thresholds.take().expect("checked above");
        Some(
            PovertyEstimator::prepare(&frame, &incomes, &table)
                .map_err(|e| PipelineError::new("estimate", e))?,
        )
    } else {
        None
    };
    let median = if config
        .estimators
        .iter()
        .any(|e| matches!(e, EstimandKind::MedianHouseholdIncome))
    {
        Some(
            MedianEstimator::prepare(&frame, &incomes)
                .map_err(|e| PipelineError::new("estimate", e))?,
        )
    } else {
        None
    };
    let median_point = median.as_ref().map(|m| m.production_median(&production_weights));
    let linear: Vec<Option<LinearTotal>> = config
        .estimators
        .iter()
        .map(|e| match *e {
            EstimandKind::ItemTotal { item } => Some(LinearTotal {
                item: Some(item),
                county: None,
            }),
            EstimandKind::TotalIncome => Some(LinearTotal {
                item: None,
                county: None,
            }),
            EstimandKind::CountyTotal { county } => Some(LinearTotal {
                item: None,
                county: Some(county),
            }),
            _ => None,
        })
        .collect();
    for (e, estimand) in config.estimators.iter().enumerate() {
        if let EstimandKind::ItemTotal { item } = estimand {
            if *item >= frame.item_count() {
                return Err(PipelineError::msg(
                    "estimate",
                    format!(
                        "estimator {e} references item {item}, frame has {}",
                        frame.item_count()
                    ),
                ));
            }
        }
    }

    let mut series_adj = vec![Vec::with_capacity(reps.len()); config.estimators.len()];
    let mut series_naive = vec![Vec::with_capacity(reps.len()); config.estimators.len()];
    for k in 0..reps.len() {
        let mut column = reps.weight_column(k, &base_weights);
        if let Some((resolved, raking_config)) = &raking {
            let cache = out_dir.join(replicate_cache_name(k));
            let cached = fs::read(&cache).ok().filter(|b| b.len() == 8 * frame.len());
            match cached {
                Some(bytes) => {
                    for (idx, chunk) in bytes.chunks_exact(8).enumerate() {
                        column[idx] = f64::from_le_bytes(chunk.try_into().unwrap());
                    }
                }
                None => {
                    let status = rake(&mut column, resolved, raking_config);
                    if let Some(worst) = replicate_rake_max_error.as_mut() {
                        *worst = worst.max(status.max_rel_error);
                    }
                }
            }
        }
        for (e, estimand) in config.estimators.iter().enumerate() {
            let (adj, naive) = match estimand {
                EstimandKind::PovertyCount => {
                    let p = poverty.as_ref().unwrap();
                    (
                        p.replicate_value(&ctx, k, &column, true),
                        p.replicate_value(&ctx, k, &column, false),
                    )
                }
                EstimandKind::MedianHouseholdIncome => {
                    let m = median.as_ref().unwrap();
                    let med = median_point.unwrap();
                    (
                        m.replicate_proportion(&ctx, k, &column, med, true),
                        m.replicate_proportion(&ctx, k, &column, med, false),
                    )
                }
                _ => {
                    let total = linear[e].as_ref().unwrap();
                    (
                        total.replicate_value(&ctx, k, &column, true),
                        total.replicate_value(&ctx, k, &column, false),
                    )
                }
            };
            series_adj[e].push(adj);
            series_naive[e].push(naive);
        }
    }

    let mut reports = Vec::with_capacity(config.estimators.len());
    for (e, estimand) in config.estimators.iter().enumerate() {
        let (estimate, v_adj, v_naive) = match estimand {
            EstimandKind::PovertyCount => {
                let p = poverty.as_ref().unwrap();
                (
                    p.production(&production_weights),
                    jackknife_variance(&series_adj[e], reps.coefficients(), Center::ReplicateMean),
                    jackknife_variance(
                        &series_naive[e],
                        reps.coefficients(),
                        Center::ReplicateMean,
                    ),
                )
            }
            EstimandKind::MedianHouseholdIncome => {
                let m = median.as_ref().unwrap();
                let adj =
                    m.median_estimate(&production_weights, &series_adj[e], reps.coefficients());
                let naive =
                    m.median_estimate(&production_weights, &series_naive[e], reps.coefficients());
                (adj.median, adj.variance, naive.variance)
            }
            _ => {
                let total = linear[e].as_ref().unwrap();
                let point = total.production(&ctx, &production_weights);
                (
                    point,
                    jackknife_variance(
                        &series_adj[e],
                        reps.coefficients(),
                        Center::Estimate(point),
                    ),
                    jackknife_variance(
                        &series_naive[e],
                        reps.coefficients(),
                        Center::Estimate(point),
                    ),
                )
            }
        };
        reports.push(EstimateReport {
            name: estimand.label(),
            estimate,
            adjusted_se: v_adj.sqrt(),
            naive_se: v_naive.sqrt(),
        });
    }

    let csv = render_reports_csv(&reports);
    write_artifact("estimate", out_dir, "reports.csv", csv.as_bytes(), written)?;
    let mut text = render_reports_text(&reports, &diagnostics);
    if let Some(status) = &production_rake {
        text.push_str(&format!(
            "\nraking: converged={} cycles={} max_rel_error={:.3e}\n",
            status.converged, status.cycles, status.max_rel_error
        ));
    }
    write_artifact("estimate", out_dir, "report.txt", text.as_bytes(), written)?;

    Ok(PipelineOutcome {
        records: frame.len(),
        replicates: reps.len(),
        reports,
        production_rake,
        replicate_rake_max_error,
        diagnostics,
        written: written.clone(),
    })
}
