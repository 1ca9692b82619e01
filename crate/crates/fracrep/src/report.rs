//! Tabular rendering of estimation results.
//!
//! Each estimator contributes one row: the point estimate, the
//! imputation-aware standard error, the naive standard error computed from
//! unadjusted replicate weights, and the standardized SE — the adjusted SE
//! as a rounded percentage of the naive one. A standardized SE of 100
//! means imputation added nothing measurable; values above 100 quantify
//! how much the naive estimator understates the uncertainty.

/// One estimator's results.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub name: String,
    pub estimate: f64,
    /// Standard error from imputation-adjusted replicates.
    pub adjusted_se: f64,
    /// Standard error from weight-only replicates.
    pub naive_se: f64,
}

impl EstimateReport {
    /// `round(100 * adjusted / naive)`; undefined when the naive SE is
    /// zero.
    pub fn std_se_ratio(&self) -> Option<u32> {
        if self.naive_se > 0.0 {
            Some((100.0 * self.adjusted_se / self.naive_se).round() as u32)
        } else {
            None
        }
    }
}

/// Per-item adjustment exception counts carried into the report footer.
#[derive(Debug, Clone, Default)]
pub struct ItemDiagnostics {
    pub item: usize,
    pub stranded_donors: usize,
    pub shielded_recipients: usize,
    pub clamped_clusters: usize,
    pub unadjustable_clusters: usize,
    pub max_solve_residual: f64,
}

/// CSV rendering with a fixed column order; floats print in shortest
/// round-trip form so reruns are byte-identical.
pub fn render_reports_csv(reports: &[EstimateReport]) -> String {
    let mut out = String::from("estimator,estimate,adjusted_se,naive_se,std_se_ratio\n");
    for r in reports {
        let ratio = match r.std_se_ratio() {
            Some(v) => v.to_string(),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.name, r.estimate, r.adjusted_se, r.naive_se, ratio
        ));
    }
    out
}

/// Plain-text table with a diagnostics footer.
pub fn render_reports_text(reports: &[EstimateReport], diagnostics: &[ItemDiagnostics]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<28} {:>16} {:>14} {:>14} {:>8}\n",
        "estimator", "estimate", "adjusted se", "naive se", "std se"
    ));
    for r in reports {
        let ratio = match r.std_se_ratio() {
            Some(v) => v.to_string(),
            None => "-".to_string(),
        };
        out.push_str(&format!(
            "{:<28} {:>16.3} {:>14.3} {:>14.3} {:>8}\n",
            r.name, r.estimate, r.adjusted_se, r.naive_se, ratio
        ));
    }
    if !diagnostics.is_empty() {
        out.push('\n');
        out.push_str("adjustment exceptions per item\n");
        out.push_str(&format!(
            "{:<6} {:>9} {:>9} {:>8} {:>13} {:>15}\n",
            "item", "stranded", "shielded", "clamped", "unadjustable", "solve residual"
        ));
        for d in diagnostics {
            out.push_str(&format!(
                "{:<6} {:>9} {:>9} {:>8} {:>13} {:>15.3e}\n",
                d.item,
                d.stranded_donors,
                d.shielded_recipients,
                d.clamped_clusters,
                d.unadjustable_clusters,
                d.max_solve_residual
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn std_se_ratio_rounds_like_the_reference_rows() {
        let delaware = EstimateReport {
            name: "total".into(),
            estimate: 0.0,
            adjusted_se: 1161.0,
            naive_se: 870.0,
        };
        assert_eq!(delaware.std_se_ratio(), Some(133));
        let michigan = EstimateReport {
            name: "total".into(),
            estimate: 0.0,
            adjusted_se: 4096.0,
            naive_se: 3217.0,
        };
        assert_eq!(michigan.std_se_ratio(), Some(127));
    }

    #[test]
    fn equal_ses_standardize_to_100() {
        let r = EstimateReport {
            name: "t".into(),
            estimate: 1.0,
            adjusted_se: 3.5,
            naive_se: 3.5,
        };
        assert_eq!(r.std_se_ratio(), Some(100));
    }

    #[test]
    fn zero_naive_se_has_no_ratio() {
        let r = EstimateReport {
            name: "t".into(),
            estimate: 1.0,
            adjusted_se: 0.0,
            naive_se: 0.0,
        };
        assert_eq!(r.std_se_ratio(), None);
        let csv = render_reports_csv(&[r]);
        assert!(csv.ends_with("t,1,0,0,\n"), "{csv}");
    }

    #[test]
    fn csv_is_deterministic_and_ordered() {
        let reports = vec![
            EstimateReport {
                name: "a".into(),
                estimate: 1.25,
                adjusted_se: 2.0,
                naive_se: 1.0,
            },
            EstimateReport {
                name: "b".into(),
                estimate: 3.0,
                adjusted_se: 1.0,
                naive_se: 1.0,
            },
        ];
        let csv = render_reports_csv(&reports);
        assert_eq!(
            csv,
            "estimator,estimate,adjusted_se,naive_se,std_se_ratio\na,1.25,2,1,200\nb,3,1,1,100\n"
        );
    }
}
