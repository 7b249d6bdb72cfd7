//! Evaluation report serialization and the frame-level comparison table.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub noise_factor: f64,
    pub context_enabled: bool,
    pub window: usize,
    pub speed_threshold: f64,
    pub radius_scale: f64,
    pub decision_threshold: Option<f64>,
}

/// Frame-level evaluation result: AUC, EER, the ROC polyline, class counts,
/// and an echo of the configuration that produced the scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub auc: f64,
    pub eer: f64,
    pub positives: usize,
    pub negatives: usize,
    pub config: ReportConfig,
    /// (false positive rate, true positive rate) points.
    pub roc: Vec<(f64, f64)>,
}

impl EvalReport {
    /// One row of the comparison table: method, AUC %, EER %.
    pub fn table_row(&self) -> (String, f64, f64) {
        (self.method.clone(), self.auc * 100.0, self.eer * 100.0)
    }

    pub fn table(&self) -> String {
        format_table(std::slice::from_ref(self))
    }

    /// `fpr,tpr` CSV of the ROC points.
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (fpr, tpr) in &self.roc {
            out.push_str(&format!("{fpr},{tpr}\n"));
        }
        out
    }
}

/// Plain-text frame-level performance table over one or more reports.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<28} {:>8} {:>8}\n", "Method", "AUC (%)", "EER (%)"));
    for report in reports {
        let (method, auc, eer) = report.table_row();
        out.push_str(&format!("{method:<28} {auc:>8.2} {eer:>8.2}\n"));
    }
    out
}
